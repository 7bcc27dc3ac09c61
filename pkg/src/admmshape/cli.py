"""Command-line front end: ``generate``, ``reconstruct`` and ``compare``.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical abort.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import math
import shutil
import sys
import time
from pathlib import Path

from . import __version__
from .admm import CONFIG_KEYS, AdmmConfig, ConfigError, _coerce, read_config, run
from .geometry import GeometryError, circle, parse_shape, read_polyline, write_polyline
from .mesh import MeshError, check_admissibility
from .metrics import read_history, write_history
from .problems import generate_synthetic_data, read_cauchy_data, write_cauchy_data

log = logging.getLogger("admmshape")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

MANIFEST = "manifest.txt"
DATA = "data.csv"
TRUTH = "truth.csv"
HISTORY = "history.csv"
COMPARE = "compare.csv"


class CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def append_manifest(out_dir: Path, record: dict):
    """Append one JSON line describing a finished invocation."""
    with open(out_dir / MANIFEST, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_manifest(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# -- generate ---------------------------------------------------------------


def cmd_generate(args) -> int:
    t0 = time.perf_counter()
    out = Path(args.out)
    try:
        truth = parse_shape(args.shape, h=args.fine_h)
        outer = parse_shape(args.outer, h=args.fine_h)
    except GeometryError as exc:
        raise CliError(f"bad shape: {exc}") from exc
    if not 0 <= args.noise < 1:
        raise CliError("--noise must lie in [0, 1)")
    adm = check_admissibility(truth, outer)
    if not adm:
        raise CliError(f"inadmissible geometry: {adm.reason}")
    data = generate_synthetic_data(truth, outer, args.g, args.fine_h, args.noise, args.seed)
    out.mkdir(parents=True, exist_ok=True)
    write_cauchy_data(data, out / DATA)
    write_polyline(truth, out / TRUTH)
    outputs = [DATA, "data.json", TRUTH]
    noise = data.relative_noise() if args.noise > 0 else 0.0
    append_manifest(
        out,
        {
            "command": "generate",
            "started": _now(),
            "config": {
                "shape": args.shape, "outer": args.outer, "g": args.g, "noise": args.noise,
                "seed": args.seed, "fine_h": args.fine_h,
            },
            "inputs": {},
            "outputs": {name: sha256(out / name) for name in outputs},
            "measured_noise": noise,
            "duration_s": time.perf_counter() - t0,
            "version": __version__,
        },
    )
    print(f"wrote {out / DATA} ({len(data.s)} samples, relative noise {noise:.3g})")
    return EXIT_OK


# -- reconstruct ------------------------------------------------------------


def _resolve_config(args) -> AdmmConfig:
    overrides = {}
    for key in CONFIG_KEYS:
        raw = getattr(args, key, None)
        if raw is not None:
            overrides[key] = _coerce(key, raw)
    if args.config:
        if not Path(args.config).exists():
            raise CliError(f"config file not found: {args.config}")
        return read_config(args.config, **overrides)
    return AdmmConfig(**overrides)


def cmd_reconstruct(args) -> int:
    t0 = time.perf_counter()
    try:
        config = _resolve_config(args)
        parse_shape(config.init_shape, h=config.h)
    except (ConfigError, GeometryError) as exc:
        raise CliError(f"config error: {exc}") from exc
    out = Path(config.out_dir)
    if not config.data_file:
        raise CliError("no data file given (use --data or data_file in the config)")
    data_path = Path(config.data_file)
    if not data_path.exists():
        raise CliError(f"data file not found: {data_path}")
    ref_path = Path(args.reference) if args.reference else data_path.parent / TRUTH
    if args.reference and not ref_path.exists():
        raise CliError(f"reference file not found: {ref_path}")
    reference = read_polyline(ref_path) if ref_path.exists() else None
    data = read_cauchy_data(data_path)

    out.mkdir(parents=True, exist_ok=True)
    inputs = {"data": {"path": str(data_path), "sha256": sha256(data_path)}}
    if reference is not None:
        inputs["reference"] = {"path": str(ref_path), "sha256": sha256(ref_path)}
    if data_path.resolve() != (out / DATA).resolve():
        shutil.copyfile(data_path, out / DATA)
        sidecar = data_path.with_suffix(".json")
        if sidecar.exists():
            shutil.copyfile(sidecar, out / "data.json")

    try:
        result = run(config, data, reference=reference, outer=circle(0.0, 0.0, 1.0, h=config.h))
    except MeshError as exc:
        raise CliError(f"config error: {exc}") from exc
    history = result.history

    for old in out.glob("boundary_*.csv"):
        old.unlink()
    write_history(history, out / HISTORY)
    outputs = [HISTORY]
    for k, poly in sorted(history.snapshots.items()):
        name = f"boundary_{k:04d}.csv"
        write_polyline(poly, out / name)
        outputs.append(name)
    if data_path.resolve() != (out / DATA).resolve():
        outputs.append(DATA)

    final = history.final
    append_manifest(
        out,
        {
            "command": "reconstruct",
            "started": _now(),
            "config": config.as_dict(),
            "inputs": inputs,
            "outputs": {name: sha256(out / name) for name in outputs},
            "status": history.status,
            "message": history.message,
            "iterations": final.k,
            "duration_s": time.perf_counter() - t0,
            "version": __version__,
        },
    )
    print(
        f"{config.method}: {history.status} after {final.k} iterations, "
        f"J_norm={final.J_norm:.3e} hausdorff={final.hausdorff:.4g}"
    )
    if history.status in ("aborted", "stagnated"):
        print(f"numerical abort: {history.message}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


# -- compare ----------------------------------------------------------------


def _summarize(path: Path) -> dict:
    if not path.exists():
        raise CliError(f"history file not found: {path}")
    try:
        hist = read_history(path)
    except (ValueError, IndexError) as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc
    if len(hist) == 0:
        raise CliError(f"empty history: {path}")
    hd = hist.column("hausdorff")
    best = float("nan") if all(math.isnan(x) for x in hd) else float(min(x for x in hd if not math.isnan(x)))
    runs = [r for r in read_manifest(path.parent / MANIFEST) if r.get("command") == "reconstruct"]
    rec = runs[-1] if runs else {}
    ref = rec.get("inputs", {}).get("reference", {}).get("sha256")
    return {
        "final_hausdorff": hist.final.hausdorff,
        "best_hausdorff": best,
        "final_J_norm": hist.final.J_norm,
        "iterations": hist.final.k,
        "wall_time_s": float(rec.get("duration_s", float("nan"))),
        "reference": ref,
    }


def _ratio(a, b):
    if b == 0:
        return 1.0 if a == 0 else float("inf")
    return a / b


def cmd_compare(args) -> int:
    rows = {"admm": _summarize(Path(args.admm)), "som": _summarize(Path(args.som))}
    ra, rs = rows["admm"]["reference"], rows["som"]["reference"]
    if ra and rs and ra != rs:
        raise CliError("histories were computed against different reference shapes")
    ratio = _ratio(rows["admm"]["final_hausdorff"], rows["som"]["final_hausdorff"])
    best_ratio = _ratio(rows["admm"]["best_hausdorff"], rows["som"]["best_hausdorff"])
    cols = ["final_hausdorff", "best_hausdorff", "final_J_norm", "iterations", "wall_time_s"]
    lines = ["method," + ",".join(cols)]
    for name, r in rows.items():
        lines.append(name + "," + ",".join(f"{r[c]:.10g}" for c in cols))
    lines.append(f"ratio_final_hausdorff,{ratio:.10g}")
    lines.append(f"ratio_best_hausdorff,{best_ratio:.10g}")
    text = "\n".join(lines) + "\n"
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / COMPARE).write_text(text, encoding="utf-8")
    append_manifest(
        out,
        {
            "command": "compare",
            "started": _now(),
            "config": {"admm": args.admm, "som": args.som},
            "inputs": {"admm": sha256(args.admm), "som": sha256(args.som)},
            "outputs": {COMPARE: sha256(out / COMPARE)},
            "duration_s": 0.0,
            "version": __version__,
        },
    )
    print(text, end="")
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="admmshape", description=__doc__.splitlines()[0], allow_abbrev=False)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthetic Cauchy data from a known inclusion", allow_abbrev=False)
    g.add_argument("--shape", required=True, help="true inclusion, e.g. peanut:0.6,0.25")
    g.add_argument("--outer", default="circle:0,0,1", help="outer boundary (default unit circle)")
    g.add_argument("--g", type=float, default=1.0, help="constant Neumann flux")
    g.add_argument("--noise", type=float, default=0.03, help="relative L2 noise level")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--fine_h", type=float, default=0.01, help="mesh size of the forward solve")
    g.add_argument("--out", default=".", help="output directory")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("reconstruct", help="run ADMM or SOM on a data file", allow_abbrev=False)
    r.add_argument("--config", help="key = value config file")
    r.add_argument("--reference", help="true boundary CSV (default: truth.csv next to the data)")
    for key in CONFIG_KEYS:
        names = [f"--{key}"]
        if key == "data_file":
            names.append("--data")
        if key == "out_dir":
            names.append("--out")
        kw = {"choices": ("admm", "som")} if key == "method" else {}
        r.add_argument(*names, dest=key, default=None, metavar=key.upper(), **kw)
    r.set_defaults(func=cmd_reconstruct)

    c = sub.add_parser("compare", help="summarize an ADMM and a SOM history", allow_abbrev=False)
    c.add_argument("--admm", required=True, help="ADMM history.csv")
    c.add_argument("--som", required=True, help="SOM history.csv")
    c.add_argument("--out", default=".", help="directory for compare.csv")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"admmshape: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
