"""Shape reconstruction of a perfectly conducting inclusion from Cauchy data.

The main entry point is :func:`admmshape.admm.run`, which recovers the
inclusion boundary either by ADMM with a Sobolev-gradient shape update or by
plain least-squares shape optimization (SOM).
"""

__version__ = "0.1.0"

from .admm import AdmmConfig, read_config, run, write_config
from .geometry import BoundaryPolyline, circle, ellipse, flower, parse_shape, peanut, square
from .metrics import hausdorff, read_history, write_history
from .problems import CauchyData, generate_synthetic_data, read_cauchy_data, write_cauchy_data

__all__ = [
    "__version__",
    "AdmmConfig",
    "BoundaryPolyline",
    "CauchyData",
    "circle",
    "ellipse",
    "flower",
    "generate_synthetic_data",
    "hausdorff",
    "parse_shape",
    "peanut",
    "read_cauchy_data",
    "read_config",
    "read_history",
    "run",
    "square",
    "write_cauchy_data",
    "write_config",
    "write_history",
]
