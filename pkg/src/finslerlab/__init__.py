"""Numerical and exact tools for (alpha, beta) and m-th root Finsler metrics."""

__version__ = "0.1.0"

from .errors import FinslerError  # noqa: E402
from .metrics import cubic, euclidean, load_metric, metric_from_dict, mroot, riemannian  # noqa: E402

__all__ = [
    "__version__",
    "FinslerError",
    "cubic",
    "euclidean",
    "load_metric",
    "metric_from_dict",
    "mroot",
    "riemannian",
]
