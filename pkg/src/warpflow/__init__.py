"""Inverse mean curvature flow of graphs in the warped product R+ x_Id M^n.

Subpackages by layer: ``grid``/``tensor``/``basegeom`` (base manifold),
``ambient`` (warped ambient), ``graph`` (induced geometry), ``identities``
(residual oracle), ``kernels``/``flow`` (time integration), ``diagnostics``,
``config``/``io``/``cli`` (files and command line).
"""
__version__ = "0.1.0"

from .basegeom import MetricField, eval_metric  # noqa: E402
from .config import RunConfig, parse_config  # noqa: E402
from .errors import InputError, MonitorBreach, NumericalFatal, VerificationFailure, WarpflowError  # noqa: E402
from .flow import Trajectory, resume, run  # noqa: E402
from .graph import GraphGeometry, GraphState, graph_geometry  # noqa: E402
from .grid import ChartGrid, Stencil, build_chart_grid  # noqa: E402
from .kernels import BACKEND  # noqa: E402

__all__ = [
    "BACKEND",
    "ChartGrid",
    "GraphGeometry",
    "GraphState",
    "InputError",
    "MetricField",
    "MonitorBreach",
    "NumericalFatal",
    "RunConfig",
    "Stencil",
    "Trajectory",
    "VerificationFailure",
    "WarpflowError",
    "build_chart_grid",
    "eval_metric",
    "graph_geometry",
    "parse_config",
    "resume",
    "run",
]
