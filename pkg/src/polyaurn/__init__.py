"""Graph-based Pólya urns: Lyapunov dynamics, equilibria and simulation."""

from .dynamics import DomainError, DomainParams, flow, grad_lyapunov, lyapunov, trajectory, vector_field
from .equilibria import (
    Equilibrium,
    LimitKind,
    LimitSet,
    Stability,
    classify,
    compute_interval,
    enumerate_equilibria,
    maximize_on_face,
    predict_limit,
    tangent_spectrum,
)
from .graph import BipartiteKind, Graph, GraphError, classify_bipartiteness, parse_edge_list, read_graph, vertex_covers
from .urn import TrialConfig, UrnState, monte_carlo, run_trial, shadowing_error, step

__version__ = "0.1.0"
