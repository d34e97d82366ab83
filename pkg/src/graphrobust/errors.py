"""Exception hierarchy.

Exit-code mapping used by the CLI: ConfigError -> 2, DataError -> 3,
NumericalError -> 4.
"""


class GraphRobustError(Exception):
    """Base class for all package errors."""


class ConfigError(GraphRobustError):
    """Invalid configuration or parameters."""


class DataError(GraphRobustError):
    """Malformed or inconsistent input data (edge lists, label files)."""


class GraphStructureError(GraphRobustError):
    """Invalid graph construction input (self-loop, negative weight, bad id)."""


class IsolatedNodeError(GraphRobustError):
    """A node with zero degree reached Laplacian construction."""


class NumericalError(GraphRobustError):
    """Eigensolver failure, degenerate k-means, or similar numeric breakdown."""


class MultiplicityError(NumericalError):
    """An eigenvalue derivative was requested at a (near-)degenerate eigenvalue."""


class NegativeAffinityError(GraphRobustError):
    """Symmetric perturbation produced a negative edge affinity (w_i + w_j - 1 < 0)."""
