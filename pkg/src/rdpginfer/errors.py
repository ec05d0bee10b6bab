"""Shared exception types.

Argument and domain violations raise plain ValueError.  Everything that can
fail for numerical reasons at runtime derives from NumericalError so the CLI
can map it to its own exit code.
"""


class NumericalError(RuntimeError):
    """Base class for numerical failures (quadrature, eigensolver, graphs)."""


class QuadratureError(NumericalError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class EigensolverError(NumericalError):
    """Eigendecomposition did not converge or violated its residual contract."""


class ConnectivityError(NumericalError):
    """A localization graph is disconnected where a connected one is required."""

    def __init__(self, message, component_sizes=None):
        super().__init__(message)
        self.component_sizes = component_sizes


class DegenerateEmbeddingError(NumericalError):
    """CMDS found no usable positive eigenvalue for a nonzero distance matrix."""


class ExperimentError(NumericalError):
    """A Monte Carlo experiment failed as a whole (e.g. too many bad replicates)."""
