"""Exception types shared across the package."""


class PhlabError(Exception):
    """Base class for all package errors."""


class HypothesisViolated(PhlabError, ValueError):
    """Inputs do not satisfy the hypotheses under which a frequency bound holds."""


class NoConvergence(PhlabError, RuntimeError):
    """An iterative estimate did not reach its tolerance.

    ``diagnostics`` carries whatever the failing routine measured.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class CocycleOverflow(PhlabError, OverflowError):
    """A derivative product is too large to materialize as a float matrix."""


class SplittingError(PhlabError, ValueError):
    """Estimated invariant bundles are degenerate (e.g. nearly collinear)."""


class MeshExplosion(PhlabError, MemoryError):
    """Re-meshing an iterated disk would exceed the sample budget."""


class TailBoundExceeds(PhlabError, RuntimeError):
    """The truncation tail of an infinite product is larger than requested."""


class ResolutionMismatch(PhlabError, ValueError):
    """Two grid measures do not live on the same grid."""


class NoDisksSampled(PhlabError, RuntimeError):
    """No admissible center-unstable disk could be produced."""


class NonConvergentOrbits(PhlabError, RuntimeError):
    """Too many orbits of an ensemble failed their convergence check."""


class ConfigError(PhlabError, ValueError):
    """A configuration file does not follow the documented grammar."""
