"""Exception hierarchy shared by all starstab modules."""


class StarstabError(Exception):
    """Base class for every error raised by this package."""


class EOSDomainError(StarstabError, ValueError):
    """Negative density or invalid EOS parameters."""


class EOSRangeError(StarstabError, ValueError):
    """Query outside the range where the EOS (or its enthalpy inverse) is defined."""


class ConstructionError(StarstabError, ValueError):
    """An EOS parameter combination that cannot produce a valid pressure law."""


class NoCompactSupport(StarstabError):
    """The enthalpy never reached zero before ``r_max``.

    Attributes:
        mu: center density of the failed integration.
        r_last: last radius reached.
        y_last: enthalpy value at ``r_last``.
    """

    def __init__(self, mu, r_last, y_last):
        super().__init__(
            f"no compact support at mu={mu:g}: y({r_last:g}) = {y_last:g} > 0"
        )
        self.mu = mu
        self.r_last = r_last
        self.y_last = y_last


class ConsistencyError(StarstabError):
    """Two routes to the same quantity disagree beyond tolerance."""


class ResolutionError(StarstabError, ValueError):
    """Grid too coarse to resolve the star."""


class DegeneracyError(ConsistencyError):
    """M'(mu) and (M/R)'(mu) vanish together, which the theory forbids."""


class TPPViolation(ConsistencyError):
    """The turning-point walk produced a negative unstable-mode count."""


class CrossCheckError(ConsistencyError):
    """Turning-point count and spectral count disagree."""


class IndexFormulaViolation(ConsistencyError):
    """Eigenvalue count of unstable modes differs from n^-(L | closure of range(BA))."""


class TrichotomyFailure(ConsistencyError):
    """Exponential growth detected on the computed center space."""


class NotSemidefiniteError(StarstabError, ValueError):
    """The kinetic block A has a negative eigenvalue."""


class StepSizeError(StarstabError, ValueError):
    """Time step too large to resolve the fastest frequency of the flow."""
