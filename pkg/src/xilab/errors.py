"""Exception hierarchy for the lab."""


class XilabError(Exception):
    """Base class for all package errors."""


class OutOfDomain(XilabError):
    """A chart point lies outside the immersion's parameter box."""


class DegenerateMetric(XilabError):
    """The induced metric failed the rank tolerance (det g too small)."""


class NotNormal(XilabError):
    """A vector claimed to be normal has a tangential component above tolerance."""


class BadOffset(XilabError):
    """A plane offset has a component inside the plane's direction space."""


class UnsupportedSpec(XilabError):
    """An in-sphere submanifold description outside the supported menu."""


class NotXiSubmanifold(XilabError):
    """An operation requiring the soliton identity got an immersion that fails it."""


class NoParallelFrame(XilabError):
    """No parallel orthonormal normal frame is available on this example."""


class NonFinite(XilabError):
    """An integrand overflowed or produced non-finite values."""


class StepTooLarge(XilabError):
    """A finite-difference step deformed the immersion past the rank test."""


class IllConditionedBasis(XilabError):
    """Galerkin trial basis is numerically dependent (Gram condition too large)."""


class DegreeTooLarge(XilabError):
    """Hermite degree beyond the overflow guard."""


class BlowUp(XilabError):
    """A curve trajectory left the configured safety ball."""


class FrenetDegenerate(XilabError):
    """First curvature vanishes on the grid; Frenet frame undefined."""
