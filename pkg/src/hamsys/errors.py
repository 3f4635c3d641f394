"""Exception types shared across the package."""


class HamsysError(Exception):
    """Base class for all domain errors raised by hamsys."""


class DomainError(HamsysError):
    """A lattice point or window falls outside the data it was queried on."""


class SingularTransferError(HamsysError):
    """A one-step transfer matrix could not be formed or inverted."""


class SingularUError(HamsysError):
    """U(t) of a conjoined basis is singular where invertibility is required."""


class NotDominantError(HamsysError):
    """The inverse-weighted series of the basis does not converge."""


class TailNotConvergedError(HamsysError):
    """A tail sum could not be certified below the requested tolerance."""


class ShootingSingularError(HamsysError):
    """The shooting matrix of a two-point boundary value problem is singular."""


class NonConvergentError(HamsysError):
    """A boundary-value limit sequence is not Cauchy at the tolerance."""


class DegenerateFormError(HamsysError):
    """The admissible space carries no free parameters (e.g. B identically 0)."""


class AmbiguousCountError(HamsysError):
    """The square-summable direction count has no clear spectral gap."""


class RankDeficientError(HamsysError):
    """A matrix that theory guarantees to have full rank is rank deficient."""


class PatchInfeasibleError(HamsysError):
    """No compactly supported admissible patch matches the requested data."""


class MembershipPreconditionError(HamsysError):
    """Input fails the membership precondition of the operation."""
