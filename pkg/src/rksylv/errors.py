"""Exception hierarchy shared by all modules."""


class RKSylvError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(RKSylvError, ValueError):
    pass


class InvalidPolynomialOnSpectrum(RKSylvError):
    """The Kronecker system defining an inverse action is singular."""


class PoleOnSpectrum(RKSylvError):
    """A shifted system (A - xi I) could not be solved."""

    def __init__(self, msg, pole=None):
        super().__init__(msg)
        self.pole = pole


class PoleEvaluation(RKSylvError):
    """A rational function was evaluated at one of its poles."""


class IllConditionedCharPoly(RKSylvError):
    """A block of the eigenvector coordinates is numerically singular."""

    def __init__(self, msg, block_index):
        super().__init__(msg)
        self.block_index = block_index


class SizeGuard(RKSylvError):
    """A dense-only routine was called on a problem that is too large."""


class RankDeficientStart(RKSylvError):
    pass


class LuckyBreakdown(RKSylvError):
    """The new block of the rational Krylov space is (numerically) rank deficient."""

    def __init__(self, msg, order=None):
        super().__init__(msg)
        self.order = order


class ReorderPrecondition(RKSylvError):
    pass


class NeedsInfinityPole(RKSylvError):
    pass


class InvalidBrad(RKSylvError):
    pass


class ProjectedSpectraOverlap(RKSylvError):
    pass


class SpectraOverlap(RKSylvError):
    pass


class FovEstimationFailed(RKSylvError):
    pass


class InvalidContext(RKSylvError, ValueError):
    pass
