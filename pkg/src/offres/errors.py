"""Exception types raised across the package."""


class OffresError(Exception):
    """Base class for all package errors."""


class NoValidT0(OffresError):
    pass


class CouplingUnsupported(OffresError):
    pass


class BadDimension(OffresError):
    pass


class UnitarityLost(OffresError):
    def __init__(self, defect, tolerance):
        super().__init__(
            f"unitarity defect {defect:.3e} exceeds tolerance {tolerance:.3e}; "
            "step size too coarse"
        )
        self.defect = defect
        self.tolerance = tolerance


class OrderUnsupported(OffresError):
    pass


class DegenerateDenominator(OffresError):
    pass


class NoConvergence(OffresError):
    """Newton refinement ran out of iterations.

    ``result`` holds the best sequence found so callers can still write it out.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class BlockNotUnitary(OffresError):
    pass


class DimensionOverflow(OffresError):
    pass


class SearchFailed(OffresError):
    def __init__(self, message, schedule=None, leakage=None):
        super().__init__(message)
        self.schedule = schedule
        self.leakage = leakage
