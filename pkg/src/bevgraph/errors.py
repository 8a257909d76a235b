"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class FitError(DomainError):
    """Least-squares control point fit is not well posed."""


class HorizonError(DomainError):
    """Pixel lies at or above the horizon, so it has no flat-ground point."""


class OutOfRoiError(DomainError):
    """A BEV point lies outside the region of interest."""


class WarpSingularityError(DomainError):
    """Depth-motion warp has a zero (or sign-flipped) denominator."""


class FormatError(ValueError):
    """A serialized document does not follow the expected schema."""
