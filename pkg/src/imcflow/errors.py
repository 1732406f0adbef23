"""Exception types shared across the package."""


class ImcflowError(Exception):
    """Base class for all package-specific errors."""


class InvalidParamsError(ImcflowError, ValueError):
    """Background parameters violate n >= 3 or m >= 0."""


class DomainError(ImcflowError, ValueError):
    """Radius at or inside the horizon, where the lapse is not positive."""


class RangeError(ImcflowError, ValueError):
    """Lookup outside the tabulated domain of a radius map."""


class InvalidConfigError(ImcflowError, ValueError):
    """Inconsistent grid/scenario configuration."""


class HorizonViolationError(ImcflowError):
    """A surface node lies at or inside the horizon radius."""


class FlowBreakdownError(ImcflowError):
    """Parabolicity lost: F = lambda*H/v dropped to or below the floor."""


class TimestepUnderflowError(ImcflowError):
    """Stable time step fell below the configured minimum (stiffness)."""


class InsufficientDataError(ImcflowError):
    """Not enough snapshots/records for the requested diagnostic."""


class DegenerateRefinementError(ImcflowError):
    """Refinement differences at rounding level; no order estimate possible."""
