"""Exception types shared across the package.

Every error that can surface through the CLI maps onto one of three
categories: input parsing, infeasibility, and solver failure.  The CLI
translates those categories into distinct exit codes.
"""


class HetnetError(Exception):
    """Base class for all package errors."""


class ScenarioFormatError(HetnetError):
    """A scenario or config file is missing a field or holds a bad value."""

    def __init__(self, field, message=None):
        self.field = field
        super().__init__(message or f"invalid or missing scenario field: {field!r}")


class InfeasibleError(HetnetError):
    """An iterate or problem instance violates a hard constraint."""


class StarvedUserError(InfeasibleError):
    """A user ended up with zero aggregate rate, so log-utility is undefined."""

    def __init__(self, user, message=None):
        self.user = user
        super().__init__(message or f"user {user} has zero rate; log-utility undefined")


class UncoverableUserError(InfeasibleError):
    """Turning off the requested base stations leaves a user with no serving gain."""

    def __init__(self, user, message=None):
        self.user = user
        super().__init__(
            message or f"user {user} has no positive gain to any remaining base station"
        )


class DualSolveError(HetnetError):
    """The projection dual did not reach tolerance within the iteration cap.

    Carries the last iterate so callers can inspect how close it got.
    """

    def __init__(self, residual, y, z, iterations, band=None):
        self.residual = residual
        self.y = y
        self.z = z
        self.iterations = iterations
        self.band = band
        where = f" (band {band})" if band is not None else ""
        super().__init__(
            f"projection dual stalled{where}: residual {residual:.3e} "
            f"after {iterations} iterations"
        )
