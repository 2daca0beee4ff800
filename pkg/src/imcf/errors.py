"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class ImcfError(Exception):
    """Base class for all package errors."""


class NonPositiveHeight(ImcfError):
    """The height function left the upper half-space (some y <= 0)."""

    def __init__(self, location, message: str | None = None):
        self.location = location
        super().__init__(message or f"non-positive height at grid index {location}")


class HeightNonPositive(NonPositiveHeight):
    """A time step produced y <= 0; raised by the stepper with the failing stage."""

    def __init__(self, location, stage: int | None = None):
        self.stage = stage
        where = f" (rk stage {stage})" if stage is not None else ""
        super().__init__(location, f"height became non-positive at {location}{where}")


class LostMeanConvexity(ImcfError):
    """Mean curvature is not strictly positive, so the speed -yv/H is undefined."""

    def __init__(self, location, stage: int | None = None):
        self.location = location
        self.stage = stage
        where = f" (rk stage {stage})" if stage is not None else ""
        super().__init__(f"lost mean convexity (H <= 0) at grid index {location}{where}")


class InsufficientSnapshots(ImcfError):
    pass


class NonUniformSampling(ImcfError):
    pass


class InvalidStats(ImcfError):
    pass


class OdeBlowup(ImcfError):
    pass


class UnknownMonitor(ImcfError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class InsufficientPoints(ImcfError):
    pass


class InadmissibleInitialData(ImcfError):
    def __init__(self, condition: str, location=None):
        self.condition = condition
        self.location = location
        where = f" at grid index {location}" if location is not None else ""
        super().__init__(f"inadmissible initial data: {condition}{where}")


class ParseError(ImcfError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class ValidationError(ImcfError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


class IoError(ImcfError, OSError):
    pass


class FormatError(ImcfError):
    pass
