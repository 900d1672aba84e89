"""Exception types raised across the package."""


class HeadBasisError(Exception):
    """Base class for every error raised by headbasis."""


class DomainError(HeadBasisError, ValueError):
    """Input outside the mathematical domain of an operation."""


class DegenerateQueryError(DomainError):
    """Cosine addressing attempted with a (near) zero-norm vector."""


class ProjectionError(DomainError):
    """A posed vertex ended up at non-positive depth."""


class ShapeError(HeadBasisError, ValueError):
    """Array dimensions do not agree."""


class EmptyResultError(HeadBasisError, ValueError):
    """An operation would produce nothing (e.g. a trajectory shorter than one clip)."""


class ContractError(HeadBasisError, RuntimeError):
    """A call sequence contract was broken, e.g. backward with a stale forward cache."""


class ParseError(HeadBasisError, ValueError):
    """A text file (trajectory, fixture, checkpoint, config) could not be parsed."""


class TrainingError(HeadBasisError, RuntimeError):
    """Training diverged."""
