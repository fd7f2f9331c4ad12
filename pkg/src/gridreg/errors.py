"""Exception types shared across the registration engine."""


class GridRegError(Exception):
    """Base class for all engine errors."""


class InputError(GridRegError):
    """Invalid argument values or image geometry."""


class DimensionError(InputError):
    """Array shapes do not match the expected layout."""


class ContractError(GridRegError):
    """A caller-supplied component violated its contract (e.g. descriptor dim)."""


class DegenerateGeometryError(GridRegError):
    """Point configuration too degenerate to estimate a transform."""


class FormatError(GridRegError):
    """Malformed file content. Carries the byte offset of the problem."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NoSolutionError(GridRegError):
    """The solver never produced an admissible transform. Carries diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class NoOverlapError(GridRegError):
    """No source pixel maps inside the reference bounds."""


class NumericalError(GridRegError):
    """Non-finite values encountered during a numerical procedure."""


class ConfigError(GridRegError):
    """Bad configuration file or unknown configuration key."""
