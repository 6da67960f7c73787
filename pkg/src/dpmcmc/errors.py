"""Exception hierarchy shared by the library and the CLI."""


class DpmcmcError(Exception):
    """Base class for all errors raised by this package."""


class InputError(DpmcmcError, ValueError):
    """Bad argument or malformed input data."""


class ParseError(InputError):
    """A data file could not be parsed."""


class CycleError(InputError):
    """An edit would introduce a directed cycle."""


class ResourceError(DpmcmcError):
    """A size cap or memory budget would be exceeded."""


class ContractError(DpmcmcError):
    """A caller violated a precondition that the data structure cannot repair."""


class UndefinedEstimateError(DpmcmcError):
    """An estimate is mathematically undefined (zero weight, degenerate labels...)."""
