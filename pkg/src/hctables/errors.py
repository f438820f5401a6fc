"""Exception hierarchy shared by the library and the command line."""


class HCTablesError(Exception):
    """Base class for all errors raised by hctables."""


class ParameterError(HCTablesError, ValueError):
    """An argument is outside its documented range."""


class DomainError(ParameterError):
    """A numeric function was evaluated outside its domain."""


class ShapeError(HCTablesError, ValueError):
    """Array lengths are empty or do not match."""


class DegenerateInputError(HCTablesError, ValueError):
    """The input carries no information (e.g. all totals are zero)."""


class TableFormatError(HCTablesError):
    """A frequency-table or CSV file could not be parsed."""

    def __init__(self, message: str, path=None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class ConfigError(HCTablesError):
    """A simulation config file has an unknown key or a bad value."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key
