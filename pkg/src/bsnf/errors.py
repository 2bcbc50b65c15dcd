"""Exception types shared across the package."""


class InputError(ValueError):
    """A caller supplied data that violates an operation's precondition."""


class ResourceError(RuntimeError):
    """A computation was refused because it would exceed a configured budget."""


class ParseError(ValueError):
    """Formula or structure text did not conform to the grammar."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column
