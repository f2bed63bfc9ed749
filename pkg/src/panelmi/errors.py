"""Exception hierarchy shared by every panelmi module."""


class PanelError(Exception):
    """Base class for all panelmi errors."""


class PanelValueError(PanelError, ValueError):
    """Invalid argument or dataset content."""


class DuplicateCellError(PanelValueError):
    pass


class UnknownCodeError(PanelValueError, KeyError):
    """A country, year or variable code that the dataset does not declare."""

    def __str__(self):
        return Exception.__str__(self)


class ShapeMismatchError(PanelValueError):
    pass


class IngestError(PanelValueError):
    """A CSV or schema file could not be parsed.

    ``row`` is the 1-based line number in the file (header is line 1) and
    ``column`` the header name, when known.
    """

    def __init__(self, message, row=None, column=None):
        self._raw = message
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)

    def __reduce__(self):
        return type(self), (self._raw, self.row, self.column)


class _FitError(PanelError, ArithmeticError):
    def __init__(self, message, target=None):
        self.detail = message
        self.target = target
        if target is not None:
            message = f"{target}: {message}"
        super().__init__(message)

    def __reduce__(self):
        return type(self), (self.detail, self.target)


class CollinearityError(_FitError):
    """X'X is not positive definite within the declared pivot tolerance."""


class InsufficientData(_FitError):
    """Too few observed rows for the number of regression parameters."""


class UnimputableVariable(PanelError):
    """A chained-equation step failed for ``code``; ``cause`` is the original error."""

    def __init__(self, code, cause, chain=None):
        self.code = code
        self.cause = cause
        self.chain = chain
        super().__init__(f"variable {code!r} cannot be imputed"
                         + (f" (chain {chain})" if chain is not None else "")
                         + f": {type(cause).__name__}: {cause}")

    def __reduce__(self):
        return type(self), (self.code, self.cause, self.chain)


class IncompleteAuxiliary(PanelValueError):
    def __init__(self, code, n_missing):
        self.code = code
        self.n_missing = n_missing
        super().__init__(f"auxiliary variable {code!r} has {n_missing} missing cells")

    def __reduce__(self):
        return type(self), (self.code, self.n_missing)


class ConfigError(PanelValueError):
    pass
