"""Exception hierarchy shared by the library and the command line."""


class FisherPlanError(Exception):
    """Base class for all errors raised by fisherplan."""


class InvalidCellError(FisherPlanError, IndexError):
    """A cell index is out of range or refers to a masked-out cell."""


class FormatError(FisherPlanError, ValueError):
    """A file on disk does not follow the expected layout."""


class DataError(FisherPlanError, ValueError):
    """Inputs are well formed but unusable (empty rows, mixed regions, ...)."""


class NumericalError(FisherPlanError, ArithmeticError):
    """A numerical routine failed to produce a finite result."""
