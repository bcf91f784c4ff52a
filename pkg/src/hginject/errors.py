"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: config problems -> 2, data problems -> 3,
numeric divergence -> 4.
"""


class HginjectError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(HginjectError):
    """Invalid run configuration (bad ranges, unknown choices)."""


class DataError(HginjectError):
    """Problems with input data files or derived splits."""


class ParseError(DataError):
    """A line could not be tokenized; message carries file and line number."""


class SchemaError(DataError):
    """Structurally valid lines that disagree with each other (e.g. feature width)."""


class EmptyInputError(DataError):
    """An input file with no usable records."""


class StratificationError(DataError):
    """A class has no nodes, or split sizes cannot be satisfied."""


class BudgetError(HginjectError):
    """A size/budget parameter is out of range for the given data."""


class DimensionError(HginjectError):
    """Matrix shapes do not chain."""


class DivergenceError(HginjectError):
    """A loss became non-finite during optimization.

    Carries the iteration index at which divergence was detected.
    """

    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration


class RefinementError(HginjectError):
    """The refinement context cannot be formed (e.g. hyperedge too small)."""


class InjectionError(HginjectError):
    """Invalid injection request (empty or out-of-range budget)."""


class ProtocolError(HginjectError):
    """An operation was called in the wrong model state (e.g. unfrozen surrogate)."""


class NoEliteError(HginjectError):
    """No node participates in any hyperedge; no elite node exists."""
