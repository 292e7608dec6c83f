"""Exception types shared across the package."""


class XfvarError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(XfvarError):
    """Syntax or name error in a clause or formula string.

    Attributes
    ----------
    offset : int
        Byte offset into the UTF-8 encoding of the source where the
        problem was detected.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class CycleError(XfvarError):
    """The graph contains a directed cycle; `cycle` lists one."""

    def __init__(self, cycle):
        super().__init__("cycle detected: " + " -> ".join(list(cycle) + [cycle[0]]))
        self.cycle = list(cycle)


class ZeroVarianceError(XfvarError):
    """The outcome has zero (estimated) variance; ratios are undefined."""


class DomainError(XfvarError):
    """Invalid or over-budget discrete domain."""


class ModelError(XfvarError):
    """Structural problem in a causal model: bad mechanism, bad file,
    unseen parent cell, or a non-finite node value."""


class FitError(XfvarError):
    """A mechanism could not be fitted from the data (e.g. undersized cell)."""


class NotReducibleError(XfvarError):
    """Model cannot be reduced to a finite independent domain for exact analysis."""


class ConsistencyError(XfvarError):
    """An internal cross-check failed; indicates a bug, not a user error."""
