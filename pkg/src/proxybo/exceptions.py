"""Exception types raised across the package."""


class ProxyBOError(Exception):
    """Base class for all package errors."""


class InvalidSpaceError(ProxyBOError, ValueError):
    """A search space or encoding violates its invariants."""


class SpaceTooLargeError(InvalidSpaceError):
    """Refusal to enumerate a space above the configured cap."""

    def __init__(self, size, cap):
        super().__init__(f"search space has {size} encodings, above the enumeration cap of {cap}")
        self.size = size
        self.cap = cap


class ShapeError(ProxyBOError, ValueError):
    """Array shapes disagree with a network layer."""

    def __init__(self, layer, message):
        super().__init__(f"layer {layer}: {message}")
        self.layer = layer


class NumericOverflowError(ProxyBOError, ArithmeticError):
    """A non-finite value appeared inside a forward or backward pass."""

    def __init__(self, layer, stage):
        super().__init__(f"non-finite value in {stage} pass at layer {layer}")
        self.layer = layer
        self.stage = stage


class ModelUnfitError(ProxyBOError, ValueError):
    """Not enough observations to fit the surrogate."""


class TableFormatError(ProxyBOError, ValueError):
    """A benchmark table file failed validation."""

    def __init__(self, lineno, field, message):
        where = f"line {lineno}" if lineno is not None else "table"
        super().__init__(f"{where}, field '{field}': {message}")
        self.lineno = lineno
        self.field = field


class TableLookupError(ProxyBOError, KeyError):
    """An encoding is missing from a benchmark or proxy table."""

    def __str__(self):
        return str(self.args[0]) if self.args else "lookup failed"


class SearchComplete(ProxyBOError):
    """Every admissible encoding has already been evaluated."""


class CalibrationError(ProxyBOError, RuntimeError):
    """Synthetic proxy calibration did not reach its target correlation."""

    def __init__(self, target, achieved):
        super().__init__(f"could not calibrate proxy to spearman {target:.3f}; best achieved {achieved:.3f}")
        self.target = target
        self.achieved = achieved
