"""Exception hierarchy shared across the package."""


class DiffDesignError(Exception):
    """Base class for all package errors."""


class ShapeError(DiffDesignError):
    """Array dimensions do not match the declared network or design shape."""


class ConfigError(DiffDesignError):
    """Invalid configuration value (schedule bounds, embedding dim, mask grammar knobs)."""


class TraceError(DiffDesignError):
    """A backward pass was given a trace that does not match the network."""


class NumericError(DiffDesignError):
    """Non-finite values where finite ones are required."""


class DataError(DiffDesignError):
    """Dataset unusable for the requested operation (single class, constant targets)."""


class IngestionError(DiffDesignError):
    """Tabular file could not be parsed; message carries the row number."""


class ParseError(DiffDesignError):
    """Airfoil coordinate file violates the expected traversal."""


class GeometryError(DiffDesignError):
    """Degenerate geometry (zero chord, single station)."""


class MaskSpecError(DiffDesignError):
    """Mask specification string violates the grammar."""


class SamplingError(DiffDesignError):
    """Reverse process produced a non-finite state; message carries the step index."""


class MetricError(DiffDesignError):
    """Metric undefined for the given inputs (zero target, degenerate bandwidth)."""


class DesignError(DiffDesignError):
    """Experiment design unusable (unbalanced ANOVA table, bad factor levels)."""
