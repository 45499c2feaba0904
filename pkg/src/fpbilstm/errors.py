"""Exception types shared across the package."""


class StructuralError(ValueError):
    """Input files or arrays disagree on geometry (line counts, widths, shapes)."""


class ParseError(ValueError):
    """A token in a data file could not be parsed; message carries the location."""


class ShapeError(ValueError):
    """Tensor shapes are incompatible for the requested operation."""


class ConfigError(ValueError):
    """A configuration value violates its contract."""


class CacheCollisionError(RuntimeError):
    """A preprocess cache entry exists under this key but was built from
    different inputs; the cache directory must be purged before reuse."""


class TrainingDiverged(RuntimeError):
    """Loss or gradients became NaN; message carries epoch/batch coordinates."""
