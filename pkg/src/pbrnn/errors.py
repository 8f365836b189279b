"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1 (usage/config),
ShapeError/FormatError -> 2 (data/format), VerificationError -> 3.
"""


class ShapeError(ValueError):
    """Operands or artifacts have incompatible dimensions."""


class BoundaryError(ValueError):
    """A patch window would leave the raster."""


class LabeledSampleError(ValueError):
    """A labeled sample was requested at a location without reference data."""


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


class FormatError(RuntimeError):
    """Malformed on-disk artifact (scene container, cache, checkpoint)."""


class UndefinedStatisticError(ArithmeticError):
    """A requested statistic has a degenerate denominator."""


class VerificationError(RuntimeError):
    """Recomputed statistics disagree with the published reference values."""
