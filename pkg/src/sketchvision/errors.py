"""Exception types shared across the package."""


class SketchVisionError(Exception):
    """Base class for all package errors."""


class UnsupportedFormat(SketchVisionError):
    """Image file is not a PNG."""


class CorruptImage(SketchVisionError):
    """Image file exists but cannot be decoded."""


class MalformedLatentFile(SketchVisionError):
    """Latent JSON is missing fields, inconsistent, or non-finite."""


class BackendUnavailable(SketchVisionError):
    """An optional pretrained backend was selected but is not usable."""


class BackendUnresolved(SketchVisionError):
    """A pipeline registry entry failed to resolve before job start."""


class ShapeError(SketchVisionError):
    """Input spatial dims violate an operation's shape contract."""


class DimensionMismatch(SketchVisionError):
    """Latent dimension does not match what the consumer expects."""


class InvalidStepCount(SketchVisionError):
    """Interpolation step count below 2."""


class NonFiniteLoss(SketchVisionError):
    """A loss term became NaN/Inf; message names the term."""


class EmptyDataset(SketchVisionError):
    """Dataset preparation found no usable input images."""
