"""Exception types raised across the package."""


class ArmapsError(Exception):
    """Base class for all package errors."""


class ShapeError(ArmapsError, ValueError):
    """Two extents that must agree do not.

    ``what`` names the quantity, ``expected``/``got`` carry the offending extents.
    """

    def __init__(self, what, expected, got):
        self.what = what
        self.expected = expected
        self.got = got
        super().__init__(f"{what}: expected {expected}, got {got}")


class SwitchError(ArmapsError, ValueError):
    """A switch record points outside the tensor it was recorded on."""


class LabelError(ArmapsError, ValueError):
    pass


class ManifestError(ArmapsError):
    """Problems reading or validating a dataset manifest.

    ``rows`` lists 1-based data-row numbers involved, when applicable.
    """

    def __init__(self, message, rows=()):
        self.rows = list(rows)
        super().__init__(message)


class ImageFormatError(ArmapsError):
    pass


class DivergenceError(ArmapsError, FloatingPointError):
    pass


class CheckpointError(ArmapsError):
    pass
