"""Exception types shared across the toolkit.

The CLI maps these onto process exit codes; see `consgrunet.cli`.
"""


class DimensionError(ValueError):
    """Tensor or layer shapes are inconsistent."""


class ConfigError(ValueError):
    """A configuration value is invalid or self-contradictory."""


class FormatError(ValueError):
    """A binary file does not match its declared format.

    `offset` is the byte position at which the problem was detected.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class IntegrityError(FormatError):
    """Checksum mismatch or truncated payload."""


class LabelError(ValueError):
    """A class label is outside its permitted range."""


class InputError(ValueError):
    """Metric inputs are malformed (length mismatch, empty, out of range)."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(
            f"non-finite loss {loss!r} at epoch {epoch}, batch {batch}"
        )
        self.epoch = epoch
        self.batch = batch
