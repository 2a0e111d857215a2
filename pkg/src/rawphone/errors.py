"""Exception types shared across the toolkit."""


class StructureError(ValueError):
    """An input violates a structural contract (shape, range, or layout)."""


class DataFormatError(IOError):
    """A file is truncated, corrupt, or carries an unsupported version."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite objective value."""

    def __init__(self, epoch, example_index):
        super().__init__(
            f"non-finite log-likelihood at epoch {epoch}, example {example_index}"
        )
        self.epoch = epoch
        self.example_index = example_index
