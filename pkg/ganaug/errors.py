"""Exception taxonomy.

Validation problems subclass ValueError, numerical failures subclass
ArithmeticError. The CLI maps the first family to exit code 1 and the
second to exit code 2.
"""


class GanAugError(Exception):
    """Root of all library errors."""


class ConfigError(GanAugError, ValueError):
    pass


class DimensionError(GanAugError, ValueError):
    pass


class DataError(GanAugError, ValueError):
    pass


class ImageDecodeError(DataError):
    def __init__(self, path: str, reason: str):
        self.path = path
        super().__init__(f"Cannot decode image {path}: {reason}")


class SampleCountTooSmall(GanAugError, ValueError):
    """Raised when n <= d, so a d-dimensional covariance cannot be full rank."""

    def __init__(self, n: int, d: int):
        self.n = n
        self.d = d
        super().__init__(
            f"SampleCountTooSmall: n={n} samples for d={d} features; need n > d. "
            f"Reduce the embedding dimension below {n} or supply at least {d + 1} samples."
        )


class CheckpointFormatError(GanAugError, ValueError):
    pass


class IncompatibleCheckpointError(GanAugError, ValueError):
    pass


class NumericalError(GanAugError, ArithmeticError):
    pass


class NonFiniteError(NumericalError):
    def __init__(self, name: str, detail: str = ""):
        self.name = name
        msg = f"Non-finite values in {name}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class IndefiniteMatrixError(NumericalError):
    pass


class TrainingDivergedError(NumericalError):
    def __init__(self, epoch: int, batch: int, detail: str):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"Training diverged at epoch {epoch}, batch {batch}: {detail}")
