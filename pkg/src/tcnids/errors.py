"""Exception hierarchy shared across the package."""


class TcnIdsError(Exception):
    """Base class for all package errors."""


class DimensionError(TcnIdsError, ValueError):
    """Operand shapes are incompatible."""


class ArgumentError(TcnIdsError, ValueError):
    """An argument is outside its valid range."""


class LabelError(TcnIdsError, ValueError):
    """A class label is outside ``[0, num_classes)``."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ModelLoadError(TcnIdsError):
    """Base class for model-file loading failures."""


class ModelVersionError(ModelLoadError):
    pass


class CorruptModelError(ModelLoadError):
    pass


class ModelShapeError(ModelLoadError):
    pass


class IngestionError(TcnIdsError):
    """CSV input could not be read or lacks required columns."""


class TrainingError(TcnIdsError):
    """Training diverged (non-finite loss)."""

    def __init__(self, message, epoch=None, batch=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch


class CompatibilityError(TcnIdsError):
    """Artifacts produced by different configurations were mixed."""


class StageError(TcnIdsError):
    """Wraps a failure with the name of the pipeline/CLI stage it came from."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
