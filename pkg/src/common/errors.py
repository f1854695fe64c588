class HGQAError(Exception):
    """Root of every error raised by this package."""


class ShapeError(HGQAError, ValueError):
    pass


class EmptyNeighborhoodError(HGQAError, ValueError):
    pass


class TapeError(HGQAError, RuntimeError):
    pass


class DataFormatError(HGQAError, ValueError):
    pass


class ConfigError(HGQAError, ValueError):
    pass


class GraphError(HGQAError, ValueError):
    pass


class LabelError(HGQAError, ValueError):
    pass


class CheckpointError(HGQAError, ValueError):
    pass


class TrainingDivergedError(HGQAError, RuntimeError):
    def __init__(self, step: int, loss: float):
        super().__init__(f"Training diverged at step {step}: loss={loss}")
        self.step = step
        self.loss = loss
