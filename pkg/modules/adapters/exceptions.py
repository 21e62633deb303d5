"""Errors raised while training or restoring adapted networks."""

from modules.numerics.exceptions import NumericalError


class TrainingDivergedError(NumericalError):
    """The training loss stopped being finite."""

    def __init__(self, epoch, step, loss):
        self.epoch = epoch
        self.step = step
        self.loss = loss
        super().__init__(
            f"training diverged at epoch {epoch}, step {step}: loss = {loss}"
        )


class CheckpointError(ValueError):
    """A checkpoint directory is malformed or disagrees with its manifest."""
