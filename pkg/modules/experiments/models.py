"""
Models for the Experiments Module
"""

from dataclasses import dataclass, field
from enum import Enum

from modules.adapters.models import TrainConfig
from modules.projections.models import ProjectionSpec
from modules.swag.models import SwagSettings


class Phase(str, Enum):
    DATA = "data"
    PRETRAIN = "pretrain"
    PROJECT = "project"
    MAP = "map"
    SWAG = "swag"
    LAPLACE = "laplace"
    EVALUATE = "evaluate"
    OOD = "ood"


class Generator(str, Enum):
    TWO_MOONS = "two_moons"
    GAUSSIAN_BLOBS = "gaussian_blobs"


@dataclass(frozen=True)
class Splits:
    """Every dataset of a run; ``ood`` maps set names to shifted inputs."""

    train: object
    val: object
    test: object
    pretrain: object
    ood: dict = field(default_factory=dict)

    def named(self):
        named = {"train": self.train, "val": self.val, "test": self.test, "pretrain": self.pretrain}
        named.update({f"ood_{name}": data for name, data in self.ood.items()})
        return named

    @property
    def n_classes(self):
        return int(max(self.train.labels.max(), self.pretrain.labels.max())) + 1


@dataclass(frozen=True)
class RunConfig:
    """A validated run configuration; sections keep their validated payloads."""

    seed: int
    output_dir: str
    train_fraction: float
    dataset: dict
    model: dict
    pretrain: dict
    projection: dict
    train: dict
    laplace: dict
    evaluation: dict
    swag: dict = None
    digest: str = ""

    def train_config(self, checkpoint_epochs=()):
        return TrainConfig(
            epochs=self.train["epochs"],
            batch_size=self.train["batch_size"],
            learning_rate=self.train["learning_rate"],
            weight_decay=self.train["weight_decay"],
            warmup_fraction=self.train["warmup_fraction"],
            seed=self.seed,
            alpha=self.model["alpha"],
            train_fraction=self.train_fraction,
            regime=self.model["regime"],
            checkpoint_epochs=checkpoint_epochs,
        )

    def pretrain_config(self):
        return TrainConfig(
            epochs=self.pretrain["epochs"],
            batch_size=self.pretrain["batch_size"],
            learning_rate=self.pretrain["learning_rate"],
            weight_decay=self.pretrain["weight_decay"],
            warmup_fraction=self.pretrain["warmup_fraction"],
            seed=self.seed,
        )

    def projection_spec(self):
        return ProjectionSpec(
            kind=self.projection["kind"],
            rank=self.projection["rank"],
            seed=self.projection.get("seed", self.seed),
            permute=self.projection["permute"],
            ridge=self.projection.get("ridge"),
            whitening_source=self.projection.get("whitening_source"),
            components=tuple(self.projection.get("components", ())),
        )

    def swag_settings(self):
        return SwagSettings(**self.swag)

    @property
    def laplace_epoch(self):
        """Checkpoint the Laplace posterior is fitted at; the final MAP epoch by default."""
        epoch = self.laplace.get("checkpoint_epoch")
        return epoch if epoch is not None else self.train["epochs"]

    def checkpoint_epochs(self):
        epochs = {self.train["epochs"], self.laplace_epoch}
        if self.swag is not None:
            epochs.add(self.swag["burn_in_epoch"])
        return tuple(sorted(epochs))
