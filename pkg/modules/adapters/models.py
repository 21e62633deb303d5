"""
Models for the Adapters Module

A network is an ordered list of layers. Inputs are row vectors, so a linear
layer computes ``x·W + b`` with W of shape n_in × n_out.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from modules.numerics.exceptions import ShapeError
from modules.numerics.models import as_matrix, as_vector


class Regime(str, Enum):
    CORES_ONLY = "cores-only"
    ALL = "all"


class ActivationKind(str, Enum):
    TANH = "tanh"
    RELU = "relu"


class Schedule(str, Enum):
    LINEAR_WARMUP = "linear_warmup"
    CONSTANT = "constant"


@dataclass
class Linear:
    """Plain linear layer. Frozen base layers and the trainable head."""

    name: str
    W: np.ndarray
    b: np.ndarray
    trainable: bool = True

    def __post_init__(self):
        self.W = as_matrix(self.W, name=f"{self.name}.W")
        self.b = as_vector(self.b, name=f"{self.name}.b")
        if self.b.shape[0] != self.W.shape[1]:
            raise ShapeError(f"{self.name}: bias length {self.b.shape[0]} != {self.W.shape[1]}")

    @property
    def n_in(self):
        return self.W.shape[0]

    @property
    def n_out(self):
        return self.W.shape[1]

    def parameter_names(self):
        return ("W", "b") if self.trainable else ()


@dataclass
class AdaptedLinear:
    """
    ``x·(W0 + scale·A·R·B) + bias`` with frozen W0 and bias.

    A and B start as copies of the projection pair; they only move when
    ``trainable_ab`` is set. ``pair`` keeps the provenance of the bases.
    """

    name: str
    W0: np.ndarray
    bias: np.ndarray
    pair: object
    R: np.ndarray
    scale: float
    trainable_ab: bool = False
    A: np.ndarray = None
    B: np.ndarray = None

    def __post_init__(self):
        self.W0 = as_matrix(self.W0, name=f"{self.name}.W0")
        self.bias = as_vector(self.bias, name=f"{self.name}.bias")
        self.A = np.array(self.pair.A if self.A is None else self.A, dtype=np.float64)
        self.B = np.array(self.pair.B if self.B is None else self.B, dtype=np.float64)
        self.R = as_matrix(self.R, name=f"{self.name}.R")
        rank = self.rank
        if self.A.shape != (self.W0.shape[0], rank) or self.B.shape != (rank, self.W0.shape[1]):
            raise ShapeError(
                f"{self.name}: A {self.A.shape}, B {self.B.shape} do not fit W0 {self.W0.shape}"
            )
        if self.R.shape != (rank, rank):
            raise ShapeError(f"{self.name}: core must be {rank}×{rank}, got {self.R.shape}")
        if self.bias.shape[0] != self.W0.shape[1]:
            raise ShapeError(f"{self.name}: bias length does not match W0")

    @property
    def rank(self):
        return self.pair.rank

    @property
    def n_in(self):
        return self.W0.shape[0]

    @property
    def n_out(self):
        return self.W0.shape[1]

    def delta(self):
        return self.scale * (self.A @ self.R @ self.B)

    def effective_weight(self):
        return self.W0 + self.delta()

    def parameter_names(self):
        return ("R", "A", "B") if self.trainable_ab else ("R",)


@dataclass
class Activation:
    kind: ActivationKind
    name: str = ""

    def __post_init__(self):
        self.kind = ActivationKind(self.kind)
        self.name = self.name or self.kind.value

    def parameter_names(self):
        return ()


@dataclass
class Network:
    layers: list
    n_classes: int

    def __post_init__(self):
        widths = [layer for layer in self.layers if not isinstance(layer, Activation)]
        if not widths:
            raise ShapeError("a network needs at least one linear layer")
        for previous, current in zip(widths, widths[1:]):
            if previous.n_out != current.n_in:
                raise ShapeError(
                    f"{previous.name} outputs {previous.n_out}, "
                    f"{current.name} expects {current.n_in}"
                )
        if widths[-1].n_out != self.n_classes:
            raise ShapeError(f"last layer outputs {widths[-1].n_out}, expected {self.n_classes}")

    @property
    def input_dim(self):
        return next(layer.n_in for layer in self.layers if not isinstance(layer, Activation))

    def adapted(self):
        """(index, layer) for every adapted layer, in layer order."""
        return [
            (i, layer) for i, layer in enumerate(self.layers) if isinstance(layer, AdaptedLinear)
        ]

    def trainable(self):
        """(index, layer, parameter name) for every trainable tensor."""
        return [
            (i, layer, name)
            for i, layer in enumerate(self.layers)
            for name in layer.parameter_names()
        ]


@dataclass(frozen=True)
class ThetaSlice:
    layer_index: int
    layer_name: str
    start: int
    stop: int
    rank: int


@dataclass
class ThetaVector:
    """All cores flattened: layer order, row-major within each R."""

    values: np.ndarray
    offsets: list

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        expected = sum(s.rank**2 for s in self.offsets)
        if self.values.shape != (expected,):
            raise ShapeError(f"theta has {self.values.shape}, offsets cover {expected}")

    def __len__(self):
        return int(self.values.shape[0])

    def with_values(self, values):
        return ThetaVector(values=np.array(values, dtype=np.float64), offsets=self.offsets)

    def core(self, layer_index):
        for piece in self.offsets:
            if piece.layer_index == layer_index:
                return self.values[piece.start : piece.stop].reshape(piece.rank, piece.rank)
        raise KeyError(layer_index)


@dataclass(frozen=True)
class Dataset:
    """Feature rows and integer labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "features", as_matrix(self.features, name="features"))
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.shape[0] != self.features.shape[0]:
            raise ShapeError("labels must be a vector with one entry per feature row")
        if labels.size and (labels.min() < 0 or not np.all(labels == np.round(labels))):
            raise ValueError("labels must be non-negative integers")
        object.__setattr__(self, "labels", labels.astype(np.int64))

    def __len__(self):
        return int(self.features.shape[0])

    def subset(self, rows):
        return Dataset(features=self.features[rows], labels=self.labels[rows])


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int
    learning_rate: float
    weight_decay: float = 0.0
    warmup_fraction: float = 0.1
    seed: int = 0
    alpha: float = 16.0
    train_fraction: float = 1.0
    regime: Regime = Regime.CORES_ONLY
    schedule: Schedule = Schedule.LINEAR_WARMUP
    checkpoint_epochs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        object.__setattr__(self, "schedule", Schedule(self.schedule))
        object.__setattr__(self, "checkpoint_epochs", tuple(sorted(set(self.checkpoint_epochs))))
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ValueError("learning_rate and weight_decay must be non-negative")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ValueError("warmup_fraction must be in [0, 1)")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ValueError("train_fraction must be in (0, 1]")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if any(not 1 <= e <= self.epochs for e in self.checkpoint_epochs):
            raise ValueError("checkpoint epochs must lie in [1, epochs]")


@dataclass
class EpochRecord:
    epoch: int
    theta: np.ndarray
    learning_rate: float
    train_loss: float
    train_accuracy: float
    val_loss: float = None
    val_accuracy: float = None

    def metrics(self):
        return {
            "epoch": self.epoch,
            "learning_rate": self.learning_rate,
            "train_loss": self.train_loss,
            "train_accuracy": self.train_accuracy,
            "val_loss": self.val_loss,
            "val_accuracy": self.val_accuracy,
        }


@dataclass
class TrainResult:
    network: Network
    trajectory: list = field(default_factory=list)
    checkpoints: dict = field(default_factory=dict)
    train_rows: int = 0

    @property
    def thetas(self):
        return [record.theta for record in self.trajectory]


@dataclass
class ForwardCache:
    """Per-layer inputs and outputs, plus core inputs/outputs of adapted layers."""

    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    core_inputs: dict = field(default_factory=dict)
    core_outputs: dict = field(default_factory=dict)
