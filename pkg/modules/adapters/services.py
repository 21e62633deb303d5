"""
Services for the Adapters Module

Forward and reverse passes over the explicit layer list, the MAP training
loop, θ flattening and parameter accounting.
"""

import copy
import dataclasses
import logging
import math

import numpy as np
from scipy.special import logsumexp, softmax

from modules.adapters.exceptions import TrainingDivergedError
from modules.adapters.models import (
    Activation,
    ActivationKind,
    AdaptedLinear,
    EpochRecord,
    ForwardCache,
    Linear,
    Network,
    Regime,
    ThetaSlice,
    ThetaVector,
    TrainResult,
)
from modules.adapters.optim import AdamW, learning_rate
from modules.numerics.exceptions import ShapeError
from modules.numerics.models import SeededRng, WelfordState, as_matrix
from modules.numerics.services import WelfordService
from modules.projections.models import ProjectionPair
from modules.projections.services import ProjectionService

logger = logging.getLogger(__name__)

SHUFFLE_STREAM = 0x5EED
FRACTION_STREAM = 0xF4AC


def _activate(kind, values):
    if kind is ActivationKind.TANH:
        return np.tanh(values)
    return np.maximum(values, 0.0)


def _activation_backward(kind, output, grad):
    if kind is ActivationKind.TANH:
        return grad * (1.0 - output**2)
    return grad * (output > 0.0)


def _is_linear(layer):
    return isinstance(layer, (Linear, AdaptedLinear))


class NetworkService:
    """Construction, forward/backward passes and θ handling."""

    @staticmethod
    def build_base(input_dim, hidden, n_classes, activation=ActivationKind.TANH, seed=0):
        """Glorot-uniform MLP with every linear layer trainable; the last is ``head``."""
        rng = SeededRng(seed)
        widths = [input_dim, *hidden, n_classes]
        layers = []
        for index, (n_in, n_out) in enumerate(zip(widths, widths[1:])):
            limit = math.sqrt(6.0 / (n_in + n_out))
            is_head = index == len(widths) - 2
            layers.append(
                Linear(
                    name="head" if is_head else f"layer_{index}",
                    W=limit * (2.0 * rng.uniform((n_in, n_out)) - 1.0),
                    b=np.zeros(n_out),
                )
            )
            if not is_head:
                layers.append(Activation(kind=activation, name=f"act_{index}"))
        return Network(layers=layers, n_classes=n_classes)

    @staticmethod
    def head_index(net):
        return max(i for i, layer in enumerate(net.layers) if _is_linear(layer))

    @staticmethod
    def projection_targets(net, rank):
        """Hidden linear layers wide enough to carry a rank-r adapter."""
        head = NetworkService.head_index(net)
        return [
            i
            for i, layer in enumerate(net.layers)
            if isinstance(layer, Linear) and i != head and rank <= min(layer.n_in, layer.n_out)
        ]

    @staticmethod
    def layer_second_moments(net, features, indices, batch_size=256):
        """Uncentered second moment of the inputs reaching each listed layer."""
        features = as_matrix(features, name="features")
        states = {i: WelfordState(dim=net.layers[i].n_in) for i in indices}
        for start in range(0, features.shape[0], batch_size):
            _, cache = NetworkService.forward(net, features[start : start + batch_size])
            for i, state in states.items():
                WelfordService.update(state, cache.inputs[i])
        return {i: WelfordService.finalize(state) for i, state in states.items()}

    @staticmethod
    def build_pairs(net, spec, second_moments=None):
        """One projection pair per target layer; layer i uses seed ``spec.seed ^ i``."""
        pairs = {}
        for index in NetworkService.projection_targets(net, spec.rank):
            layer_spec = dataclasses.replace(spec, seed=spec.seed ^ index)
            sigma = None if second_moments is None else second_moments.get(index)
            pairs[index] = ProjectionService.build(net.layers[index].W, layer_spec, sigma_xx=sigma)
            logger.debug(
                "built %s pair for %s (rank %d)", spec.kind.value, net.layers[index].name, spec.rank
            )
        if not pairs:
            raise ShapeError(f"no hidden layer can carry a rank-{spec.rank} adapter")
        return pairs

    @staticmethod
    def adapt(base, pairs, alpha, regime=Regime.CORES_ONLY):
        """
        Freeze ``base`` and wrap the layers in ``pairs`` as adapters with R = 0.

        The head stays a trainable plain layer; every other layer is frozen.
        """
        regime = Regime(regime)
        head = NetworkService.head_index(base)
        layers = []
        for index, layer in enumerate(base.layers):
            if index in pairs:
                pair = pairs[index]
                layers.append(
                    AdaptedLinear(
                        name=layer.name,
                        W0=layer.W.copy(),
                        bias=layer.b.copy(),
                        pair=pair,
                        R=np.zeros((pair.rank, pair.rank)),
                        scale=alpha / pair.rank,
                        trainable_ab=regime is Regime.ALL,
                    )
                )
            elif isinstance(layer, Linear):
                layers.append(
                    Linear(
                        name=layer.name,
                        W=layer.W.copy(),
                        b=layer.b.copy(),
                        trainable=index == head,
                    )
                )
            else:
                layers.append(copy.copy(layer))
        return Network(layers=layers, n_classes=base.n_classes)

    @staticmethod
    def cores_only(net):
        """Copy of ``net`` in which only the adapter cores R are trainable."""
        layers = []
        for layer in net.layers:
            if isinstance(layer, AdaptedLinear):
                layer = copy.copy(layer)
                layer.trainable_ab = False
            elif isinstance(layer, Linear):
                layer = copy.copy(layer)
                layer.trainable = False
            layers.append(layer)
        return Network(layers=layers, n_classes=net.n_classes)

    @staticmethod
    def forward(net, features):
        """Logits N×C and the cache backward and curvature code read from."""
        x = as_matrix(features, name="features")
        if x.shape[1] != net.input_dim:
            raise ShapeError(f"network expects {net.input_dim} features, got {x.shape[1]}")
        cache = ForwardCache()
        for index, layer in enumerate(net.layers):
            cache.inputs.append(x)
            if isinstance(layer, Linear):
                x = x @ layer.W + layer.b
            elif isinstance(layer, AdaptedLinear):
                core_input = x @ layer.A
                core_output = core_input @ layer.R
                x = x @ layer.W0 + layer.scale * (core_output @ layer.B) + layer.bias
                cache.core_inputs[index] = core_input
                cache.core_outputs[index] = core_output
            else:
                x = _activate(layer.kind, x)
            cache.outputs.append(x)
        return x, cache

    @staticmethod
    def logits(net, features):
        return NetworkService.forward(net, features)[0]

    @staticmethod
    def probabilities(logits):
        return softmax(logits, axis=-1)

    @staticmethod
    def loss_nll(logits, labels):
        """Mean cross-entropy through log-sum-exp."""
        logits = np.asarray(logits, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        picked = logits[np.arange(logits.shape[0]), labels]
        return float(np.mean(logsumexp(logits, axis=1) - picked))

    @staticmethod
    def output_gradient(logits, labels):
        """∂(mean NLL)/∂logits = (softmax − onehot)/N."""
        grad = softmax(logits, axis=1)
        grad[np.arange(logits.shape[0]), labels] -= 1.0
        return grad / logits.shape[0]

    @staticmethod
    def propagate(net, cache, upstream):
        """
        Push ``upstream`` (…×N×C) back through the network.

        Returns the gradient at every layer's output (index-aligned with
        ``net.layers``) and at the input. Leading axes broadcast, so a C×N×C
        stack of one-hot seeds yields per-class logit Jacobians in one pass.
        """
        grads = [None] * len(net.layers)
        grad = upstream
        for index in reversed(range(len(net.layers))):
            grads[index] = grad
            layer = net.layers[index]
            if isinstance(layer, Linear):
                grad = grad @ layer.W.T
            elif isinstance(layer, AdaptedLinear):
                through_core = ((grad @ layer.B.T) @ layer.R.T) @ layer.A.T
                grad = grad @ layer.W0.T + layer.scale * through_core
            else:
                grad = _activation_backward(layer.kind, cache.outputs[index], grad)
        return grads, grad

    @staticmethod
    def parameter_gradients(net, cache, output_grads):
        gradients = {}
        for index, layer, name in net.trainable():
            grad = output_grads[index]
            x = cache.inputs[index]
            if isinstance(layer, Linear):
                gradients[(index, name)] = x.T @ grad if name == "W" else grad.sum(axis=0)
                continue
            projected = grad @ layer.B.T
            if name == "R":
                value = cache.core_inputs[index].T @ projected
            elif name == "A":
                value = x.T @ (projected @ layer.R.T)
            else:
                value = cache.core_outputs[index].T @ grad
            gradients[(index, name)] = layer.scale * value
        return gradients

    @staticmethod
    def backward(net, cache, labels):
        """Gradients of the mean NLL for every trainable tensor, keyed (layer, name)."""
        upstream = NetworkService.output_gradient(cache.outputs[-1], labels)
        output_grads, _ = NetworkService.propagate(net, cache, upstream)
        return NetworkService.parameter_gradients(net, cache, output_grads)

    @staticmethod
    def parameters(net):
        """Live references to every trainable tensor, keyed like ``backward``."""
        return {(index, name): getattr(layer, name) for index, layer, name in net.trainable()}

    @staticmethod
    def theta_layout(net):
        offsets, start = [], 0
        for index, layer in net.adapted():
            stop = start + layer.rank**2
            offsets.append(ThetaSlice(index, layer.name, start, stop, layer.rank))
            start = stop
        return offsets

    @staticmethod
    def flatten(net):
        offsets = NetworkService.theta_layout(net)
        values = [net.layers[piece.layer_index].R.reshape(-1) for piece in offsets]
        return ThetaVector(
            values=np.concatenate(values) if values else np.zeros(0), offsets=offsets
        )

    @staticmethod
    def unflatten(net, theta):
        """Copy of ``net`` with its cores read from θ; frozen layers are shared."""
        if isinstance(theta, ThetaVector):
            values = theta.values
        else:
            values = np.asarray(theta, dtype=np.float64)
        offsets = NetworkService.theta_layout(net)
        expected = sum(piece.rank**2 for piece in offsets)
        if values.shape != (expected,):
            raise ShapeError(f"theta must have length {expected}, got {values.shape}")
        layers = list(net.layers)
        for piece in offsets:
            layer = copy.copy(layers[piece.layer_index])
            layer.R = values[piece.start : piece.stop].reshape(piece.rank, piece.rank).copy()
            layers[piece.layer_index] = layer
        return Network(layers=layers, n_classes=net.n_classes)

    @staticmethod
    def logits_at(net, theta, features):
        return NetworkService.logits(NetworkService.unflatten(net, theta), features)

    @staticmethod
    def subspace_basis(net):
        """P with P·θ = stacked row-major vec(ΔW_ℓ) over adapted layers."""
        pairs, scales = [], []
        for _, layer in net.adapted():
            pairs.append(
                ProjectionPair(A=layer.A, B=layer.B, kind=layer.pair.kind, rank=layer.rank)
            )
            scales.append(layer.scale)
        return ProjectionService.subspace_basis(pairs, scales)

    @staticmethod
    def parameter_budget(net, posterior_kind=None, k=0):
        """
        Trainable counts at MAP and the number of stored posterior parameters.

        SWAG keeps μ, σ² and k deviations (|θ|(k+2)); DIAG keeps h; KRON keeps
        two r×r factors per layer beside the mean.
        """
        adapters = sum(
            layer.rank**2 + (layer.A.size + layer.B.size if layer.trainable_ab else 0)
            for _, layer in net.adapted()
        )
        plain = sum(
            layer.W.size + layer.b.size
            for layer in net.layers
            if isinstance(layer, Linear) and layer.trainable
        )
        dim = sum(layer.rank**2 for _, layer in net.adapted())
        budget = {
            "theta_dim": dim,
            "adapter_trainable": adapters,
            "plain_trainable": plain,
            "map_trainable": adapters + plain,
        }
        if posterior_kind is not None:
            stored = {
                "map": dim,
                "swag": dim * (k + 2),
                "diag": 2 * dim,
                "kron": dim + 2 * dim,
            }
            budget["posterior"] = stored[str(posterior_kind).lower()]
        return budget


class TrainingService:
    """Mini-batch AdamW training with a seeded shuffle."""

    @staticmethod
    def subsample(dataset, fraction, seed):
        """Keep ⌈fraction·N⌉ rows chosen by a seeded permutation, in original order."""
        if fraction >= 1.0:
            return dataset
        keep = math.ceil(fraction * len(dataset))
        order = SeededRng(seed).spawn(FRACTION_STREAM).permutation(len(dataset))
        return dataset.subset(np.sort(order[:keep]))

    @staticmethod
    def evaluate(net, dataset):
        logits = NetworkService.logits(net, dataset.features)
        accuracy = float(np.mean(np.argmax(logits, axis=1) == dataset.labels))
        return NetworkService.loss_nll(logits, dataset.labels), accuracy

    @staticmethod
    def train_map(net, train, cfg, val=None, stream=0):
        """
        Train a copy of ``net``; ``net`` itself is left untouched.

        One θ snapshot per epoch lands in the trajectory; full copies are kept
        for every epoch in ``cfg.checkpoint_epochs``.
        """
        net = copy.deepcopy(net)
        train = TrainingService.subsample(train, cfg.train_fraction, cfg.seed)
        rows = len(train)
        shuffle = SeededRng(cfg.seed).spawn(SHUFFLE_STREAM + stream)
        per_epoch = math.ceil(rows / cfg.batch_size)
        total_steps = cfg.epochs * per_epoch
        warmup_steps = int(cfg.warmup_fraction * total_steps)
        optimizer = AdamW(weight_decay=cfg.weight_decay)
        parameters = NetworkService.parameters(net)
        result = TrainResult(network=net, train_rows=rows)
        logger.info(
            "training %d tensors on %d rows for %d epochs (%s)",
            len(parameters),
            rows,
            cfg.epochs,
            cfg.schedule.value,
        )

        step = 0
        rate = 0.0
        for epoch in range(1, cfg.epochs + 1):
            order = shuffle.permutation(rows)
            for start in range(0, rows, cfg.batch_size):
                batch = order[start : start + cfg.batch_size]
                logits, cache = NetworkService.forward(net, train.features[batch])
                loss = NetworkService.loss_nll(logits, train.labels[batch])
                if not np.isfinite(loss):
                    raise TrainingDivergedError(epoch, step, loss)
                gradients = NetworkService.backward(net, cache, train.labels[batch])
                rate = learning_rate(
                    cfg.schedule, cfg.learning_rate, step, total_steps, warmup_steps
                )
                optimizer.step(parameters, gradients, rate)
                step += 1

            train_loss, train_accuracy = TrainingService.evaluate(net, train)
            if not np.isfinite(train_loss):
                raise TrainingDivergedError(epoch, step, train_loss)
            record = EpochRecord(
                epoch=epoch,
                theta=NetworkService.flatten(net).values.copy(),
                learning_rate=rate,
                train_loss=train_loss,
                train_accuracy=train_accuracy,
            )
            if val is not None:
                record.val_loss, record.val_accuracy = TrainingService.evaluate(net, val)
            result.trajectory.append(record)
            if epoch in cfg.checkpoint_epochs:
                result.checkpoints[epoch] = copy.deepcopy(net)
            logger.debug(
                "epoch %d: loss %.5f, accuracy %.4f", epoch, train_loss, train_accuracy
            )
        return result
