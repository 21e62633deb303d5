"""
Test Factories for the Adapters Module
"""

import factory
import numpy as np

from modules.adapters.models import ActivationKind, Dataset, Network, Regime, TrainConfig
from modules.adapters.services import NetworkService
from modules.numerics.models import SeededRng
from modules.projections.models import ProjectionKind, ProjectionSpec


class TrainConfigFactory(factory.Factory):
    class Meta:
        model = TrainConfig

    epochs = 5
    batch_size = 16
    learning_rate = 0.05
    weight_decay = 0.0
    warmup_fraction = 0.1
    seed = factory.Sequence(lambda n: 100 + n)
    alpha = 4.0


class BaseNetworkFactory(factory.Factory):
    """Plain MLP with every layer trainable."""

    class Meta:
        model = Network

    input_dim = 2
    hidden = (6, 5)
    n_classes = 3
    activation = ActivationKind.TANH
    seed = factory.Sequence(lambda n: 200 + n)

    @classmethod
    def _create(cls, model_class, *args, **kwargs):
        return NetworkService.build_base(
            kwargs["input_dim"],
            list(kwargs["hidden"]),
            kwargs["n_classes"],
            activation=kwargs["activation"],
            seed=kwargs["seed"],
        )

    _build = _create


class AdaptedNetworkFactory(BaseNetworkFactory):
    """Adapted MLP; ``core_scale`` > 0 fills the cores with Gaussian noise."""

    rank = 2
    kind = ProjectionKind.SVD
    alpha = 4.0
    regime = Regime.CORES_ONLY
    core_scale = 0.0

    @classmethod
    def _create(cls, model_class, *args, **kwargs):
        base = BaseNetworkFactory._create(model_class, **kwargs)
        spec = ProjectionSpec(kind=kwargs["kind"], rank=kwargs["rank"], seed=kwargs["seed"])
        net = NetworkService.adapt(
            base, NetworkService.build_pairs(base, spec), kwargs["alpha"], kwargs["regime"]
        )
        if kwargs["core_scale"]:
            rng = SeededRng(kwargs["seed"] + 1)
            theta = NetworkService.flatten(net)
            net = NetworkService.unflatten(
                net, kwargs["core_scale"] * rng.standard_normal(len(theta))
            )
        return net

    _build = _create


def gaussian_classes(seed, rows=200, means=((-2.0, -2.0), (2.0, 2.0)), std=0.5):
    """Isotropic Gaussian clusters, ``rows`` per class."""
    rng = SeededRng(seed)
    features = np.vstack(
        [np.asarray(mean) + std * rng.standard_normal((rows, len(mean))) for mean in means]
    )
    labels = np.repeat(np.arange(len(means)), rows)
    return Dataset(features=features, labels=labels)
