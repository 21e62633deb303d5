"""
Test Factories for the Experiments Module

Run-config payloads small enough for a whole pipeline to finish in seconds.
"""

import json
from pathlib import Path

import factory


class DatasetSectionFactory(factory.DictFactory):
    generator = "two_moons"
    n_train = 60
    n_val = 30
    n_test = 40
    n_pretrain = 80
    n_ood = 30
    noise = 0.15
    ood_shifts = factory.LazyFunction(lambda: [4.0, 8.0])


class ModelSectionFactory(factory.DictFactory):
    hidden = factory.LazyFunction(lambda: [8])
    activation = "tanh"
    alpha = 4.0


class TrainSectionFactory(factory.DictFactory):
    epochs = 4
    batch_size = 16
    learning_rate = 0.02


class ProjectionSectionFactory(factory.DictFactory):
    kind = "SVD"
    rank = 2


class SwagSectionFactory(factory.DictFactory):
    burn_in_epoch = 2
    k = 3
    collect_epochs = 3
    samples = 4


class LaplaceSectionFactory(factory.DictFactory):
    structure = "KRON"
    checkpoint_epoch = 2
    samples = 4
    grid = factory.LazyFunction(lambda: {"low": 0.01, "high": 100.0, "points": 5})


class RunPayloadFactory(factory.DictFactory):
    seed = 0
    output_dir = "runs/test"
    dataset = factory.SubFactory(DatasetSectionFactory)
    model = factory.SubFactory(ModelSectionFactory)
    pretrain = factory.SubFactory(TrainSectionFactory, epochs=6)
    projection = factory.SubFactory(ProjectionSectionFactory)
    train = factory.SubFactory(TrainSectionFactory)
    swag = factory.SubFactory(SwagSectionFactory)
    laplace = factory.SubFactory(LaplaceSectionFactory)
    evaluation = factory.LazyFunction(lambda: {"ece_bins": 10})


def write_config(directory, payload=None, name="run.json", **overrides):
    """Write ``payload`` (a fresh RunPayloadFactory dict by default) and return its path."""
    payload = RunPayloadFactory(**overrides) if payload is None else payload
    path = Path(directory) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload))
    return path
