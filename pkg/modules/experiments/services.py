"""
Services for the Experiments Module

Each pipeline phase reads the artifacts of the phases before it from the run
directory and writes its own under ``<out>/<phase>/``.
"""

import hashlib
import json
import logging
import math
from pathlib import Path

import numpy as np
from rest_framework.exceptions import ValidationError
from scipy.spatial.distance import cdist
from sklearn.datasets import make_blobs, make_moons

from modules.adapters.models import Dataset
from modules.adapters.services import NetworkService, TrainingService
from modules.adapters.storage import CheckpointStore
from modules.experiments.exceptions import ConfigError
from modules.experiments.models import Generator, Phase, RunConfig, Splits
from modules.experiments.serializers import RunConfigSerializer
from modules.experiments.storage import DatasetCsv, RunStore
from modules.laplace.serializers import LaplaceSectionSerializer
from modules.laplace.services import LaplaceService
from modules.laplace.storage import LaplaceStore
from modules.numerics.models import SeededRng
from modules.numerics.serializers import validated
from modules.predictive.models import PosteriorKind
from modules.predictive.serializers import EvaluationSectionSerializer
from modules.predictive.services import MetricsService, PredictiveService, UncertaintyService
from modules.predictive.storage import ReportStore
from modules.projections.services import ProjectionService
from modules.projections.storage import ProjectionStore
from modules.swag.services import SwagService
from modules.swag.storage import SwagStore

logger = logging.getLogger(__name__)

STREAMS = {"train": 0xDA7A0, "val": 0xDA7A1, "test": 0xDA7A2, "pretrain": 0xDA7A3, "ood": 0xDA7A4}
SKLEARN_SEED_LIMIT = 2**31 - 1
SPLITS = ("train", "val", "test", "pretrain")
OOD_DIRECTIONS = 360
OOD_STD = 0.2


def _plain(data):
    return json.loads(json.dumps(data))


class ConfigService:
    @staticmethod
    def load(path, seed=None, output_dir=None, train_fraction=None):
        """Read, override and validate a run file; any problem is a ConfigError."""
        path = Path(path)
        try:
            payload = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file {path} does not exist") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise ConfigError(f"{path} must hold a JSON object")
        overrides = {"seed": seed, "output_dir": output_dir, "train_fraction": train_fraction}
        payload.update({key: value for key, value in overrides.items() if value is not None})
        return ConfigService.from_payload(payload)

    @staticmethod
    def from_payload(payload):
        try:
            data = _plain(validated(RunConfigSerializer, payload))
            data.setdefault("laplace", _plain(validated(LaplaceSectionSerializer, {})))
            data.setdefault("evaluation", _plain(validated(EvaluationSectionSerializer, {})))
        except ValidationError as exc:
            raise ConfigError(f"invalid run config: {exc.detail}") from exc
        digest = hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()
        return RunConfig(**data, digest=digest)


class DataService:
    """Synthetic tasks through scikit-learn generators, one seeded stream per split."""

    @staticmethod
    def random_state(seed, split):
        return int(SeededRng(seed).spawn(STREAMS[split]).integers(0, SKLEARN_SEED_LIMIT))

    @staticmethod
    def sample(section, rows, random_state):
        if Generator(section["generator"]) is Generator.TWO_MOONS:
            features, labels = make_moons(
                n_samples=rows, noise=section["noise"], random_state=random_state
            )
        else:
            features, labels = make_blobs(
                n_samples=rows,
                centers=np.asarray(section["centers"], dtype=np.float64),
                cluster_std=section["std"],
                random_state=random_state,
            )
        return Dataset(features=features, labels=labels)

    @staticmethod
    def rotate(dataset, angle):
        """Rotate the first two feature coordinates by ``angle`` radians."""
        if dataset.features.shape[1] < 2:
            return dataset
        c, s = math.cos(angle), math.sin(angle)
        features = dataset.features.copy()
        features[:, :2] = features[:, :2] @ np.array([[c, s], [-s, c]])
        return Dataset(features=features, labels=dataset.labels)

    @staticmethod
    def spread(features):
        """RMS distance of the rows from their mean."""
        mean = features.mean(axis=0)
        return float(np.sqrt(np.mean(np.sum((features - mean) ** 2, axis=1))))

    @staticmethod
    def boundary_centers(reference, radius, count=2):
        """
        Points at ``radius`` from the reference mean, in the first two axes,
        where the two nearest classes are closest to equidistant.

        Chosen directions are at least a quarter turn apart.
        """
        classes = np.unique(reference.labels)
        if len(classes) < 2:
            raise ConfigError("shifted OOD sets need at least two classes in the test split")
        features = reference.features
        angles = np.linspace(0.0, 2.0 * math.pi, OOD_DIRECTIONS, endpoint=False)
        directions = np.zeros((OOD_DIRECTIONS, features.shape[1]))
        directions[:, 0] = np.cos(angles)
        if features.shape[1] > 1:
            directions[:, 1] = np.sin(angles)
        candidates = features.mean(axis=0) + radius * directions
        nearest = np.sort(
            np.column_stack(
                [cdist(candidates, features[reference.labels == c]).min(axis=1) for c in classes]
            ),
            axis=1,
        )
        chosen = []
        for index in np.argsort(nearest[:, 1] - nearest[:, 0], kind="stable"):
            turn = np.abs(angles[chosen] - angles[index])
            if np.all(np.minimum(turn, 2.0 * math.pi - turn) >= math.pi / 2):
                chosen.append(int(index))
            if len(chosen) == count:
                break
        return candidates[chosen]

    @staticmethod
    def shifted(reference, shift, rows, n_classes, random_state):
        """
        Blobs ``shift`` ID spreads away from the reference mean, centred on
        the extrapolated class boundary.
        """
        spread = DataService.spread(reference.features)
        centers = DataService.boundary_centers(reference, shift * spread)
        features, labels = make_blobs(
            n_samples=rows,
            centers=centers,
            cluster_std=OOD_STD * spread,
            random_state=random_state,
        )
        return Dataset(features=features, labels=labels % n_classes)

    @staticmethod
    def generate(section, seed):
        if section.get("csv"):
            return DataService.read_sources(section["csv"])
        splits = {
            split: DataService.sample(
                section, section[f"n_{split}"], DataService.random_state(seed, split)
            )
            for split in SPLITS
        }
        splits["pretrain"] = DataService.rotate(splits["pretrain"], section["pretrain_rotation"])
        n_classes = int(splits["train"].labels.max()) + 1
        ood_state = DataService.random_state(seed, "ood")
        ood = {
            f"shift_{shift:g}": DataService.shifted(
                splits["test"], shift, section["n_ood"], n_classes, ood_state ^ index
            )
            for index, shift in enumerate(section["ood_shifts"])
        }
        return Splits(ood=ood, **splits)

    @staticmethod
    def read_sources(sources):
        splits = {split: DatasetCsv.read(sources[split]) for split in SPLITS}
        ood = {name: DatasetCsv.read(path) for name, path in sorted(sources.get("ood", {}).items())}
        return Splits(ood=ood, **splits)

    @staticmethod
    def write(splits, directory):
        directory = Path(directory)
        return [
            DatasetCsv.write(directory / f"{name}.csv", data)
            for name, data in splits.named().items()
        ]

    @staticmethod
    def read(store):
        splits = {
            split: DatasetCsv.read(store.require(Phase.DATA, f"{split}.csv")) for split in SPLITS
        }
        ood = {
            path.stem[len("ood_") :]: DatasetCsv.read(path)
            for path in sorted(store.path(Phase.DATA).glob("ood_*.csv"))
        }
        return Splits(ood=ood, **splits)


def _trajectory(result):
    return [record.metrics() for record in result.trajectory]


def _checkpoint(store, phase, *parts):
    return CheckpointStore.load(store.require(phase, *parts))


class PipelineService:
    """
    One static method per phase, each returning the details recorded in the
    run manifest.
    """

    @staticmethod
    def gen_data(config, store):
        splits = DataService.generate(config.dataset, config.seed)
        DataService.write(splits, store.path(Phase.DATA))
        rows = {name: len(data) for name, data in splits.named().items()}
        logger.info("wrote %d datasets to %s", len(rows), store.path(Phase.DATA))
        return {"rows": rows, "n_classes": splits.n_classes}

    @staticmethod
    def pretrain(config, store):
        splits = DataService.read(store)
        base = NetworkService.build_base(
            splits.pretrain.features.shape[1],
            config.model["hidden"],
            splits.n_classes,
            activation=config.model["activation"],
            seed=config.seed,
        )
        result = TrainingService.train_map(base, splits.pretrain, config.pretrain_config())
        checkpoint = store.path(Phase.PRETRAIN, "checkpoint")
        CheckpointStore.save(result.network, checkpoint, seed=config.seed)
        ReportStore.write_json(store.path(Phase.PRETRAIN, "trajectory.json"), _trajectory(result))
        pretrain_loss, pretrain_accuracy = TrainingService.evaluate(result.network, splits.pretrain)
        target_loss, target_accuracy = TrainingService.evaluate(result.network, splits.val)
        return {
            "pretrain_accuracy": pretrain_accuracy,
            "pretrain_loss": pretrain_loss,
            "target_val_accuracy": target_accuracy,
            "target_val_loss": target_loss,
        }

    @staticmethod
    def project(config, store):
        splits = DataService.read(store)
        base = _checkpoint(store, Phase.PRETRAIN, "checkpoint")
        spec = config.projection_spec()
        targets = NetworkService.projection_targets(base, spec.rank)
        if spec.whitening_source == "pretrain":
            source = splits.pretrain
        else:
            source = TrainingService.subsample(splits.train, config.train_fraction, config.seed)
        moments = NetworkService.layer_second_moments(base, source.features, targets)
        pairs = NetworkService.build_pairs(base, spec, moments)
        report = {}
        for index, pair in pairs.items():
            name = base.layers[index].name
            ProjectionStore.save(pair, store.path(Phase.PROJECT, name))
            report[name] = {
                "layer_index": index,
                "recon_error": ProjectionService.recon_error(base.layers[index].W, pair),
                "activation_error": ProjectionService.activation_error(
                    base.layers[index].W, pair, moments[index]
                ),
            }
        ReportStore.write_json(store.path(Phase.PROJECT, "report.json"), report)
        return {"kind": spec.kind.value, "rank": spec.rank, "layers": sorted(report)}

    @staticmethod
    def load_pairs(store):
        """Projection pairs keyed by layer index, as listed in the project report."""
        report = ReportStore.read_json(store.require(Phase.PROJECT, "report.json"))
        return {
            entry["layer_index"]: ProjectionStore.load(store.require(Phase.PROJECT, name))
            for name, entry in report.items()
        }

    @staticmethod
    def train_map(config, store):
        splits = DataService.read(store)
        base = _checkpoint(store, Phase.PRETRAIN, "checkpoint")
        net = NetworkService.adapt(
            base, PipelineService.load_pairs(store), config.model["alpha"], config.model["regime"]
        )
        cfg = config.train_config(config.checkpoint_epochs())
        result = TrainingService.train_map(net, splits.train, cfg, val=splits.val)
        CheckpointStore.save(result.network, store.path(Phase.MAP, "checkpoint"), seed=config.seed)
        for epoch, checkpoint in result.checkpoints.items():
            directory = store.path(Phase.MAP, f"epoch_{epoch}")
            CheckpointStore.save(checkpoint, directory, seed=config.seed)
        ReportStore.write_json(store.path(Phase.MAP, "trajectory.json"), _trajectory(result))
        final = result.trajectory[-1]
        return {
            "train_rows": result.train_rows,
            "epochs": cfg.epochs,
            "checkpoints": sorted(result.checkpoints),
            "val_accuracy": final.val_accuracy,
            "val_loss": final.val_loss,
            "parameters": NetworkService.parameter_budget(result.network),
        }

    @staticmethod
    def fit_swag(config, store):
        if config.swag is None:
            raise ConfigError("the run config has no 'swag' section")
        settings = config.swag_settings()
        splits = DataService.read(store)
        checkpoint = _checkpoint(store, Phase.MAP, f"epoch_{settings.burn_in_epoch}")
        fit = SwagService.fit(
            checkpoint, splits.train, config.train_config(), settings, val=splits.val
        )
        SwagStore.save(fit.posterior, store.path(Phase.SWAG, "posterior"))
        CheckpointStore.save(fit.network, store.path(Phase.SWAG, "network"), seed=config.seed)
        ReportStore.write_json(store.path(Phase.SWAG, "trajectory.json"), _trajectory(fit))
        return {
            "burn_in_epoch": settings.burn_in_epoch,
            "k": settings.k,
            "collected": fit.posterior.collected,
        }

    @staticmethod
    def fit_laplace(config, store):
        splits = DataService.read(store)
        epoch = config.laplace_epoch
        net = _checkpoint(store, Phase.MAP, f"epoch_{epoch}")
        data = TrainingService.subsample(splits.train, config.train_fraction, config.seed)
        grid = config.laplace.get("grid")
        if grid is not None:
            grid = np.logspace(math.log10(grid["low"]), math.log10(grid["high"]), grid["points"])
        posterior = LaplaceService.fit(net, data, structure=config.laplace["structure"], grid=grid)
        LaplaceStore.save(posterior, store.path(Phase.LAPLACE, "posterior"), checkpoint_epoch=epoch)
        CheckpointStore.save(net, store.path(Phase.LAPLACE, "network"), seed=config.seed)
        return {
            "structure": posterior.structure.value,
            "checkpoint_epoch": epoch,
            "prior_precision": posterior.prior_precision,
        }

    @staticmethod
    def load_posterior(config, store, kind):
        """Network, posterior, sample count, link and SWAG rank for one posterior kind."""
        kind = PosteriorKind(kind)
        if kind is PosteriorKind.MAP:
            return _checkpoint(store, Phase.MAP, "checkpoint"), None, 1, "mc", 0
        if kind is PosteriorKind.SWAG:
            if config.swag is None:
                raise ConfigError("the run config has no 'swag' section")
            posterior = SwagStore.load(store.require(Phase.SWAG, "posterior"))
            net = _checkpoint(store, Phase.SWAG, "network")
            return net, posterior, config.swag["samples"], "mc", posterior.k
        posterior = LaplaceStore.load(store.require(Phase.LAPLACE, "posterior"))
        net = _checkpoint(store, Phase.LAPLACE, "network")
        return net, posterior, config.laplace["samples"], config.laplace["link"], 0

    @staticmethod
    def predict(config, net, posterior, samples, link, features):
        return PredictiveService.bma_predict(
            net, posterior, features, samples=samples, rng=SeededRng(config.seed), link=link
        )

    @staticmethod
    def evaluate(config, store, kind):
        splits = DataService.read(store)
        net, posterior, samples, link, k = PipelineService.load_posterior(config, store, kind)
        predictive = PipelineService.predict(
            config, net, posterior, samples, link, splits.test.features
        )
        metrics = MetricsService.evaluation(
            predictive, splits.test.labels, config.evaluation["ece_bins"]
        )
        kind = PosteriorKind(kind).value
        budget_kind = posterior.structure.value if kind == PosteriorKind.LAPLACE.value else kind
        metrics["posterior"] = kind
        metrics["parameters"] = NetworkService.parameter_budget(net, budget_kind, k)
        in_distribution = UncertaintyService.decompose_batch(predictive)
        scores = {
            name: MetricsService.ood_scores(
                in_distribution,
                UncertaintyService.decompose_batch(
                    PipelineService.predict(config, net, posterior, samples, link, data.features)
                ),
            )
            for name, data in splits.ood.items()
        }
        for key in ("auroc", "w1"):
            metrics[key] = {
                name: {score: values[key] for score, values in entry.items()}
                for name, entry in scores.items()
            }
        ReportStore.write_json(store.path(Phase.EVALUATE, kind, "metrics.json"), metrics)
        ReportStore.write_entropies(
            store.path(Phase.EVALUATE, kind, "entropies.csv"), in_distribution
        )
        logger.info(
            "%s: accuracy %.4f, ECE %.4f, NLL %.4f",
            kind,
            metrics["accuracy"],
            metrics["ece"],
            metrics["nll"],
        )
        return {key: metrics[key] for key in ("accuracy", "ece", "nll", "samples")}

    @staticmethod
    def ood(config, store, kind):
        splits = DataService.read(store)
        if not splits.ood:
            raise ConfigError("no OOD datasets in the data phase")
        kind = PosteriorKind(kind).value
        net, posterior, samples, link, _ = PipelineService.load_posterior(config, store, kind)
        directory = store.path(Phase.OOD, kind)

        def entropies(data, name):
            predictive = PipelineService.predict(
                config, net, posterior, samples, link, data.features
            )
            result = UncertaintyService.decompose_batch(predictive)
            ReportStore.write_entropies(directory / f"{name}.csv", result)
            return result

        in_distribution = entropies(splits.test, "id")
        report = {
            "posterior": kind,
            "samples": 1 if PredictiveService.is_degenerate(posterior) else samples,
            "id": {
                "mean_total_entropy": float(in_distribution.total.mean()),
                "mean_epistemic": float(in_distribution.epistemic.mean()),
            },
            "ood": {
                name: MetricsService.ood_scores(in_distribution, entropies(data, name))
                for name, data in splits.ood.items()
            },
        }
        ReportStore.write_json(directory / "report.json", report)
        return {name: scores["total"]["auroc"] for name, scores in report["ood"].items()}


def run_store(config):
    return RunStore(config.output_dir)
