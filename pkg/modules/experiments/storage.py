"""
Run directories: ``<out>/<phase>/`` plus ``manifest.json`` at the root.
"""

import hashlib
import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from modules.adapters.models import Dataset
from modules.experiments.exceptions import ConfigError, MissingArtifactError
from modules.experiments.serializers import RunManifestSerializer
from modules.numerics.serializers import validated

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
LABEL_COLUMN = "label"


def sha256_of(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class DatasetCsv:
    """Feature columns ``x0…x{d-1}`` then ``label``."""

    @staticmethod
    def write(path, dataset):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame(
            dataset.features, columns=[f"x{i}" for i in range(dataset.features.shape[1])]
        )
        frame[LABEL_COLUMN] = dataset.labels
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        return path

    @staticmethod
    def read(path):
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"dataset file {path} does not exist")
        frame = pd.read_csv(path, float_precision="round_trip")
        if LABEL_COLUMN not in frame.columns:
            raise ConfigError(f"{path} has no '{LABEL_COLUMN}' column")
        features = frame.drop(columns=[LABEL_COLUMN]).to_numpy(dtype=np.float64)
        labels = frame[LABEL_COLUMN].to_numpy()
        try:
            return Dataset(features=features, labels=labels)
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc


class RunStore:
    """One run directory and its manifest."""

    def __init__(self, root):
        self.root = Path(root)

    def path(self, phase, *parts):
        return self.root.joinpath(str(getattr(phase, "value", phase)), *parts)

    def require(self, phase, *parts):
        path = self.path(phase, *parts)
        if not path.exists():
            raise MissingArtifactError(getattr(phase, "value", phase), path)
        return path

    def manifest(self):
        path = self.root / MANIFEST
        if not path.exists():
            return None
        return validated(RunManifestSerializer, json.loads(path.read_text()))

    def record(self, phase_key, config_sha256, wall_time, details=None, train_rows=None):
        """Hash every file under the phase directory and store the phase entry."""
        manifest = self.manifest()
        if manifest is None or manifest["config_sha256"] != config_sha256:
            if manifest is not None:
                logger.warning("config changed since the last phase; starting a new manifest")
            manifest = {"format_version": 1, "config_sha256": config_sha256, "phases": {}}
        manifest = json.loads(json.dumps(manifest))
        directory = self.root / phase_key
        files = {
            str(path.relative_to(self.root)): sha256_of(path)
            for path in sorted(directory.rglob("*"))
            if path.is_file()
        }
        manifest["phases"][phase_key] = {
            "wall_time": wall_time,
            "files": files,
            "details": details or {},
        }
        if train_rows is not None:
            manifest["train_rows"] = train_rows
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / MANIFEST).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
        return manifest
