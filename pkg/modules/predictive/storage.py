"""
Evaluation artifacts: metrics as sorted JSON, per-input entropies as CSV.
"""

import json
from pathlib import Path

import numpy as np
import pandas as pd

from modules.predictive.models import EntropyArrays

ENTROPY_COLUMNS = ["total", "aleatoric", "epistemic"]


class ReportStore:
    @staticmethod
    def dumps(payload):
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @staticmethod
    def write_json(path, payload):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(ReportStore.dumps(payload))
        return path

    @staticmethod
    def read_json(path):
        return json.loads(Path(path).read_text())

    @staticmethod
    def write_entropies(path, entropies):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame(
            {column: getattr(entropies, column) for column in ENTROPY_COLUMNS}
        )
        frame.to_csv(path, index_label="index", float_format="%.17g", lineterminator="\n")
        return path

    @staticmethod
    def read_entropies(path):
        frame = pd.read_csv(path, index_col="index", float_precision="round_trip")
        return EntropyArrays(
            **{column: frame[column].to_numpy(dtype=np.float64) for column in ENTROPY_COLUMNS}
        )
