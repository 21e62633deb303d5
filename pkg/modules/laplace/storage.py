"""
Laplace posteriors on disk: ``theta_map.sbmx``, ``meta.json`` and either
``h.sbmx`` (DIAG) or ``Acov_<layer>.sbmx`` / ``Gcov_<layer>.sbmx`` (KRON).
"""

import json
from pathlib import Path

from modules.laplace.models import (
    CurvatureDiag,
    CurvatureKron,
    KronFactor,
    LaplacePosterior,
    Structure,
)
from modules.laplace.serializers import LaplaceMetaSerializer
from modules.numerics.exceptions import MatrixFormatError
from modules.numerics.serializers import validated
from modules.numerics.storage import MatrixStore


class LaplaceStore:
    @staticmethod
    def save(posterior, directory, checkpoint_epoch=None):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        MatrixStore.save(directory / "theta_map.sbmx", posterior.theta_map.reshape(-1, 1))
        meta = {
            "structure": posterior.structure.value,
            "prior_precision": posterior.prior_precision,
            "n_data": posterior.n_data,
            "dim": posterior.dim,
            "grid": list(posterior.grid),
            "log_evidence": list(posterior.log_evidence),
            "checkpoint_epoch": checkpoint_epoch,
        }
        if posterior.structure is Structure.DIAG:
            MatrixStore.save(directory / "h.sbmx", posterior.curvature.h.reshape(-1, 1))
        else:
            meta["layers"] = []
            for factor in posterior.curvature.factors:
                MatrixStore.save(directory / f"Acov_{factor.layer_index}.sbmx", factor.A_cov)
                MatrixStore.save(directory / f"Gcov_{factor.layer_index}.sbmx", factor.G_cov)
                meta["layers"].append(
                    {"layer_index": factor.layer_index, "start": factor.start, "stop": factor.stop}
                )
        (directory / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2))
        return directory

    @staticmethod
    def load(directory):
        directory = Path(directory)
        meta = validated(LaplaceMetaSerializer, json.loads((directory / "meta.json").read_text()))
        theta = MatrixStore.load_vector(directory / "theta_map.sbmx")
        if theta.shape[0] != meta["dim"]:
            raise MatrixFormatError(
                f"theta_map has length {theta.shape[0]}, meta says {meta['dim']}"
            )
        if meta["structure"] == Structure.DIAG.value:
            h = MatrixStore.load_vector(directory / "h.sbmx")
            curvature = CurvatureDiag(h=h, n_data=meta["n_data"])
        else:
            factors = [
                KronFactor(
                    layer_index=layer["layer_index"],
                    start=layer["start"],
                    stop=layer["stop"],
                    A_cov=MatrixStore.load(directory / f"Acov_{layer['layer_index']}.sbmx"),
                    G_cov=MatrixStore.load(directory / f"Gcov_{layer['layer_index']}.sbmx"),
                )
                for layer in meta.get("layers", [])
            ]
            curvature = CurvatureKron(factors=factors, n_data=meta["n_data"])
        return LaplacePosterior(
            theta_map=theta,
            structure=meta["structure"],
            prior_precision=meta["prior_precision"],
            curvature=curvature,
            grid=meta["grid"],
            log_evidence=meta["log_evidence"],
        )

    @staticmethod
    def checkpoint_epoch(directory):
        meta = json.loads((Path(directory) / "meta.json").read_text())
        return meta.get("checkpoint_epoch")
