"""
SWAG posteriors on disk: ``mu.sbmx``, ``sigma2.sbmx``, ``D.sbmx``, ``meta.json``.
"""

import json
from pathlib import Path

from modules.numerics.exceptions import MatrixFormatError
from modules.numerics.serializers import validated
from modules.numerics.storage import MatrixStore
from modules.swag.models import SwagPosterior
from modules.swag.serializers import SwagMetaSerializer


class SwagStore:
    @staticmethod
    def save(posterior, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        MatrixStore.save(directory / "mu.sbmx", posterior.mu.reshape(-1, 1))
        MatrixStore.save(directory / "sigma2.sbmx", posterior.sigma2.reshape(-1, 1))
        MatrixStore.save(directory / "D.sbmx", posterior.D)
        meta = {
            "dim": posterior.dim,
            "k": posterior.k,
            "collected": posterior.collected,
            "burn_in_epoch": posterior.burn_in_epoch,
        }
        (directory / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2))
        return directory

    @staticmethod
    def load(directory):
        directory = Path(directory)
        meta = validated(SwagMetaSerializer, json.loads((directory / "meta.json").read_text()))
        mu = MatrixStore.load_vector(directory / "mu.sbmx")
        if mu.shape[0] != meta["dim"]:
            raise MatrixFormatError(f"mu has length {mu.shape[0]}, meta says {meta['dim']}")
        return SwagPosterior(
            mu=mu,
            sigma2=MatrixStore.load_vector(directory / "sigma2.sbmx"),
            D=MatrixStore.load(directory / "D.sbmx"),
            k=meta["k"],
            collected=meta["collected"],
            burn_in_epoch=meta["burn_in_epoch"],
        )
