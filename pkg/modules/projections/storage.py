"""
Projection pairs on disk: ``A.sbmx``, ``B.sbmx`` and ``meta.json``.
"""

import json
import logging
from pathlib import Path

from modules.numerics.serializers import validated
from modules.numerics.storage import MatrixStore
from modules.projections.models import ProjectionPair
from modules.projections.serializers import ProjectionMetaSerializer

logger = logging.getLogger(__name__)


def _plain(meta):
    meta = dict(meta)
    if "component_meta" in meta:
        meta["component_meta"] = [dict(item) for item in meta["component_meta"]]
    return meta


class ProjectionStore:
    @staticmethod
    def save(pair, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        payload = {"kind": pair.kind.value, "rank": pair.rank, **pair.meta}
        validated(ProjectionMetaSerializer, payload)
        MatrixStore.save(directory / "A.sbmx", pair.A)
        MatrixStore.save(directory / "B.sbmx", pair.B)
        (directory / "meta.json").write_text(json.dumps(payload, sort_keys=True, indent=2))
        logger.debug("saved %s pair of rank %d to %s", pair.kind.value, pair.rank, directory)
        return directory

    @staticmethod
    def load(directory):
        directory = Path(directory)
        meta = _plain(
            validated(
                ProjectionMetaSerializer,
                json.loads((directory / "meta.json").read_text()),
            )
        )
        kind = meta.pop("kind")
        rank = meta.pop("rank")
        return ProjectionPair(
            A=MatrixStore.load(directory / "A.sbmx"),
            B=MatrixStore.load(directory / "B.sbmx"),
            kind=kind,
            rank=rank,
            meta=meta,
        )
