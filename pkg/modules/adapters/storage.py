"""
Network checkpoints: ``manifest.json`` plus one SBMX file per named matrix.
"""

import json
import logging
from pathlib import Path

from rest_framework.exceptions import ValidationError

from modules.adapters.exceptions import CheckpointError
from modules.adapters.models import Activation, AdaptedLinear, Linear, Network
from modules.adapters.serializers import CheckpointManifestSerializer
from modules.numerics.exceptions import MatrixFormatError, ShapeError
from modules.numerics.serializers import validated
from modules.numerics.storage import MatrixStore
from modules.projections.models import ProjectionPair

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
LOAD_ERRORS = (OSError, json.JSONDecodeError, ValidationError, MatrixFormatError, ShapeError)


def _matrices(layer):
    if isinstance(layer, Linear):
        return {"W": layer.W, "b": layer.b}
    matrices = {"W0": layer.W0, "bias": layer.bias, "A": layer.A, "B": layer.B, "R": layer.R}
    if layer.trainable_ab:
        matrices.update({"pair_A": layer.pair.A, "pair_B": layer.pair.B})
    return matrices


def _entry(layer):
    if isinstance(layer, Activation):
        return {"type": "activation", "name": layer.name, "kind": layer.kind.value}
    if isinstance(layer, Linear):
        return {
            "type": "linear",
            "name": layer.name,
            "n_in": layer.n_in,
            "n_out": layer.n_out,
            "trainable": layer.trainable,
        }
    return {
        "type": "adapted",
        "name": layer.name,
        "n_in": layer.n_in,
        "n_out": layer.n_out,
        "rank": layer.rank,
        "scale": layer.scale,
        "trainable_ab": layer.trainable_ab,
        "projection": {"kind": layer.pair.kind.value, "rank": layer.rank, **layer.pair.meta},
    }


class CheckpointStore:
    @staticmethod
    def save(net, directory, seed=None):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = {
            "format_version": 1,
            "input_dim": net.input_dim,
            "n_classes": net.n_classes,
            "seed": seed,
            "layers": [_entry(layer) for layer in net.layers],
        }
        for layer in net.layers:
            if isinstance(layer, Activation):
                continue
            for key, matrix in _matrices(layer).items():
                MatrixStore.save(directory / f"{layer.name}.{key}.sbmx", matrix)
        (directory / MANIFEST).write_text(json.dumps(manifest, sort_keys=True, indent=2))
        logger.debug("checkpoint with %d layers written to %s", len(net.layers), directory)
        return directory

    @staticmethod
    def load(directory):
        directory = Path(directory)
        try:
            manifest = validated(
                CheckpointManifestSerializer, json.loads((directory / MANIFEST).read_text())
            )
            layers = [CheckpointStore._load_layer(directory, entry) for entry in manifest["layers"]]
            net = Network(layers=layers, n_classes=manifest["n_classes"])
        except LOAD_ERRORS as exc:
            raise CheckpointError(f"cannot load checkpoint {directory}: {exc}") from exc
        if net.input_dim != manifest["input_dim"]:
            raise CheckpointError(
                f"manifest input_dim {manifest['input_dim']} != network {net.input_dim}"
            )
        return net

    @staticmethod
    def _load_layer(directory, entry):
        name = entry["name"]

        def matrix(key, vector=False):
            path = directory / f"{name}.{key}.sbmx"
            return MatrixStore.load_vector(path) if vector else MatrixStore.load(path)

        if entry["type"] == "activation":
            return Activation(kind=entry["kind"], name=name)
        if entry["type"] == "linear":
            layer = Linear(
                name=name,
                W=matrix("W"),
                b=matrix("b", vector=True),
                trainable=entry["trainable"],
            )
            if (layer.n_in, layer.n_out) != (entry["n_in"], entry["n_out"]):
                raise CheckpointError(f"{name}: stored W does not match manifest shape")
            return layer

        rank = entry["rank"]
        core = matrix("R")
        if core.shape != (rank, rank):
            raise CheckpointError(f"{name}: manifest rank {rank} but stored core is {core.shape}")
        projection = dict(entry["projection"])
        if projection.pop("rank") != rank:
            raise CheckpointError(f"{name}: projection rank disagrees with layer rank")
        kind = projection.pop("kind")
        if "component_meta" in projection:
            projection["component_meta"] = [dict(item) for item in projection["component_meta"]]
        a, b = matrix("A"), matrix("B")
        if entry["trainable_ab"]:
            pair_a, pair_b = matrix("pair_A"), matrix("pair_B")
        else:
            pair_a, pair_b = a, b
        pair = ProjectionPair(A=pair_a, B=pair_b, kind=kind, rank=rank, meta=projection)
        return AdaptedLinear(
            name=name,
            W0=matrix("W0"),
            bias=matrix("bias", vector=True),
            pair=pair,
            R=core,
            scale=entry["scale"],
            trainable_ab=entry["trainable_ab"],
            A=a,
            B=b,
        )
