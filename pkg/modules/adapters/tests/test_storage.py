"""
Tests for network checkpoints.
"""

import json
import tempfile
from pathlib import Path

import numpy as np
import pytest
from django.test import SimpleTestCase

from modules.adapters.exceptions import CheckpointError
from modules.adapters.factories import AdaptedNetworkFactory, BaseNetworkFactory
from modules.adapters.models import Regime
from modules.adapters.services import NetworkService
from modules.adapters.storage import CheckpointStore
from modules.numerics.models import SeededRng
from modules.projections.models import ProjectionKind


@pytest.mark.unit
class TestCheckpointStore(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        self.inputs = SeededRng(9).standard_normal((6, 2))

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip_reproduces_logits(self):
        net = AdaptedNetworkFactory(core_scale=0.3, kind=ProjectionKind.DCT)

        loaded = CheckpointStore.load(CheckpointStore.save(net, self.root / "ckpt", seed=3))

        assert np.array_equal(
            NetworkService.logits(net, self.inputs), NetworkService.logits(loaded, self.inputs)
        )
        assert loaded.layers[0].pair.meta == net.layers[0].pair.meta

    def test_save_load_save_is_byte_identical(self):
        net = AdaptedNetworkFactory(core_scale=0.3, regime=Regime.ALL)
        first = CheckpointStore.save(net, self.root / "a")
        second = CheckpointStore.save(CheckpointStore.load(first), self.root / "b")

        for path in sorted(first.iterdir()):
            assert path.read_bytes() == (second / path.name).read_bytes(), path.name

    def test_base_network_round_trip(self):
        base = BaseNetworkFactory()

        loaded = CheckpointStore.load(CheckpointStore.save(base, self.root / "base"))

        assert np.array_equal(
            NetworkService.logits(base, self.inputs), NetworkService.logits(loaded, self.inputs)
        )
        assert all(layer.trainable for layer in loaded.layers if hasattr(layer, "trainable"))

    def test_wrong_rank_metadata_rejected(self):
        CheckpointStore.save(AdaptedNetworkFactory(), self.root / "ckpt")
        path = self.root / "ckpt" / "manifest.json"
        manifest = json.loads(path.read_text())
        manifest["layers"][0]["rank"] = 3
        path.write_text(json.dumps(manifest))

        with pytest.raises(CheckpointError):
            CheckpointStore.load(self.root / "ckpt")

    def test_missing_matrix_rejected(self):
        CheckpointStore.save(AdaptedNetworkFactory(), self.root / "ckpt")
        (self.root / "ckpt" / "head.W.sbmx").unlink()

        with pytest.raises(CheckpointError):
            CheckpointStore.load(self.root / "ckpt")

    def test_unknown_manifest_key_rejected(self):
        CheckpointStore.save(AdaptedNetworkFactory(), self.root / "ckpt")
        path = self.root / "ckpt" / "manifest.json"
        manifest = json.loads(path.read_text())
        manifest["extra"] = True
        path.write_text(json.dumps(manifest))

        with pytest.raises(CheckpointError):
            CheckpointStore.load(self.root / "ckpt")
