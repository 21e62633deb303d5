"""
Multi-seed checks on the shipped two-moons run: calibration of the Bayesian
posteriors against MAP, OOD entropy ordering and the SWAG low-rank term.
"""

import json
import shutil
import tempfile
from io import StringIO
from pathlib import Path

import pytest
from django.conf import settings
from django.core.management import call_command
from django.test import SimpleTestCase

from modules.predictive.storage import ReportStore

SEEDS = (0, 1, 2, 3, 4)
BAYESIAN = ("swag", "laplace")
STANDARD_SHIFT = "shift_1.5"
PHASES = ("gen_data", "pretrain", "project", "train_map", "fit_swag", "fit_laplace")


def command(name, config, out, seed, **options):
    call_command(name, config=str(config), out=str(out), seed=seed, stdout=StringIO(), **options)


def metrics(out, posterior):
    return ReportStore.read_json(out / "evaluate" / posterior / "metrics.json")


def ood_report(out, posterior):
    return ReportStore.read_json(out / "ood" / posterior / "report.json")


@pytest.mark.integration
@pytest.mark.slow
class TestTwoMoonsPosteriors(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.tmp = tempfile.TemporaryDirectory()
        root = Path(cls.tmp.name)
        payload = json.loads((Path(settings.BASE_DIR) / "configs" / "two_moons.json").read_text())
        config = root / "two_moons.json"
        config.write_text(json.dumps(payload))
        payload["swag"]["k"] = 0
        diagonal = root / "two_moons_k0.json"
        diagonal.write_text(json.dumps(payload))

        cls.runs, cls.diagonal_runs = {}, {}
        for seed in SEEDS:
            out = root / f"seed_{seed}"
            for name in PHASES:
                command(name, config, out, seed)
            for posterior in ("map", *BAYESIAN):
                command("evaluate", config, out, seed, posterior=posterior)
                command("ood", config, out, seed, posterior=posterior)
            cls.runs[seed] = out

            copy = root / f"seed_{seed}_k0"
            shutil.copytree(out, copy)
            shutil.rmtree(copy / "swag")
            command("fit_swag", diagonal, copy, seed)
            command("evaluate", diagonal, copy, seed, posterior="swag")
            cls.diagonal_runs[seed] = copy

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()
        super().tearDownClass()

    def count(self, posterior, key):
        """Seeds where ``posterior`` scores ``key`` no worse than MAP."""
        return sum(
            metrics(out, posterior)[key] <= metrics(out, "map")[key] for out in self.runs.values()
        )

    def test_posteriors_are_no_less_calibrated_than_map(self):
        for posterior in BAYESIAN:
            assert self.count(posterior, "ece") >= 4, posterior
            assert self.count(posterior, "nll") >= 4, posterior

    def test_posteriors_keep_map_accuracy(self):
        for out in self.runs.values():
            baseline = metrics(out, "map")["accuracy"]
            for posterior in BAYESIAN:
                assert abs(metrics(out, posterior)["accuracy"] - baseline) <= 0.02

    def test_ood_entropy_exceeds_id_entropy(self):
        for out in self.runs.values():
            for posterior in BAYESIAN:
                total = ood_report(out, posterior)["ood"][STANDARD_SHIFT]["total"]
                assert total["mean_ood"] > total["mean_id"], (out.name, posterior)
                assert total["auroc"] >= 0.7, (out.name, posterior)

    def test_map_has_zero_epistemic_entropy(self):
        for out in self.runs.values():
            report = ood_report(out, "map")
            assert report["samples"] == 1
            assert report["id"]["mean_epistemic"] == 0.0
            assert all(scores["epistemic"]["mean_ood"] == 0.0 for scores in report["ood"].values())

    def test_low_rank_term_does_not_raise_nll(self):
        lower = sum(
            metrics(self.diagonal_runs[seed], "swag")["nll"]
            >= metrics(self.runs[seed], "swag")["nll"]
            for seed in SEEDS
        )

        assert lower >= 4

    def test_diagonal_variant_stores_mean_and_variance_only(self):
        for out in self.diagonal_runs.values():
            budget = metrics(out, "swag")["parameters"]
            assert budget["posterior"] == 2 * budget["theta_dim"]
