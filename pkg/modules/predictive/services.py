"""
Services for the Predictive Module
"""

import logging

import numpy as np
from django.conf import settings
from scipy.special import entr, softmax
from scipy.stats import wasserstein_distance
from sklearn.metrics import roc_auc_score

from modules.adapters.services import NetworkService
from modules.laplace.models import LaplacePosterior, Link
from modules.laplace.services import LaplaceService
from modules.numerics.exceptions import ShapeError
from modules.numerics.models import SeededRng
from modules.predictive.models import (
    EntropyArrays,
    OodScore,
    PointPosterior,
    PredictiveSamples,
    ReliabilityBin,
    UncertaintyTriple,
)
from modules.swag.models import SwagPosterior
from modules.swag.services import SwagService

logger = logging.getLogger(__name__)


def _defaults():
    return settings.SUBSPACE_BAYES


def _rng(rng):
    return rng if isinstance(rng, SeededRng) else SeededRng(0 if rng is None else rng)


def _nonempty(values, name):
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise ValueError(f"{name} must not be empty")
    return values


class PredictiveService:
    """BMA prediction over posterior samples."""

    @staticmethod
    def is_degenerate(posterior):
        return posterior is None or isinstance(posterior, PointPosterior)

    @staticmethod
    def bma_predict(net, posterior, features, samples=None, rng=None, link=Link.MC):
        """
        Class probabilities for S posterior samples, sample j drawn from the
        sub-stream ``seed ^ j``.

        A MAP network (``posterior`` None or a PointPosterior) is evaluated
        once, whatever S is.
        """
        samples = _defaults()["POSTERIOR_SAMPLES"] if samples is None else samples
        if samples < 1:
            raise ValueError(f"need at least one posterior sample, got {samples}")
        rng = _rng(rng)
        link = Link(link)

        if PredictiveService.is_degenerate(posterior):
            if posterior is None:
                logits = NetworkService.logits(net, features)
            else:
                logits = NetworkService.logits_at(net, posterior.theta, features)
            return PredictiveSamples(probs=softmax(logits, axis=1)[:, None, :])

        if isinstance(posterior, LaplacePosterior) and link is Link.LINEARIZED:
            logits, covs = LaplaceService.linearized_logit_covs(net, posterior, features)
            roots = LaplaceService.covariance_roots(covs)
            draws = [
                LaplaceService.draw_logits(logits, roots, rng.spawn(j)) for j in range(samples)
            ]
        else:
            draw = PredictiveService.sampler(posterior)
            draws = [
                NetworkService.logits_at(net, draw(rng.spawn(j)), features) for j in range(samples)
            ]
        probs = softmax(np.stack(draws, axis=1), axis=2)
        logger.debug("BMA over %d samples for %d inputs", samples, probs.shape[0])
        return PredictiveSamples(probs=probs)

    @staticmethod
    def sampler(posterior):
        if isinstance(posterior, SwagPosterior):
            return lambda rng: SwagService.sample(posterior, rng)
        if isinstance(posterior, LaplacePosterior):
            return lambda rng: LaplaceService.sample(posterior, rng)
        raise TypeError(f"no sampler for {type(posterior).__name__}")


class UncertaintyService:
    """Entropy decomposition in nats, with 0·ln 0 = 0."""

    @staticmethod
    def entropy(probs):
        return entr(np.asarray(probs, dtype=np.float64)).sum(axis=-1)

    @staticmethod
    def decompose(samples):
        """Total, aleatoric and epistemic entropy of one S×C sample matrix."""
        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[0] < 1:
            raise ShapeError(f"expected an S×C matrix, got {samples.shape}")
        total = float(UncertaintyService.entropy(samples.mean(axis=0)))
        aleatoric = float(UncertaintyService.entropy(samples).mean())
        return UncertaintyTriple(total=total, aleatoric=aleatoric, epistemic=total - aleatoric)

    @staticmethod
    def decompose_batch(predictive):
        if isinstance(predictive, PredictiveSamples):
            probs = predictive.probs
        else:
            probs = np.asarray(predictive, dtype=np.float64)
        total = UncertaintyService.entropy(probs.mean(axis=1))
        aleatoric = UncertaintyService.entropy(probs).mean(axis=1)
        return EntropyArrays(total=total, aleatoric=aleatoric, epistemic=total - aleatoric)


class MetricsService:
    """Accuracy, NLL, ECE and the OOD separation scores."""

    @staticmethod
    def accuracy(mean_probs, labels):
        """Argmax accuracy; ties resolve to the lowest class index."""
        mean_probs = np.asarray(mean_probs, dtype=np.float64)
        return float(np.mean(np.argmax(mean_probs, axis=1) == np.asarray(labels)))

    @staticmethod
    def nll(mean_probs, labels, floor=None):
        floor = _defaults()["PROBABILITY_FLOOR"] if floor is None else floor
        mean_probs = np.asarray(mean_probs, dtype=np.float64)
        picked = mean_probs[np.arange(mean_probs.shape[0]), np.asarray(labels)]
        return float(-np.mean(np.log(np.maximum(picked, floor))))

    @staticmethod
    def reliability(mean_probs, labels, bins=None):
        """Equal-width bins on max-probability confidence."""
        bins = _defaults()["ECE_BINS"] if bins is None else bins
        if bins < 1:
            raise ValueError(f"bins must be positive, got {bins}")
        mean_probs = np.asarray(mean_probs, dtype=np.float64)
        confidence = mean_probs.max(axis=1)
        correct = np.argmax(mean_probs, axis=1) == np.asarray(labels)
        index = np.clip(np.ceil(confidence * bins).astype(np.int64) - 1, 0, bins - 1)
        result = []
        for b in range(bins):
            members = index == b
            count = int(members.sum())
            result.append(
                ReliabilityBin(
                    lower=b / bins,
                    upper=(b + 1) / bins,
                    count=count,
                    accuracy=float(correct[members].mean()) if count else None,
                    confidence=float(confidence[members].mean()) if count else None,
                )
            )
        return result

    @staticmethod
    def ece(mean_probs, labels, bins=None):
        table = MetricsService.reliability(mean_probs, labels, bins)
        total = sum(entry.count for entry in table)
        return float(
            sum(
                (entry.count / total) * abs(entry.accuracy - entry.confidence)
                for entry in table
                if entry.count
            )
        )

    @staticmethod
    def auroc(scores_ood, scores_id):
        """Mann–Whitney AUROC with OOD as the positive class; ties count ½."""
        ood = _nonempty(scores_ood, "OOD scores")
        ind = _nonempty(scores_id, "ID scores")
        labels = np.concatenate([np.ones(ood.size), np.zeros(ind.size)])
        return float(roc_auc_score(labels, np.concatenate([ood, ind])))

    @staticmethod
    def wasserstein1(a, b):
        return float(wasserstein_distance(_nonempty(a, "a"), _nonempty(b, "b")))

    @staticmethod
    def evaluation(predictive, labels, bins=None):
        """The metrics JSON payload for one posterior on one dataset."""
        mean_probs = predictive.mean_probs()
        entropies = UncertaintyService.decompose_batch(predictive)
        return {
            "accuracy": MetricsService.accuracy(mean_probs, labels),
            "ece": MetricsService.ece(mean_probs, labels, bins),
            "nll": MetricsService.nll(mean_probs, labels),
            "mean_total_entropy": float(entropies.total.mean()),
            "mean_aleatoric": float(entropies.aleatoric.mean()),
            "mean_epistemic": float(entropies.epistemic.mean()),
            "samples": predictive.n_samples,
            "reliability": [
                entry.as_dict() for entry in MetricsService.reliability(mean_probs, labels, bins)
            ],
        }

    @staticmethod
    def ood_scores(id_entropies, ood_entropies):
        """AUROC and W₁ between ID and one OOD set, for each score kind."""
        report = {}
        for kind in OodScore:
            ood = ood_entropies.score(kind)
            ind = id_entropies.score(kind)
            report[kind.value] = {
                "auroc": MetricsService.auroc(ood, ind),
                "w1": MetricsService.wasserstein1(ood, ind),
                "mean_id": float(np.mean(ind)),
                "mean_ood": float(np.mean(ood)),
            }
        return report
