"""
Services for the SWAG Module
"""

import dataclasses
import logging
import math

import numpy as np
from django.conf import settings

from modules.adapters.models import Schedule
from modules.adapters.services import NetworkService, TrainingService
from modules.numerics.exceptions import ShapeError
from modules.numerics.models import as_vector
from modules.swag.models import SwagCollector, SwagFit, SwagPosterior

logger = logging.getLogger(__name__)

SWAG_STREAM = 1


def _values(theta):
    return as_vector(getattr(theta, "values", theta), name="theta")


class SwagService:
    @staticmethod
    def collector(dim, k=None):
        k = settings.SUBSPACE_BAYES["SWAG_RANK"] if k is None else k
        return SwagCollector(dim=dim, k=k)

    @staticmethod
    def collect(collector, theta):
        """
        Absorb one snapshot.

        The mean is updated first; the stored deviation is taken against
        the updated mean.
        """
        theta = _values(theta)
        if theta.shape != (collector.dim,):
            raise ShapeError(f"theta has length {theta.shape[0]}, collector dim is {collector.dim}")
        collector.count += 1
        collector.mean = collector.mean + (theta - collector.mean) / collector.count
        collector.sq_mean = collector.sq_mean + (theta**2 - collector.sq_mean) / collector.count
        if collector.k:
            collector.deviations.append(theta - collector.mean)
        return collector

    @staticmethod
    def finalize(collector, burn_in_epoch=None):
        if collector.count < 2:
            raise ValueError(f"SWAG needs at least 2 snapshots, got {collector.count}")
        floor = settings.SUBSPACE_BAYES["VARIANCE_FLOOR"]
        return SwagPosterior(
            mu=collector.mean.copy(),
            sigma2=np.maximum(collector.sq_mean - collector.mean**2, floor),
            D=collector.deviation_matrix(),
            k=collector.k,
            collected=collector.count,
            burn_in_epoch=burn_in_epoch,
        )

    @staticmethod
    def sample(posterior, rng):
        """θ = μ + √(σ²/2)·z₁ + D·z₂/√2, drawn z₁ first."""
        z_diag = rng.standard_normal(posterior.dim)
        z_low_rank = rng.standard_normal(posterior.D.shape[1])
        return (
            posterior.mu
            + np.sqrt(0.5 * posterior.sigma2) * z_diag
            + (posterior.D @ z_low_rank) / math.sqrt(2.0)
        )

    @staticmethod
    def fit(checkpoint, train, cfg, swag_settings, val=None):
        """
        Continue training the cores of the burn-in checkpoint at a constant
        rate ``lr·lr_ratio`` and collect θ once per epoch.

        The head and every other tensor stay at their checkpoint values, so
        samples differ from the checkpoint only in θ.
        """
        swag_cfg = dataclasses.replace(
            cfg,
            epochs=swag_settings.collect_epochs,
            learning_rate=cfg.learning_rate * swag_settings.lr_ratio,
            schedule=Schedule.CONSTANT,
            warmup_fraction=0.0,
            checkpoint_epochs=(),
        )
        result = TrainingService.train_map(
            NetworkService.cores_only(checkpoint), train, swag_cfg, val=val, stream=SWAG_STREAM
        )
        dim = len(NetworkService.flatten(checkpoint))
        collector = SwagService.collector(dim, swag_settings.k)
        for theta in result.thetas:
            SwagService.collect(collector, theta)
        posterior = SwagService.finalize(collector, burn_in_epoch=swag_settings.burn_in_epoch)
        logger.info(
            "SWAG posterior over %d cores from %d snapshots (k=%d)",
            dim,
            collector.count,
            collector.k,
        )
        return SwagFit(
            posterior=posterior,
            collector=collector,
            network=checkpoint,
            trajectory=result.trajectory,
        )
