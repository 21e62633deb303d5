"""
Shared plumbing for the pipeline management commands.
"""

import logging
import time

from django.core.management.base import BaseCommand, CommandError
from rest_framework.exceptions import ValidationError

from modules.adapters.exceptions import CheckpointError
from modules.experiments.exceptions import ConfigError, MissingArtifactError
from modules.experiments.services import ConfigService, run_store
from modules.numerics.exceptions import MatrixFormatError, NumericalError
from modules.predictive.models import PosteriorKind

logger = logging.getLogger(__name__)

EXIT_MISSING = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class PhaseCommand(BaseCommand):
    """
    Load the run config, run one phase, record it in the manifest.

    Subclasses set ``phase`` and implement ``run(config, store, **options)``
    returning the details to record.
    """

    phase = None
    takes_posterior = False

    def add_arguments(self, parser):
        parser.add_argument("--config", required=True, help="Path to the run config JSON")
        parser.add_argument("--out", help="Override output_dir")
        parser.add_argument("--train-fraction", type=float, help="Override train_fraction")
        parser.add_argument("--seed", type=int, help="Override the run seed")
        if self.takes_posterior:
            parser.add_argument(
                "--posterior",
                choices=[kind.value for kind in PosteriorKind],
                default=PosteriorKind.MAP.value,
            )

    def handle(self, *args, **options):
        try:
            config = ConfigService.load(
                options["config"],
                seed=options.get("seed"),
                output_dir=options.get("out"),
                train_fraction=options.get("train_fraction"),
            )
            store = run_store(config)
            phase_options = {key: value for key, value in options.items() if key != "config"}
            started = time.perf_counter()
            details = self.run(config, store, **phase_options)
            wall_time = time.perf_counter() - started
            store.record(
                self.phase_key(options),
                config.digest,
                wall_time,
                details=details,
                train_rows=details.get("train_rows"),
            )
        except NumericalError as exc:
            raise CommandError(f"numerical failure: {exc}", returncode=EXIT_NUMERICAL) from exc
        except (MissingArtifactError, CheckpointError, MatrixFormatError) as exc:
            raise CommandError(str(exc), returncode=EXIT_MISSING) from exc
        except (ConfigError, ValidationError) as exc:
            raise CommandError(str(exc), returncode=EXIT_CONFIG) from exc
        except ValueError as exc:
            # ShapeError included: ranks or widths the run config asked for
            raise CommandError(f"invalid configuration: {exc}", returncode=EXIT_CONFIG) from exc

        logger.info("%s finished in %.2fs", self.phase.value, wall_time)
        directory = store.path(self.phase)
        message = f"{self.phase.value} done in {wall_time:.2f}s, outputs under {directory}"
        self.stdout.write(self.style.SUCCESS(message))

    def phase_key(self, options):
        if self.takes_posterior:
            return f"{self.phase.value}/{options['posterior']}"
        return self.phase.value

    def run(self, config, store, **options):
        raise NotImplementedError
