"""
Management command to score OOD separation for one posterior.
"""

from modules.experiments.management.base import PhaseCommand
from modules.experiments.models import Phase
from modules.experiments.services import PipelineService


class Command(PhaseCommand):
    help = "Entropy-based separation of the test split from every OOD set"
    phase = Phase.OOD
    takes_posterior = True

    def run(self, config, store, **options):
        return PipelineService.ood(config, store, options["posterior"])
