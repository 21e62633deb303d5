"""
Management command to fit the Laplace posterior.
"""

from modules.experiments.management.base import PhaseCommand
from modules.experiments.models import Phase
from modules.experiments.services import PipelineService


class Command(PhaseCommand):
    help = "Fit a Laplace posterior with an evidence-tuned prior precision"
    phase = Phase.LAPLACE

    def run(self, config, store, **options):
        return PipelineService.fit_laplace(config, store)
