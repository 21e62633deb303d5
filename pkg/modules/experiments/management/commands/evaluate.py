"""
Management command to evaluate one posterior on the test split.
"""

from modules.experiments.management.base import PhaseCommand
from modules.experiments.models import Phase
from modules.experiments.services import PipelineService


class Command(PhaseCommand):
    help = "Accuracy, ECE, NLL and entropy decomposition on the test split"
    phase = Phase.EVALUATE
    takes_posterior = True

    def run(self, config, store, **options):
        return PipelineService.evaluate(config, store, options["posterior"])
