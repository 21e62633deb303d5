"""
Management command to pretrain the base network.
"""

from modules.experiments.management.base import PhaseCommand
from modules.experiments.models import Phase
from modules.experiments.services import PipelineService


class Command(PhaseCommand):
    help = "Train the full base network on the shifted pretraining set"
    phase = Phase.PRETRAIN

    def run(self, config, store, **options):
        return PipelineService.pretrain(config, store)
