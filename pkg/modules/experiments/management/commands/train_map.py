"""
Management command to fine-tune the adapted network.
"""

from modules.experiments.management.base import PhaseCommand
from modules.experiments.models import Phase
from modules.experiments.services import PipelineService


class Command(PhaseCommand):
    help = "Fine-tune the adapter cores to MAP and keep the posterior checkpoints"
    phase = Phase.MAP

    def run(self, config, store, **options):
        return PipelineService.train_map(config, store)
