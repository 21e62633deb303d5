"""
Management command to build projection pairs from the pretrained network.
"""

from modules.experiments.management.base import PhaseCommand
from modules.experiments.models import Phase
from modules.experiments.services import PipelineService


class Command(PhaseCommand):
    help = "Build and store the frozen projection pair of every target layer"
    phase = Phase.PROJECT

    def run(self, config, store, **options):
        return PipelineService.project(config, store)
