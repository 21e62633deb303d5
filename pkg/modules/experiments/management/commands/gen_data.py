"""
Management command to write every dataset of a run as CSV.
"""

from modules.experiments.management.base import PhaseCommand
from modules.experiments.models import Phase
from modules.experiments.services import PipelineService


class Command(PhaseCommand):
    help = "Generate or import the train/val/test/pretrain and OOD datasets"
    phase = Phase.DATA

    def run(self, config, store, **options):
        return PipelineService.gen_data(config, store)
