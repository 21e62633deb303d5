"""
Management command to fit the SWAG posterior.
"""

from modules.experiments.management.base import PhaseCommand
from modules.experiments.models import Phase
from modules.experiments.services import PipelineService


class Command(PhaseCommand):
    help = "Collect a SWAG posterior from the burn-in checkpoint"
    phase = Phase.SWAG

    def run(self, config, store, **options):
        return PipelineService.fit_swag(config, store)
