"""
Test Factories for the SWAG Module
"""

import factory

from modules.swag.models import SwagCollector, SwagSettings


class SwagCollectorFactory(factory.Factory):
    class Meta:
        model = SwagCollector

    dim = 2
    k = 2


class SwagSettingsFactory(factory.Factory):
    class Meta:
        model = SwagSettings

    burn_in_epoch = 3
    k = 4
    collect_epochs = 5
    lr_ratio = 0.1
    samples = 15
