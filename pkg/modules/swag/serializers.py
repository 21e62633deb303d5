"""
Serializers for the SWAG Module
"""

from rest_framework import serializers

from modules.numerics.serializers import StrictSerializer


class SwagSectionSerializer(StrictSerializer):
    """The ``swag`` section of a run config."""

    burn_in_epoch = serializers.IntegerField(min_value=1)
    k = serializers.IntegerField(min_value=0, default=10)
    collect_epochs = serializers.IntegerField(min_value=2, default=10)
    lr_ratio = serializers.FloatField(min_value=0.0, default=0.1)
    samples = serializers.IntegerField(min_value=1, default=15)


class SwagMetaSerializer(StrictSerializer):
    dim = serializers.IntegerField(min_value=1)
    k = serializers.IntegerField(min_value=0)
    collected = serializers.IntegerField(min_value=2)
    burn_in_epoch = serializers.IntegerField(min_value=1, allow_null=True)
