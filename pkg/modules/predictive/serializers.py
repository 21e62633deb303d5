"""
Serializers for the Predictive Module
"""

from rest_framework import serializers

from modules.numerics.serializers import StrictSerializer


class EvaluationSectionSerializer(StrictSerializer):
    """The ``evaluation`` section of a run config."""

    ece_bins = serializers.IntegerField(min_value=1, default=15)
