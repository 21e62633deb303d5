"""
Serializers for the Laplace Module
"""

from rest_framework import serializers

from modules.laplace.models import Link, Structure
from modules.numerics.serializers import StrictSerializer


class PriorGridSerializer(StrictSerializer):
    """``points`` values of λ spaced log-uniformly on [low, high]."""

    low = serializers.FloatField(min_value=0.0)
    high = serializers.FloatField(min_value=0.0)
    points = serializers.IntegerField(min_value=1)

    def validate(self, attrs):
        if attrs["low"] <= 0 or attrs["high"] < attrs["low"]:
            raise serializers.ValidationError("grid needs 0 < low <= high")
        return attrs


class LaplaceSectionSerializer(StrictSerializer):
    """The ``laplace`` section of a run config."""

    structure = serializers.ChoiceField(
        choices=[s.value for s in Structure], default=Structure.KRON.value
    )
    checkpoint_epoch = serializers.IntegerField(min_value=1, required=False, allow_null=True)
    grid = PriorGridSerializer(required=False)
    samples = serializers.IntegerField(min_value=1, default=15)
    link = serializers.ChoiceField(
        choices=[link.value for link in Link], default=Link.LINEARIZED.value
    )


class KronLayerSerializer(StrictSerializer):
    layer_index = serializers.IntegerField(min_value=0)
    start = serializers.IntegerField(min_value=0)
    stop = serializers.IntegerField(min_value=1)


class LaplaceMetaSerializer(StrictSerializer):
    structure = serializers.ChoiceField(choices=[s.value for s in Structure])
    prior_precision = serializers.FloatField()
    n_data = serializers.IntegerField(min_value=1)
    dim = serializers.IntegerField(min_value=0)
    grid = serializers.ListField(child=serializers.FloatField())
    log_evidence = serializers.ListField(child=serializers.FloatField())
    checkpoint_epoch = serializers.IntegerField(min_value=1, required=False, allow_null=True)
    layers = KronLayerSerializer(many=True, required=False)

    def validate_prior_precision(self, value):
        if value <= 0:
            raise serializers.ValidationError("prior precision must be positive")
        return value
