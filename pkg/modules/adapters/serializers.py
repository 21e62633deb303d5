"""
Serializers for the Adapters Module

Model and training sections of a run config, and the checkpoint
``manifest.json``.
"""

from rest_framework import serializers

from modules.adapters.models import ActivationKind, Regime
from modules.numerics.serializers import StrictSerializer
from modules.projections.serializers import ProjectionMetaSerializer


class ModelSpecSerializer(StrictSerializer):
    hidden = serializers.ListField(
        child=serializers.IntegerField(min_value=1, max_value=128),
        min_length=1,
        max_length=3,
    )
    activation = serializers.ChoiceField(
        choices=[kind.value for kind in ActivationKind], default=ActivationKind.TANH.value
    )
    alpha = serializers.FloatField(min_value=0.0, default=16.0)
    regime = serializers.ChoiceField(
        choices=[regime.value for regime in Regime], default=Regime.CORES_ONLY.value
    )

    def validate_alpha(self, value):
        if value <= 0:
            raise serializers.ValidationError("alpha must be positive")
        return value


class TrainSectionSerializer(StrictSerializer):
    epochs = serializers.IntegerField(min_value=1)
    batch_size = serializers.IntegerField(min_value=1)
    learning_rate = serializers.FloatField(min_value=0.0)
    weight_decay = serializers.FloatField(min_value=0.0, default=0.0)
    warmup_fraction = serializers.FloatField(min_value=0.0, max_value=0.99, default=0.1)


class LayerEntrySerializer(StrictSerializer):
    type = serializers.ChoiceField(choices=["linear", "adapted", "activation"])
    name = serializers.CharField()
    n_in = serializers.IntegerField(min_value=1, required=False)
    n_out = serializers.IntegerField(min_value=1, required=False)
    trainable = serializers.BooleanField(required=False)
    kind = serializers.ChoiceField(
        choices=[kind.value for kind in ActivationKind], required=False
    )
    rank = serializers.IntegerField(min_value=1, required=False)
    scale = serializers.FloatField(required=False)
    trainable_ab = serializers.BooleanField(required=False)
    projection = ProjectionMetaSerializer(required=False)

    REQUIRED = {
        "linear": ("n_in", "n_out", "trainable"),
        "adapted": ("n_in", "n_out", "rank", "scale", "trainable_ab", "projection"),
        "activation": ("kind",),
    }

    def validate(self, attrs):
        missing = [key for key in self.REQUIRED[attrs["type"]] if key not in attrs]
        if missing:
            raise serializers.ValidationError(
                {key: ["Required for this layer type."] for key in missing}
            )
        return attrs


class CheckpointManifestSerializer(StrictSerializer):
    format_version = serializers.IntegerField(min_value=1, max_value=1)
    input_dim = serializers.IntegerField(min_value=1)
    n_classes = serializers.IntegerField(min_value=2)
    seed = serializers.IntegerField(min_value=0, required=False, allow_null=True)
    layers = LayerEntrySerializer(many=True)
