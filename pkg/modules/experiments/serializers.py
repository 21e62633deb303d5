"""
Serializers for the Experiments Module

``RunConfigSerializer`` validates a whole run file before any phase starts.
Unknown keys are rejected at every level.
"""

from rest_framework import serializers

from modules.adapters.serializers import ModelSpecSerializer, TrainSectionSerializer
from modules.experiments.models import Generator
from modules.laplace.serializers import LaplaceSectionSerializer
from modules.numerics.serializers import StrictSerializer
from modules.predictive.serializers import EvaluationSectionSerializer
from modules.projections.serializers import ProjectionSpecSerializer
from modules.swag.serializers import SwagSectionSerializer

MAX_SEED = 2**64 - 1


class CsvSourceSerializer(StrictSerializer):
    """Existing CSV files; each carries feature columns and a ``label`` column."""

    train = serializers.CharField()
    val = serializers.CharField()
    test = serializers.CharField()
    pretrain = serializers.CharField()
    ood = serializers.DictField(child=serializers.CharField(), default=dict)


class DatasetSectionSerializer(StrictSerializer):
    generator = serializers.ChoiceField(choices=[g.value for g in Generator], required=False)
    csv = CsvSourceSerializer(required=False)
    n_train = serializers.IntegerField(min_value=2, default=400)
    n_val = serializers.IntegerField(min_value=2, default=200)
    n_test = serializers.IntegerField(min_value=2, default=400)
    n_pretrain = serializers.IntegerField(min_value=2, default=800)
    n_ood = serializers.IntegerField(min_value=2, default=400)
    noise = serializers.FloatField(min_value=0.0, default=0.15)
    centers = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField(), min_length=1),
        min_length=2,
        default=lambda: [[3.0, 3.0], [-3.0, -3.0]],
    )
    std = serializers.FloatField(min_value=0.0, default=0.5)
    pretrain_rotation = serializers.FloatField(default=0.6)
    ood_shifts = serializers.ListField(
        child=serializers.FloatField(min_value=0.0), default=lambda: [1.5, 3.0]
    )

    def validate(self, attrs):
        if ("generator" in attrs) == ("csv" in attrs):
            raise serializers.ValidationError("give exactly one of 'generator' or 'csv'")
        widths = {len(center) for center in attrs["centers"]}
        if len(widths) != 1:
            raise serializers.ValidationError({"centers": "all centers need the same dimension"})
        return attrs


class RunConfigSerializer(StrictSerializer):
    seed = serializers.IntegerField(min_value=0, max_value=MAX_SEED, default=0)
    output_dir = serializers.CharField(default="runs/default")
    train_fraction = serializers.FloatField(min_value=0.0, max_value=1.0, default=1.0)
    dataset = DatasetSectionSerializer()
    model = ModelSpecSerializer()
    pretrain = TrainSectionSerializer()
    projection = ProjectionSpecSerializer()
    train = TrainSectionSerializer()
    swag = SwagSectionSerializer(required=False)
    laplace = LaplaceSectionSerializer(required=False)
    evaluation = EvaluationSectionSerializer(required=False)

    def validate_train_fraction(self, value):
        if value <= 0:
            raise serializers.ValidationError("train_fraction must be in (0, 1]")
        return value

    def validate(self, attrs):
        epochs = attrs["train"]["epochs"]
        swag = attrs.get("swag")
        if swag is not None and swag["burn_in_epoch"] > epochs:
            raise serializers.ValidationError(
                {"swag": f"burn_in_epoch must not exceed train.epochs ({epochs})"}
            )
        laplace = attrs.get("laplace") or {}
        if (laplace.get("checkpoint_epoch") or 0) > epochs:
            raise serializers.ValidationError(
                {"laplace": f"checkpoint_epoch must not exceed train.epochs ({epochs})"}
            )
        return attrs


class PhaseRecordSerializer(StrictSerializer):
    wall_time = serializers.FloatField(min_value=0.0)
    files = serializers.DictField(child=serializers.CharField())
    details = serializers.DictField(default=dict)


class RunManifestSerializer(StrictSerializer):
    format_version = serializers.IntegerField(min_value=1, max_value=1)
    config_sha256 = serializers.CharField()
    train_rows = serializers.IntegerField(min_value=0, required=False, allow_null=True)
    phases = serializers.DictField(child=PhaseRecordSerializer())
