"""
Serializers for the Projections Module

Validate projection specs in run configs and the ``meta.json`` written
beside every persisted pair.
"""

from rest_framework import serializers

from modules.numerics.serializers import IndexListField, StrictSerializer
from modules.projections.models import ProjectionKind


class ProjectionSpecSerializer(StrictSerializer):
    """The ``projection`` section of a run config."""

    kind = serializers.ChoiceField(choices=ProjectionKind.choices())
    rank = serializers.IntegerField(min_value=1)
    seed = serializers.IntegerField(min_value=0, max_value=2**64 - 1, required=False)
    permute = serializers.BooleanField(default=True)
    ridge = serializers.FloatField(min_value=0.0, required=False, allow_null=True)
    whitening_source = serializers.ChoiceField(
        choices=["train", "pretrain"], required=False
    )
    components = serializers.ListField(
        child=serializers.ChoiceField(choices=ProjectionKind.base_choices()),
        required=False,
    )

    def validate(self, attrs):
        if attrs["kind"] == ProjectionKind.HYBRID.value:
            if len(attrs.get("components", [])) != 2:
                raise serializers.ValidationError(
                    {"components": "HYBRID needs exactly two component kinds"}
                )
            if attrs["rank"] % 2:
                raise serializers.ValidationError({"rank": "HYBRID rank must be even"})
        elif attrs.get("components"):
            raise serializers.ValidationError(
                {"components": "only HYBRID projections take components"}
            )
        return attrs


class ComponentMetaSerializer(StrictSerializer):
    """Provenance carried by a single-kind pair."""

    seed = serializers.IntegerField(min_value=0, required=False)
    effective_seed = serializers.IntegerField(min_value=0, required=False)
    ridge = serializers.FloatField(min_value=0.0, required=False)
    permute = serializers.BooleanField(required=False)
    row_indices = IndexListField(required=False)
    col_indices = IndexListField(required=False)
    row_order = IndexListField(required=False)
    col_order = IndexListField(required=False)


class ProjectionMetaSerializer(ComponentMetaSerializer):
    """``meta.json`` of a persisted pair."""

    kind = serializers.ChoiceField(choices=ProjectionKind.choices())
    rank = serializers.IntegerField(min_value=1)
    components = serializers.ListField(
        child=serializers.ChoiceField(choices=ProjectionKind.base_choices()),
        required=False,
    )
    component_meta = ComponentMetaSerializer(many=True, required=False)
