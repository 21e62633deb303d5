"""
Serializers shared by every module that persists ``meta.json`` payloads
or reads run configuration.
"""

from collections.abc import Mapping

from rest_framework import serializers


class StrictSerializer(serializers.Serializer):
    """Serializer that rejects keys it does not declare, at every nesting level."""

    def to_internal_value(self, data):
        if isinstance(data, Mapping):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError(
                    {key: ["Unknown field."] for key in unknown}
                )
        return super().to_internal_value(data)


class IndexListField(serializers.ListField):
    """List of non-negative integer indices."""

    child = serializers.IntegerField(min_value=0)


def validated(serializer_class, payload, **kwargs):
    """Validate ``payload`` and return the cleaned data, raising ValidationError."""
    serializer = serializer_class(data=payload, **kwargs)
    serializer.is_valid(raise_exception=True)
    return serializer.validated_data
