"""
Serializer base classes shared by the app-level configuration serializers.
"""
import math

from rest_framework import serializers


class StrictSerializer(serializers.Serializer):
    """
    Serializer that rejects keys it does not declare.

    Configuration typos must fail loudly instead of silently falling back
    to a default, so unknown keys are reported next to the field errors.
    """

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError(
                    {key: "Unknown field." for key in unknown}
                )
        return super().to_internal_value(data)


class RangeField(serializers.ListField):
    """
    A closed numeric interval written as `[low, high]`.

    A bare number `x` is accepted as the symmetric interval `[-x, x]`.
    """

    def __init__(self, **kwargs):
        self.min_value = kwargs.pop('min_value', None)
        self.max_value = kwargs.pop('max_value', None)
        kwargs.setdefault('child', serializers.FloatField())
        kwargs.setdefault('min_length', 2)
        kwargs.setdefault('max_length', 2)
        super().__init__(**kwargs)

    def to_internal_value(self, data):
        if isinstance(data, (int, float)) and not isinstance(data, bool):
            data = [-abs(data), abs(data)]
        low, high = super().to_internal_value(data)
        if not (math.isfinite(low) and math.isfinite(high)):
            raise serializers.ValidationError("Range bounds must be finite.")
        if low > high:
            raise serializers.ValidationError("Range lower bound exceeds upper bound.")
        if self.min_value is not None and low < self.min_value:
            raise serializers.ValidationError(f"Range must not go below {self.min_value}.")
        if self.max_value is not None and high > self.max_value:
            raise serializers.ValidationError(f"Range must not exceed {self.max_value}.")
        return (low, high)

    def to_representation(self, data):
        return [float(value) for value in data]


class SectionedSerializer(StrictSerializer):
    """
    Strict serializer whose nested sections may be omitted.

    Missing sections listed in `sections` are validated from an empty
    mapping, so their own defaults apply and `create` always sees every
    section.
    """
    sections = ()

    def validate(self, attrs):
        for name in self.sections:
            if attrs.get(name) is None:
                attrs[name] = self.fields[name].run_validation({})
        return attrs

    def create_section(self, name, validated_data):
        return self.fields[name].create(validated_data[name])
