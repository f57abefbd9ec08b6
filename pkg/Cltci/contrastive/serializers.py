from rest_framework import serializers

from Cltci.serializers import StrictSerializer
from .losses import LossConfig, Reduction


class LossConfigSerializer(StrictSerializer):
    """
    Serializer for the contrastive loss settings.
    """
    temperature = serializers.FloatField(default=0.1)
    reduction = serializers.ChoiceField(
        choices=[choice.value for choice in Reduction],
        default=Reduction.MEAN.value,
    )

    def validate_temperature(self, value):
        if not value > 0:
            raise serializers.ValidationError("Temperature must be positive.")
        return value

    def create(self, validated_data):
        return LossConfig(**validated_data)
