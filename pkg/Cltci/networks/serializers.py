from rest_framework import serializers

from Cltci.serializers import StrictSerializer
from .specs import EncoderSpec, EncoderVariant, ProjectionSpec


class EncoderSpecSerializer(StrictSerializer):
    """
    Serializer for the encoder topology.
    """
    variant = serializers.ChoiceField(
        choices=[choice.value for choice in EncoderVariant],
        default=EncoderVariant.UNET_ENCODER.value,
    )
    input_size = serializers.IntegerField(min_value=1, required=False)
    stage_channels = serializers.ListField(
        child=serializers.IntegerField(min_value=1), min_length=2, required=False
    )
    in_channels = serializers.IntegerField(min_value=1, default=1)

    def create(self, validated_data):
        return EncoderSpec(**validated_data)


class ProjectionSpecSerializer(StrictSerializer):
    """
    Serializer for the projection head.
    """
    hidden_dim = serializers.IntegerField(min_value=1, required=False, allow_null=True)
    output_dim = serializers.IntegerField(min_value=1, default=128)

    def create(self, validated_data):
        return ProjectionSpec(**validated_data)
