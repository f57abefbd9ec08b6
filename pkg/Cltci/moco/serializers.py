from rest_framework import serializers

from Cltci.serializers import StrictSerializer
from .queue import MoCoConfig


class MoCoConfigSerializer(StrictSerializer):
    """
    Serializer for the momentum encoder and dictionary settings.
    """
    momentum = serializers.FloatField(min_value=0.0, max_value=1.0, default=0.999)
    queue_capacity = serializers.IntegerField(min_value=1, default=4096)

    def create(self, validated_data):
        return MoCoConfig(**validated_data)
