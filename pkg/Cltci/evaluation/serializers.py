from dataclasses import dataclass

from rest_framework import serializers

from Cltci.serializers import StrictSerializer


@dataclass(frozen=True)
class EvalConfig:
    k: int = 3
    permutations: int = 100


class EvalConfigSerializer(StrictSerializer):
    """
    Serializer for embedding evaluation settings.
    """
    k = serializers.IntegerField(min_value=1, default=3)
    permutations = serializers.IntegerField(min_value=1, default=100)

    def create(self, validated_data):
        return EvalConfig(**validated_data)
