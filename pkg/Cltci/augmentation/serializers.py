from rest_framework import serializers

from Cltci.serializers import RangeField, StrictSerializer
from .transforms import AugmentConfig


class AugmentConfigSerializer(StrictSerializer):
    """
    Serializer for augmentation ranges.

    Fields left out fall back to the defaults of the serializer's stage
    (`pretrain` or `finetune`).
    """
    rotation_degrees = RangeField(required=False, min_value=-180.0, max_value=180.0)
    translation_fraction = RangeField(required=False, min_value=-1.0, max_value=1.0)
    scale = RangeField(required=False, min_value=1e-3)
    horizontal_flip_prob = serializers.FloatField(required=False, min_value=0.0, max_value=1.0)
    intensity_jitter = serializers.FloatField(required=False, min_value=0.0)
    pad_value = serializers.FloatField(required=False)
    seed = serializers.IntegerField(required=False, allow_null=True)

    def __init__(self, *args, stage='pretrain', **kwargs):
        self.stage = stage
        super().__init__(*args, **kwargs)

    def create(self, validated_data):
        if self.stage == 'finetune':
            return AugmentConfig.finetuning(**validated_data)
        return AugmentConfig.pretraining(**validated_data)
