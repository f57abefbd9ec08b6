from pathlib import Path

from rest_framework import serializers

from Cltci.serializers import StrictSerializer
from .preprocessing import Normalization, PreprocessConfig
from .records import ImageRecord
from .sampling import SamplerConfig
from .synthetic import SyntheticConfig


class ImageRecordSerializer(StrictSerializer):
    """
    Serializer for one manifest row.

    Relative paths are resolved against `context['base_dir']`.
    """
    image_id = serializers.CharField(max_length=255)
    patient_id = serializers.CharField(max_length=255)
    image_path = serializers.CharField()
    mask_path = serializers.CharField(required=False, allow_blank=True)
    timestamp_index = serializers.IntegerField(required=False, min_value=0)

    def _resolve(self, value):
        path = Path(value)
        if not path.is_absolute():
            path = Path(self.context.get('base_dir', '.')) / path
        return path

    def create(self, validated_data):
        mask_path = validated_data.get('mask_path') or None
        return ImageRecord(
            image_id=validated_data['image_id'],
            patient_id=validated_data['patient_id'],
            image_path=self._resolve(validated_data['image_path']),
            mask_path=self._resolve(mask_path) if mask_path else None,
            timestamp_index=validated_data.get('timestamp_index'),
        )


class PreprocessConfigSerializer(StrictSerializer):
    """
    Serializer for image preprocessing settings.
    """
    target_size = serializers.IntegerField(min_value=1, default=256)
    pad_value = serializers.FloatField(default=0.0)
    normalization = serializers.ChoiceField(
        choices=[choice.value for choice in Normalization],
        default=Normalization.ZSCORE.value,
    )

    def create(self, validated_data):
        return PreprocessConfig(**validated_data)


class SamplerConfigSerializer(StrictSerializer):
    """
    Serializer for the P x K batch sampler.
    """
    patients_per_batch = serializers.IntegerField(min_value=2, default=16)
    images_per_patient = serializers.IntegerField(min_value=1, required=False, allow_null=True)
    seed = serializers.IntegerField(required=False, allow_null=True, default=None)

    def create(self, validated_data):
        values = {key: value for key, value in validated_data.items() if value is not None or key == 'seed'}
        return SamplerConfig(**values)


class SyntheticConfigSerializer(StrictSerializer):
    """
    Serializer for the synthetic dataset generator.
    """
    num_patients = serializers.IntegerField(min_value=1, default=8)
    images_per_patient = serializers.IntegerField(min_value=1, default=4)
    image_size = serializers.IntegerField(min_value=16, default=64)
    patient_shape_seed = serializers.IntegerField(min_value=0, default=0)
    within_patient_jitter = serializers.FloatField(min_value=0.0, max_value=1.0, default=0.05)
    across_patient_variation = serializers.FloatField(min_value=0.0, max_value=1.0, default=0.30)
    min_images_per_patient = serializers.IntegerField(
        min_value=1, required=False, allow_null=True, default=None
    )
    annotated_fraction = serializers.FloatField(min_value=0.0, max_value=1.0, default=1.0)
    noise_std = serializers.FloatField(min_value=0.0, default=0.02)

    def validate(self, attrs):
        if attrs['within_patient_jitter'] >= attrs['across_patient_variation']:
            raise serializers.ValidationError({
                'within_patient_jitter': "Must be smaller than across_patient_variation."
            })
        minimum = attrs.get('min_images_per_patient')
        if minimum is not None and minimum > attrs['images_per_patient']:
            raise serializers.ValidationError({
                'min_images_per_patient': "Must not exceed images_per_patient."
            })
        return attrs

    def create(self, validated_data):
        return SyntheticConfig(**validated_data)
