from rest_framework import serializers

from Cltci.augmentation.serializers import AugmentConfigSerializer
from Cltci.contrastive.serializers import LossConfigSerializer
from Cltci.datasets.serializers import SamplerConfigSerializer
from Cltci.moco.serializers import MoCoConfigSerializer
from Cltci.networks.serializers import EncoderSpecSerializer, ProjectionSpecSerializer
from Cltci.serializers import SectionedSerializer
from .config import FinetuneConfig, PretrainConfig, PretrainVariant


class PretrainConfigSerializer(SectionedSerializer):
    """
    Serializer for a pretraining run.

    `seed` and `encoder.input_size` are left unset here and filled in by
    the run configuration.

    Without an explicit `batch.images_per_patient`, MoCo-style variants
    draw one image per patient and the others two.
    """
    sections = ('batch', 'loss', 'moco', 'augment', 'encoder', 'projection')

    variant = serializers.ChoiceField(
        choices=[choice.value for choice in PretrainVariant],
        default=PretrainVariant.CL_TCI_SIMCLR.value,
    )
    epochs = serializers.IntegerField(min_value=1, default=500)
    base_lr = serializers.FloatField(default=0.1)
    momentum = serializers.FloatField(min_value=0.0, max_value=1.0, default=0.9)
    weight_decay = serializers.FloatField(min_value=0.0, default=1e-4)
    steps_per_epoch = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    seed = serializers.IntegerField(min_value=0, required=False, allow_null=True, default=None)

    batch = SamplerConfigSerializer(required=False)
    loss = LossConfigSerializer(required=False)
    moco = MoCoConfigSerializer(required=False)
    augment = AugmentConfigSerializer(required=False)
    encoder = EncoderSpecSerializer(required=False)
    projection = ProjectionSpecSerializer(required=False)

    def validate(self, attrs):
        attrs = super().validate(attrs)
        if attrs['batch'].get('images_per_patient') is None:
            attrs['batch']['images_per_patient'] = 1 if PretrainVariant(attrs['variant']).is_moco else 2
        return attrs

    def validate_base_lr(self, value):
        if not value > 0:
            raise serializers.ValidationError("Learning rate must be positive.")
        return value

    def create(self, validated_data):
        sections = {name: self.create_section(name, validated_data) for name in self.sections}
        scalars = {key: value for key, value in validated_data.items() if key not in self.sections}
        if scalars.get('seed') is None:
            scalars['seed'] = 0
        return PretrainConfig(**scalars, **sections)


class FinetuneConfigSerializer(SectionedSerializer):
    """
    Serializer for fine-tuning. A null budget stands for the full training fold.
    """
    sections = ('augment', 'encoder')

    epochs = serializers.IntegerField(min_value=1, default=200)
    batch_size = serializers.IntegerField(min_value=1, default=10)
    lr = serializers.FloatField(default=5e-5)
    weight_decay = serializers.FloatField(min_value=0.0, default=0.0)
    budgets = serializers.ListField(
        child=serializers.IntegerField(min_value=1, allow_null=True),
        min_length=1,
        default=[None],
    )
    folds = serializers.IntegerField(min_value=2, default=5)
    seed = serializers.IntegerField(min_value=0, required=False, allow_null=True, default=None)

    augment = AugmentConfigSerializer(required=False, stage='finetune')
    encoder = EncoderSpecSerializer(required=False)

    def validate_lr(self, value):
        if not value > 0:
            raise serializers.ValidationError("Learning rate must be positive.")
        return value

    def create(self, validated_data):
        sections = {name: self.create_section(name, validated_data) for name in self.sections}
        scalars = {key: value for key, value in validated_data.items() if key not in self.sections}
        scalars['budgets'] = tuple(scalars['budgets'])
        if scalars.get('seed') is None:
            scalars['seed'] = 0
        return FinetuneConfig(**scalars, **sections)
