from rest_framework import serializers

from Cltci.datasets.serializers import PreprocessConfigSerializer, SyntheticConfigSerializer
from Cltci.evaluation.serializers import EvalConfigSerializer
from Cltci.serializers import SectionedSerializer, StrictSerializer
from Cltci.training.serializers import FinetuneConfigSerializer, PretrainConfigSerializer
from .config import PathsConfig, RunConfig


class PathsConfigSerializer(StrictSerializer):
    """
    Serializer for the input and output locations of a run.
    """
    data_dir = serializers.CharField(default='data/synthetic')
    manifest = serializers.CharField(required=False, allow_null=True, default=None)
    finetune_manifest = serializers.CharField(required=False, allow_null=True, default=None)
    checkpoint = serializers.CharField(required=False, allow_null=True, default=None)
    out_dir = serializers.CharField(required=False, allow_null=True, default=None)

    def create(self, validated_data):
        return PathsConfig(**validated_data)


class RunConfigSerializer(SectionedSerializer):
    """
    Serializer for a whole run configuration.

    The run seed is the default seed of every stage, and the preprocessing
    target size is the default encoder input size.
    """
    sections = ('paths', 'synthetic', 'preprocess', 'pretrain', 'finetune', 'eval')

    seed = serializers.IntegerField(min_value=0, default=0)
    paths = PathsConfigSerializer(required=False)
    synthetic = SyntheticConfigSerializer(required=False)
    preprocess = PreprocessConfigSerializer(required=False)
    pretrain = PretrainConfigSerializer(required=False)
    finetune = FinetuneConfigSerializer(required=False)
    eval = EvalConfigSerializer(required=False)

    def validate(self, attrs):
        attrs = super().validate(attrs)
        seed = attrs['seed']
        target_size = attrs['preprocess']['target_size']
        for name in ('pretrain', 'finetune'):
            section = attrs[name]
            if section.get('seed') is None:
                section['seed'] = seed
            section['encoder'].setdefault('input_size', target_size)
            if section['encoder']['input_size'] != target_size:
                raise serializers.ValidationError({
                    name: {'encoder': {'input_size': f"Must equal preprocess.target_size ({target_size})."}}
                })
        if attrs['pretrain']['batch'].get('seed') is None:
            attrs['pretrain']['batch']['seed'] = attrs['pretrain']['seed']
        return attrs

    def create(self, validated_data):
        try:
            sections = {name: self.create_section(name, validated_data) for name in self.sections}
        except ValueError as exc:
            raise serializers.ValidationError({'config': [str(exc)]})
        return RunConfig(seed=validated_data['seed'], **sections)
