"""Model file: a JSON document validated by DRF serializers."""
import json

import numpy as np
from rest_framework import serializers

from .conformal import NO_THRESHOLD, SetValuedModel
from .exceptions import ModelFormatError
from .kernel import KERNEL_CHOICES, KernelSpec
from .training import METHOD_CHOICES, DecisionFunction

MODEL_FORMAT = 'gps-model/1'


class KernelSerializer(serializers.Serializer):
    family = serializers.ChoiceField(choices=KERNEL_CHOICES)
    sigma = serializers.FloatField()


class DecisionFunctionSerializer(serializers.Serializer):
    label = serializers.CharField(allow_blank=True)
    method = serializers.ChoiceField(choices=METHOD_CHOICES)
    kernel = KernelSerializer()
    d = serializers.ListField(child=serializers.FloatField(min_value=0.0, max_value=1.0), allow_empty=False)
    support = serializers.ListField(child=serializers.ListField(child=serializers.FloatField()))
    coef = serializers.ListField(child=serializers.FloatField())
    rho = serializers.FloatField()
    tau = serializers.FloatField(allow_null=True)

    def validate(self, attrs):
        p = len(attrs['d'])
        if len(attrs['support']) != len(attrs['coef']):
            raise serializers.ValidationError('support and coef must have the same length')
        if any(len(row) != p for row in attrs['support']):
            raise serializers.ValidationError(f'every support row must have {p} entries')
        return attrs


class SetValuedModelSerializer(serializers.Serializer):
    format = serializers.CharField()
    method = serializers.ChoiceField(choices=METHOD_CHOICES)
    gamma = serializers.FloatField(min_value=0.0, max_value=1.0)
    class_names = serializers.ListField(child=serializers.CharField(), allow_empty=False)
    test_subset = serializers.ListField(child=serializers.IntegerField(min_value=0))
    classes = DecisionFunctionSerializer(many=True)

    def validate_format(self, value):
        if value != MODEL_FORMAT:
            raise serializers.ValidationError(f'unsupported model format {value!r}, expected {MODEL_FORMAT!r}')
        return value

    def validate(self, attrs):
        if len(attrs['classes']) != len(attrs['class_names']):
            raise serializers.ValidationError('one class block is needed per class name')
        widths = {len(block['d']) for block in attrs['classes']}
        if len(widths) > 1:
            raise serializers.ValidationError('all classes must use the same number of features')
        return attrs


def model_document(model):
    classes = []
    for function, tau in zip(model.functions, model.thresholds):
        classes.append({
            'label': function.label or '',
            'method': function.method,
            'kernel': {'family': function.kernel.family, 'sigma': float(function.kernel.sigma)},
            'd': [float(v) for v in function.d],
            'support': [[float(v) for v in row] for row in function.support],
            'coef': [float(v) for v in function.coef],
            'rho': float(function.rho),
            'tau': None if tau == NO_THRESHOLD else float(tau),
        })
    return {
        'format': MODEL_FORMAT,
        'method': model.method,
        'gamma': float(model.gamma),
        'class_names': list(model.class_names),
        'test_subset': [int(i) for i in model.test_subset],
        'classes': classes,
    }


def dump_model(model):
    return json.dumps(model_document(model), indent=2, sort_keys=True) + '\n'


def _function_from_block(block):
    d = np.asarray(block['d'], dtype=float)
    return DecisionFunction(
        kernel=KernelSpec(**block['kernel']),
        d=d,
        support=np.asarray(block['support'], dtype=float).reshape(-1, d.shape[0]),
        coef=np.asarray(block['coef'], dtype=float),
        rho=block['rho'],
        label=block['label'] or None,
        method=block['method'],
    )


def load_model(text):
    try:
        document = json.loads(text)
    except json.JSONDecodeError as error:
        raise ModelFormatError(f'model file is not valid JSON: {error}') from error
    serializer = SetValuedModelSerializer(data=document)
    if not serializer.is_valid():
        raise ModelFormatError(f'invalid model file: {json.dumps(serializer.errors, sort_keys=True)}')
    data = serializer.validated_data
    blocks = data['classes']
    return SetValuedModel(
        functions=tuple(_function_from_block(block) for block in blocks),
        thresholds=tuple(NO_THRESHOLD if block['tau'] is None else block['tau'] for block in blocks),
        gamma=data['gamma'],
        method=data['method'],
        class_names=tuple(data['class_names']),
        test_subset=tuple(data['test_subset']),
    )
