from rest_framework import serializers

from apps.gps.training import METHOD_CHOICES


class PositiveGridField(serializers.ListField):
    child = serializers.FloatField()

    def __init__(self, **kwargs):
        kwargs.setdefault('allow_empty', False)
        super().__init__(**kwargs)

    def to_internal_value(self, data):
        values = super().to_internal_value(data)
        if any(v <= 0 for v in values):
            raise serializers.ValidationError('grid values must be positive')
        return values


class RunConfigSerializer(serializers.Serializer):
    method = serializers.ChoiceField(choices=METHOD_CHOICES)
    gamma = serializers.FloatField()
    seed = serializers.IntegerField(min_value=0)
    jobs = serializers.IntegerField(min_value=1)

    C_grid = PositiveGridField()
    C1_grid = PositiveGridField()
    C2_grid = PositiveGridField()
    sigma_percentiles = serializers.ListField(
        child=serializers.FloatField(min_value=0.0, max_value=100.0), allow_empty=False,
    )

    C = serializers.FloatField()
    C1 = serializers.FloatField(min_value=0.0)
    C2 = serializers.FloatField(min_value=0.0)
    sigma = serializers.FloatField(allow_null=True)
    sigma_percentile = serializers.FloatField(min_value=0.0, max_value=100.0)
    huber_delta = serializers.FloatField()
    nu = serializers.FloatField(allow_null=True)

    calibration_fraction = serializers.FloatField()
    test_subset_max = serializers.IntegerField(min_value=2)
    calibrate = serializers.BooleanField()

    tol = serializers.FloatField()
    max_iter = serializers.IntegerField(min_value=1)

    gamma_adjust = serializers.BooleanField()
    theory_s = serializers.FloatField(min_value=0.0)
    theory_zeta = serializers.FloatField()

    sweep_gammas = serializers.ListField(child=serializers.FloatField(), allow_empty=False)
    replications = serializers.IntegerField(min_value=1)

    n_per_class = serializers.IntegerField(min_value=1)
    n_outlier = serializers.IntegerField(min_value=1)
    outlier_rectangles = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField(), min_length=4, max_length=4),
        allow_empty=False,
    )

    label_column = serializers.CharField()
    outlier_token = serializers.CharField()

    def _open_unit(self, value, name):
        if not 0 < value < 1:
            raise serializers.ValidationError(f'{name} must lie in (0, 1)')
        return value

    def validate_gamma(self, value):
        return self._open_unit(value, 'gamma')

    def validate_huber_delta(self, value):
        return self._open_unit(value, 'huber_delta')

    def validate_calibration_fraction(self, value):
        return self._open_unit(value, 'calibration_fraction')

    def validate_theory_zeta(self, value):
        return self._open_unit(value, 'theory_zeta')

    def validate_C(self, value):
        if value <= 0:
            raise serializers.ValidationError('C must be positive')
        return value

    def validate_sigma(self, value):
        if value is not None and value <= 0:
            raise serializers.ValidationError('sigma must be positive')
        return value

    def validate_nu(self, value):
        if value is not None and not 0 < value <= 1:
            raise serializers.ValidationError('nu must lie in (0, 1]')
        return value

    def validate_tol(self, value):
        if value <= 0:
            raise serializers.ValidationError('tol must be positive')
        return value

    def validate_sweep_gammas(self, value):
        for gamma in value:
            self._open_unit(gamma, 'every sweep gamma')
        return sorted(value)

    def validate_outlier_rectangles(self, value):
        for xmin, xmax, ymin, ymax in value:
            if xmin >= xmax or ymin >= ymax:
                raise serializers.ValidationError('rectangles are [xmin, xmax, ymin, ymax] with min < max')
        return value
