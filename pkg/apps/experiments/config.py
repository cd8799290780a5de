"""
Run configuration.

Resolution order: ``settings.GPS`` defaults, then a flat TOML file passed with
``--config``, then explicit command-line values. The merged mapping is
validated by ``RunConfigSerializer``.
"""
import copy
import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, fields
from typing import Optional

from django.conf import settings

from apps.gps.conformal import FitConfig
from apps.gps.exceptions import ConfigurationError
from apps.gps.training import TheoryParams

from .serializers import RunConfigSerializer


@dataclass(frozen=True)
class RunConfig:
    method: str
    gamma: float
    seed: int
    jobs: int
    C_grid: list
    C1_grid: list
    C2_grid: list
    sigma_percentiles: list
    C: float
    C1: float
    C2: float
    sigma: Optional[float]
    sigma_percentile: float
    huber_delta: float
    nu: Optional[float]
    calibration_fraction: float
    test_subset_max: int
    calibrate: bool
    tol: float
    max_iter: int
    gamma_adjust: bool
    theory_s: float
    theory_zeta: float
    sweep_gammas: list
    replications: int
    n_per_class: int
    n_outlier: int
    outlier_rectangles: list
    label_column: str
    outlier_token: str

    def theory(self):
        if not self.gamma_adjust:
            return None
        return TheoryParams(s=self.theory_s, zeta=self.theory_zeta)

    def fit_config(self, **changes):
        values = {
            'method': self.method,
            'gamma': self.gamma,
            'C': self.C,
            'C1': self.C1,
            'C2': self.C2,
            'nu': self.nu,
            'sigma': self.sigma,
            'sigma_percentile': self.sigma_percentile,
            'huber_delta': self.huber_delta,
            'calibration_fraction': self.calibration_fraction,
            'test_subset_max': self.test_subset_max,
            'seed': self.seed,
            'jobs': self.jobs,
            'tol': self.tol,
            'max_iter': self.max_iter,
            'theory': self.theory(),
            'calibrate': self.calibrate,
        }
        values.update(changes)
        return FitConfig(**values)

    def as_dict(self):
        return asdict(self)

    def to_toml(self):
        lines = []
        for key, value in self.as_dict().items():
            if value is None:
                lines.append(f'# {key} is unset')
            else:
                lines.append(f'{key} = {_toml_value(value)}')
        return '\n'.join(lines) + '\n'


RUN_CONFIG_KEYS = tuple(f.name for f in fields(RunConfig))


def _toml_value(value):
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return '[' + ', '.join(_toml_value(v) for v in value) + ']'
    if isinstance(value, float):
        return repr(value)
    return str(value)


def load_config_file(path):
    try:
        with open(path, 'rb') as handle:
            values = tomllib.load(handle)
    except tomllib.TOMLDecodeError as error:
        raise ConfigurationError(f'{path}: {error}') from error
    except OSError as error:
        raise ConfigurationError(f'cannot read config file {path}: {error}') from error
    unknown = sorted(set(values) - set(RUN_CONFIG_KEYS))
    if unknown:
        raise ConfigurationError(f'{path}: unknown keys {", ".join(unknown)}')
    return values


def resolve_run_config(overrides=None, path=None):
    values = copy.deepcopy(settings.GPS)
    if path:
        values.update(load_config_file(path))
    values.update({key: value for key, value in (overrides or {}).items() if value is not None})
    serializer = RunConfigSerializer(data=values)
    if not serializer.is_valid():
        problems = '; '.join(
            f'{field}: {" ".join(str(m) for m in _flatten(messages))}'
            for field, messages in serializer.errors.items()
        )
        raise ConfigurationError(f'invalid configuration: {problems}')
    return RunConfig(**serializer.validated_data)


def _flatten(messages):
    if isinstance(messages, dict):
        for value in messages.values():
            yield from _flatten(value)
    elif isinstance(messages, (list, tuple)):
        for value in messages:
            yield from _flatten(value)
    else:
        yield messages
