import math

from django.db import transaction

from .models import ExperimentRun, MetricValue


def _optional(value):
    if value is None:
        return None
    value = float(value)
    return None if math.isnan(value) else value


@transaction.atomic
def record_table(command, run_config, frame, method='', gamma=None, replications=1, notes=''):
    """Store a metric table (gamma, method, metric, value, se) as one ExperimentRun"""
    run = ExperimentRun.objects.create(
        command=command,
        method=method,
        gamma=gamma,
        seed=run_config.seed,
        replications=replications,
        config=run_config.as_dict(),
        notes=notes,
    )
    MetricValue.objects.bulk_create([
        MetricValue(
            run=run,
            position=position,
            gamma=float(row.gamma),
            method=row.method,
            metric=row.metric,
            value=_optional(row.value),
            se=_optional(row.se),
        )
        for position, row in enumerate(frame.itertuples(index=False))
    ])
    return run
