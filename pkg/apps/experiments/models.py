from django.db import models

from apps.gps.training import METHOD_CHOICES


class ExperimentRun(models.Model):
    COMMAND_CHOICES = [
        ('evaluate', 'Evaluate'),
        ('sweep', 'Sweep'),
    ]

    command = models.CharField(max_length=20, choices=COMMAND_CHOICES)
    method = models.CharField(max_length=10, choices=METHOD_CHOICES, blank=True)
    gamma = models.FloatField(null=True, blank=True)
    seed = models.PositiveIntegerField(default=0)
    replications = models.PositiveIntegerField(default=1)
    config = models.JSONField(default=dict, help_text='Fully resolved run configuration')
    notes = models.TextField(blank=True)
    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        verbose_name = 'Experiment Run'
        verbose_name_plural = 'Experiment Runs'
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.get_command_display()} #{self.pk} ({self.method or 'mixed'})"

    def metric_table(self):
        """Rows in the same column order as the exported tables"""
        return [
            {'gamma': m.gamma, 'method': m.method, 'metric': m.metric, 'value': m.value, 'se': m.se}
            for m in self.metrics.all()
        ]


class MetricValue(models.Model):
    run = models.ForeignKey(ExperimentRun, on_delete=models.CASCADE, related_name='metrics')
    position = models.PositiveIntegerField(default=0)
    gamma = models.FloatField()
    method = models.CharField(max_length=10, choices=METHOD_CHOICES)
    metric = models.CharField(max_length=60)
    value = models.FloatField(null=True, blank=True, help_text='Empty when the metric is undefined')
    se = models.FloatField(null=True, blank=True)

    class Meta:
        verbose_name = 'Metric Value'
        verbose_name_plural = 'Metric Values'
        ordering = ['run', 'position']

    def __str__(self):
        return f"{self.metric} @ gamma={self.gamma:g} [{self.method}]"
