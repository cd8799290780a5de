# Generated by Django 5.2.5 on 2026-10-18 09:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(choices=[('evaluate', 'Evaluate'), ('sweep', 'Sweep')], max_length=20)),
                ('method', models.CharField(blank=True, choices=[('gps', 'Generalized prediction set'), ('gpskfs', 'GPS with kernel feature selection'), ('ocsvm', 'One-class SVM')], max_length=10)),
                ('gamma', models.FloatField(blank=True, null=True)),
                ('seed', models.PositiveIntegerField(default=0)),
                ('replications', models.PositiveIntegerField(default=1)),
                ('config', models.JSONField(default=dict, help_text='Fully resolved run configuration')),
                ('notes', models.TextField(blank=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
            ],
            options={
                'verbose_name': 'Experiment Run',
                'verbose_name_plural': 'Experiment Runs',
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='MetricValue',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('position', models.PositiveIntegerField(default=0)),
                ('gamma', models.FloatField()),
                ('method', models.CharField(choices=[('gps', 'Generalized prediction set'), ('gpskfs', 'GPS with kernel feature selection'), ('ocsvm', 'One-class SVM')], max_length=10)),
                ('metric', models.CharField(max_length=60)),
                ('value', models.FloatField(blank=True, help_text='Empty when the metric is undefined', null=True)),
                ('se', models.FloatField(blank=True, null=True)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='metrics', to='experiments.experimentrun')),
            ],
            options={
                'verbose_name': 'Metric Value',
                'verbose_name_plural': 'Metric Values',
                'ordering': ['run', 'position'],
            },
        ),
    ]
