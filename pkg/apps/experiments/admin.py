from django.contrib import admin

from .models import ExperimentRun, MetricValue


class MetricValueInline(admin.TabularInline):
    model = MetricValue
    extra = 0
    fields = ['gamma', 'method', 'metric', 'value', 'se']
    readonly_fields = ['gamma', 'method', 'metric', 'value', 'se']
    can_delete = False


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ('id', 'command', 'method', 'gamma', 'seed', 'replications', 'metric_count', 'created_at')
    list_filter = ('command', 'method', 'created_at')
    search_fields = ('notes', 'method')
    readonly_fields = ('created_at', 'updated_at')
    date_hierarchy = 'created_at'
    inlines = [MetricValueInline]

    fieldsets = (
        ('Run', {
            'fields': ('command', 'method', 'gamma', 'seed', 'replications', 'notes')
        }),
        ('Configuration', {
            'fields': ('config',),
            'classes': ('collapse',)
        }),
        ('Timestamps', {
            'fields': ('created_at', 'updated_at'),
            'classes': ('collapse',)
        }),
    )

    def metric_count(self, obj):
        return obj.metrics.count()
    metric_count.short_description = 'Metrics'


@admin.register(MetricValue)
class MetricValueAdmin(admin.ModelAdmin):
    list_display = ('run', 'gamma', 'method', 'metric', 'value', 'se')
    list_filter = ('method', 'metric')
    search_fields = ('metric',)
