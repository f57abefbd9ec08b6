"""
Filters for stored Dice results.
"""
import django_filters

from .models import DiceResult


class DiceResultFilter(django_filters.FilterSet):
    """
    Filter class for DiceResult with budget ranges and run lookups.
    """
    variant = django_filters.CharFilter(
        help_text="Filter results by pretraining variant"
    )

    # Budget filtering
    m = django_filters.NumberFilter(
        help_text="Filter results by exact annotation budget"
    )
    m_min = django_filters.NumberFilter(
        field_name='m',
        lookup_expr='gte',
        help_text="Filter results with budget at least this value"
    )
    m_max = django_filters.NumberFilter(
        field_name='m',
        lookup_expr='lte',
        help_text="Filter results with budget at most this value"
    )

    seed = django_filters.NumberFilter()
    fold = django_filters.NumberFilter()

    # Run filtering
    config_hash = django_filters.CharFilter(
        field_name='run__config_hash',
        lookup_expr='startswith',
        help_text="Filter results by (a prefix of) the run config hash"
    )
    run = django_filters.NumberFilter(
        field_name='run__id',
        help_text="Filter results by run ID"
    )

    class Meta:
        model = DiceResult
        fields = ['variant', 'm', 'seed', 'fold']
