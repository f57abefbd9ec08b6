from django.db import models
from django.utils import timezone


class Run(models.Model):
    """
    One invocation of a toolkit command and where its artifacts live.
    """
    KIND_CHOICES = [
        ('synth', 'Synthetic data'),
        ('pretrain', 'Pretraining'),
        ('finetune', 'Fine-tuning'),
        ('eval', 'Evaluation'),
    ]

    STATUS_CHOICES = [
        ('running', 'Running'),
        ('completed', 'Completed'),
        ('failed', 'Failed'),
    ]

    kind = models.CharField(
        max_length=20,
        choices=KIND_CHOICES,
        help_text="Command that produced the run"
    )
    variant = models.CharField(
        max_length=50,
        blank=True,
        default='',
        help_text="Pretraining variant or initialization label"
    )
    config_hash = models.CharField(
        max_length=64,
        db_index=True,
        help_text="SHA-256 of the resolved run configuration"
    )
    config = models.JSONField(
        default=dict,
        help_text="Resolved run configuration"
    )
    seed = models.IntegerField(default=0)
    out_dir = models.CharField(
        max_length=500,
        help_text="Directory holding the run artifacts"
    )
    status = models.CharField(
        max_length=20,
        choices=STATUS_CHOICES,
        default='running'
    )
    error = models.TextField(blank=True, default='')

    # Timestamps
    created_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        db_table = 'runs'
        verbose_name = 'Run'
        verbose_name_plural = 'Runs'
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.kind} {self.variant or '-'} {self.config_hash[:12]} ({self.get_status_display()})"

    def mark_completed(self):
        self.status = 'completed'
        self.finished_at = timezone.now()
        self.save(update_fields=['status', 'finished_at'])

    def mark_failed(self, error=''):
        self.status = 'failed'
        self.error = str(error)
        self.finished_at = timezone.now()
        self.save(update_fields=['status', 'error', 'finished_at'])


class EpochMetric(models.Model):
    """
    Per-epoch pretraining metrics, mirroring metrics.csv.
    """
    run = models.ForeignKey(
        Run,
        on_delete=models.CASCADE,
        related_name='epoch_metrics'
    )
    epoch = models.PositiveIntegerField()
    loss = models.FloatField()
    lr = models.FloatField()
    wall_time = models.FloatField(help_text="Seconds spent in the epoch")

    class Meta:
        db_table = 'epoch_metrics'
        ordering = ['run', 'epoch']
        unique_together = ['run', 'epoch']

    def __str__(self):
        return f"{self.run_id} epoch {self.epoch}: {self.loss:.4f}"
