# Generated by Django 4.2.23 on 2026-10-17 09:12

from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="Run",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                (
                    "kind",
                    models.CharField(
                        choices=[
                            ("synth", "Synthetic data"),
                            ("pretrain", "Pretraining"),
                            ("finetune", "Fine-tuning"),
                            ("eval", "Evaluation"),
                        ],
                        help_text="Command that produced the run",
                        max_length=20,
                    ),
                ),
                (
                    "variant",
                    models.CharField(
                        blank=True,
                        default="",
                        help_text="Pretraining variant or initialization label",
                        max_length=50,
                    ),
                ),
                (
                    "config_hash",
                    models.CharField(
                        db_index=True,
                        help_text="SHA-256 of the resolved run configuration",
                        max_length=64,
                    ),
                ),
                (
                    "config",
                    models.JSONField(
                        default=dict, help_text="Resolved run configuration"
                    ),
                ),
                ("seed", models.IntegerField(default=0)),
                (
                    "out_dir",
                    models.CharField(
                        help_text="Directory holding the run artifacts", max_length=500
                    ),
                ),
                (
                    "status",
                    models.CharField(
                        choices=[
                            ("running", "Running"),
                            ("completed", "Completed"),
                            ("failed", "Failed"),
                        ],
                        default="running",
                        max_length=20,
                    ),
                ),
                ("error", models.TextField(blank=True, default="")),
                ("created_at", models.DateTimeField(auto_now_add=True)),
                ("finished_at", models.DateTimeField(blank=True, null=True)),
            ],
            options={
                "verbose_name": "Run",
                "verbose_name_plural": "Runs",
                "db_table": "runs",
                "ordering": ["-created_at"],
            },
        ),
        migrations.CreateModel(
            name="EpochMetric",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("epoch", models.PositiveIntegerField()),
                ("loss", models.FloatField()),
                ("lr", models.FloatField()),
                (
                    "wall_time",
                    models.FloatField(help_text="Seconds spent in the epoch"),
                ),
                (
                    "run",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="epoch_metrics",
                        to="runs.run",
                    ),
                ),
            ],
            options={
                "db_table": "epoch_metrics",
                "ordering": ["run", "epoch"],
                "unique_together": {("run", "epoch")},
            },
        ),
    ]
