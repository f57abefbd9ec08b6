# Generated by Django 4.2.23 on 2026-10-17 09:12

from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = [
        ("runs", "0001_initial"),
    ]

    operations = [
        migrations.CreateModel(
            name="DiceResult",
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
                    "variant",
                    models.CharField(
                        help_text="Pretraining variant or 'random'", max_length=50
                    ),
                ),
                (
                    "m",
                    models.PositiveIntegerField(help_text="Annotation budget M"),
                ),
                ("fold", models.PositiveIntegerField()),
                ("seed", models.IntegerField()),
                ("dice_background", models.FloatField(blank=True, null=True)),
                ("dice_left", models.FloatField()),
                ("dice_right", models.FloatField()),
                ("mean_foreground", models.FloatField()),
                ("created_at", models.DateTimeField(auto_now_add=True)),
                (
                    "run",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="dice_results",
                        to="runs.run",
                    ),
                ),
            ],
            options={
                "verbose_name": "Dice result",
                "verbose_name_plural": "Dice results",
                "db_table": "dice_results",
                "ordering": ["variant", "m", "fold", "seed"],
            },
        ),
    ]
