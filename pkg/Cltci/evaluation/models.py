from django.db import models

from Cltci.runs.models import Run

from .metrics import BACKGROUND, LEFT_LUNG, RIGHT_LUNG, DiceReport


class DiceResult(models.Model):
    """
    Validation Dice of one fine-tuning fold, as written to results.csv.
    """
    run = models.ForeignKey(
        Run,
        on_delete=models.CASCADE,
        related_name='dice_results'
    )
    variant = models.CharField(
        max_length=50,
        help_text="Pretraining variant or 'random'"
    )
    m = models.PositiveIntegerField(help_text="Annotation budget M")
    fold = models.PositiveIntegerField()
    seed = models.IntegerField()

    dice_background = models.FloatField(null=True, blank=True)
    dice_left = models.FloatField()
    dice_right = models.FloatField()
    mean_foreground = models.FloatField()

    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        db_table = 'dice_results'
        verbose_name = 'Dice result'
        verbose_name_plural = 'Dice results'
        ordering = ['variant', 'm', 'fold', 'seed']

    def __str__(self):
        return f"{self.variant} M={self.m} fold {self.fold}: {self.mean_foreground:.4f}"

    @classmethod
    def from_report(cls, run, report: DiceReport):
        return cls(
            run=run,
            variant=report.variant,
            m=report.M,
            fold=report.fold,
            seed=report.seed,
            dice_background=report.dice_background,
            dice_left=report.dice_left,
            dice_right=report.dice_right,
            mean_foreground=report.mean_foreground,
        )

    def to_report(self) -> DiceReport:
        per_class = {LEFT_LUNG: self.dice_left, RIGHT_LUNG: self.dice_right}
        if self.dice_background is not None:
            per_class[BACKGROUND] = self.dice_background
        return DiceReport(
            variant=self.variant, M=self.m, fold=self.fold, seed=self.seed, per_class=per_class,
        )
