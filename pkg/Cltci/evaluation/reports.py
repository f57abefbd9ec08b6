"""
Result tables and static figures.

results.csv   one row per (variant, M, fold, seed)
summary.csv   mean and population std of each metric per (variant, M)
dice_vs_M.png mean foreground Dice against the annotation budget
embeddings_2d.png  2-D layout of the embeddings coloured by patient
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable, Optional, Sequence

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from Cltci.datasets.preprocessing import write_png  # noqa: E402
from Cltci.networks.segmentation import predict_masks  # noqa: E402

from .embeddings import EmbeddingSet, project_2d  # noqa: E402
from .metrics import LEFT_LUNG, RIGHT_LUNG, DiceReport  # noqa: E402

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ['variant', 'M', 'fold', 'seed', 'dice_left', 'dice_right', 'mean_foreground']
METRICS = ['dice_left', 'dice_right', 'mean_foreground']


def results_frame(reports: Iterable[DiceReport]) -> pd.DataFrame:
    return pd.DataFrame([report.as_row() for report in reports], columns=RESULT_COLUMNS)


def summarize(reports: Sequence[DiceReport]) -> pd.DataFrame:
    """Per-(variant, M) mean and std (ddof=0) over folds and seeds."""
    grouped = results_frame(reports).groupby(['variant', 'M'], sort=True)[METRICS]
    summary = pd.concat([
        grouped.size().rename('n'),
        grouped.mean().add_suffix('_mean'),
        grouped.std(ddof=0).add_suffix('_std'),
    ], axis=1)
    return summary.reset_index()


def write_results_csv(reports: Sequence[DiceReport], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    results_frame(reports).to_csv(path, index=False, lineterminator='\n')
    return path


def read_results_csv(path) -> list[DiceReport]:
    frame = pd.read_csv(path, dtype={'variant': str}, float_precision='round_trip')
    return [
        DiceReport(
            variant=row.variant, M=int(row.M), fold=int(row.fold), seed=int(row.seed),
            per_class={LEFT_LUNG: row.dice_left, RIGHT_LUNG: row.dice_right},
        )
        for row in frame.itertuples(index=False)
    ]


def plot_dice_vs_budget(summary: pd.DataFrame, path) -> Path:
    figure, axes = plt.subplots(figsize=(5, 3.5))
    for variant, rows in summary.groupby('variant', sort=True):
        axes.errorbar(
            rows['M'], rows['mean_foreground_mean'], yerr=rows['mean_foreground_std'],
            marker='o', capsize=3, label=variant,
        )
    axes.set_xlabel('annotated images (M)')
    axes.set_ylabel('mean foreground Dice')
    axes.legend(fontsize='small')
    figure.tight_layout()
    figure.savefig(path, dpi=120)
    plt.close(figure)
    return Path(path)


def plot_embeddings(embeddings: EmbeddingSet, path, seed: int = 0) -> Path:
    points = project_2d(embeddings.vectors, seed=seed)
    patients = sorted(set(embeddings.patient_ids))
    colours = plt.get_cmap('tab20')
    figure, axes = plt.subplots(figsize=(5, 5))
    labels = np.asarray(embeddings.patient_ids, dtype=object)
    for index, patient in enumerate(patients):
        selected = labels == patient
        axes.scatter(points[selected, 0], points[selected, 1], s=14,
                     color=colours(index % colours.N), label=patient)
    if len(patients) <= 20:
        axes.legend(fontsize='x-small', markerscale=0.8, ncol=2)
    axes.set_xticks([])
    axes.set_yticks([])
    figure.tight_layout()
    figure.savefig(path, dpi=120)
    plt.close(figure)
    return Path(path)


def emit_report(
    reports: Sequence[DiceReport],
    out_dir,
    embeddings: Optional[EmbeddingSet] = None,
) -> dict[str, Path]:
    """Write the result tables and figures; returns the written paths by name."""
    if not reports:
        raise ValueError("emit_report needs at least one Dice report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = summarize(reports)
    written = {
        'results': write_results_csv(reports, out_dir / 'results.csv'),
        'summary': out_dir / 'summary.csv',
        'dice_plot': plot_dice_vs_budget(summary, out_dir / 'dice_vs_M.png'),
    }
    summary.to_csv(written['summary'], index=False, lineterminator='\n')
    if embeddings is not None:
        written['embedding_plot'] = plot_embeddings(embeddings, out_dir / 'embeddings_2d.png')
    logger.info("Report written to %s (%d result rows)", out_dir, len(reports))
    return written


def export_predictions(net, bank, image_ids: Iterable[str], out_dir) -> list[Path]:
    """Predicted label maps as 8-bit PNGs named after the images."""
    image_ids = list(image_ids)
    predictions = predict_masks(net, bank.stack_images(image_ids))
    out_dir = Path(out_dir)
    return [
        write_png(prediction.astype(np.uint8), out_dir / f'{image_id}.png')
        for image_id, prediction in zip(image_ids, predictions)
    ]
