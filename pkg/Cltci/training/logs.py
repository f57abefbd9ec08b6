"""
CSV training logs.

metrics.csv     epoch, loss, lr, wall_time   one row per epoch
loss_trace.csv  epoch, step, loss, lr        one row per step, no timings

The trace carries no wall-clock values so two identical runs write
identical bytes.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import pandas as pd

METRICS_COLUMNS = ['epoch', 'loss', 'lr', 'wall_time']
TRACE_COLUMNS = ['epoch', 'step', 'loss', 'lr']


class CsvLog:
    """Append-only CSV with a fixed header."""

    def __init__(self, path, columns: Sequence[str]):
        self.path = Path(path)
        self.columns = list(columns)

    def reset(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(columns=self.columns).to_csv(self.path, index=False, lineterminator='\n')

    def append(self, rows: list[dict]) -> None:
        if not rows:
            return
        if not self.path.exists():
            self.reset()
        frame = pd.DataFrame(rows, columns=self.columns)
        frame.to_csv(self.path, mode='a', header=False, index=False, lineterminator='\n')

    def truncate_after(self, epoch: int) -> None:
        """Drop rows past `epoch` (used when resuming from an earlier checkpoint)."""
        if not self.path.exists():
            return
        frame = self.read()
        frame[frame['epoch'] <= epoch].to_csv(self.path, index=False, lineterminator='\n')

    def read(self) -> pd.DataFrame:
        return pd.read_csv(self.path, float_precision='round_trip')


class TrainingLogs:
    def __init__(self, out_dir):
        out_dir = Path(out_dir)
        self.metrics = CsvLog(out_dir / 'metrics.csv', METRICS_COLUMNS)
        self.trace = CsvLog(out_dir / 'loss_trace.csv', TRACE_COLUMNS)

    def start(self, resumed_epoch: int = 0) -> None:
        for log in (self.metrics, self.trace):
            if resumed_epoch and log.path.exists():
                log.truncate_after(resumed_epoch)
            else:
                log.reset()
