"""Prediction-error measures and replication reports."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["smspe", "mspe", "msee", "MetricReport"]


def _pair(y_true, y_hat):
    a = np.asarray(y_true, dtype=np.float64)
    b = np.asarray(y_hat, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def smspe(y_true, y_hat) -> float:
    """Standardized error: squared residual norm over squared response norm."""
    a, b = _pair(y_true, y_hat)
    denom = float(np.vdot(a, a))
    if denom <= 0.0:
        raise ValueError("reference tensor has zero norm")
    diff = a - b
    return float(np.vdot(diff, diff)) / denom


def mspe(y_true, y_hat) -> float:
    """Mean squared prediction error against the observed (noisy) responses."""
    a, b = _pair(y_true, y_hat)
    return float(np.mean((a - b) ** 2))


def msee(y_true, noise, y_hat) -> float:
    """Mean squared estimation error: predictions against the noise-free responses."""
    a, b = _pair(y_true, y_hat)
    eps = np.asarray(noise, dtype=np.float64)
    if eps.shape != a.shape:
        raise ValueError(f"noise shape {eps.shape} does not match {a.shape}")
    return float(np.mean((a - eps - b) ** 2))


@dataclass
class MetricReport:
    """Per-replication metric values with summary statistics."""

    kind: str
    values: list[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def sd(self) -> float | None:
        if len(self.values) < 2:
            return None
        return float(np.std(self.values, ddof=1))

    def to_csv(self, path):
        with Path(path).open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["metric", "replication", "value"])
            for i, v in enumerate(self.values):
                writer.writerow([self.kind, i, f"{v:.17g}"])
            sd = self.sd
            writer.writerow([self.kind, "mean", f"{self.mean:.17g}"])
            writer.writerow([self.kind, "sd", "" if sd is None else f"{sd:.17g}"])
