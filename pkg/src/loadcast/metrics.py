"""Forecast evaluation: MAPE, MAE, RMSE, R² plus error-density histograms.

MAPE is undefined when any actual value is zero; the report then carries
``mape=None`` with the offending indices, and ``mape_on_nonzero`` holds the
value over the defined subset (exclude-and-flag, no epsilon fudging).
R² is undefined for a constant actual series.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = ["MetricsReport", "evaluate", "HistogramTable", "error_density"]


@dataclass
class MetricsReport:
    mape: float | None          # percent
    mae: float
    rmse: float
    r2: float | None
    n: int
    zero_actual_indices: list = field(default_factory=list)
    mape_on_nonzero: float | None = None
    r2_undefined: bool = False

    def as_row(self) -> dict:
        return {"mape": self.mape, "mae": self.mae, "rmse": self.rmse,
                "r2": self.r2, "n": self.n}


def evaluate(pred, actual) -> MetricsReport:
    """The four headline metrics over aligned prediction/actual series."""
    pred = np.asarray(pred, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if pred.shape != actual.shape or pred.ndim != 1:
        raise ValueError(f"pred and actual must be equal-length 1-D, "
                         f"got {pred.shape} and {actual.shape}")
    n = len(pred)
    if n < 2:
        raise ValueError("need at least 2 samples")

    err = pred - actual
    mae = float(np.mean(np.abs(err)))
    rmse = float(np.sqrt(np.mean(err * err)))

    zero_idx = np.flatnonzero(actual == 0.0)
    if len(zero_idx):
        mape = None
        nz = actual != 0.0
        mape_nz = (float(np.mean(np.abs(err[nz] / actual[nz])) * 100.0)
                   if nz.any() else None)
    else:
        mape = float(np.mean(np.abs(err / actual)) * 100.0)
        mape_nz = mape

    ss_res = float(np.sum(err * err))
    ss_tot = float(np.sum((actual - actual.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = None
        r2_undefined = True
    else:
        r2 = 1.0 - ss_res / ss_tot
        r2_undefined = False

    return MetricsReport(mape=mape, mae=mae, rmse=rmse, r2=r2, n=n,
                         zero_actual_indices=[int(i) for i in zero_idx],
                         mape_on_nonzero=mape_nz, r2_undefined=r2_undefined)


@dataclass
class HistogramTable:
    """Equal-width bins with densities normalized to integrate to 1."""

    bin_edges: np.ndarray
    density: np.ndarray
    counts: np.ndarray

    @property
    def masses(self) -> np.ndarray:
        return self.density * np.diff(self.bin_edges)


def _histogram(values: np.ndarray, bins: int) -> HistogramTable:
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        warnings.warn("degenerate error range; emitting a single unit-width bin")
        edges = np.array([lo - 0.5, lo + 0.5])
        counts = np.array([len(values)])
        return HistogramTable(edges, counts / len(values), counts)
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    density = counts / (len(values) * np.diff(edges))
    return HistogramTable(edges, density, counts)


def error_density(pred, actual, bins: int = 50) -> dict:
    """Histogram tables for signed absolute error (pred − actual) and
    relative error ((pred − actual)/actual); zero-actual samples are
    excluded from the relative table with a warning."""
    pred = np.asarray(pred, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if len(pred) < 2:
        raise ValueError("need at least 2 samples")
    if bins < 2:
        raise ValueError("need at least 2 bins")
    abs_err = pred - actual
    out = {"absolute": _histogram(abs_err, bins)}
    nz = actual != 0.0
    if not nz.all():
        warnings.warn(f"{int((~nz).sum())} zero-actual samples excluded "
                      "from the relative-error histogram")
    rel = abs_err[nz] / actual[nz]
    out["relative"] = _histogram(rel, bins)
    return out
