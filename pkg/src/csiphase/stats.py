"""Diagnostic tables over calibrated phase: gap histograms and profiles.

Three views of how adjacent subcarriers move relative to each other:

* :func:`diff_histogram` bins every signed adjacent-subcarrier
  difference of a calibrated matrix and fits a Gaussian by sample
  moments, the numeric counterpart of a difference-distribution plot.
* :func:`ds_series` computes the per-symbol gap threshold d_s (the
  same statistic the rebuild uses) and groups it by optional labels.
* :func:`exceedance_profile` counts, per subcarrier, how many symbols
  a rebuild flagged there.

Everything here is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PhaseMatrix, Stage, _unwrap_last_axis
from .tsfr import TsfrReport

__all__ = ["Histogram", "DsSeries", "diff_histogram", "ds_series", "exceedance_profile"]


@dataclass(frozen=True)
class Histogram:
    """Binned counts plus moment-fitted Gaussian overlay parameters."""

    bin_edges: np.ndarray
    counts: np.ndarray
    fitted_mean: float
    fitted_std: float

    def __post_init__(self) -> None:
        edges = np.array(self.bin_edges, dtype=np.float64, copy=True)
        counts = np.array(self.counts, dtype=np.int64, copy=True)
        if edges.ndim != 1 or counts.ndim != 1 or edges.size != counts.size + 1:
            raise ValueError(
                f"need bins+1 edges for bins counts, got {edges.size} edges "
                f"and {counts.size} counts"
            )
        if not (np.diff(edges) > 0).all():
            raise ValueError("bin edges must be strictly increasing")
        if (counts < 0).any():
            raise ValueError("counts must be non-negative")
        edges.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)
        if not (np.isfinite(self.fitted_mean) and np.isfinite(self.fitted_std)):
            raise ValueError("fitted moments must be finite")


@dataclass(frozen=True)
class DsSeries:
    """Per-symbol gap thresholds d_s plus optional per-label means."""

    d: np.ndarray
    group_means: dict | None = None

    def __post_init__(self) -> None:
        d = np.array(self.d, dtype=np.float64, copy=True)
        d.setflags(write=False)
        object.__setattr__(self, "d", d)


def _require_calibrated(phase: PhaseMatrix, op: str) -> None:
    if phase.stage is Stage.RAW:
        raise ValueError(f"{op} needs calibrated phase, got stage {phase.stage.label!r}")


def diff_histogram(phase: PhaseMatrix, bins: int = 101) -> Histogram:
    """Histogram of all signed adjacent-subcarrier differences.

    The ``bins`` bins span the fitted mean +/- 4 fitted standard
    deviations (a unit span when the spread is zero); differences
    beyond the span land in the outermost bins, so the counts always
    sum to S*(K-1). The overlay Gaussian is fitted by sample moments.
    """
    _require_calibrated(phase, "diff_histogram")
    if bins < 1:
        raise ValueError(f"need at least 1 bin, got {bins}")
    diffs = np.diff(phase.values, axis=1).ravel()
    mean = float(diffs.mean())
    std = float(diffs.std())
    half_span = 4 * std if std > 0 else 0.5
    edges = np.linspace(mean - half_span, mean + half_span, bins + 1)
    idx = np.clip(np.searchsorted(edges, diffs, side="right") - 1, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    return Histogram(bin_edges=edges, counts=counts, fitted_mean=mean, fitted_std=std)


def ds_series(phase: PhaseMatrix, labels=None) -> DsSeries:
    """Per-symbol gap threshold d_s, optionally averaged per label.

    Each row is unwrapped and reduced exactly like the rebuild's
    threshold pass, so on the same calibrated matrix this reproduces
    those thresholds bit for bit. Labels (one per symbol, any hashable
    values) add a mean d_s per label, in first-seen order.
    """
    _require_calibrated(phase, "ds_series")
    rows = _unwrap_last_axis(phase.values)
    gaps = np.abs(np.diff(rows, axis=1))
    mu = gaps.mean(axis=1)
    sigma = np.sqrt(((gaps - mu[:, None]) ** 2).mean(axis=1))
    d = mu + sigma

    groups = None
    if labels is not None:
        labels = list(labels)
        if len(labels) != phase.symbols:
            raise ValueError(
                f"got {len(labels)} labels for {phase.symbols} symbols"
            )
        groups = {}
        for label in labels:
            if label not in groups:
                mask = np.array([lb == label for lb in labels])
                groups[label] = float(d[mask].mean())
    return DsSeries(d=d, group_means=groups)


def exceedance_profile(report: TsfrReport) -> np.ndarray:
    """Per-subcarrier count of symbols the rebuild flagged there.

    Summing the profile over k gives the total number of flags, the
    same total as summing per-symbol flag counts.
    """
    profile = report.exceedance.sum(axis=0, dtype=np.int64)
    profile.setflags(write=False)
    return profile
