"""Two-step filtering and rebuild of calibrated CSI phase.

Time smoothing removes temporal noise from each subcarrier track but can
drag outlier energy across frequency, leaving single-subcarrier spikes
inside a symbol. The rebuild step walks each symbol row left to right
and limits every adjacent phase gap to a per-symbol threshold

    d_s = mu_s + sigma_s,

the mean plus standard deviation of the absolute adjacent gaps of the
*calibrated, pre-smoothing* row. Gaps within the threshold keep their
shape (the running offset introduced by earlier clamps is preserved);
gaps beyond it are clamped to exactly +/- d_s:

    out_1 = phi_1
    out_k = out_{k-1} - d_s                 if phi_k - phi_{k-1} < -d_s
    out_k = out_{k-1} + d_s                 if phi_k - phi_{k-1} > d_s
    out_k = phi_k - (phi_{k-1} - out_{k-1}) otherwise

A row whose gaps all satisfy the threshold passes through bit for bit.

:func:`process` bundles every calibration route in this package behind
one entry point and always hands the untouched amplitude back to the
reconstruction, so only the phase differs between methods.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .calib import lrr_calibrate, lt_calibrate
from .core import (
    CsiMatrix,
    PhaseMatrix,
    Stage,
    SubcarrierMap,
    _unwrap_last_axis,
    decompose,
    recompose,
)
from .savgol import SgSpec, sg_2d, sg_freq, sg_time

__all__ = [
    "GapThreshold",
    "TsfrReport",
    "gap_stats",
    "rebuild_symbol",
    "tsfr",
    "process",
    "ProcessResult",
    "METHODS",
]

METHODS = ("raw", "lt", "lrr", "lrr+sgfreq", "lrr+sgtime", "lrr+sg2d", "tsfr")


@dataclass(frozen=True)
class GapThreshold:
    """Per-symbol gap statistics: mean, spread and their sum d = mu + sigma."""

    mu: float
    sigma: float
    d: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.mu) and np.isfinite(self.sigma)):
            raise ValueError("gap statistics must be finite")
        if self.mu < 0 or self.sigma < 0:
            raise ValueError("gap statistics are non-negative by construction")
        if self.d != self.mu + self.sigma:
            raise ValueError(f"d={self.d!r} is not mu + sigma = {self.mu + self.sigma!r}")


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True, order="C")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TsfrReport:
    """What the rebuild did to each symbol.

    Attributes:
        thresholds: per-symbol gap statistics, S records.
        exceedance: S x K boolean marks; (s, k) is set exactly when the
            smoothed row's gap into subcarrier k exceeded d_s (column 0
            has no preceding gap and is never marked).
        modified_fraction: per-symbol fraction of the K-1 gap positions
            that were clamped.
        clamped_down: per-symbol count of gaps clamped at -d_s.
        clamped_up: per-symbol count of gaps clamped at +d_s.
    """

    thresholds: tuple[GapThreshold, ...]
    exceedance: np.ndarray
    modified_fraction: np.ndarray
    clamped_down: np.ndarray
    clamped_up: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "thresholds", tuple(self.thresholds))
        object.__setattr__(self, "exceedance", _frozen_array(self.exceedance, bool))
        object.__setattr__(
            self, "modified_fraction", _frozen_array(self.modified_fraction, np.float64)
        )
        object.__setattr__(self, "clamped_down", _frozen_array(self.clamped_down, np.int64))
        object.__setattr__(self, "clamped_up", _frozen_array(self.clamped_up, np.int64))

    @property
    def d(self) -> np.ndarray:
        """Per-symbol thresholds d_s as an array."""
        return np.array([t.d for t in self.thresholds])


def gap_stats(row: np.ndarray) -> GapThreshold:
    """Gap statistics of one unwrapped calibrated row.

    mu is the mean absolute adjacent gap, sigma the population standard
    deviation of the absolute gaps (both over the K-1 gap positions),
    and d their sum.
    """
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1 or row.size < 2:
        raise ValueError(f"need a 1-D row of at least 2 samples, got shape {row.shape}")
    if not np.isfinite(row).all():
        raise ValueError("gap_stats expects finite samples")
    gaps = np.abs(np.diff(row))
    mu = gaps.mean()
    sigma = np.sqrt(((gaps - mu) ** 2).mean())
    return GapThreshold(mu=float(mu), sigma=float(sigma), d=float(mu + sigma))


def _rebuild_rows(rows: np.ndarray, d: np.ndarray):
    """Rebuild every row against its own threshold.

    Vectorized across rows, sequential across columns; each elementwise
    update evaluates the same IEEE expressions as a scalar left-to-right
    walk, so the result is bit-identical to one.

    Returns:
        (rebuilt, low_mask, high_mask): the output rows plus S x K
        boolean masks of the down-/up-clamped positions (column 0 all
        False).
    """
    s, k_count = rows.shape
    eps = np.diff(rows, axis=1)
    low = np.zeros((s, k_count), dtype=bool)
    high = np.zeros((s, k_count), dtype=bool)
    low[:, 1:] = eps < -d[:, None]
    high[:, 1:] = eps > d[:, None]
    out = np.empty_like(rows)
    out[:, 0] = rows[:, 0]
    for k in range(1, k_count):
        prev = out[:, k - 1]
        carried = rows[:, k] - (rows[:, k - 1] - prev)
        out[:, k] = np.where(
            low[:, k], prev - d, np.where(high[:, k], prev + d, carried)
        )
    return out, low, high


def rebuild_symbol(smoothed_row: np.ndarray, d: float) -> np.ndarray:
    """Limit the adjacent gaps of one smoothed row to +/- d.

    See the module docstring for the exact walk. A row already within
    the threshold is returned bit for bit.
    """
    row = np.asarray(smoothed_row, dtype=np.float64)
    if row.ndim != 1 or row.size < 1:
        raise ValueError(f"need a non-empty 1-D row, got shape {row.shape}")
    if not np.isfinite(row).all():
        raise ValueError("rebuild_symbol expects finite samples")
    d = float(d)
    if not np.isfinite(d) or d < 0:
        raise ValueError(f"threshold must be finite and non-negative, got {d}")
    if row.size == 1:
        return row.copy()
    out, _, _ = _rebuild_rows(row[None, :], np.array([d]))
    return out[0]


def tsfr(
    phase: PhaseMatrix,
    *,
    order: int = 2,
    fraction: float = 0.1,
    time_spec: SgSpec | None = None,
    abscissa: np.ndarray | None = None,
) -> tuple[PhaseMatrix, TsfrReport]:
    """Full two-step chain: regression calibration, time smoothing, rebuild.

    Args:
        phase: raw-stage phase matrix.
        order: polynomial order of the time smoother.
        fraction: window fraction of S for the time smoother.
        time_spec: explicit smoother spec overriding order/fraction.
        abscissa: optional regression abscissa forwarded to the
            calibration step.

    Returns:
        (rebuilt, report): the rebuilt-stage phase matrix and the
        per-symbol account of what the rebuild did.
    """
    calibrated = lrr_calibrate(phase, abscissa)
    smoothed = sg_time(calibrated, time_spec, order=order, fraction=fraction)

    theta_rows = _unwrap_last_axis(calibrated.values)
    phi_rows = _unwrap_last_axis(smoothed.values)

    gaps = np.abs(np.diff(theta_rows, axis=1))
    mu = gaps.mean(axis=1)
    sigma = np.sqrt(((gaps - mu[:, None]) ** 2).mean(axis=1))
    d = mu + sigma

    rebuilt, low, high = _rebuild_rows(phi_rows, d)
    exceed = low | high
    k_count = phase.subcarriers
    report = TsfrReport(
        thresholds=tuple(
            GapThreshold(mu=float(m), sigma=float(sg), d=float(dv))
            for m, sg, dv in zip(mu, sigma, d)
        ),
        exceedance=exceed,
        modified_fraction=exceed.sum(axis=1) / (k_count - 1),
        clamped_down=low.sum(axis=1),
        clamped_up=high.sum(axis=1),
    )
    return PhaseMatrix(rebuilt, Stage.REBUILT), report


class ProcessResult(NamedTuple):
    output: CsiMatrix
    report: TsfrReport | None


def process(
    csi: CsiMatrix,
    method: str,
    *,
    smap: SubcarrierMap | None = None,
    sg_order: int = 2,
    sg_fraction: float = 0.1,
    abscissa: str = "ordinal",
    separable: bool = False,
) -> ProcessResult:
    """Run one named calibration route end to end on a complex CSI matrix.

    The matrix is decomposed, the phase is pushed through the chosen
    route, and the result is recomposed with the original amplitude,
    which is handed through untouched.

    Args:
        csi: complex CSI matrix.
        method: one of ``METHODS``: "raw" (decompose/recompose only),
            "lt", "lrr", "lrr+sgfreq", "lrr+sgtime", "lrr+sg2d", "tsfr".
        smap: physical subcarrier map; required for "lt" and for the
            physical abscissa, defaulted to contiguous 1..K otherwise.
        sg_order: polynomial order of any smoothing step.
        sg_fraction: window fraction of any smoothing step.
        abscissa: "ordinal" to regress over k = 1..K, "physical" to
            regress over the map indices.
        separable: make "lrr+sg2d" run sequential 1-D passes instead of
            the bivariate fit.

    Returns:
        ProcessResult(output, report); ``report`` is None for every
        method except "tsfr".
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; valid methods: {', '.join(METHODS)}")
    if abscissa not in ("ordinal", "physical"):
        raise ValueError(f"abscissa must be 'ordinal' or 'physical', got {abscissa!r}")
    if abscissa == "physical" and smap is None:
        raise ValueError("the physical abscissa needs a subcarrier map")
    if smap is not None and len(smap) != csi.subcarriers:
        raise ValueError(
            f"subcarrier map length {len(smap)} does not match matrix columns {csi.subcarriers}"
        )

    amplitude, raw, _ = decompose(csi)
    x = smap.m.astype(np.float64) if abscissa == "physical" else None
    report: TsfrReport | None = None

    if method == "raw":
        out_phase = raw
    elif method == "lt":
        out_phase = lt_calibrate(raw, smap if smap is not None else SubcarrierMap.contiguous(csi.subcarriers))
    elif method == "lrr":
        out_phase = lrr_calibrate(raw, x)
    elif method == "lrr+sgfreq":
        out_phase = sg_freq(lrr_calibrate(raw, x), order=sg_order, fraction=sg_fraction)
    elif method == "lrr+sgtime":
        out_phase = sg_time(lrr_calibrate(raw, x), order=sg_order, fraction=sg_fraction)
    elif method == "lrr+sg2d":
        out_phase = sg_2d(
            lrr_calibrate(raw, x), order=sg_order, fraction=sg_fraction, separable=separable
        )
    else:
        out_phase, report = tsfr(raw, order=sg_order, fraction=sg_fraction, abscissa=x)

    return ProcessResult(output=recompose(amplitude, out_phase), report=report)
