"""Savitzky-Golay polynomial smoothing over time, frequency, or both.

The filter replaces each sample with the value at that sample of a
least-squares polynomial of degree n fitted over a sliding window of
2l+1 points. In the interior that reduces to one fixed convolution
kernel (the projection row at the window center). Near the ends no
samples are invented: the window is anchored to the nearest 2l+1 real
samples and the fitted polynomial is evaluated at the point's own
abscissa, so the first and last l points come from truncated-window
refits rather than padding.

``sg_time`` smooths every subcarrier down the time axis, ``sg_freq``
every symbol across frequency (the exact transpose of ``sg_time``), and
``sg_2d`` fits one bivariate polynomial of total degree <= n over a
rectangular time-frequency neighborhood. Window lengths default to a
fraction (0.1) of the filtered dimension, rounded and forced odd.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import PhaseMatrix, Stage, _unwrap_last_axis

__all__ = [
    "SgSpec",
    "SgKernel",
    "DegenerateWindowWarning",
    "sg_design",
    "sg_apply",
    "sg_time",
    "sg_freq",
    "sg_2d",
]


class DegenerateWindowWarning(UserWarning):
    """Input too short for the requested window; data passed through unchanged."""


@dataclass(frozen=True)
class SgSpec:
    """Polynomial order and odd window length of a smoothing pass."""

    order: int
    window: int

    def __post_init__(self) -> None:
        order = int(self.order)
        window = int(self.window)
        if order < 0:
            raise ValueError(f"polynomial order must be >= 0, got {order}")
        if window % 2 == 0:
            raise ValueError(f"window must be odd, got {window}")
        if window < 3:
            raise ValueError(f"window must be at least 3, got {window}")
        if window < order + 1:
            raise ValueError(
                f"window {window} cannot determine a degree-{order} polynomial"
            )
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "window", window)

    @property
    def half(self) -> int:
        return self.window // 2


@dataclass(frozen=True)
class SgKernel:
    """Weights realizing one smoothing pass.

    Attributes:
        spec: the order/window pair the kernel was designed for.
        coefficients: length-w convolution weights for interior points
            (the projection row at the window center).
        edge_evaluators: w x w matrix; row p holds the weights that
            evaluate the window's least-squares fit at offset p. Row
            ``half`` equals ``coefficients``; rows before/after it serve
            the leading/trailing edge points.
    """

    spec: SgSpec
    coefficients: np.ndarray
    edge_evaluators: np.ndarray

    def __post_init__(self) -> None:
        for name in ("coefficients", "edge_evaluators"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr = np.array(arr, copy=True, order="C")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def sg_design(spec: SgSpec) -> SgKernel:
    """Compute the projection weights for one order/window pair.

    The least-squares fit is expressed through the orthogonal projection
    P = V (V^T V)^-1 V^T onto the polynomial space over the window
    abscissas (scaled into [-1, 1] for conditioning; the projection is
    invariant to that reparameterization). Row p of P evaluates the fit
    at abscissa p, so one matrix provides the central convolution kernel
    and every edge evaluator.
    """
    w = spec.window
    half = spec.half
    t = (np.arange(w, dtype=np.float64) - half) / max(half, 1)
    v = np.vander(t, spec.order + 1, increasing=True)
    proj = v @ np.linalg.pinv(v)
    return SgKernel(spec=spec, coefficients=proj[half], edge_evaluators=proj)


def _apply_stack(arr: np.ndarray, kernel: SgKernel) -> np.ndarray:
    """Filter each row of a C-contiguous (signals, length) stack."""
    w = kernel.spec.window
    half = kernel.spec.half
    length = arr.shape[1]
    windows = sliding_window_view(arr, w, axis=1)
    interior = windows @ kernel.coefficients
    lead = arr[:, :w] @ kernel.edge_evaluators[:half].T
    trail = arr[:, length - w :] @ kernel.edge_evaluators[half + 1 :].T
    return np.concatenate([lead, interior, trail], axis=1)


def sg_apply(v: np.ndarray, spec: SgSpec) -> np.ndarray:
    """Smooth a 1-D vector.

    A vector shorter than the window cannot support the fit; it is
    returned unchanged and a :class:`DegenerateWindowWarning` is issued.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"sg_apply expects a 1-D vector, got shape {v.shape}")
    if not np.isfinite(v).all():
        raise ValueError("sg_apply expects finite samples")
    if v.size < spec.window:
        warnings.warn(
            f"vector of length {v.size} is shorter than window {spec.window}; "
            "returning it unchanged",
            DegenerateWindowWarning,
            stacklevel=2,
        )
        return v.copy()
    kernel = sg_design(spec)
    return _apply_stack(np.ascontiguousarray(v[None, :]), kernel)[0]


def _window_from_fraction(length: int, order: int, fraction: float) -> int | None:
    """Odd window length for a dimension of the given size, or None if the
    dimension is too short to support any valid window."""
    if fraction <= 0.0:
        raise ValueError(f"window fraction must be positive, got {fraction}")
    w = round(fraction * length)
    if w % 2 == 0:
        w += 1
    min_w = order + 1 if (order + 1) % 2 == 1 else order + 2
    w = max(w, 3, min_w)
    largest_odd = length if length % 2 == 1 else length - 1
    if w > largest_odd:
        w = largest_odd
    if w < 3 or w < order + 1:
        return None
    return w


def _resolve_spec(
    spec: "SgSpec | float | None", order: int, fraction: float, length: int
) -> SgSpec | None:
    """Turn the (spec | fraction | defaults) argument union into an SgSpec.

    Returns None when the dimension cannot support the window (degenerate
    pass-through case).
    """
    if isinstance(spec, SgSpec):
        return spec if spec.window <= length else None
    if spec is not None:
        fraction = float(spec)
    w = _window_from_fraction(length, order, fraction)
    return SgSpec(order, w) if w is not None else None


def _warn_degenerate(what: str, length: int) -> None:
    warnings.warn(
        f"{what} of size {length} is shorter than any valid window; "
        "returning the input unchanged",
        DegenerateWindowWarning,
        stacklevel=3,
    )


def _check_stage_smoothable(phase: PhaseMatrix, op: str) -> None:
    if phase.stage > Stage.TIME_SMOOTHED:
        raise ValueError(f"{op} cannot run on a {phase.stage.label}-stage matrix")


def sg_time(
    phase: PhaseMatrix,
    spec: "SgSpec | float | None" = None,
    *,
    order: int = 2,
    fraction: float = 0.1,
) -> PhaseMatrix:
    """Smooth every subcarrier track down the time axis.

    Each column is unwrapped, then filtered with a window derived from
    the number of symbols (fraction of S, rounded, forced odd, at least
    3) unless an explicit :class:`SgSpec` or fraction is given.

    Args:
        phase: matrix to smooth; must not already be rebuilt.
        spec: explicit SgSpec, or a number taken as the window fraction.
        order: polynomial order when no explicit spec is given.
        fraction: window fraction of S when no explicit spec is given.

    Returns:
        Time-smoothed-stage matrix of the same shape.
    """
    _check_stage_smoothable(phase, "sg_time")
    s = phase.symbols
    if s < 3:
        raise ValueError(f"time smoothing needs at least 3 symbols, got {s}")
    resolved = _resolve_spec(spec, order, fraction, s)
    if resolved is None:
        _warn_degenerate("time axis", s)
        return PhaseMatrix(phase.values, Stage.TIME_SMOOTHED)
    columns = np.ascontiguousarray(phase.values.T)
    smoothed = _apply_stack(_unwrap_last_axis(columns), sg_design(resolved))
    return PhaseMatrix(smoothed.T, Stage.TIME_SMOOTHED)


def sg_freq(
    phase: PhaseMatrix,
    spec: "SgSpec | float | None" = None,
    *,
    order: int = 2,
    fraction: float = 0.1,
) -> PhaseMatrix:
    """Smooth every symbol row across frequency.

    Exactly ``sg_time`` applied to the transposed matrix: rows are
    unwrapped and filtered with a window derived from the number of
    subcarriers. The stage tag is kept (frequency smoothing is a side
    step, not a position on the time-processing ladder).
    """
    _check_stage_smoothable(phase, "sg_freq")
    k = phase.subcarriers
    resolved = _resolve_spec(spec, order, fraction, k)
    if resolved is None:
        _warn_degenerate("frequency axis", k)
        return PhaseMatrix(phase.values, phase.stage)
    rows = np.ascontiguousarray(phase.values)
    smoothed = _apply_stack(_unwrap_last_axis(rows), sg_design(resolved))
    return PhaseMatrix(smoothed, phase.stage)


def _design_2d(order: int, w_rows: int, w_cols: int) -> np.ndarray:
    """Projection matrix of the bivariate fit of total degree <= order
    over a w_rows x w_cols grid, points in row-major order."""
    tr = (np.arange(w_rows, dtype=np.float64) - w_rows // 2) / max(w_rows // 2, 1)
    tc = (np.arange(w_cols, dtype=np.float64) - w_cols // 2) / max(w_cols // 2, 1)
    columns = [
        np.outer(tr**i, tc**j).ravel()
        for i in range(order + 1)
        for j in range(order + 1 - i)
    ]
    basis = np.stack(columns, axis=1)
    return basis @ np.linalg.pinv(basis)


def sg_2d(
    phase: PhaseMatrix,
    spec: "SgSpec | float | None" = None,
    *,
    order: int = 2,
    fraction: float = 0.1,
    freq_spec: "SgSpec | None" = None,
    separable: bool = False,
) -> PhaseMatrix:
    """Smooth with one bivariate polynomial fit per time-frequency cell.

    A polynomial of total degree <= order is least-squares fitted over a
    rectangular window (time window derived from S, frequency window from
    K, each as in the 1-D filters) and evaluated at the cell. Edge cells
    anchor the window inside the matrix and evaluate the fit at their own
    offset, mirroring the 1-D edge policy. Columns are unwrapped first,
    then rows.

    Args:
        phase: matrix to smooth; must not already be rebuilt.
        spec: explicit SgSpec for the time window, or a number taken as
            the window fraction for both dimensions.
        order: polynomial total degree when no explicit spec is given.
        fraction: per-dimension window fraction when no spec is given.
        freq_spec: explicit SgSpec for the frequency window (order must
            match the time spec).
        separable: run sequential 1-D passes (time, then frequency)
            instead of the bivariate fit.

    Returns:
        Time-smoothed-stage matrix of the same shape.
    """
    _check_stage_smoothable(phase, "sg_2d")
    if separable:
        return sg_freq(sg_time(phase, spec, order=order, fraction=fraction),
                       freq_spec, order=order, fraction=fraction)
    s, k = phase.shape
    if s < 3:
        raise ValueError(f"2-D smoothing needs at least 3 symbols, got {s}")
    row_spec = _resolve_spec(spec, order, fraction, s)
    if freq_spec is None:
        eff_fraction = float(spec) if isinstance(spec, (int, float)) else fraction
        eff_order = row_spec.order if row_spec is not None else order
        col_spec = _resolve_spec(None, eff_order, eff_fraction, k)
    else:
        col_spec = freq_spec if freq_spec.window <= k else None
    if row_spec is None or col_spec is None:
        _warn_degenerate("time-frequency grid", min(s, k))
        return PhaseMatrix(phase.values, Stage.TIME_SMOOTHED)
    if row_spec.order != col_spec.order:
        raise ValueError(
            f"time and frequency windows must share one polynomial order, "
            f"got {row_spec.order} and {col_spec.order}"
        )

    w_r, w_c = row_spec.window, col_spec.window
    l_r, l_c = row_spec.half, col_spec.half
    u = _unwrap_last_axis(np.ascontiguousarray(phase.values.T)).T
    u = _unwrap_last_axis(np.ascontiguousarray(u))
    proj = _design_2d(row_spec.order, w_r, w_c)

    out = np.empty_like(u)
    center = proj[l_r * w_c + l_c]
    blocks = sliding_window_view(u, (w_r, w_c))
    nr, nc = blocks.shape[:2]
    out[l_r : s - l_r, l_c : k - l_c] = blocks.reshape(nr, nc, w_r * w_c) @ center

    edge = np.ones((s, k), dtype=bool)
    edge[l_r : s - l_r, l_c : k - l_c] = False
    for si, ki in np.argwhere(edge):
        br = min(max(si - l_r, 0), s - w_r)
        bc = min(max(ki - l_c, 0), k - w_c)
        row = proj[(si - br) * w_c + (ki - bc)]
        out[si, ki] = row @ u[br : br + w_r, bc : bc + w_c].ravel()
    return PhaseMatrix(out, Stage.TIME_SMOOTHED)
