"""Core containers and phase primitives for OFDM channel state information.

A CSI record is an S x K complex matrix: S OFDM symbols sampled over time,
K subcarriers across frequency. Rows are time, columns are frequency,
everywhere in this package. All numerical work is done in 64-bit floats
(complex128 for complex payloads); containers are immutable once built.

The free functions here are the plumbing every calibration method shares:

* ``decompose`` splits a complex matrix into amplitude and principal phase.
* ``recompose`` rebuilds a complex matrix from an amplitude/phase pair and
  keeps the exact pair attached so the amplitude survives a processing
  chain bit for bit (re-deriving ``abs()`` from the cartesian values flips
  the last ulp on a large fraction of elements).
* ``unwrap`` removes 2*pi jumps from a phase vector, with the half-open
  convention that a step of exactly -pi unwraps to +pi.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Stage",
    "CsiMatrix",
    "PhaseMatrix",
    "AmplitudeMatrix",
    "SubcarrierMap",
    "decompose",
    "recompose",
    "unwrap",
]

_TWO_PI = 2.0 * np.pi


class Stage(enum.IntEnum):
    """Position of a phase matrix along the processing chain.

    The ordering is meaningful: operations may keep a matrix at its stage
    or advance it, never move it back.
    """

    RAW = 0
    CALIBRATED = 1
    TIME_SMOOTHED = 2
    REBUILT = 3

    @property
    def label(self) -> str:
        return self.name.lower()


def _check_grid(values: np.ndarray, name: str) -> None:
    if values.ndim != 2:
        raise ValueError(f"{name} must be 2-D (symbols x subcarriers), got shape {values.shape}")
    s, k = values.shape
    if s < 1:
        raise ValueError(f"{name} needs at least one symbol row, got {s}")
    if k < 2:
        raise ValueError(f"{name} needs at least two subcarrier columns, got {k}")
    bad = ~np.isfinite(values)
    if bad.any():
        where = np.argwhere(bad)[0]
        raise ValueError(
            f"{name} has a non-finite value at row {where[0]}, column {where[1]} (0-based)"
        )


def _freeze(values: np.ndarray) -> np.ndarray:
    out = np.array(values, copy=True, order="C")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class CsiMatrix:
    """Immutable S x K complex CSI matrix.

    ``_amplitude``/``_phase`` are an optional polar cache attached by
    :func:`recompose`; when present, :func:`decompose` returns the cached
    pair exactly instead of re-deriving it from the cartesian values.
    """

    values: np.ndarray
    _amplitude: np.ndarray | None = field(default=None, repr=False, compare=False)
    _phase: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.complex128)
        _check_grid(values, "CSI matrix")
        object.__setattr__(self, "values", _freeze(values))
        if self._amplitude is not None:
            object.__setattr__(self, "_amplitude", _freeze(self._amplitude))
            object.__setattr__(self, "_phase", _freeze(self._phase))

    @property
    def symbols(self) -> int:
        return self.values.shape[0]

    @property
    def subcarriers(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class PhaseMatrix:
    """Immutable S x K phase matrix in radians, tagged with its pipeline stage."""

    values: np.ndarray
    stage: Stage = Stage.RAW

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        _check_grid(values, "phase matrix")
        object.__setattr__(self, "values", _freeze(values))
        object.__setattr__(self, "stage", Stage(self.stage))

    @property
    def symbols(self) -> int:
        return self.values.shape[0]

    @property
    def subcarriers(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class AmplitudeMatrix:
    """Immutable S x K non-negative amplitude matrix.

    The amplitude of a CSI record is never altered by any processing method
    in this package; the same array travels from decomposition to
    recomposition.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        _check_grid(values, "amplitude matrix")
        if (values < 0).any():
            where = np.argwhere(values < 0)[0]
            raise ValueError(
                f"amplitude matrix has a negative value at row {where[0]}, "
                f"column {where[1]} (0-based)"
            )
        object.__setattr__(self, "values", _freeze(values))

    @property
    def symbols(self) -> int:
        return self.values.shape[0]

    @property
    def subcarriers(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class SubcarrierMap:
    """Physical subcarrier indices m_k of the K matrix columns.

    Args:
        m: strictly increasing integer indices, one per column. Indices may
            be negative (centered OFDM numbering is fine).
        n_fft: DFT size N of the underlying OFDM system; must cover the
            index span, N >= max(m) - min(m) + 1.
    """

    m: np.ndarray
    n_fft: int

    def __post_init__(self) -> None:
        m = np.asarray(self.m)
        if m.ndim != 1 or m.size < 2:
            raise ValueError(f"subcarrier map must be a 1-D sequence of at least 2 indices, got shape {m.shape}")
        if not np.issubdtype(m.dtype, np.integer):
            as_int = np.asarray(m, dtype=np.int64)
            if not np.array_equal(as_int, m):
                raise ValueError("subcarrier indices must be integers")
            m = as_int
        m = m.astype(np.int64)
        if (np.diff(m) <= 0).any():
            raise ValueError("subcarrier indices must be strictly increasing")
        n_fft = int(self.n_fft)
        span = int(m[-1] - m[0] + 1)
        if n_fft < span:
            raise ValueError(f"n_fft={n_fft} cannot cover the index span {span}")
        object.__setattr__(self, "m", _freeze(m))
        object.__setattr__(self, "n_fft", n_fft)

    def __len__(self) -> int:
        return int(self.m.size)

    @classmethod
    def contiguous(cls, k: int, n_fft: int | None = None, start: int = 1) -> "SubcarrierMap":
        """Map for K contiguous indices start..start+K-1 (default 1..K)."""
        if k < 2:
            raise ValueError(f"need at least 2 subcarriers, got {k}")
        return cls(np.arange(start, start + k, dtype=np.int64), n_fft if n_fft is not None else k)


def _wrap_pi(x: np.ndarray) -> np.ndarray:
    """Map angles into the half-open interval (-pi, pi].

    +pi maps to itself; -pi maps to +pi.
    """
    x = np.asarray(x, dtype=np.float64)
    return x - _TWO_PI * np.ceil((x - np.pi) / _TWO_PI)


def decompose(csi: CsiMatrix) -> tuple[AmplitudeMatrix, PhaseMatrix, list[tuple[int, int]]]:
    """Split a CSI matrix into amplitude and principal phase.

    The phase lies in (-pi, pi]. A zero-magnitude element has no defined
    phase; it is reported as 0 and its (row, column) coordinates are
    collected in the returned warning list instead of producing NaN.

    If ``csi`` was built by :func:`recompose`, the exact amplitude/phase
    pair it was built from is returned (no cartesian round trip).

    Returns:
        (amplitude, phase, zero_cells) where ``phase`` is tagged
        :attr:`Stage.RAW` and ``zero_cells`` lists the 0-based coordinates
        of zero-magnitude elements.
    """
    if not isinstance(csi, CsiMatrix):
        raise TypeError(f"expected CsiMatrix, got {type(csi).__name__}")
    if csi._amplitude is not None:
        amp_values = csi._amplitude
        phase_values = csi._phase
    else:
        amp_values = np.abs(csi.values)
        phase_values = np.angle(csi.values)
        # atan2 can return -pi when the imaginary part is a negative zero;
        # fold it onto +pi so the (-pi, pi] contract holds.
        phase_values = np.where(phase_values == -np.pi, np.pi, phase_values)
        phase_values = np.where(amp_values == 0.0, 0.0, phase_values)
    zero_cells = [(int(s), int(k)) for s, k in np.argwhere(amp_values == 0.0)]
    return (
        AmplitudeMatrix(amp_values),
        PhaseMatrix(phase_values, Stage.RAW),
        zero_cells,
    )


def recompose(amplitude: AmplitudeMatrix, phase: PhaseMatrix) -> CsiMatrix:
    """Rebuild a complex CSI matrix as amplitude * exp(j * phase).

    The exact ``amplitude`` array (and the phase folded into (-pi, pi],
    zeroed where the amplitude is zero) is cached on the result, so a
    subsequent :func:`decompose` returns it bit for bit.
    """
    if amplitude.shape != phase.shape:
        raise ValueError(
            f"amplitude shape {amplitude.shape} does not match phase shape {phase.shape}"
        )
    a = amplitude.values
    p = phase.values
    values = a * np.cos(p) + 1j * (a * np.sin(p))
    principal = _wrap_pi(p)
    principal = np.where(a == 0.0, 0.0, principal)
    return CsiMatrix(values, _amplitude=a, _phase=principal)


def unwrap(v: np.ndarray) -> np.ndarray:
    """Remove 2*pi discontinuities from a 1-D phase vector.

    The first sample is kept; every later sample is shifted by the integer
    multiple of 2*pi that puts each consecutive difference into (-pi, pi].
    A difference of exactly +pi is kept, one of exactly -pi becomes +pi.
    The pass is idempotent: running it on its own output returns the input
    unchanged, bit for bit.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"unwrap expects a 1-D vector, got shape {v.shape}")
    if v.size == 0:
        raise ValueError("unwrap expects at least one sample")
    if not np.isfinite(v).all():
        raise ValueError(f"non-finite value at index {int(np.argwhere(~np.isfinite(v))[0][0])}")
    if v.size == 1:
        return v.copy()
    d = np.diff(v)
    wraps = np.ceil((d - np.pi) / _TWO_PI)
    out = np.empty_like(v)
    out[0] = v[0]
    out[1:] = v[1:] - _TWO_PI * np.cumsum(wraps)
    return out


def _unwrap_last_axis(values: np.ndarray) -> np.ndarray:
    """Vectorized :func:`unwrap` of every row of a 2-D array.

    Bit-identical to calling ``unwrap`` on each row: the per-row operations
    are the same elementwise arithmetic in the same order.
    """
    d = np.diff(values, axis=-1)
    wraps = np.ceil((d - np.pi) / _TWO_PI)
    out = np.empty_like(values)
    out[..., 0] = values[..., 0]
    out[..., 1:] = values[..., 1:] - _TWO_PI * np.cumsum(wraps, axis=-1)
    return out
