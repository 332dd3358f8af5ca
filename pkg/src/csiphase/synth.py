"""Synthetic multipath CSI with receiver-style phase impairments.

The forward model is a plain multipath channel frequency response over
the reported subcarrier grid,

    H_s(k) = sum_p g_{p,s} * exp(-j 2 pi m_k tau_p / N),

optionally with a slow sinusoidal gain drift per path to emulate
activity-induced channel change:

    g_{p,s} = gain_p * (1 + depth * sin(2 pi s / period + 2 pi p / P)).

On top of the clean response, :func:`apply_impairments` injects the
three receiver phase errors onto each symbol row s:

    measured phase = true phase + 2 pi (m_k / N) delta_t_s + gamma_s + Z,

a per-symbol linear tilt over the physical subcarrier index (timing
lag), a per-symbol constant (carrier offset) and i.i.d. Gaussian noise
Z of standard deviation ``noise_sigma``. The injection is phase-only,
so the measured amplitude equals the clean amplitude bit for bit.

Everything is deterministic given the seed; noise comes from one
PCG64 stream seeded through ``SeedSequence(seed)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import CsiMatrix, PhaseMatrix, Stage, SubcarrierMap, decompose, recompose
from .io import write_csif

__all__ = [
    "ChannelSpec",
    "ImpairmentSpec",
    "SynthOutput",
    "gen_true_csi",
    "apply_impairments",
    "gen_dataset",
    "demo_channel",
    "demo_impairments",
]


@dataclass(frozen=True)
class ChannelSpec:
    """Multipath channel: (delay in samples, complex gain) per path.

    ``drift_depth`` > 0 turns on the per-path sinusoidal gain drift with
    the given period in symbols; each path starts the sinusoid at a
    different fixed angle so paths do not breathe in unison.
    """

    paths: tuple[tuple[float, complex], ...]
    drift_depth: float = 0.0
    drift_period: float = 0.0

    def __post_init__(self) -> None:
        paths = tuple((float(d), complex(g)) for d, g in self.paths)
        if not paths:
            raise ValueError("a channel needs at least one path")
        for delay, gain in paths:
            if not np.isfinite(delay) or delay < 0:
                raise ValueError(f"path delay {delay} must be finite and non-negative")
            if not np.isfinite(gain.real) or not np.isfinite(gain.imag):
                raise ValueError("path gains must be finite")
        object.__setattr__(self, "paths", paths)
        if not (0 <= self.drift_depth <= 1):
            raise ValueError(f"drift_depth {self.drift_depth} must be within [0, 1]")
        if self.drift_depth > 0 and self.drift_period <= 0:
            raise ValueError("a positive drift_depth needs a positive drift_period")

    @property
    def delays(self) -> np.ndarray:
        return np.array([d for d, _ in self.paths])

    @property
    def gains(self) -> np.ndarray:
        return np.array([g for _, g in self.paths])


@dataclass(frozen=True)
class ImpairmentSpec:
    """Per-symbol timing lags and carrier offsets plus phase-noise level.

    ``delta_t`` is in samples (fractional values allowed), ``gamma`` in
    radians; both have one entry per symbol. ``noise_sigma`` is the
    standard deviation of the additive Gaussian phase noise drawn from
    a PCG64 stream seeded with ``seed``. ``smap`` fixes the physical
    subcarrier indices m_k and the DFT size N.
    """

    delta_t: np.ndarray
    gamma: np.ndarray
    noise_sigma: float
    seed: int
    smap: SubcarrierMap

    def __post_init__(self) -> None:
        delta_t = np.array(self.delta_t, dtype=np.float64, copy=True)
        gamma = np.array(self.gamma, dtype=np.float64, copy=True)
        if delta_t.ndim != 1 or gamma.ndim != 1 or delta_t.size != gamma.size:
            raise ValueError(
                f"delta_t and gamma must be 1-D and equally long, got shapes "
                f"{delta_t.shape} and {gamma.shape}"
            )
        if delta_t.size < 1:
            raise ValueError("need at least one symbol of impairments")
        if not (np.isfinite(delta_t).all() and np.isfinite(gamma).all()):
            raise ValueError("delta_t and gamma must be finite")
        delta_t.setflags(write=False)
        gamma.setflags(write=False)
        object.__setattr__(self, "delta_t", delta_t)
        object.__setattr__(self, "gamma", gamma)
        if not np.isfinite(self.noise_sigma) or self.noise_sigma < 0:
            raise ValueError(f"noise_sigma {self.noise_sigma} must be finite and >= 0")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError(f"seed {self.seed!r} must be a non-negative integer")
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def symbols(self) -> int:
        return self.delta_t.size


@dataclass(frozen=True)
class SynthOutput:
    """A generated pair of clean and impaired CSI plus the specs used."""

    true_csi: CsiMatrix
    measured_csi: CsiMatrix
    impairment: ImpairmentSpec
    channel: ChannelSpec | None = None

    def __post_init__(self) -> None:
        if self.true_csi.shape != self.measured_csi.shape:
            raise ValueError(
                f"true and measured dimensions differ: "
                f"{self.true_csi.shape} vs {self.measured_csi.shape}"
            )


def gen_true_csi(channel: ChannelSpec, symbols: int, smap: SubcarrierMap) -> CsiMatrix:
    """Clean channel frequency response over ``symbols`` rows.

    Without gain drift every row is the same response; with drift the
    rows vary only through the per-path gain modulation.
    """
    if symbols < 1:
        raise ValueError(f"need at least one symbol, got {symbols}")
    delays = channel.delays
    if (delays >= smap.n_fft).any():
        raise ValueError(
            f"path delays must be below the DFT size {smap.n_fft}, got {delays.max()}"
        )
    # (P, K) per-path response on the reported grid.
    base = np.exp(-2j * np.pi * np.outer(delays, smap.m) / smap.n_fft)
    gains = channel.gains
    if channel.drift_depth == 0:
        row = gains @ base
        return CsiMatrix(np.tile(row, (symbols, 1)))
    starts = 2 * np.pi * np.arange(len(gains)) / len(gains)
    s = np.arange(symbols, dtype=np.float64)[:, None]
    modulation = 1 + channel.drift_depth * np.sin(
        2 * np.pi * s / channel.drift_period + starts[None, :]
    )
    return CsiMatrix((gains[None, :] * modulation) @ base)


def apply_impairments(true_csi: CsiMatrix, imp: ImpairmentSpec) -> SynthOutput:
    """Inject the per-symbol phase errors into a clean CSI matrix.

    The clean matrix is split into amplitude and phase, the three error
    terms are added to the phase, and the matrix is rebuilt around the
    untouched amplitude.
    """
    if imp.symbols != true_csi.symbols:
        raise ValueError(
            f"impairments cover {imp.symbols} symbols, matrix has {true_csi.symbols}"
        )
    if len(imp.smap) != true_csi.subcarriers:
        raise ValueError(
            f"subcarrier map length {len(imp.smap)} does not match matrix "
            f"columns {true_csi.subcarriers}"
        )
    amplitude, phase, _ = decompose(true_csi)
    tilt = (2 * np.pi / imp.smap.n_fft) * np.outer(imp.delta_t, imp.smap.m)
    measured = phase.values + tilt + imp.gamma[:, None]
    if imp.noise_sigma > 0:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(imp.seed)))
        measured = measured + rng.normal(0.0, imp.noise_sigma, size=measured.shape)
    return SynthOutput(
        true_csi=true_csi,
        measured_csi=recompose(amplitude, PhaseMatrix(measured, Stage.RAW)),
        impairment=imp,
    )


def gen_dataset(
    channel: ChannelSpec,
    imp: ImpairmentSpec,
    symbols: int,
    *,
    out: str | Path | None = None,
) -> SynthOutput:
    """Generate a clean/measured pair and optionally write both as CSIF.

    With ``out`` given, the pair lands in ``<out>.true.csif`` and
    ``<out>.meas.csif``. Deterministic for a given seed and specs.
    """
    true_csi = gen_true_csi(channel, symbols, imp.smap)
    result = apply_impairments(true_csi, imp)
    result = SynthOutput(
        true_csi=result.true_csi,
        measured_csi=result.measured_csi,
        impairment=imp,
        channel=channel,
    )
    if out is not None:
        write_csif(f"{out}.true.csif", result.true_csi)
        write_csif(f"{out}.meas.csif", result.measured_csi)
    return result


def demo_channel() -> ChannelSpec:
    """Three gentle paths with no amplitude nulls on a 64-bin grid."""
    return ChannelSpec(
        paths=(
            (0.0, 1.0 + 0.0j),
            (2.0, 0.3 * np.exp(0.7j)),
            (4.0, 0.15 * np.exp(-1.1j)),
        )
    )


def demo_impairments(
    symbols: int = 1000,
    smap: SubcarrierMap | None = None,
    *,
    seed: int = 0,
    noise_sigma: float = 0.05,
) -> ImpairmentSpec:
    """Per-symbol lags in [-2, 2] samples and offsets in (-pi, pi].

    One root seed drives two separate PCG64 streams: the first draws
    the per-symbol parameters here, the second (its seed stored on the
    spec) is consumed later by the noise injection, so parameter draws
    and noise never share a stream.
    """
    if smap is None:
        smap = SubcarrierMap.contiguous(52, n_fft=64)
    param_seed, noise_seed = np.random.SeedSequence(seed).generate_state(2, np.uint64)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(param_seed))))
    delta_t = rng.uniform(-2.0, 2.0, size=symbols)
    gamma = rng.uniform(-np.pi, np.pi, size=symbols)
    return ImpairmentSpec(
        delta_t=delta_t,
        gamma=gamma,
        noise_sigma=noise_sigma,
        seed=int(noise_seed),
        smap=smap,
    )
