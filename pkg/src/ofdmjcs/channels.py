"""Radar point-target channels plus multipath link channels with AWGN."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import oaconvolve

from .params import C0, SystemConfig
from .waveform import TimeBurst

LOS = "LOS"
NLOS = "NLOS"


@dataclass(frozen=True)
class RadarTarget:
    range: float
    velocity: float
    amplitude: complex = 1.0

    @classmethod
    def from_db(cls, range_m: float, velocity: float, amplitude_db: float = 0.0, phase: float = 0.0):
        return cls(range_m, velocity, 10 ** (amplitude_db / 20) * np.exp(1j * phase))


@dataclass(frozen=True)
class Cir:
    taps: np.ndarray
    profile: str = NLOS

    @property
    def N_f(self) -> int:
        return self.taps.size

    def cfr(self, Nc: int) -> np.ndarray:
        """DFT of the zero-padded taps (bin order)."""
        if self.taps.size > Nc:
            raise ValueError("CIR longer than the DFT size")
        return np.fft.fft(self.taps, Nc)


@dataclass(frozen=True)
class LinkState:
    cir: Cir
    relative_velocity: float = 0.0
    noise_variance: float = 0.0


def reference_targets(crosstalk_db: float = 20.0) -> list[RadarTarget]:
    """Two moving objects plus strong Tx/Rx crosstalk close to the sensor."""
    return [
        RadarTarget(10.0, 50.0, 1.0),
        RadarTarget(20.0, -20.0, 1.0),
        RadarTarget.from_db(0.1, 0.0, crosstalk_db),
    ]


def radar_channel(targets, cfg: SystemConfig, c0: float = C0) -> np.ndarray:
    """Frequency-domain point-target channel ``c_{k,m}`` (``Nc x Nsym``, bin order).

    Round-trip delay ``2r/c0`` and two-way Doppler ``2 v fc / c0``; ICI is not
    modeled.
    """
    k = cfg.k_values()[:, None]
    m = np.arange(cfg.Nsym)[None, :]
    c = np.zeros((cfg.Nc, cfg.Nsym), dtype=complex)
    for t in targets:
        tau = 2 * t.range / c0
        f_d = 2 * t.velocity * cfg.fc / c0
        c += t.amplitude * np.exp(-2j * np.pi * k * cfg.delta_f * tau) * np.exp(
            2j * np.pi * f_d * m * cfg.symbol_duration
        )
    return c


def generate_cir(
    profile: str = NLOS,
    N_f: int = 256,
    seed=None,
    *,
    Nc: int | None = None,
    decay_taps: float = 50.0,
    k_factor_db: float = 10.0,
) -> Cir:
    """Tap-delay line with exponential power-delay profile and unit mean energy.

    NLOS taps are circular Gaussian. For LOS the first tap is Rician with
    K-factor ``k_factor_db`` (deterministic zero-phase specular part).
    """
    if Nc is not None and N_f > Nc:
        raise ValueError(f"N_f={N_f} exceeds Nc={Nc}")
    if profile not in (LOS, NLOS):
        raise ValueError(f"profile must be LOS or NLOS, got {profile!r}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pdp = np.exp(-np.arange(N_f) / decay_taps)
    pdp /= pdp.sum()
    taps = np.sqrt(pdp / 2) * (rng.standard_normal(N_f) + 1j * rng.standard_normal(N_f))
    if profile == LOS:
        k = 10 ** (k_factor_db / 10)
        if np.isinf(k):
            taps[0] = np.sqrt(pdp[0])
        else:
            taps[0] = np.sqrt(pdp[0] * k / (k + 1)) + taps[0] / np.sqrt(k + 1)
    return Cir(taps, profile)


def doppler_phase(n: np.ndarray, velocity: float, cfg: SystemConfig, c0: float = C0) -> np.ndarray:
    """One-way Doppler rotation phase at sample indices ``n``."""
    f_d = velocity * cfg.fc / c0
    return 2 * np.pi * f_d * n * cfg.Ts


def symbol_cpe(velocity: float, cfg: SystemConfig, n_symbols: int, c0: float = C0) -> np.ndarray:
    """Common phase error of every OFDM symbol caused by a constant Doppler shift.

    The rotation is evaluated at the centre of each symbol's DFT window.
    """
    m = np.arange(n_symbols)
    centre = m * cfg.samples_per_symbol + cfg.Ncp + (cfg.Nc - 1) / 2
    return doppler_phase(centre, velocity, cfg, c0)


def apply_channel_time(burst, state: LinkState, cfg: SystemConfig, c0: float = C0):
    """Convolve with the CIR (output truncated to the input length), then rotate by the Doppler shift."""
    x = burst.samples if isinstance(burst, TimeBurst) else np.asarray(burst)
    taps = state.cir.taps
    if taps.size == 1:
        y = x * taps[0]
    else:
        y = oaconvolve(x, taps)[: x.size]
    if state.relative_velocity:
        y = y * np.exp(1j * doppler_phase(np.arange(x.size), state.relative_velocity, cfg, c0))
    if isinstance(burst, TimeBurst):
        return TimeBurst(y, burst.Nc, burst.Ncp)
    return y


def complex_noise(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-variance circularly-symmetric complex Gaussian samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def add_awgn(samples, sigma2: float, seed=None):
    """Add complex white Gaussian noise of total variance ``sigma2`` per sample."""
    if sigma2 < 0:
        raise ValueError("noise variance must be non-negative")
    x = samples.samples if isinstance(samples, TimeBurst) else np.asarray(samples)
    if sigma2 == 0:
        return samples
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    y = x + np.sqrt(sigma2) * complex_noise(rng, x.shape)
    if isinstance(samples, TimeBurst):
        return TimeBurst(y, samples.Nc, samples.Ncp)
    return y
