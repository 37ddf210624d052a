"""CIR to ECIR relationship when only every ``mu``-th subcarrier of the CFR is used.

Two independent evaluations are provided: decimating the CFR and taking an
``Na``-point IDFT, and the explicit kernel sum ``g_n = 1/Na sum_m f_m s(n, m)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AliasingConfig:
    Nc: int
    mu: int
    Na: int
    N_f: int

    def __post_init__(self):
        if min(self.Nc, self.mu, self.Na, self.N_f) < 1:
            raise ValueError("all aliasing parameters must be positive")
        if self.mu * (self.Na - 1) >= self.Nc:
            raise ValueError(f"mu*(Na-1) = {self.mu * (self.Na - 1)} must be below Nc = {self.Nc}")
        if self.N_f > self.Nc:
            raise ValueError("CIR longer than Nc")

    @property
    def dirac(self) -> bool:
        """True when ``Nc / mu == Na`` and the kernel collapses to a scaled Dirac comb."""
        return self.Nc == self.mu * self.Na


def decimate_cfr(p, cfg: AliasingConfig) -> np.ndarray:
    """``h_k = p_{mu k}`` for ``0 <= k < Na``."""
    p = np.asarray(p)
    if p.shape[0] != cfg.Nc:
        raise ValueError(f"CFR must have {cfg.Nc} entries, got {p.shape[0]}")
    return p[cfg.mu * np.arange(cfg.Na)]


def kernel_s(n, m, cfg: AliasingConfig) -> np.ndarray | complex:
    """``s(n, m) = sum_{k<Na} exp(j 2 pi k (n/Na - mu m/Nc))`` in closed form.

    The phase is reduced with integer arithmetic, so the Dirac condition
    (phase an integer number of turns) is detected exactly and returns ``Na``.
    """
    n = np.asarray(n, dtype=np.int64)
    m = np.asarray(m, dtype=np.int64)
    if np.any((n < 0) | (n >= cfg.Na)):
        raise ValueError("n must satisfy 0 <= n < Na")
    period = cfg.Na * cfg.Nc
    # x = n/Na - mu m/Nc = r / (Na Nc) turns
    r = np.mod(n * cfg.Nc - cfg.mu * m * cfg.Na, period)
    # Na x = r/Nc turns
    r_full = np.mod(r * cfg.Na, period)
    num = 1 - np.exp(2j * np.pi * r_full / period)
    den = 1 - np.exp(2j * np.pi * r / period)
    singular = r == 0
    out = np.where(singular, complex(cfg.Na), num / np.where(singular, 1.0, den))
    return complex(out) if out.ndim == 0 else out


def kernel_s_naive(n: int, m: int, cfg: AliasingConfig) -> complex:
    k = np.arange(cfg.Na)
    return complex(np.sum(np.exp(2j * np.pi * k * (n / cfg.Na - cfg.mu * m / cfg.Nc))))


def ecir_kernel(f, cfg: AliasingConfig) -> np.ndarray:
    """ECIR through the kernel sum."""
    f = np.asarray(f, dtype=complex)
    if f.size != cfg.N_f:
        raise ValueError(f"CIR must have {cfg.N_f} taps, got {f.size}")
    n = np.arange(cfg.Na)[:, None]
    m = np.arange(cfg.N_f)[None, :]
    return kernel_s(n, m, cfg) @ f / cfg.Na


def ecir_from_cir(f, cfg: AliasingConfig) -> np.ndarray:
    """ECIR as the ``Na``-point IDFT of the decimated CFR of ``f``."""
    f = np.asarray(f, dtype=complex)
    if f.size != cfg.N_f:
        raise ValueError(f"CIR must have {cfg.N_f} taps, got {f.size}")
    return np.fft.ifft(decimate_cfr(np.fft.fft(f, cfg.Nc), cfg))


def fold_cir(f, Na: int) -> np.ndarray:
    """Time-domain folding ``g_n = sum_i f_{n + i Na}`` (zero padding when ``len(f) <= Na``)."""
    f = np.asarray(f, dtype=complex)
    pad = (-f.size) % Na
    return np.concatenate([f, np.zeros(pad, complex)]).reshape(-1, Na).sum(axis=0)


def sweep_cases(Nc_values=(16, 64, 512), mu_values=(1, 2, 3, 4)):
    """Parameter grid: ``Na`` in ``{Nc/mu, Nc/mu +- 1}`` wherever valid, several CIR lengths."""
    for Nc in Nc_values:
        for mu in mu_values:
            base = Nc // mu
            candidates = [base - 1, base, base + 1] if Nc % mu == 0 else [base - 1, base]
            for Na in candidates:
                if Na < 1 or mu * (Na - 1) >= Nc:
                    continue
                for N_f in sorted({1, max(1, Na // 2), Na, min(Nc, Na + 3)}):
                    yield AliasingConfig(Nc, mu, Na, N_f)


def relative_error(a, b) -> float:
    scale = max(np.max(np.abs(b)), np.finfo(float).tiny)
    return float(np.max(np.abs(a - b)) / scale)
