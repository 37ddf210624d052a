"""Subcarrier symbol generation for the three waveforms, plus OFDM modulation with PAPR statistics.

Frames are ``Nc x Nsym`` complex matrices stored in DFT bin order (row ``b``
holds subcarrier ``k = bin_to_k(b)``). The forward DFT is unnormalized and the
inverse carries the ``1/Nc`` factor, i.e. plain ``numpy.fft``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .params import SystemConfig, mirror_bins


class Rule(str, Enum):
    STANDARD = "STANDARD"
    RULE_I = "RULE_I"
    RULE_II = "RULE_II"

    @classmethod
    def parse(cls, value) -> "Rule":
        if isinstance(value, cls):
            return value
        aliases = {"STD": "STANDARD", "IQIR": "RULE_I", "FRIQIR": "RULE_II", "I": "RULE_I", "II": "RULE_II"}
        key = str(value).upper().replace("-", "_")
        return cls(aliases.get(key, key))


class Role:
    DATA = 0
    PILOT = 1
    PREAMBLE = 2


QPSK_POINTS = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2)


@dataclass(frozen=True)
class SymbolFrame:
    values: np.ndarray
    rule: Rule = Rule.STANDARD
    roles: np.ndarray | None = field(default=None, compare=False)

    @property
    def Nc(self) -> int:
        return self.values.shape[0]

    @property
    def Nsym(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class TimeBurst:
    samples: np.ndarray
    Nc: int
    Ncp: int

    @property
    def n_symbols(self) -> int:
        return self.samples.size // (self.Nc + self.Ncp)

    def symbol_matrix(self) -> np.ndarray:
        """``(Nc + Ncp) x Nsym`` view, one OFDM symbol (with CP) per column."""
        n = self.Nc + self.Ncp
        if self.samples.size % n:
            raise ValueError("burst length is not a multiple of the symbol length")
        return self.samples.reshape(-1, n).T

    def without_cp(self) -> np.ndarray:
        return self.symbol_matrix()[self.Ncp:, :]


def map_bits_qpsk(bits) -> np.ndarray:
    """Gray QPSK: bit pair ``(b1, b0) -> ((1-2 b1) + j (1-2 b0)) / sqrt(2)``."""
    bits = np.asarray(bits, dtype=np.int8).ravel()
    if bits.size % 2:
        raise ValueError("QPSK mapping needs an even number of bits")
    pairs = 1 - 2 * bits.reshape(-1, 2).astype(float)
    return (pairs[:, 0] + 1j * pairs[:, 1]) / np.sqrt(2)


def random_qpsk(rng: np.random.Generator, shape) -> np.ndarray:
    return QPSK_POINTS[rng.integers(0, 4, size=shape)]


def mirror_factor(rule: Rule, Nc: int, m) -> np.ndarray:
    """Factor ``d`` with ``s_{-k,m} = d * conj(s_{k,m})`` for each bin.

    Returns shape ``(Nc,)`` for scalar ``m`` and ``(Nc, len(m))`` otherwise.
    Only meaningful for RULE_I / RULE_II and ``k`` outside ``{-Nc/2, 0}``.
    """
    rule = Rule.parse(rule)
    k = np.where(np.arange(Nc) >= Nc // 2, np.arange(Nc) - Nc, np.arange(Nc))
    m = np.asarray(m)
    if rule is Rule.RULE_I:
        d = np.where(k % 2, -1.0, 1.0)
        return d if m.ndim == 0 else np.repeat(d[:, None], m.size, axis=1)
    if rule is Rule.RULE_II:
        sign = np.where(m % 2, -1.0, 1.0)
        return np.ones(Nc) * sign if m.ndim == 0 else np.ones((Nc, 1)) * sign[None, :]
    raise ValueError("STANDARD frames carry no mirror relation")


def apply_design_rule(upper, edge, rule, m: int) -> np.ndarray:
    """Complete one OFDM symbol from its free half.

    ``upper`` holds ``s_k`` for ``0 < k < Nc/2`` (length ``Nc/2 - 1``), ``edge``
    the two real values for ``k = -Nc/2`` and ``k = 0``. Returns the full column
    of ``Nc`` symbols in bin order.
    """
    rule = Rule.parse(rule)
    if rule is Rule.STANDARD:
        raise ValueError("design rules apply to RULE_I and RULE_II only")
    if m < 0:
        raise ValueError("symbol index must be non-negative")
    upper = np.asarray(upper, dtype=complex).ravel()
    edge = np.asarray(edge)
    if edge.shape != (2,) or np.any(np.abs(np.imag(edge)) > 0):
        raise ValueError("edge subcarrier values must be two real numbers")
    Nc = 2 * (upper.size + 1)
    col = np.empty(Nc, dtype=complex)
    col[0] = np.real(edge[1])
    col[Nc // 2] = np.real(edge[0])
    col[1 : Nc // 2] = upper
    mirror = mirror_bins(Nc)
    d = mirror_factor(rule, Nc, m)
    lower = np.arange(Nc // 2 + 1, Nc)
    col[lower] = d[lower] * np.conj(col[mirror[lower]])
    return col


def complete_frame(upper: np.ndarray, edge: np.ndarray, rule) -> np.ndarray:
    """Vectorized :func:`apply_design_rule` over all columns.

    ``upper`` is ``(Nc/2 - 1) x Nsym``, ``edge`` is ``2 x Nsym`` (real).
    """
    rule = Rule.parse(rule)
    upper = np.asarray(upper, dtype=complex)
    edge = np.asarray(edge)
    if np.any(np.abs(np.imag(edge)) > 0):
        raise ValueError("edge subcarrier values must be real")
    Nc = 2 * (upper.shape[0] + 1)
    Nsym = upper.shape[1]
    S = np.empty((Nc, Nsym), dtype=complex)
    S[0] = np.real(edge[1])
    S[Nc // 2] = np.real(edge[0])
    S[1 : Nc // 2] = upper
    lower = np.arange(Nc // 2 + 1, Nc)
    d = mirror_factor(rule, Nc, np.arange(Nsym))
    S[lower] = d[lower] * np.conj(S[mirror_bins(Nc)[lower]])
    return S


def random_frame(rule, cfg: SystemConfig, rng: np.random.Generator) -> SymbolFrame:
    """Random QPSK payload frame obeying ``rule`` (edges are random +-1)."""
    rule = Rule.parse(rule)
    if rule is Rule.STANDARD:
        return SymbolFrame(random_qpsk(rng, (cfg.Nc, cfg.Nsym)), rule)
    upper = random_qpsk(rng, (cfg.Nc // 2 - 1, cfg.Nsym))
    edge = rng.choice([-1.0, 1.0], size=(2, cfg.Nsym))
    return SymbolFrame(complete_frame(upper, edge, rule), rule)


def check_rule(values: np.ndarray, rule, atol: float = 1e-12) -> bool:
    """True if every column satisfies the mirror relation of ``rule``."""
    rule = Rule.parse(rule)
    if rule is Rule.STANDARD:
        return True
    Nc, Nsym = values.shape
    inner = np.r_[1 : Nc // 2, Nc // 2 + 1 : Nc]
    d = mirror_factor(rule, Nc, np.arange(Nsym))
    mirrored = d * np.conj(values[mirror_bins(Nc)])
    ok_inner = np.allclose(values[inner], mirrored[inner], atol=atol)
    ok_edge = np.allclose(np.imag(values[[0, Nc // 2]]), 0.0, atol=atol)
    return bool(ok_inner and ok_edge)


def ofdm_modulate(frame, cfg: SystemConfig) -> TimeBurst:
    """IDFT every column and prepend the cyclic prefix."""
    S = frame.values if isinstance(frame, SymbolFrame) else np.asarray(frame)
    if S.ndim != 2 or S.shape[0] != cfg.Nc:
        raise ValueError(f"frame must have {cfg.Nc} rows, got shape {S.shape}")
    x = np.fft.ifft(S, axis=0)
    if cfg.Ncp:
        x = np.concatenate([x[-cfg.Ncp :], x], axis=0)
    return TimeBurst(np.ascontiguousarray(x.T).ravel(), cfg.Nc, cfg.Ncp)


def ofdm_demodulate(samples, cfg: SystemConfig, n_symbols: int | None = None) -> np.ndarray:
    """Strip the cyclic prefixes and DFT each symbol; returns ``Nc x Nsym``."""
    samples = samples.samples if isinstance(samples, TimeBurst) else np.asarray(samples)
    n = cfg.samples_per_symbol
    n_symbols = samples.size // n if n_symbols is None else n_symbols
    blocks = samples[: n_symbols * n].reshape(n_symbols, n).T
    return np.fft.fft(blocks[cfg.Ncp :, :], axis=0)


def papr_per_symbol(burst: TimeBurst) -> np.ndarray:
    """PAPR in dB of every OFDM symbol, cyclic prefix excluded."""
    if burst.samples.size == 0 or burst.n_symbols == 0:
        raise ValueError("empty burst")
    p = np.abs(burst.without_cp()) ** 2
    mean = p.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return 10 * np.log10(p.max(axis=0) / mean)


def ccdf(papr_db: np.ndarray, thresholds_db) -> np.ndarray:
    papr_db = np.asarray(papr_db, dtype=float).ravel()
    thresholds_db = np.atleast_1d(np.asarray(thresholds_db, dtype=float))
    return (papr_db[None, :] > thresholds_db[:, None]).mean(axis=1)


def papr_ccdf(burst: TimeBurst, thresholds_db) -> np.ndarray:
    """Fraction of symbols whose PAPR exceeds each threshold."""
    return ccdf(papr_per_symbol(burst), thresholds_db)


def papr_at_probability(papr_db: np.ndarray, probability: float) -> float:
    """PAPR level exceeded with the given probability (empirical quantile)."""
    return float(np.quantile(np.asarray(papr_db), 1.0 - probability))
