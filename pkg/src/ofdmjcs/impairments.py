"""Transmit / receive IQ imbalance on subcarrier symbols.

A stage with per-subcarrier coefficients ``alpha_k, beta_k`` maps a frame as
``x_k = alpha_k s_k + beta_k conj(s_{-k})``. The most negative subcarrier has
no in-band image, so its image term is dropped.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .params import SystemConfig, mirror_bins

TX = "TX"
RX = "RX"


@dataclass(frozen=True)
class IqProfile:
    alpha: np.ndarray
    beta: np.ndarray
    side: str = RX

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=complex))
        beta = np.atleast_1d(np.asarray(self.beta, dtype=complex))
        if alpha.shape != beta.shape or alpha.ndim != 1:
            raise ValueError("alpha and beta must be 1-D arrays of equal length")
        if self.side not in (TX, RX):
            raise ValueError(f"side must be TX or RX, got {self.side!r}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def Nc(self) -> int:
        return self.alpha.size

    @classmethod
    def identity(cls, Nc: int, side: str = RX) -> "IqProfile":
        return cls(np.ones(Nc, complex), np.zeros(Nc, complex), side)

    @classmethod
    def constant(cls, alpha: complex, beta: complex, Nc: int, side: str = RX) -> "IqProfile":
        return cls(np.full(Nc, alpha, complex), np.full(Nc, beta, complex), side)

    def with_side(self, side: str) -> "IqProfile":
        return IqProfile(self.alpha, self.beta, side)

    def is_identity(self) -> bool:
        return bool(np.all(self.alpha == 1) and np.all(self.beta == 0))

    def image_rejection_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20 * np.log10(np.abs(self.alpha) / np.abs(self.beta))


@dataclass(frozen=True)
class BranchFilterSpec:
    """Chebyshev type I lowpass in one IQ branch.

    ``passband_edge`` is a fraction of the Nyquist band of the filter's own
    sampling rate, which is ``applied_rate_factor`` times the signal rate.
    """

    order: int = 6
    ripple: float = 3.0
    passband_edge: float = 0.8
    applied_rate_factor: int = 2

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("filter order must be >= 1")
        if not 0 < self.passband_edge < 1:
            raise ValueError("passband edge must lie in (0, 1)")
        if self.ripple <= 0:
            raise ValueError("ripple must be positive")
        if self.applied_rate_factor < 1:
            raise ValueError("rate factor must be >= 1")


# IQ imbalance literals of the reference scenario
TX_FI_ALPHA = 0.9848 + 0.026j
TX_FI_BETA = 0.148 - 0.174j
RX_FI_ALPHA = 0.966 + 0.026j
RX_FI_BETA = -0.107 + 0.265j
I_BRANCH = BranchFilterSpec(order=6, ripple=3.0, passband_edge=0.8)
Q_BRANCH = BranchFilterSpec(order=6, ripple=2.0, passband_edge=0.81)


def fi_coefficients(epsilon: float, phi: float) -> tuple[complex, complex]:
    """Frequency independent ``(alpha, beta)`` from amplitude/phase mismatch (rad)."""
    alpha = np.cos(phi) + 1j * epsilon * np.sin(phi)
    beta = epsilon * np.cos(phi) + 1j * np.sin(phi)
    return complex(alpha), complex(beta)


def branch_filter_response(spec: BranchFilterSpec, cfg: SystemConfig) -> np.ndarray:
    """Frequency response of one branch filter at every subcarrier (bin order)."""
    b, a = signal.cheby1(spec.order, spec.ripple, spec.passband_edge)
    if np.any(np.abs(np.roots(a)) >= 1):
        raise ValueError("unstable branch filter design")
    f = cfg.k_values() * cfg.delta_f
    fs = spec.applied_rate_factor * cfg.B
    _, h = signal.freqz(b, a, worN=2 * np.pi * f / fs)
    return h


def fs_coefficients(H_I, H_Q, side: str = RX) -> IqProfile:
    """Branch mismatch to ``(alpha_k, beta_k)``."""
    H_I = np.asarray(H_I, dtype=complex)
    H_Q = np.asarray(H_Q, dtype=complex)
    if H_I.shape != H_Q.shape:
        raise ValueError("branch responses must have equal length")
    return IqProfile((H_I + H_Q) / 2, (H_I - H_Q) / 2, side)


def _image(v: np.ndarray) -> np.ndarray:
    """``conj(v_{-k})`` per bin, zero for ``k = -Nc/2``.

    Works along axis 0 so it also applies to ``Nc x Nsym`` frames.
    """
    Nc = v.shape[0]
    out = np.conj(v[mirror_bins(Nc)])
    out[Nc // 2] = 0
    return out


def compose(first: IqProfile, second: IqProfile) -> IqProfile:
    """Single profile equivalent to applying ``first`` and then ``second``."""
    if first.Nc != second.Nc:
        raise ValueError("profiles must have the same length")
    a1, b1, a2, b2 = first.alpha, first.beta, second.alpha, second.beta
    alpha = a2 * a1 + b2 * _image(b1)
    beta = a2 * b1 + b2 * _image(a1)
    return IqProfile(alpha, beta, second.side)


def _apply(values: np.ndarray, p: IqProfile) -> np.ndarray:
    values = np.asarray(values, dtype=complex)
    if values.shape[0] != p.Nc:
        raise ValueError(f"frame has {values.shape[0]} subcarriers, profile {p.Nc}")
    shape = (-1,) + (1,) * (values.ndim - 1)
    return p.alpha.reshape(shape) * values + p.beta.reshape(shape) * _image(values)


def apply_tx_iq(frame, p: IqProfile) -> np.ndarray:
    """``x_{k,m} = alpha_k s_{k,m} + beta_k conj(s_{-k,m})``."""
    if p.side != TX:
        raise ValueError("apply_tx_iq needs a TX profile")
    return _apply(getattr(frame, "values", frame), p)


def apply_rx_iq(frame, p: IqProfile) -> np.ndarray:
    """``y_{k,m} = alpha_k r_{k,m} + beta_k conj(r_{-k,m})``."""
    if p.side != RX:
        raise ValueError("apply_rx_iq needs an RX profile")
    return _apply(getattr(frame, "values", frame), p)


@dataclass(frozen=True)
class ImpairmentModel:
    """Complete Tx/Rx imbalance of a link (receiver chain already composed)."""

    tx: IqProfile
    rx: IqProfile

    @classmethod
    def perfect(cls, Nc: int) -> "ImpairmentModel":
        return cls(IqProfile.identity(Nc, TX), IqProfile.identity(Nc, RX))

    def is_perfect(self) -> bool:
        return self.tx.is_identity() and self.rx.is_identity()


def reference_impairments(
    cfg: SystemConfig,
    *,
    tx_fi: tuple[complex, complex] = (TX_FI_ALPHA, TX_FI_BETA),
    rx_fi: tuple[complex, complex] = (RX_FI_ALPHA, RX_FI_BETA),
    i_branch: BranchFilterSpec | None = I_BRANCH,
    q_branch: BranchFilterSpec | None = Q_BRANCH,
    fs_first: bool = False,
) -> ImpairmentModel:
    """FI imbalance in Tx, FI followed by filter-induced FS imbalance in Rx.

    Passing ``None`` for both branch specs leaves the receiver FI-only.
    """
    tx = IqProfile.constant(*tx_fi, cfg.Nc, TX)
    rx = IqProfile.constant(*rx_fi, cfg.Nc, RX)
    if i_branch is not None and q_branch is not None:
        fs = fs_coefficients(
            branch_filter_response(i_branch, cfg), branch_filter_response(q_branch, cfg), RX
        )
        rx = compose(fs, rx) if fs_first else compose(rx, fs)
    return ImpairmentModel(tx, rx)


def profile_from_config(entry: dict, cfg: SystemConfig, side: str) -> IqProfile:
    """Build a profile from one config entry.

    Accepted forms: ``{"alpha": [re, im], "beta": [re, im]}``,
    ``{"epsilon": e, "phi_deg": p}`` and
    ``{"i_branch": {...}, "q_branch": {...}}`` (branch filter specs).
    """
    if "alpha" in entry:
        alpha = _as_complex(entry["alpha"])
        beta = _as_complex(entry["beta"])
        return IqProfile.constant(alpha, beta, cfg.Nc, side)
    if "epsilon" in entry:
        phi = np.deg2rad(entry["phi_deg"]) if "phi_deg" in entry else entry["phi"]
        return IqProfile.constant(*fi_coefficients(entry["epsilon"], phi), cfg.Nc, side)
    if "i_branch" in entry:
        h_i = branch_filter_response(BranchFilterSpec(**entry["i_branch"]), cfg)
        h_q = branch_filter_response(BranchFilterSpec(**entry["q_branch"]), cfg)
        return fs_coefficients(h_i, h_q, side)
    raise ValueError(f"unrecognized impairment entry: {sorted(entry)}")


def _as_complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def impairments_from_config(section: dict | None, cfg: SystemConfig) -> ImpairmentModel:
    """``{"tx": [entry...], "rx": [entry...]}``; stages within a side are cascaded in order."""
    if not section:
        return ImpairmentModel.perfect(cfg.Nc)
    preset = section.get("preset")
    if preset is not None:
        if preset == "reference":
            return reference_impairments(cfg, fs_first=section.get("fs_first", False))
        if preset == "reference_fi":
            return reference_impairments(cfg, i_branch=None, q_branch=None)
        if preset == "perfect":
            return ImpairmentModel.perfect(cfg.Nc)
        raise ValueError(f"unknown impairment preset {preset!r} (reference, reference_fi, perfect)")

    def chain(entries, side):
        p = IqProfile.identity(cfg.Nc, side)
        for e in entries or []:
            p = compose(p, profile_from_config(e, cfg, side))
        return p

    return ImpairmentModel(chain(section.get("tx"), TX), chain(section.get("rx"), RX))
