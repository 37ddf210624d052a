"""Communication transmitter and receiver for the three waveforms.

Transmit side: convolutional coding, per-symbol interleaving, QPSK mapping,
preamble and pilot insertion, design-rule completion. Receive side: effective
channel estimation from preambles, CPE synchronization, LMMSE data estimation
(conjugate-stacked for RULE_I / RULE_II), LLR demapping and Viterbi decoding.

All channel quantities are per-bin vectors; diagonal matrices are never formed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from . import codec
from .impairments import ImpairmentModel, _image
from .params import SystemConfig, mirror_bins
from .waveform import QPSK_POINTS, Role, Rule, SymbolFrame, complete_frame, map_bits_qpsk, mirror_factor

LLR_CLIP = 30.0


def default_mask(Nc: int) -> tuple[int, int]:
    """Half-open ECIR index window holding only distortion (``[256, 412)`` for Nc = 512)."""
    return Nc // 2, Nc // 2 + (156 * Nc) // 512


@dataclass(frozen=True)
class BurstLayout:
    """Preamble / pilot layout of a burst.

    Pilots always include ``k = -Nc/2`` and ``k = 0``; the remaining pilots come
    in ``(k, -k)`` pairs spread evenly over the band.
    """

    Nc: int
    N_pr: int
    N_p: int
    seed: int = 7
    mask: tuple[int, int] | None = None

    def __post_init__(self):
        if self.N_pr <= 0 or self.N_pr % 2:
            raise ValueError("N_pr must be a positive even number")
        if self.N_p < 2 or self.N_p % 2:
            raise ValueError("N_p must be even and at least 2")
        if self.N_p >= self.Nc // 2:
            raise ValueError("too many pilots for the band")
        if self.mask is None:
            object.__setattr__(self, "mask", default_mask(self.Nc))

    @classmethod
    def default(cls, rule, Nc: int = 512, **kw) -> "BurstLayout":
        rule = Rule.parse(rule)
        if rule is Rule.STANDARD:
            return cls(Nc, kw.pop("N_pr", 8), kw.pop("N_p", 8), **kw)
        return cls(Nc, kw.pop("N_pr", 16), kw.pop("N_p", 16), **kw)

    @property
    def N_d(self) -> int:
        return self.Nc - self.N_p

    @cached_property
    def pilot_k_pairs(self) -> np.ndarray:
        n_pairs = (self.N_p - 2) // 2
        half = self.Nc // 2
        if n_pairs == 0:
            return np.zeros(0, dtype=int)
        return np.round((np.arange(n_pairs) + 0.5) * half / n_pairs).astype(int).clip(1, half - 1)

    @cached_property
    def pilot_bins(self) -> np.ndarray:
        pos = self.pilot_k_pairs
        return np.sort(np.r_[0, self.Nc // 2, pos, self.Nc - pos])

    @cached_property
    def data_bins(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.Nc), self.pilot_bins)

    @cached_property
    def data_bins_plus(self) -> np.ndarray:
        """Data bins with ``0 < k < Nc/2`` in increasing ``k``."""
        b = self.data_bins
        return b[(b > 0) & (b < self.Nc // 2)]

    @cached_property
    def data_bins_minus(self) -> np.ndarray:
        """Mirror bins (``-k``) of :attr:`data_bins_plus`, same order."""
        return mirror_bins(self.Nc)[self.data_bins_plus]

    def n_data_symbols(self, cfg: SystemConfig) -> int:
        return cfg.Nsym - self.N_pr

    def coded_bits_per_symbol(self, rule) -> int:
        if Rule.parse(rule) is Rule.STANDARD:
            return 2 * self.N_d
        return self.N_d

    def payload_bits(self, rule, cfg: SystemConfig) -> int:
        coded = self.coded_bits_per_symbol(rule) * self.n_data_symbols(cfg)
        return coded // 2 - codec.TAIL

    def _rng(self, salt: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])

    def preamble_block(self, rule) -> np.ndarray:
        """All ``N_pr`` preamble columns (unit magnitude, rule-conforming)."""
        return _preamble_block(self, Rule.parse(rule)).copy()

    def pilot_column(self, rule, m: int) -> np.ndarray:
        """Full-length column holding the pilot values of data symbol ``m`` (zeros elsewhere)."""
        return _pilot_columns(self, Rule.parse(rule))[int(m) % 2].copy()

    def pilot_matrix(self, rule, m_values) -> np.ndarray:
        """Pilot values, ``N_p x len(m_values)``, in :attr:`pilot_bins` order."""
        cols = _pilot_columns(self, Rule.parse(rule))[:, self.pilot_bins]
        return cols[np.asarray(m_values) % 2].T

    def role_map(self, cfg: SystemConfig) -> np.ndarray:
        roles = np.full((self.Nc, cfg.Nsym), Role.DATA, dtype=np.int8)
        roles[:, : self.N_pr] = Role.PREAMBLE
        roles[self.pilot_bins, self.N_pr :] = Role.PILOT
        return roles


@lru_cache(maxsize=32)
def _preamble_block(layout: BurstLayout, rule: Rule) -> np.ndarray:
    rng = layout._rng(1)
    if rule is Rule.STANDARD:
        col = QPSK_POINTS[rng.integers(0, 4, layout.Nc)]
        return np.repeat(col[:, None], layout.N_pr, axis=1)
    n_variants = 2 if rule is Rule.RULE_II else 1
    upper = QPSK_POINTS[rng.integers(0, 4, (layout.Nc // 2 - 1, n_variants))]
    edge = rng.choice([-1.0, 1.0], size=(2, n_variants))
    idx = np.arange(layout.N_pr) % n_variants
    return complete_frame(upper[:, idx], edge[:, idx], rule)


@lru_cache(maxsize=32)
def _pilot_columns(layout: BurstLayout, rule: Rule) -> np.ndarray:
    """Pilot columns for even and odd ``m`` (identical unless RULE_II)."""
    Nc = layout.Nc
    rng = layout._rng(2)
    pos = layout.pilot_k_pairs
    edge = rng.choice([-1.0, 1.0], size=2)
    up = QPSK_POINTS[rng.integers(0, 4, pos.size)]
    low = QPSK_POINTS[rng.integers(0, 4, pos.size)]
    cols = np.zeros((2, Nc), dtype=complex)
    for parity in (0, 1):
        col = cols[parity]
        col[Nc // 2], col[0] = edge
        col[pos] = up
        if rule is Rule.STANDARD:
            col[Nc - pos] = low
        else:
            d = mirror_factor(rule, Nc, parity)
            col[Nc - pos] = d[Nc - pos] * np.conj(up)
    cols.flags.writeable = False
    return cols


@dataclass(frozen=True)
class EffectiveChannel:
    """ECIR(s) ``g`` with ECFR(s) ``h = DFT(g)``; two rows for RULE_II (even / odd m)."""

    g: np.ndarray
    mask: tuple[int, int] | None = None

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.g, dtype=complex))
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "h", np.fft.fft(g, axis=1))

    @classmethod
    def from_cfr(cls, h, mask=None) -> "EffectiveChannel":
        return cls(np.fft.ifft(np.atleast_2d(h), axis=1), mask)

    @property
    def alternating(self) -> bool:
        return self.g.shape[0] == 2

    def h_for(self, m) -> np.ndarray:
        """ECFR for symbol index / indices ``m`` (``Nc`` or ``Nc x len(m)``)."""
        m = np.asarray(m)
        if not self.alternating:
            return self.h[0] if m.ndim == 0 else np.repeat(self.h[0][:, None], m.size, axis=1)
        if m.ndim == 0:
            return self.h[int(m) % 2]
        return self.h[m % 2].T


@dataclass
class Burst:
    frame: SymbolFrame
    payload: np.ndarray
    coded: np.ndarray = field(repr=False)


def image_ratio(rule, Nc: int, m: int) -> np.ndarray:
    """``rho_k`` with ``conj(s_{-k,m}) = rho_k s_{k,m}`` (zero where the image is unknown or absent)."""
    rule = Rule.parse(rule)
    if rule is Rule.STANDARD:
        return np.zeros(Nc)
    rho = mirror_factor(rule, Nc, m).astype(complex)
    rho[0] = 1.0
    rho[Nc // 2] = 0.0
    return rho


def effective_cfr(c: np.ndarray, model: ImpairmentModel, rule, m: int = 0) -> np.ndarray:
    """Coefficient multiplying ``s_{k,m}`` once the static channel ``c_k`` sits between Tx and Rx IQ.

    For STANDARD only the terms carrying ``s_k`` itself are included; the
    image terms carry unknown data and act as interference.
    """
    c = np.asarray(c, dtype=complex)
    rho = image_ratio(rule, c.size, m)
    tx, rx = model.tx, model.rx
    direct = rx.alpha * c * (tx.alpha + tx.beta * rho)
    image = rx.beta * _image(c) * (_image(tx.alpha) * rho + _image(tx.beta))
    return direct + image


def true_effective_channel(c: np.ndarray, model: ImpairmentModel, rule, mask=None) -> EffectiveChannel:
    rule = Rule.parse(rule)
    if rule is Rule.RULE_II:
        h = np.stack([effective_cfr(c, model, rule, 0), effective_cfr(c, model, rule, 1)])
    else:
        h = effective_cfr(c, model, rule, 0)[None, :]
    return EffectiveChannel.from_cfr(h, mask)


def build_burst(payload, rule, layout: BurstLayout, cfg: SystemConfig, spec: codec.CodecSpec | None = None) -> Burst:
    """Encode ``payload`` and place the QPSK symbols in a complete rule-conforming frame."""
    rule = Rule.parse(rule)
    spec = spec or codec.CodecSpec()
    payload = np.asarray(payload, dtype=np.int8).ravel()
    if layout.Nc != cfg.Nc:
        raise ValueError("layout and config disagree on Nc")
    expected = layout.payload_bits(rule, cfg)
    if payload.size != expected:
        raise ValueError(f"payload must have {expected} bits, got {payload.size}")
    bps = layout.coded_bits_per_symbol(rule)
    n_data = layout.n_data_symbols(cfg)
    coded = codec.conv_encode(payload)
    symbols = map_bits_qpsk(codec.interleave(coded, spec.interleaver_seed, bps))
    symbols = symbols.reshape(n_data, -1).T

    S = np.zeros((cfg.Nc, cfg.Nsym), dtype=complex)
    S[:, : layout.N_pr] = layout.preamble_block(rule)
    m_data = np.arange(layout.N_pr, cfg.Nsym)
    S[:, layout.N_pr :] = _pilot_columns(layout, rule)[m_data % 2].T
    if rule is Rule.STANDARD:
        S[layout.data_bins, layout.N_pr :] = symbols
    else:
        S[layout.data_bins_plus, layout.N_pr :] = symbols
        d = mirror_factor(rule, cfg.Nc, m_data)
        minus = layout.data_bins_minus
        S[minus, layout.N_pr :] = d[minus] * np.conj(symbols)
    frame = SymbolFrame(S, rule, layout.role_map(cfg))
    return Burst(frame, payload, coded)


def estimate_cpe_preamble(z_ref, z_m) -> np.ndarray | float:
    """``arg(z_ref^H z_m)``; vectorized over columns of ``z_m``."""
    z_ref = np.asarray(z_ref)
    z_m = np.asarray(z_m)
    if z_ref.shape[0] != z_m.shape[0]:
        raise ValueError("reference and received preamble lengths differ")
    ip = np.conj(z_ref) @ z_m
    if np.any(ip == 0):
        raise ValueError("zero inner product: CPE undefined")
    phi = np.angle(ip)
    return float(phi) if np.ndim(phi) == 0 else phi


def estimate_channel(Z_pr, rule, layout: BurstLayout, cfg: SystemConfig | None = None, mask="default") -> EffectiveChannel:
    """BLUE of the effective channel(s) from the received preamble symbols.

    ``Z_pr`` is ``Nc x N_pr``. The ECIR mask is applied for STANDARD and
    RULE_II (``mask=None`` disables it); RULE_I keeps all taps.
    """
    rule = Rule.parse(rule)
    Z_pr = np.asarray(Z_pr, dtype=complex)
    if Z_pr.shape[1] != layout.N_pr:
        raise ValueError(f"expected {layout.N_pr} preamble symbols, got {Z_pr.shape[1]}")
    if mask == "default":
        mask = layout.mask
    S_pr = layout.preamble_block(rule)
    groups = [np.arange(0, layout.N_pr, 2), np.arange(1, layout.N_pr, 2)] if rule is Rule.RULE_II else [np.arange(layout.N_pr)]
    gs = []
    for idx in groups:
        ref = Z_pr[:, idx[0]]
        phi = estimate_cpe_preamble(ref, Z_pr[:, idx])
        z_bar = (Z_pr[:, idx] * np.exp(-1j * phi)[None, :]).mean(axis=1)
        g = np.fft.ifft(z_bar / S_pr[:, idx[0]])
        if rule is not Rule.RULE_I and mask is not None:
            g[mask[0] : mask[1]] = 0
        gs.append(g)
    return EffectiveChannel(np.stack(gs), None if rule is Rule.RULE_I else mask)


def _noise_term(sigma2: float, Nc: int, prior_power) -> np.ndarray | float:
    return Nc * sigma2 / np.asarray(prior_power, dtype=float)


def lmmse_pilots(z_p, H_p, C_xx_p=1.0, sigma2: float = 0.0, Nc: int | None = None):
    """Per-pilot LMMSE of the CPE-rotated pilot symbols.

    All matrices are diagonal and passed as their diagonals; ``z_p`` may carry
    one column per OFDM symbol. Returns ``(x_hat, C_ee_diag)``.
    """
    z_p = np.asarray(z_p, dtype=complex)
    H_p = np.asarray(H_p, dtype=complex)
    if H_p.ndim == 1 and z_p.ndim == 2:
        H_p = H_p[:, None]
    Nc = z_p.shape[0] if Nc is None else Nc
    C = np.asarray(C_xx_p, dtype=float)
    if C.ndim == 1 and z_p.ndim == 2:
        C = C[:, None]
    if np.any(C <= 0):
        raise ValueError("prior covariance must be positive")
    denom = np.abs(H_p) ** 2 + _noise_term(sigma2, Nc, C)
    if np.any(denom == 0):
        raise ValueError("singular LMMSE system (zero channel without noise)")
    x_hat = np.conj(H_p) * z_p / denom
    c_ee = Nc * sigma2 / denom
    return x_hat, np.broadcast_to(c_ee, x_hat.shape).copy()


def estimate_cpe_pilots(s_p, x_hat_p, C_ee_p=None) -> np.ndarray | float:
    """``arg(s_p^H C_ee^{-1} x_hat_p)``; equal weights when ``C_ee_p`` is None."""
    s_p = np.asarray(s_p)
    x_hat_p = np.asarray(x_hat_p)
    if s_p.shape != x_hat_p.shape:
        raise ValueError("pilot and estimate shapes differ")
    if C_ee_p is None:
        w = np.ones(x_hat_p.shape)
    else:
        C_ee_p = np.asarray(C_ee_p, dtype=float)
        if np.any(C_ee_p <= 0):
            raise ValueError("degenerate CPE weighting (non-positive error variance)")
        w = 1.0 / np.broadcast_to(C_ee_p, x_hat_p.shape)
    phi = np.angle(np.sum(np.conj(s_p) * w * x_hat_p, axis=0))
    return float(phi) if np.ndim(phi) == 0 else phi


def stacked_channel(h: np.ndarray, rule, m, layout: BurstLayout) -> tuple[np.ndarray, np.ndarray]:
    """Upper and lower blocks of the conjugate-stacked data channel.

    Returns ``(a, b)`` so that ``[conj(z_-), z_+] = [a; b] * s_+ + noise`` with
    ``a = conj(h_- d)`` (the ``(H^- D P)^*`` block) and ``b = h_+``.
    """
    rule = Rule.parse(rule)
    plus, minus = layout.data_bins_plus, layout.data_bins_minus
    d = mirror_factor(rule, layout.Nc, m)
    return np.conj(h[minus] * d[minus]), h[plus]


def lmmse_data(z_tilde, h, rule, m, layout: BurstLayout, sigma2: float = 0.0, prior_power=1.0):
    """LMMSE estimate of the free data symbols of synchronized symbol(s) ``m``.

    ``z_tilde`` is the full ``Nc`` (or ``Nc x len(m)``) receive vector after
    CPE removal, ``h`` the matching ECFR array or an :class:`EffectiveChannel`. RULE_I / RULE_II stack the
    conjugated negative half on the positive half; STANDARD estimates every
    data subcarrier independently. Returns ``(s_hat, C_ee_diag)``.
    """
    rule = Rule.parse(rule)
    z_tilde = np.asarray(z_tilde, dtype=complex)
    if isinstance(h, EffectiveChannel):
        if rule is Rule.RULE_II and not h.alternating:
            raise ValueError("RULE_II needs separate channels for even and odd symbols")
        h = h.h_for(m)
    h = np.asarray(h, dtype=complex)
    if z_tilde.shape[0] != layout.Nc or h.shape[0] != layout.Nc:
        raise ValueError("receive vector and channel must span all subcarriers")
    if h.ndim == 1 and z_tilde.ndim == 2:
        h = np.repeat(h[:, None], z_tilde.shape[1], axis=1)
    noise = _noise_term(sigma2, layout.Nc, prior_power)
    if rule is Rule.STANDARD:
        hd = h[layout.data_bins]
        denom = np.abs(hd) ** 2 + noise
        if np.any(denom == 0):
            raise ValueError("singular LMMSE system")
        return np.conj(hd) * z_tilde[layout.data_bins] / denom, np.broadcast_to(layout.Nc * sigma2 / denom, hd.shape).copy()
    a, b = stacked_channel(h, rule, m, layout)
    y_upper = np.conj(z_tilde[layout.data_bins_minus])
    y_lower = z_tilde[layout.data_bins_plus]
    denom = np.abs(a) ** 2 + np.abs(b) ** 2 + noise
    if np.any(denom == 0):
        raise ValueError("singular LMMSE system")
    s_hat = (np.conj(a) * y_upper + np.conj(b) * y_lower) / denom
    return s_hat, np.broadcast_to(layout.Nc * sigma2 / denom, s_hat.shape).copy()


def demap_llr(s_hat, variance, clip: float = LLR_CLIP) -> np.ndarray:
    """Max-log QPSK LLRs (positive means bit 0), interleaved as ``b1, b0`` per symbol."""
    s_hat = np.asarray(s_hat, dtype=complex)
    variance = np.broadcast_to(np.asarray(variance, dtype=float), s_hat.shape).ravel()
    s_hat = s_hat.ravel()
    if np.any(variance <= 0):
        raise ValueError("error variance must be positive")
    scale = 2 * np.sqrt(2) / variance
    llr = np.empty(2 * s_hat.size)
    llr[0::2] = scale * s_hat.real
    llr[1::2] = scale * s_hat.imag
    return np.clip(llr, -clip, clip)


@dataclass
class ReceiverResult:
    bits: np.ndarray
    s_hat: np.ndarray = field(repr=False)
    cpe: np.ndarray = field(repr=False)
    channel: EffectiveChannel = field(repr=False)


def receive_burst(
    Z,
    rule,
    layout: BurstLayout,
    cfg: SystemConfig,
    sigma2: float,
    *,
    channel: EffectiveChannel | None = None,
    cpe: np.ndarray | None = None,
    spec: codec.CodecSpec | None = None,
    min_variance: float = 1e-9,
) -> ReceiverResult:
    """Decode the payload from a received frequency-domain frame ``Z``.

    ``channel`` given means perfect channel knowledge, otherwise it is
    estimated from the preambles. ``cpe`` given (one phase per data symbol,
    relative to the channel's phase reference) means perfect CPE
    synchronization, otherwise pilots are used.
    """
    rule = Rule.parse(rule)
    spec = spec or codec.CodecSpec()
    Z = np.asarray(Z, dtype=complex)
    if channel is None:
        channel = estimate_channel(Z[:, : layout.N_pr], rule, layout, cfg)
    m_data = np.arange(layout.N_pr, cfg.Nsym)
    Zd = Z[:, layout.N_pr :]
    H = channel.h_for(m_data)
    if cpe is None:
        pb = layout.pilot_bins
        x_hat, c_ee = lmmse_pilots(Zd[pb], H[pb], 1.0, sigma2, cfg.Nc)
        s_p = layout.pilot_matrix(rule, m_data)
        cpe = estimate_cpe_pilots(s_p, x_hat, c_ee if sigma2 > 0 else None)
    Zt = Zd * np.exp(-1j * np.asarray(cpe))[None, :]
    s_hat, c_ee = lmmse_data(Zt, H, rule, m_data, layout, sigma2)
    llr = demap_llr(s_hat.T, np.maximum(c_ee.T, min_variance))
    bps = layout.coded_bits_per_symbol(rule)
    llr = codec.deinterleave(llr, spec.interleaver_seed, bps)
    bits = codec.viterbi_decode(llr)
    return ReceiverResult(bits, s_hat, np.asarray(cpe), channel)
