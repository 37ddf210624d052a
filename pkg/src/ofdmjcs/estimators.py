"""scikit-learn style wrappers around the functional core.

The wrappers only hold hyper-parameters and fitted state; the numerical work
lives in the functional modules.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import link, radar
from .impairments import TX, IqProfile, apply_rx_iq, apply_tx_iq
from .params import SystemConfig
from .validation import check_bits, check_frame
from .waveform import Rule


class RangeDopplerProcessor(TransformerMixin, BaseEstimator):
    """``fit`` stores the transmit frame, ``transform`` maps receive frames to RDMs."""

    def __init__(self, cfg: SystemConfig | None = None, range_window=None, doppler_window=None, median_removal: bool = False):
        self.cfg = cfg
        self.range_window = range_window
        self.doppler_window = doppler_window
        self.median_removal = median_removal

    def fit(self, S, y=None):
        self.cfg_ = self.cfg or SystemConfig()
        self.S_ = check_frame(S, "S", (self.cfg_.Nc, self.cfg_.Nsym))
        if np.any(self.S_ == 0):
            raise ValueError("transmit frame contains zero symbols")
        return self

    def transform(self, Y) -> np.ndarray:
        check_is_fitted(self, "S_")
        Y = check_frame(Y, "Y", self.S_.shape)
        rdm = radar.compute_rdm(Y, self.S_, self.cfg_, range_window=self.range_window, doppler_window=self.doppler_window)
        if self.median_removal:
            rdm = radar.remove_median(rdm)
        return rdm.values

    def detect(self, Y, threshold_db: float = 12.0, **kw) -> radar.PeakReport:
        # bin resolutions do not affect detection
        return radar.detect_peaks(radar.RangeDopplerMap(self.transform(Y), 1.0, 1.0), threshold_db, **kw)


class IQImbalance(TransformerMixin, BaseEstimator):
    """Stateless widely-linear transform ``alpha_k x_k + beta_k conj(x_{-k})``."""

    def __init__(self, alpha=1.0, beta=0.0, side: str = TX):
        self.alpha = alpha
        self.beta = beta
        self.side = side

    def fit(self, X, y=None):
        X = check_frame(X, "X")
        a = np.broadcast_to(np.asarray(self.alpha, dtype=complex), (X.shape[0],))
        b = np.broadcast_to(np.asarray(self.beta, dtype=complex), (X.shape[0],))
        self.profile_ = IqProfile(a.copy(), b.copy(), self.side)
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "profile_")
        X = check_frame(X, "X")
        if self.profile_.side == TX:
            return apply_tx_iq(X, self.profile_)
        return apply_rx_iq(X, self.profile_)


class LinkReceiver(BaseEstimator):
    """Burst receiver: ``fit`` estimates the effective channel from preambles, ``predict`` decodes.

    ``fit`` accepts either a full received frame or only its preamble columns.
    """

    def __init__(self, rule="RULE_I", cfg: SystemConfig | None = None, layout: link.BurstLayout | None = None, noise_variance: float = 0.0):
        self.rule = rule
        self.cfg = cfg
        self.layout = layout
        self.noise_variance = noise_variance

    def _setup(self):
        self.rule_ = Rule.parse(self.rule)
        self.cfg_ = self.cfg or SystemConfig()
        self.layout_ = self.layout or link.BurstLayout.default(self.rule_, self.cfg_.Nc)
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be non-negative")

    def fit(self, Z, y=None):
        self._setup()
        Z = check_frame(Z, "Z")
        if Z.shape[0] != self.cfg_.Nc or Z.shape[1] < self.layout_.N_pr:
            raise ValueError("received frame does not contain the preamble")
        self.channel_ = link.estimate_channel(Z[:, : self.layout_.N_pr], self.rule_, self.layout_, self.cfg_)
        return self

    def fit_known(self, channel: link.EffectiveChannel):
        """Use a known effective channel instead of estimating one."""
        self._setup()
        self.channel_ = channel
        return self

    def predict(self, Z, cpe=None) -> np.ndarray:
        check_is_fitted(self, "channel_")
        Z = check_frame(Z, "Z", (self.cfg_.Nc, self.cfg_.Nsym))
        res = link.receive_burst(Z, self.rule_, self.layout_, self.cfg_, self.noise_variance, channel=self.channel_, cpe=cpe)
        return res.bits

    def score(self, Z, bits) -> float:
        """Fraction of correctly decoded payload bits."""
        bits = check_bits(bits)
        return float(np.mean(self.predict(Z) == bits))
