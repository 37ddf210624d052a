from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ofdmjcs.impairments import (
    I_BRANCH,
    Q_BRANCH,
    RX,
    RX_FI_ALPHA,
    RX_FI_BETA,
    TX,
    TX_FI_ALPHA,
    TX_FI_BETA,
    BranchFilterSpec,
    ImpairmentModel,
    IqProfile,
    apply_rx_iq,
    apply_tx_iq,
    branch_filter_response,
    compose,
    fi_coefficients,
    fs_coefficients,
    impairments_from_config,
    profile_from_config,
    reference_impairments,
)
from ofdmjcs.params import k_to_bin
from ofdmjcs.waveform import Rule, random_frame

from oracles import iq_loop


def _random_profile(rng, Nc, side):
    a = 1 + 0.2 * (rng.standard_normal(Nc) + 1j * rng.standard_normal(Nc))
    b = 0.2 * (rng.standard_normal(Nc) + 1j * rng.standard_normal(Nc))
    return IqProfile(a, b, side)


class TestFiCoefficients:
    def test_balanced(self):
        assert fi_coefficients(0.0, 0.0) == (1, 0)

    def test_reference_mismatch(self):
        a, b = fi_coefficients(0.1503, np.deg2rad(10))
        assert a == pytest.approx(0.9848 + 0.0261j, abs=1e-4)
        # direct evaluation: the imaginary part of beta is +sin(10 deg)
        assert b == pytest.approx(0.1480 + 0.1736j, abs=1e-4)

    def test_literal_defaults_are_kept(self):
        assert TX_FI_ALPHA == 0.9848 + 0.026j and TX_FI_BETA == 0.148 - 0.174j
        assert RX_FI_ALPHA == 0.966 + 0.026j and RX_FI_BETA == -0.107 + 0.265j

    def test_identity_composition_stays_identity(self):
        p = IqProfile.constant(*fi_coefficients(0, 0), 32, RX)
        q = p
        for _ in range(5):
            q = compose(q, p)
        assert q.is_identity()


class TestBranchFilters:
    def test_passband_gain_within_ripple(self, cfg):
        h = branch_filter_response(I_BRANCH, cfg)
        # even-order Chebyshev I sits at -ripple dB at DC
        assert 20 * np.log10(abs(h[0])) == pytest.approx(-3.0, abs=1e-6)
        assert np.all(20 * np.log10(np.abs(h)) > -3.0 - 1e-6)

    def test_conjugate_symmetry(self, cfg):
        h = branch_filter_response(Q_BRANCH, cfg)
        for k in (1, 17, 200):
            assert h[k_to_bin(-k, cfg.Nc)] == pytest.approx(np.conj(h[k]))

    def test_identical_branches_no_image(self, cfg):
        h = branch_filter_response(I_BRANCH, cfg)
        p = fs_coefficients(h, h)
        assert np.all(p.beta == 0) and np.allclose(p.alpha, h)

    def test_pure_image(self):
        p = fs_coefficients(np.ones(8), -np.ones(8))
        assert np.allclose(p.alpha, 0) and np.allclose(p.beta, 1)

    def test_reference_branches_frequency_selective(self, cfg):
        p = fs_coefficients(branch_filter_response(I_BRANCH, cfg), branch_filter_response(Q_BRANCH, cfg))
        mag = np.abs(p.beta)
        assert np.all(mag > 0)
        assert mag.max() / mag.min() > 2
        irr = p.image_rejection_db()
        assert 10 < irr.min() < irr.max() < 60

    @pytest.mark.parametrize("kw", [{"order": 0}, {"passband_edge": 1.0}, {"ripple": 0.0}, {"applied_rate_factor": 0}])
    def test_invalid_spec(self, kw):
        with pytest.raises(ValueError):
            BranchFilterSpec(**kw)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            fs_coefficients(np.ones(4), np.ones(5))


class TestApplication:
    def test_identity(self, cfg, rng):
        S = random_frame(Rule.STANDARD, cfg, rng).values
        assert np.array_equal(apply_tx_iq(S, IqProfile.identity(cfg.Nc, TX)), S)
        assert np.array_equal(apply_rx_iq(S, IqProfile.identity(cfg.Nc, RX)), S)

    def test_single_tone(self):
        Nc = 32
        s = np.zeros((Nc, 1), complex)
        s[5] = 0.3 + 0.4j
        p = IqProfile.constant(TX_FI_ALPHA, TX_FI_BETA, Nc, TX)
        x = apply_tx_iq(s, p)
        nz = np.nonzero(np.abs(x[:, 0]) > 0)[0]
        assert set(nz) == {5, Nc - 5}
        assert x[5, 0] == pytest.approx(TX_FI_ALPHA * s[5, 0])
        assert x[Nc - 5, 0] == pytest.approx(TX_FI_BETA * np.conj(s[5, 0]))

    def test_matches_loop_oracle(self, rng):
        Nc = 16
        p = _random_profile(rng, Nc, RX)
        S = rng.standard_normal((Nc, 3)) + 1j * rng.standard_normal((Nc, 3))
        assert np.allclose(apply_rx_iq(S, p), iq_loop(S, p.alpha, p.beta))

    def test_nyquist_bin_has_no_image(self, rng):
        Nc = 16
        p = IqProfile.constant(1.0, 0.5, Nc, TX)
        s = np.zeros(Nc, complex)
        s[8] = 1.0
        x = apply_tx_iq(s, p)
        assert x[8] == 1.0 and np.count_nonzero(x) == 1

    def test_rule_ii_substitution(self, cfg, rng):
        S = random_frame(Rule.RULE_II, cfg, rng).values
        p = IqProfile.constant(TX_FI_ALPHA, TX_FI_BETA, cfg.Nc, TX)
        X = apply_tx_iq(S, p)
        for k in (3, 77, 200):
            b_neg = k_to_bin(-k, cfg.Nc)
            assert np.allclose(X[b_neg], TX_FI_ALPHA * S[b_neg] + TX_FI_BETA * np.conj(S[k]))

    def test_side_mismatch(self, cfg):
        with pytest.raises(ValueError):
            apply_tx_iq(np.ones((cfg.Nc, 1)), IqProfile.identity(cfg.Nc, RX))
        with pytest.raises(ValueError):
            apply_rx_iq(np.ones((cfg.Nc, 1)), IqProfile.identity(cfg.Nc, TX))

    @given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
    def test_real_linearity(self, seed, a, b):
        rng = np.random.default_rng(seed)
        p = _random_profile(rng, 16, TX)
        x = rng.standard_normal((16, 2)) + 1j * rng.standard_normal((16, 2))
        y = rng.standard_normal((16, 2)) + 1j * rng.standard_normal((16, 2))
        lhs = apply_tx_iq(a * x + b * y, p)
        assert np.allclose(lhs, a * apply_tx_iq(x, p) + b * apply_tx_iq(y, p))

    def test_four_term_expansion(self, cfg, rng):
        S = random_frame(Rule.STANDARD, cfg, rng).values
        tx = _random_profile(rng, cfg.Nc, TX)
        rx = _random_profile(rng, cfg.Nc, RX)
        c = rng.standard_normal(cfg.Nc) + 1j * rng.standard_normal(cfg.Nc)
        Y = apply_rx_iq(apply_tx_iq(S, tx) * c[:, None], rx)
        Nc = cfg.Nc
        ref = np.zeros_like(S)
        for b in range(Nc):
            nb = (-b) % Nc
            nyq = b == Nc // 2
            t1 = rx.alpha[b] * tx.alpha[b] * c[b] * S[b]
            t2 = 0 if nyq else rx.alpha[b] * tx.beta[b] * c[b] * np.conj(S[nb])
            t3 = 0 if nyq else rx.beta[b] * np.conj(tx.alpha[nb] * c[nb]) * np.conj(S[nb])
            t4 = 0 if nyq else rx.beta[b] * np.conj(tx.beta[nb] * c[nb]) * S[b]
            ref[b] = t1 + t2 + t3 + t4
        assert np.max(np.abs(Y - ref)) / np.max(np.abs(ref)) < 1e-12

    def test_pseudo_covariance(self, rng):
        Nc, n = 8, 200_000
        a, b = RX_FI_ALPHA, RX_FI_BETA
        s = (rng.standard_normal((Nc, n)) + 1j * rng.standard_normal((Nc, n))) / np.sqrt(2)
        y = apply_rx_iq(s, IqProfile.constant(a, b, Nc, RX))
        k = 3
        pseudo = np.mean(y[k] * y[Nc - k])
        assert pseudo == pytest.approx(2 * a * b, abs=0.01)


class TestCompose:
    def test_identity_neutral(self, rng):
        p = _random_profile(rng, 16, RX)
        i = IqProfile.identity(16, RX)
        S = rng.standard_normal((16, 3)) + 1j * rng.standard_normal((16, 3))
        used = np.arange(16) != 8  # beta at k = -Nc/2 never multiplies anything
        for q in (compose(i, p), compose(p, i)):
            assert np.allclose(q.alpha, p.alpha) and np.allclose(q.beta[used], p.beta[used])
            assert np.allclose(apply_rx_iq(S, q), apply_rx_iq(S, p))

    def test_sequential_application(self, cfg, rng):
        S = rng.standard_normal((cfg.Nc, 4)) + 1j * rng.standard_normal((cfg.Nc, 4))
        fi = IqProfile.constant(RX_FI_ALPHA, RX_FI_BETA, cfg.Nc, RX)
        fs = fs_coefficients(branch_filter_response(I_BRANCH, cfg), branch_filter_response(Q_BRANCH, cfg))
        seq = apply_rx_iq(apply_rx_iq(S, fi), fs)
        both = apply_rx_iq(S, compose(fi, fs))
        assert np.max(np.abs(seq - both)) / np.max(np.abs(seq)) < 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            compose(IqProfile.identity(4), IqProfile.identity(8))


class TestModels:
    def test_reference_rx_is_fi_then_fs(self, cfg):
        m = reference_impairments(cfg)
        fi = IqProfile.constant(RX_FI_ALPHA, RX_FI_BETA, cfg.Nc, RX)
        fs = fs_coefficients(branch_filter_response(I_BRANCH, cfg), branch_filter_response(Q_BRANCH, cfg))
        expect = compose(fi, fs)
        assert np.allclose(m.rx.alpha, expect.alpha) and np.allclose(m.rx.beta, expect.beta)
        assert np.allclose(m.tx.alpha, TX_FI_ALPHA)

    def test_fs_first_switch_changes_result(self, cfg):
        a = reference_impairments(cfg).rx
        b = reference_impairments(cfg, fs_first=True).rx
        assert not np.allclose(a.beta, b.beta)

    def test_fi_only(self, cfg):
        m = reference_impairments(cfg, i_branch=None, q_branch=None)
        assert np.allclose(m.rx.beta, RX_FI_BETA)

    def test_perfect(self, cfg):
        assert ImpairmentModel.perfect(cfg.Nc).is_perfect()

    def test_config_entry_forms(self, cfg):
        lit = profile_from_config({"alpha": [0.9848, 0.026], "beta": [0.148, -0.174]}, cfg, TX)
        assert lit.alpha[0] == TX_FI_ALPHA
        eps = profile_from_config({"epsilon": 0.1503, "phi_deg": 10}, cfg, TX)
        assert eps.alpha[0] == pytest.approx(0.98481 + 0.0261j, abs=1e-4)
        fs = profile_from_config({"i_branch": {"ripple": 3, "passband_edge": 0.8}, "q_branch": {"ripple": 2, "passband_edge": 0.81}}, cfg, RX)
        assert np.abs(fs.beta).max() > 0
        with pytest.raises(ValueError):
            profile_from_config({"gain": 1}, cfg, TX)

    def test_config_sections(self, cfg):
        assert impairments_from_config(None, cfg).is_perfect()
        ref = impairments_from_config({"preset": "reference"}, cfg)
        assert np.allclose(ref.rx.alpha, reference_impairments(cfg).rx.alpha)
        m = impairments_from_config({"tx": [{"epsilon": 0.1, "phi_deg": 5}], "rx": []}, cfg)
        assert m.rx.is_identity() and not m.tx.is_identity()
