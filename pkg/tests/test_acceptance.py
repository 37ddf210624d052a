"""End-to-end acceptance checks, one test per criterion.

Each test records a single PASS/FAIL line that is printed in the terminal
summary. Criterion 5 runs the 200-channel BER campaign and takes several minutes.
"""
from __future__ import annotations

import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_lmmse
from ofdmjcs import aliasing
from ofdmjcs.channels import reference_targets
from ofdmjcs.codec import conv_encode, viterbi_decode
from ofdmjcs.experiments import ExperimentSpec, ber_curve, ebn0_at_ber, radar_frame, run, run_ber, run_papr
from ofdmjcs.impairments import ImpairmentModel, reference_impairments
from ofdmjcs.link import BurstLayout, demap_llr, lmmse_data, lmmse_pilots
from ofdmjcs.params import WindowSpec
from ofdmjcs.radar import classify_peaks, compute_rdm, detect_peaks, estimate_noise_floor, predict_ghosts, remove_median, target_bins
from ofdmjcs.waveform import Rule, map_bits_qpsk, mirror_factor


def _cyclic_close(a, b, shape, tol=1):
    dr = min((a[0] - b[0]) % shape[0], (b[0] - a[0]) % shape[0])
    dv = min((a[1] - b[1]) % shape[1], (b[1] - a[1]) % shape[1])
    return dr <= tol and dv <= tol


def _scenario_peaks(rule, cfg):
    model = reference_impairments(cfg, i_branch=None, q_branch=None)
    targets = reference_targets()
    S, Y = radar_frame(rule, cfg, model, targets, seed=0)
    rdm = compute_rdm(Y, S, cfg)
    if rule is Rule.RULE_II:
        rdm = remove_median(rdm)
    rep = detect_peaks(rdm, 12.0, dynamic_range_db=70.0)
    return classify_peaks(rep, targets, rule, cfg), targets


def test_criterion_1_rule_ii_ghost_geometry(cfg, acceptance):
    t0 = time.perf_counter()
    rep, targets = _scenario_peaks(Rule.RULE_II, cfg)
    shape = (cfg.Nc, cfg.Nsym)
    predicted = [loc for t in targets for loc in predict_ghosts(t, Rule.RULE_II, cfg)]
    on_grid = all(any(_cyclic_close(p.location, q, shape) for q in predicted) for p in rep.peaks)
    geometry = True
    for t in targets:
        r, v = (int(round(x)) for x in target_bins(t, cfg))
        locs = predict_ghosts(t, Rule.RULE_II, cfg)
        geometry &= all(loc[0] == locs[0][0] for loc in locs)
        offsets = {(loc[1] - locs[0][1]) % cfg.Nsym for loc in locs[1:]}
        geometry &= offsets <= {cfg.Nsym // 2, (-2 * locs[0][1]) % cfg.Nsym, (cfg.Nsym // 2 - 2 * locs[0][1]) % cfg.Nsym}
        # the half-Nsym ghost of every object is actually observed
        geometry &= any(_cyclic_close(p.location, locs[1], shape) for p in rep.peaks)
    elapsed = time.perf_counter() - t0
    ok = on_grid and geometry and elapsed < 30
    acceptance(1, ok, f"{len(rep)} peaks, all on predicted bins: {on_grid}, geometry: {geometry}, {elapsed:.1f} s")
    assert ok


def test_criterion_2_rule_i_ghost_geometry(cfg, acceptance):
    rep, targets = _scenario_peaks(Rule.RULE_I, cfg)
    shape = (cfg.Nc, cfg.Nsym)
    predicted = [loc for t in targets for loc in predict_ghosts(t, Rule.RULE_I, cfg)]
    on_grid = all(any(_cyclic_close(p.location, q, shape) for q in predicted) for p in rep.peaks)
    seen = True
    for t in targets:
        locs = predict_ghosts(t, Rule.RULE_I, cfg)
        r, v = locs[0]
        assert locs[1] == ((r + cfg.Nc // 2) % cfg.Nc, v)
        seen &= all(any(_cyclic_close(p.location, q, shape) for p in rep.peaks) for q in locs)
    ok = on_grid and seen
    acceptance(2, ok, f"{len(rep)} peaks, all on predicted bins: {on_grid}, every predicted ghost detected: {seen}")
    assert ok


def test_criterion_3_noise_floor_contrast(cfg, acceptance):
    fi = reference_impairments(cfg, i_branch=None, q_branch=None)
    perfect = ImpairmentModel.perfect(cfg.Nc)
    cheb = WindowSpec("chebyshev", 120.0)

    def floor(rule, model, median, doppler):
        S, Y = radar_frame(rule, cfg, model, reference_targets(), seed=0)
        rdm = compute_rdm(Y, S, cfg, doppler_window=doppler)
        return estimate_noise_floor(remove_median(rdm) if median else rdm)[1]

    std_rise = floor(Rule.STANDARD, fi, False, cheb) - floor(Rule.STANDARD, perfect, False, cheb)
    r2_excess = floor(Rule.RULE_II, fi, True, cheb) - floor(Rule.RULE_II, perfect, True, cheb)
    # reported for reference: with a rectangular Doppler window the deterministic ghost sidelobes dominate
    r2_rect = floor(Rule.RULE_II, fi, True, None) - floor(Rule.RULE_II, perfect, True, None)
    ok = std_rise >= 20 and abs(r2_excess) <= 3
    acceptance(
        3,
        ok,
        f"STANDARD floor rise {std_rise:.1f} dB; RULE_II excess after median removal {r2_excess:.2f} dB "
        f"with Chebyshev Doppler window, {r2_rect:.2f} dB with rectangular Doppler window",
    )
    assert ok


def test_criterion_4_papr_gap(tmp_path, acceptance):
    t0 = time.perf_counter()
    # 1.28M symbols per waveform: the RULE_I gap sits about 0.03 dB inside the tolerance
    spec = ExperimentSpec.from_dict({"n_trials": 5000, "seed": 0, "out": str(tmp_path)}, "papr")
    res = run_papr(spec, write=False)
    elapsed = time.perf_counter() - t0
    p = {rule: s["papr_db_at_probability"] for rule, s in res["rules"].items()}
    gap2 = p["RULE_II"] - p["STANDARD"]
    gap1 = p["RULE_I"] - p["STANDARD"]
    n = res["rules"]["STANDARD"]["n_symbols"]
    ok = n >= 10_000 and abs(gap2 - 2.4) <= 0.5 and abs(gap1) <= 0.3 and elapsed < 120
    acceptance(4, ok, f"{n} symbols per waveform, RULE_II - STANDARD {gap2:.2f} dB, RULE_I - STANDARD {gap1:.2f} dB, {elapsed:.0f} s")
    assert ok


@pytest.fixture(scope="module")
def ber_records(tmp_path_factory):
    spec = ExperimentSpec.from_dict(
        {
            "n_trials": 200,
            "seed": 2024,
            "ebn0_db": list(range(13)),
            "scenario": {"cases": ["balanced/perfect", "imbalanced/perfect", "imbalanced/est_channel"]},
            "out": str(tmp_path_factory.mktemp("ber")),
        },
        "ber",
    )
    t0 = time.perf_counter()
    records = run_ber(spec)
    return records, time.perf_counter() - t0


@pytest.mark.slow
def test_criterion_5_ber(ber_records, acceptance):
    records, elapsed = ber_records

    def cross(rule, cond):
        return ebn0_at_ber(*ber_curve(records, rule, cond))

    def ber_at(rule, cond, ebn0):
        x, b = ber_curve(records, rule, cond)
        return b[list(x).index(ebn0)]

    loss = {r: cross(r, "imbalanced/perfect") - cross(r, "balanced/perfect") for r in ("RULE_I", "RULE_II")}
    est = {r: cross(r, "imbalanced/est_channel") - cross(r, "imbalanced/perfect") for r in ("RULE_I", "RULE_II")}
    std_bal = cross("STANDARD", "balanced/perfect")
    std_imb = cross("STANDARD", "imbalanced/perfect")
    ok_a = abs(loss["RULE_I"] - 1.5) <= 1 and abs(loss["RULE_II"] - 2.0) <= 1
    ok_b = bool(np.isnan(std_imb) or std_imb - std_bal >= 5)
    std_ratio = ber_at("STANDARD", "imbalanced/est_channel", 12) / max(ber_at("STANDARD", "imbalanced/perfect", 12), 1e-12)
    ok_c = all(0 <= d < 1 for d in est.values()) and std_ratio >= 10
    ok = ok_a and ok_b and ok_c and elapsed < 1800
    acceptance(
        5,
        ok,
        f"(a) loss RULE_I {loss['RULE_I']:.2f} dB, RULE_II {loss['RULE_II']:.2f} dB; "
        f"(b) STANDARD crossing balanced {std_bal:.2f} dB, imbalanced {std_imb:.2f} dB; "
        f"(c) estimation penalty RULE_I {est['RULE_I']:.2f} dB, RULE_II {est['RULE_II']:.2f} dB, "
        f"STANDARD BER ratio at 12 dB {std_ratio:.1f}; {elapsed / 60:.1f} min",
    )
    assert ok


@pytest.mark.slow
def test_ber_curves_monotone(ber_records):
    records, _ = ber_records
    for rule, cond in {(r.rule, r.condition) for r in records}:
        x, b = ber_curve(records, rule, cond)
        n = next(r.bits for r in records if r.rule == rule)
        sigma = np.sqrt(np.maximum(b, 1 / n) / n)
        assert np.all(np.diff(b) <= 2 * (sigma[1:] + sigma[:-1])), (rule, cond)


def test_criterion_6_aliasing(tmp_path, acceptance, rng):
    t0 = time.perf_counter()
    rows = run(ExperimentSpec.from_dict({"out": str(tmp_path)}, "alias"))
    dual = all(r["passed"] for r in rows)
    worst = max(r["max_rel_error"] for r in rows)
    padding = True
    for case in aliasing.sweep_cases():
        if case.dirac and case.N_f <= case.Na:
            f = rng.standard_normal(case.N_f) + 1j * rng.standard_normal(case.N_f)
            g = aliasing.ecir_from_cir(f, case)
            padding &= aliasing.relative_error(g, np.r_[f, np.zeros(case.Na - case.N_f)]) <= 1e-10
    elapsed = time.perf_counter() - t0
    ok = dual and padding and elapsed < 5
    acceptance(6, ok, f"{len(rows)} cases, worst dual-path error {worst:.1e}, zero-padding identity {padding}, {elapsed:.2f} s")
    assert ok


def test_criterion_7_estimator_algebra(acceptance):
    rng = np.random.default_rng(7)
    lay = BurstLayout(16, 2, 4)
    worst = 0.0
    for _ in range(50):
        sigma2 = rng.uniform(1e-3, 1.0)
        h = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        z = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        C = rng.uniform(0.5, 2.0, 16)
        x, c_ee = lmmse_pilots(z, h, C, sigma2, 16)
        x_ref, C_ref = dense_lmmse(np.diag(h), z, np.diag(C), 16 * sigma2 * np.eye(16))
        worst = max(worst, np.max(np.abs(x - x_ref)), np.max(np.abs(c_ee - np.diag(C_ref).real)))
        for rule in Rule:
            m = int(rng.integers(0, 8))
            s_hat, c_d = lmmse_data(z, h, rule, m, lay, sigma2)
            if rule is Rule.STANDARD:
                H = np.diag(h[lay.data_bins])
                y = z[lay.data_bins]
            else:
                minus, plus = lay.data_bins_minus, lay.data_bins_plus
                d = mirror_factor(rule, 16, m)[minus]
                H = np.vstack([np.conj(np.diag(h[minus] * d)), np.diag(h[plus])])
                y = np.r_[np.conj(z[minus]), z[plus]]
            n = H.shape[1]
            x_ref, C_ref = dense_lmmse(H, y, np.eye(n), 16 * sigma2 * np.eye(H.shape[0]))
            worst = max(worst, np.max(np.abs(s_hat - x_ref)), np.max(np.abs(c_d - np.diag(C_ref).real)))
    h = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    z = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    zf = np.max(np.abs(lmmse_pilots(z, h, 1.0, 1e-15, 16)[0] - z / h))
    ok = worst < 1e-10 and zf < 1e-10
    acceptance(7, ok, f"max deviation from dense oracle {worst:.1e}, zero-forcing limit deviation {zf:.1e}")
    assert ok


def _qpsk_awgn_ber(rng, n_bits, ebn0_db, coded):
    ebn0 = 10 ** (ebn0_db / 10)
    bits = rng.integers(0, 2, n_bits)
    tx_bits = conv_encode(bits) if coded else bits
    rate = 0.5 if coded else 1.0
    tx_bits = tx_bits[: tx_bits.size - tx_bits.size % 2] if not coded else tx_bits
    s = map_bits_qpsk(tx_bits)
    n0 = 1.0 / (ebn0 * rate * 2)
    y = s + np.sqrt(n0 / 2) * (rng.standard_normal(s.size) + 1j * rng.standard_normal(s.size))
    llr = demap_llr(y, n0)
    if coded:
        return np.count_nonzero(viterbi_decode(llr) != bits), bits.size
    return np.count_nonzero((llr < 0) != tx_bits), tx_bits.size


def test_criterion_8_codec(acceptance):
    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.integers(0, 1), max_size=300))
    def round_trip(bits):
        assert np.array_equal(viterbi_decode(4.0 * (1 - 2.0 * conv_encode(bits))), np.array(bits, np.int8))

    round_trip()
    ratios = []
    for seed in range(3):
        rng = np.random.default_rng(seed)
        e_c, n_c = _qpsk_awgn_ber(rng, 400_000, 6.0, coded=True)
        e_u, n_u = _qpsk_awgn_ber(rng, 400_000, 6.0, coded=False)
        # zero coded errors: use the 95% upper bound 3/n
        ratios.append((e_u / n_u) / (max(e_c, 3) / n_c))
    ok = min(ratios) >= 100
    acceptance(8, ok, f"noiseless round trip exact; uncoded/coded BER ratio at 6 dB >= {min(ratios):.0f} over 3 seeds")
    assert ok


def test_criterion_9_determinism(tmp_path, acceptance):
    small = {"Nc": 16, "Nsym": 8, "B": 16e6, "fc": 5e9, "Tcp": 0.25e-6}
    configs = {
        "ber": {"system": small, "n_trials": 6, "ebn0_db": [0, 5, 10], "scenario": {"layout": {"N_pr": 2, "N_p": 4}, "N_f": 4}},
        "papr": {"n_trials": 8},
        "radar": {"scenario": {"write_rdm_csv": True}},
        "alias": {"scenario": {"Nc": [16, 64]}},
    }
    mismatched = []
    n_files = 0
    for kind, cfg in configs.items():
        outs = []
        for label, jobs in (("seq_a", 1), ("seq_b", 1), ("par", 2)):
            out = tmp_path / kind / label
            run(ExperimentSpec.from_dict({**cfg, "seed": 99, "out": str(out)}, kind), jobs=jobs)
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        n_files += len(outs[0])
        if not (outs[0] == outs[1] == outs[2]) or not outs[0]:
            mismatched.append(kind)
    ok = not mismatched
    acceptance(9, ok, f"{n_files} files byte-identical across two sequential runs and a 2-worker run; mismatches: {mismatched or 'none'}")
    assert ok
