"""Experiment orchestration: configuration handling plus Monte-Carlo loops that write result files.

Every random quantity of a trial is drawn from ``default_rng([seed, trial, stream])``
so results do not depend on how trials are scheduled across workers.
"""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import aliasing, channels, link, radar
from .impairments import (
    ImpairmentModel,
    apply_rx_iq,
    apply_tx_iq,
    impairments_from_config,
)
from .params import SystemConfig, WindowSpec
from .waveform import Rule, SymbolFrame, ofdm_demodulate, ofdm_modulate, papr_at_probability, random_frame

log = logging.getLogger(__name__)

KINDS = ("radar", "ber", "papr", "alias")
CODE_RATE = 0.5
BITS_PER_SYMBOL = 2
BER_COLUMNS = ("rule", "condition", "ebn0_db", "bits", "errors", "ber")
PAPR_COLUMNS = ("rule", "threshold_db", "ccdf")

# knowledge conditions of the receiver
PERFECT = "perfect"
EST_CHANNEL = "est_channel"
EST_CPE = "est_cpe"
CONDITIONS = (PERFECT, EST_CHANNEL, EST_CPE)
BALANCED = "balanced"
IMBALANCED = "imbalanced"

DEFAULT_BER_CASES = (
    (BALANCED, PERFECT),
    (IMBALANCED, PERFECT),
    (IMBALANCED, EST_CHANNEL),
    (IMBALANCED, EST_CPE),
)


def redundancy_factor(rule) -> float:
    return 1.0 if Rule.parse(rule) is Rule.STANDARD else 0.5


def noise_variance(
    ebn0_linear: float,
    P_s: float,
    r: float = CODE_RATE,
    b: int = BITS_PER_SYMBOL,
    zeta: float = 1.0,
    nu: float = 1.0,
) -> float:
    """``sigma^2 = P_s / (EbN0 r b zeta nu)``."""
    if min(ebn0_linear, P_s, r, b, zeta, nu) <= 0:
        raise ValueError("all noise-variance factors must be positive")
    return P_s / (ebn0_linear * r * b * zeta * nu)


def cp_factor(cfg: SystemConfig) -> float:
    return cfg.Nc / (cfg.Ncp + cfg.Nc)


@dataclass
class ExperimentSpec:
    kind: str
    system: SystemConfig = field(default_factory=SystemConfig)
    impairments: dict | None = None
    scenario: dict = field(default_factory=dict)
    ebn0_db: list[float] = field(default_factory=lambda: [float(x) for x in range(13)])
    n_trials: int = 200
    seed: int = 0
    out: Path = Path("results")

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.n_trials < 1:
            raise ValueError("n_trials must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        self.out = Path(self.out)

    @classmethod
    def from_dict(cls, data: dict, kind: str | None = None) -> "ExperimentSpec":
        data = dict(data)
        kind = kind or data.pop("kind", None)
        data.pop("kind", None)
        system = SystemConfig.from_dict(data.pop("system", {}))
        allowed = {"impairments", "scenario", "ebn0_db", "n_trials", "seed", "out"}
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown experiment keys: {sorted(unknown)}")
        return cls(kind=kind, system=system, **data)

    @classmethod
    def from_json(cls, path, kind: str | None = None) -> "ExperimentSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh), kind)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["system"] = self.system.to_dict()
        d["out"] = str(self.out)
        return d


@dataclass(frozen=True)
class BerRecord:
    rule: str
    condition: str
    ebn0_db: float
    bits: int
    errors: int

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else float("nan")

    def row(self) -> list:
        return [self.rule, self.condition, f"{self.ebn0_db:g}", self.bits, self.errors, f"{self.ber:.6e}"]


def trial_rng(seed: int, trial: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, trial, stream])


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _model(spec: ExperimentSpec, default: str) -> ImpairmentModel:
    section = spec.impairments if spec.impairments is not None else {"preset": default}
    return impairments_from_config(section, spec.system)


# ---------------------------------------------------------------- BER


@dataclass(frozen=True)
class _BerJob:
    spec: ExperimentSpec
    trial: int


def _ber_cases(spec: ExperimentSpec):
    cases = spec.scenario.get("cases")
    if cases is None:
        return list(DEFAULT_BER_CASES)
    out = []
    for c in cases:
        iq, cond = c.split("/") if isinstance(c, str) else c
        if iq not in (BALANCED, IMBALANCED) or cond not in CONDITIONS:
            raise ValueError(f"invalid BER case {c!r}")
        out.append((iq, cond))
    return out


def _ber_rules(spec: ExperimentSpec) -> list[Rule]:
    return [Rule.parse(r) for r in spec.scenario.get("rules", [r.value for r in Rule])]


def _ber_trial(job: _BerJob) -> np.ndarray:
    """Error counts of one channel realization, shape ``(rules, cases, snr)``."""
    spec, trial = job.spec, job.trial
    cfg = spec.system
    sc = spec.scenario
    rules = _ber_rules(spec)
    cases = _ber_cases(spec)
    models = {BALANCED: ImpairmentModel.perfect(cfg.Nc), IMBALANCED: _model(spec, "reference")}
    profiles = sc.get("profiles", [channels.LOS, channels.NLOS])
    profile = profiles[trial % len(profiles)]
    rng = trial_rng(spec.seed, trial, 0)
    cir = channels.generate_cir(profile, sc.get("N_f", 256), rng, Nc=cfg.Nc)
    v_max = sc.get("max_velocity", 60.0)
    velocity = float(rng.uniform(-v_max, v_max))
    state = channels.LinkState(cir, velocity)
    c = cir.cfr(cfg.Nc)
    cpe_true = channels.symbol_cpe(velocity, cfg, cfg.Nsym)
    ebn0 = 10 ** (np.asarray(spec.ebn0_db, dtype=float) / 10)
    zeta = cp_factor(cfg)

    errors = np.zeros((len(rules), len(cases), ebn0.size), dtype=np.int64)
    for ri, rule in enumerate(rules):
        layout = link.BurstLayout.default(rule, cfg.Nc, **sc.get("layout", {}))
        bits = trial_rng(spec.seed, trial, 1 + ri).integers(0, 2, layout.payload_bits(rule, cfg), dtype=np.int8)
        burst = link.build_burst(bits, rule, layout, cfg)
        noise_rng = trial_rng(spec.seed, trial, 100 + ri)
        noise = channels.complex_noise(noise_rng, (cfg.Nc, cfg.Nsym))
        noise_f = np.fft.fft(noise, axis=0)
        m_data = np.arange(layout.N_pr, cfg.Nsym)
        for iq in sorted({iq for iq, _ in cases}):
            model = models[iq]
            tx = ofdm_modulate(SymbolFrame(apply_tx_iq(burst.frame.values, model.tx), rule), cfg)
            rx = channels.apply_channel_time(tx, state, cfg)
            P_s = float(np.mean(np.abs(rx.samples) ** 2))
            Zs = apply_rx_iq(ofdm_demodulate(rx.samples, cfg, cfg.Nsym), model.rx)
            Zn = apply_rx_iq(noise_f, model.rx)
            true_ch = link.true_effective_channel(c, model, rule, layout.mask)
            for ci, (case_iq, cond) in enumerate(cases):
                if case_iq != iq:
                    continue
                for si, e in enumerate(ebn0):
                    sigma2 = noise_variance(e, P_s, zeta=zeta, nu=redundancy_factor(rule))
                    Z = Zs + np.sqrt(sigma2) * Zn
                    if cond == PERFECT:
                        kw = dict(channel=true_ch, cpe=cpe_true[m_data])
                    elif cond == EST_CHANNEL:
                        ref = cpe_true[m_data % 2] if rule is Rule.RULE_II else cpe_true[0]
                        kw = dict(cpe=cpe_true[m_data] - ref)
                    else:
                        kw = dict(channel=true_ch)
                    res = link.receive_burst(Z, rule, layout, cfg, sigma2, **kw)
                    errors[ri, ci, si] = int(np.count_nonzero(res.bits != bits))
    return errors


def run_ber(spec: ExperimentSpec, jobs: int = 1, write: bool = True) -> list[BerRecord]:
    """Monte-Carlo BER over ``spec.n_trials`` channels for every rule and case."""
    cfg = spec.system
    rules = _ber_rules(spec)
    cases = _ber_cases(spec)
    results = _map(_ber_trial, [_BerJob(spec, t) for t in range(spec.n_trials)], jobs)
    errors = np.sum(results, axis=0)
    records = []
    for ri, rule in enumerate(rules):
        layout = link.BurstLayout.default(rule, cfg.Nc, **spec.scenario.get("layout", {}))
        n_bits = layout.payload_bits(rule, cfg) * spec.n_trials
        for ci, (iq, cond) in enumerate(cases):
            for si, e in enumerate(spec.ebn0_db):
                records.append(BerRecord(rule.value, f"{iq}/{cond}", float(e), n_bits, int(errors[ri, ci, si])))
    if write:
        write_ber_csv(records, spec.out / "ber.csv")
    return records


def write_ber_csv(records, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BER_COLUMNS)
        for r in records:
            w.writerow(r.row())


def ber_curve(records, rule, condition) -> tuple[np.ndarray, np.ndarray]:
    rows = sorted((r for r in records if r.rule == Rule.parse(rule).value and r.condition == condition), key=lambda r: r.ebn0_db)
    return np.array([r.ebn0_db for r in rows]), np.array([r.ber for r in rows])


def ebn0_at_ber(ebn0_db, ber, target: float = 1e-4) -> float:
    """Eb/N0 where the curve first drops to ``target`` (log-linear interpolation); nan if never."""
    ebn0_db = np.asarray(ebn0_db, dtype=float)
    ber = np.asarray(ber, dtype=float)
    below = np.nonzero(ber <= target)[0]
    if below.size == 0:
        return float("nan")
    i = below[0]
    if i == 0:
        return float(ebn0_db[0])
    lo, hi = np.log10(max(ber[i - 1], 1e-300)), np.log10(max(ber[i], 1e-300))
    t = np.log10(target)
    frac = 1.0 if hi == lo else (lo - t) / (lo - hi)
    return float(ebn0_db[i - 1] + frac * (ebn0_db[i] - ebn0_db[i - 1]))


# ---------------------------------------------------------------- radar


def _targets(sc: dict) -> list[channels.RadarTarget]:
    if "targets" not in sc:
        return channels.reference_targets(sc.get("crosstalk_db", 20.0))
    out = []
    for t in sc["targets"]:
        if "amplitude_db" in t:
            out.append(channels.RadarTarget.from_db(t["range"], t["velocity"], t["amplitude_db"]))
        else:
            out.append(channels.RadarTarget(t["range"], t["velocity"], t.get("amplitude", 1.0)))
    return out


def radar_frame(rule, cfg: SystemConfig, model: ImpairmentModel, targets, seed: int, trial: int = 0, noise_variance_: float = 0.0):
    """Transmit frame and received (imbalanced, channel-distorted) frame of one radar measurement."""
    rule = Rule.parse(rule)
    S = random_frame(rule, cfg, trial_rng(seed, trial, 1 + list(Rule).index(rule))).values
    X = apply_tx_iq(S, model.tx)
    R = X * channels.radar_channel(targets, cfg)
    if noise_variance_ > 0:
        R = R + np.sqrt(cfg.Nc * noise_variance_) * channels.complex_noise(trial_rng(seed, trial, 50), R.shape)
    return S, apply_rx_iq(R, model.rx)


def run_radar(spec: ExperimentSpec, jobs: int = 1, write: bool = True) -> dict[str, radar.PeakReport]:
    """RDM per rule with ghost classification; writes ``rdm_<rule>.bin``, ``peaks_<rule>.csv``, ``radar_report.json``."""
    cfg = spec.system
    sc = spec.scenario
    model = _model(spec, "reference_fi")
    targets = _targets(sc)
    rules = [Rule.parse(r) for r in sc.get("rules", [r.value for r in Rule])]
    doppler = WindowSpec(**sc["doppler_window"]) if "doppler_window" in sc else None
    reports = {}
    for rule in rules:
        S, Y = radar_frame(rule, cfg, model, targets, spec.seed, noise_variance_=sc.get("noise_variance", 0.0))
        rdm = radar.compute_rdm(Y, S, cfg, doppler_window=doppler)
        median = sc.get("median_removal", "auto")
        if median is True or (median == "auto" and rule is Rule.RULE_II):
            rdm = radar.remove_median(rdm)
        rep = radar.detect_peaks(
            rdm,
            sc.get("threshold_db", 12.0),
            dynamic_range_db=sc.get("dynamic_range_db", 70.0),
            max_peaks=sc.get("max_peaks"),
        )
        rep = radar.classify_peaks(rep, targets, rule, cfg)
        rep.meta.update(rule=rule.value, median_removed=bool(median is True or (median == "auto" and rule is Rule.RULE_II)))
        reports[rule.value] = rep
        if write:
            spec.out.mkdir(parents=True, exist_ok=True)
            radar.write_rdm_binary(rdm, spec.out / f"rdm_{rule.value}.bin")
            if sc.get("write_rdm_csv", False):
                radar.write_rdm_csv(rdm, spec.out / f"rdm_{rule.value}.csv")
            _write_peaks(rep, spec.out / f"peaks_{rule.value}.csv")
    if write:
        summary = {
            rule: {
                "noise_floor_db": rep.noise_floor_db,
                "n_peaks": len(rep),
                "classes": {c: sum(p.classification == c for p in rep.peaks) for c in (radar.REAL_CANDIDATE, radar.GHOST_PREDICTED, radar.RIDGE, radar.UNEXPECTED)},
                **rep.meta,
            }
            for rule, rep in reports.items()
        }
        with open(spec.out / "radar_report.json", "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
    return reports


def _write_peaks(rep: radar.PeakReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["range_bin", "velocity_bin", "magnitude_db", "classification"])
        for p in rep.peaks:
            w.writerow([p.range_bin, p.velocity_bin, f"{p.magnitude_db:.3f}", p.classification])


# ---------------------------------------------------------------- PAPR


@dataclass(frozen=True)
class _PaprJob:
    spec: ExperimentSpec
    rule: Rule
    trial: int


def _papr_trial(job: _PaprJob) -> np.ndarray:
    cfg = job.spec.system
    frame = random_frame(job.rule, cfg, trial_rng(job.spec.seed, job.trial, 1 + list(Rule).index(job.rule)))
    x = np.fft.ifft(frame.values, axis=0)
    p = np.abs(x) ** 2
    return 10 * np.log10(p.max(axis=0) / p.mean(axis=0))


def run_papr(spec: ExperimentSpec, jobs: int = 1, write: bool = True) -> dict:
    """Per-symbol PAPR CCDF (critical sampling, CP excluded) for every rule."""
    cfg = spec.system
    sc = spec.scenario
    thresholds = np.round(np.arange(sc.get("min_db", 0.0), sc.get("max_db", 14.0) + 1e-9, sc.get("step_db", 0.1)), 6)
    probability = sc.get("probability", 1e-3)
    rules = [Rule.parse(r) for r in sc.get("rules", [r.value for r in Rule])]
    n_frames = spec.n_trials
    n_symbols = n_frames * cfg.Nsym
    warnings = []
    if n_symbols * probability < 10:
        warnings.append(f"{n_symbols} symbols give fewer than 10 exceedances at CCDF {probability:g}")
    jobs_list = [_PaprJob(spec, r, t) for r in rules for t in range(n_frames)]
    chunks = _map(_papr_trial, jobs_list, jobs)
    table, summary = [], {}
    for ri, rule in enumerate(rules):
        papr = np.concatenate(chunks[ri * n_frames : (ri + 1) * n_frames])
        ccdf = (papr[None, :] > thresholds[:, None]).mean(axis=1)
        table.extend((rule.value, float(t), float(c)) for t, c in zip(thresholds, ccdf))
        summary[rule.value] = {"papr_db_at_probability": papr_at_probability(papr, probability), "n_symbols": int(papr.size)}
    result = {"probability": probability, "rules": summary, "warnings": warnings, "table": table}
    if write:
        spec.out.mkdir(parents=True, exist_ok=True)
        with open(spec.out / "papr_ccdf.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(PAPR_COLUMNS)
            for rule, t, c in table:
                w.writerow([rule, f"{t:.2f}", f"{c:.6e}"])
        with open(spec.out / "papr_summary.json", "w") as fh:
            json.dump({k: v for k, v in result.items() if k != "table"}, fh, indent=2, sort_keys=True)
    for msg in warnings:
        log.warning(msg)
    return result


# ---------------------------------------------------------------- aliasing


def run_alias_check(spec: ExperimentSpec, jobs: int = 1, write: bool = True) -> list[dict]:
    """Dual-path ECIR comparison over the parameter sweep; one row per case."""
    sc = spec.scenario
    tol = sc.get("tolerance", 1e-10)
    rows = []
    for i, case in enumerate(aliasing.sweep_cases(tuple(sc.get("Nc", (16, 64, 512))), tuple(sc.get("mu", (1, 2, 3, 4))))):
        rng = trial_rng(spec.seed, i, 0)
        f = rng.standard_normal(case.N_f) + 1j * rng.standard_normal(case.N_f)
        err = aliasing.relative_error(aliasing.ecir_kernel(f, case), aliasing.ecir_from_cir(f, case))
        fold_err = aliasing.relative_error(aliasing.ecir_from_cir(f, case), aliasing.fold_cir(f, case.Na)) if case.dirac else float("nan")
        ok = err <= tol and (not case.dirac or fold_err <= tol)
        rows.append(dict(Nc=case.Nc, mu=case.mu, Na=case.Na, N_f=case.N_f, max_rel_error=err, fold_rel_error=fold_err, passed=ok))
    if write:
        spec.out.mkdir(parents=True, exist_ok=True)
        with open(spec.out / "alias_check.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(rows[0]))
            for r in rows:
                w.writerow([r["Nc"], r["mu"], r["Na"], r["N_f"], f"{r['max_rel_error']:.3e}", f"{r['fold_rel_error']:.3e}", r["passed"]])
    return rows


RUNNERS = {"radar": run_radar, "ber": run_ber, "papr": run_papr, "alias": run_alias_check}


def run(spec: ExperimentSpec, jobs: int = 1):
    return RUNNERS[spec.kind](spec, jobs=jobs)
