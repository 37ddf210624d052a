"""Range-Doppler processing, ghost prediction, peak detection and RDM export."""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import maximum_filter

from .params import SystemConfig, WindowSpec, unambiguous_limits
from .waveform import Rule

REAL_CANDIDATE = "REAL_CANDIDATE"
GHOST_PREDICTED = "GHOST_PREDICTED"
RIDGE = "RIDGE"
UNEXPECTED = "UNEXPECTED"

RDM_MAGIC = b"RDM1"
RDM_HEADER = struct.Struct("<4sII20x")


@dataclass(frozen=True)
class RangeDopplerMap:
    """Complex RDM, rows are range bins and columns velocity bins (DFT order).

    Velocity bin ``l >= Nsym/2`` corresponds to negative velocities.
    """

    values: np.ndarray
    range_resolution: float
    velocity_resolution: float
    windowed: bool = True

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def power(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def magnitude_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10 * np.log10(self.power())

    def with_values(self, values: np.ndarray) -> "RangeDopplerMap":
        return RangeDopplerMap(values, self.range_resolution, self.velocity_resolution, self.windowed)

    def velocity_axis(self) -> np.ndarray:
        Nsym = self.values.shape[1]
        return np.fft.fftfreq(Nsym, 1.0 / Nsym) * self.velocity_resolution

    def range_axis(self) -> np.ndarray:
        return np.arange(self.values.shape[0]) * self.range_resolution


@dataclass(frozen=True)
class Peak:
    range_bin: int
    velocity_bin: int
    magnitude_db: float
    classification: str = REAL_CANDIDATE

    @property
    def location(self) -> tuple[int, int]:
        return self.range_bin, self.velocity_bin


@dataclass
class PeakReport:
    peaks: list[Peak]
    noise_floor_db: float
    threshold_db: float = 12.0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.peaks)

    def locations(self) -> list[tuple[int, int]]:
        return [p.location for p in self.peaks]


def compute_rdm(
    Y,
    S,
    cfg: SystemConfig,
    *,
    range_window: WindowSpec | None = None,
    doppler_window: WindowSpec | None = None,
) -> RangeDopplerMap:
    """Element-wise division, windowed IDFT over subcarriers, DFT over symbols.

    The range window defaults to ``cfg.window`` and is laid out over
    ``k = -Nc/2 .. Nc/2-1`` so that its centre sits at DC.
    """
    Y = np.asarray(getattr(Y, "values", Y), dtype=complex)
    S = np.asarray(getattr(S, "values", S), dtype=complex)
    if Y.shape != S.shape or Y.shape != (cfg.Nc, cfg.Nsym):
        raise ValueError(f"frames must be {(cfg.Nc, cfg.Nsym)}, got {Y.shape} and {S.shape}")
    if np.any(S == 0):
        raise ValueError("transmit frame contains zero symbols; division undefined")
    range_window = cfg.window if range_window is None else range_window
    doppler_window = doppler_window or WindowSpec("rectangular")
    Z = Y / S
    w_r = np.fft.ifftshift(range_window.coefficients(cfg.Nc))
    Z = np.fft.ifft(Z * w_r[:, None], axis=0)
    w_d = doppler_window.coefficients(cfg.Nsym)
    Z = np.fft.fft(Z * w_d[None, :], axis=1)
    r_max, v_max = unambiguous_limits(cfg)
    return RangeDopplerMap(
        Z,
        r_max / cfg.Nc,
        2 * v_max / cfg.Nsym,
        windowed=range_window.kind != "rectangular",
    )


def complex_median(x: np.ndarray, axis: int = 0) -> np.ndarray:
    """Component-wise median of real and imaginary parts."""
    return np.median(x.real, axis=axis) + 1j * np.median(x.imag, axis=axis)


def remove_median(rdm: RangeDopplerMap) -> RangeDopplerMap:
    """Subtract the complex median of every velocity column (range ridge removal)."""
    Z = rdm.values
    return rdm.with_values(Z - complex_median(Z, axis=0)[None, :])


def estimate_noise_floor(rdm, range_profile: int | None = None) -> tuple[float, float]:
    """Median of ``|Z|^2`` over the map (or one velocity column), linear and dB."""
    Z = getattr(rdm, "values", rdm)
    p = np.abs(Z) ** 2
    if range_profile is not None:
        p = p[:, range_profile]
    floor = float(np.median(p))
    with np.errstate(divide="ignore"):
        return floor, float(10 * np.log10(floor))


def peak_snr_db(rdm, range_profile: int | None = None) -> float:
    """Highest peak minus the median noise floor, in dB."""
    Z = getattr(rdm, "values", rdm)
    p = np.abs(Z) ** 2
    if range_profile is not None:
        p = p[:, range_profile]
    floor, _ = estimate_noise_floor(rdm, range_profile)
    return float(10 * np.log10(p.max() / floor))


def detect_peaks(
    rdm: RangeDopplerMap,
    threshold_db: float = 12.0,
    *,
    dynamic_range_db: float | None = None,
    max_peaks: int | None = None,
) -> PeakReport:
    """Local maxima (8-neighbourhood, periodic edges) above ``floor + threshold_db``.

    ``dynamic_range_db`` additionally discards maxima further below the
    strongest bin; useful on noiseless maps whose median floor sits at the
    window sidelobe level.
    """
    if threshold_db <= 0:
        raise ValueError("threshold must be positive")
    p = rdm.power()
    floor, floor_db = estimate_noise_floor(rdm)
    level = floor * 10 ** (threshold_db / 10)
    if dynamic_range_db is not None:
        level = max(level, p.max() * 10 ** (-dynamic_range_db / 10))
    local_max = (p == maximum_filter(p, size=3, mode="wrap")) & (p > level)
    rows, cols = np.nonzero(local_max)
    order = np.argsort(p[rows, cols])[::-1]
    if max_peaks is not None:
        order = order[:max_peaks]
    with np.errstate(divide="ignore"):
        peaks = [
            Peak(int(rows[i]), int(cols[i]), float(10 * np.log10(p[rows[i], cols[i]])))
            for i in order
        ]
    return PeakReport(peaks, floor_db, threshold_db)


def target_bins(target, cfg: SystemConfig) -> tuple[float, float]:
    """Fractional (range, velocity) bin of a target, wrapped into the map."""
    r_max, v_max = unambiguous_limits(cfg)
    r = (target.range / r_max * cfg.Nc) % cfg.Nc
    v = (target.velocity / (2 * v_max) * cfg.Nsym) % cfg.Nsym
    return r, v


def predict_ghosts(target, rule, cfg: SystemConfig) -> list[tuple[int, int]]:
    """Bins where a target and its IQ-imbalance images appear.

    The first entry is the target itself. STANDARD adds only the mirrored
    velocity image (its cross terms raise the floor instead).
    """
    rule = Rule.parse(rule)
    r, v = target_bins(target, cfg)
    Nc, Nsym = cfg.Nc, cfg.Nsym
    if rule is Rule.STANDARD:
        pts = [(r, v), (r, -v)]
    elif rule is Rule.RULE_I:
        pts = [(r, v), (r + Nc / 2, v), (r + Nc / 2, -v), (r, -v)]
    else:
        pts = [(r, v), (r, v + Nsym / 2), (r, -v + Nsym / 2), (r, -v)]
    out = []
    for pr, pv in pts:
        loc = (int(np.round(pr)) % Nc, int(np.round(pv)) % Nsym)
        if loc not in out:
            out.append(loc)
    return out


def raises_noise_floor(rule) -> bool:
    return Rule.parse(rule) is Rule.STANDARD


def _circ_dist(a: int, b: int, n: int) -> int:
    d = abs(a - b) % n
    return min(d, n - d)


def near(loc: tuple[int, int], candidates, shape, tol: int = 1) -> bool:
    return any(
        _circ_dist(loc[0], c[0], shape[0]) <= tol and _circ_dist(loc[1], c[1], shape[1]) <= tol
        for c in candidates
    )


def classify_peaks(report: PeakReport, targets, rule, cfg: SystemConfig, tol: int = 1) -> PeakReport:
    """Label every peak as real, predicted ghost, DC-ridge residue or unexpected."""
    shape = (cfg.Nc, cfg.Nsym)
    real, ghosts = [], []
    for t in targets:
        locs = predict_ghosts(t, rule, cfg)
        real.append(locs[0])
        ghosts.extend(locs[1:])
    ridge_cols = {c[1] for c in real + ghosts}
    labelled = []
    for p in report.peaks:
        loc = (p.range_bin, p.velocity_bin)
        if near(loc, real, shape, tol):
            label = REAL_CANDIDATE
        elif near(loc, ghosts, shape, tol):
            label = GHOST_PREDICTED
        elif _circ_dist(p.range_bin, 0, cfg.Nc) <= tol and any(
            _circ_dist(p.velocity_bin, c, cfg.Nsym) <= tol for c in ridge_cols
        ):
            label = RIDGE
        else:
            label = UNEXPECTED
        labelled.append(Peak(p.range_bin, p.velocity_bin, p.magnitude_db, label))
    return PeakReport(labelled, report.noise_floor_db, report.threshold_db, dict(report.meta))


def write_rdm_binary(rdm, path) -> None:
    """Row-major complex64 dump behind a 32-byte header (magic, Nc, Nsym, reserved)."""
    Z = np.asarray(getattr(rdm, "values", rdm), dtype=np.complex64)
    with open(path, "wb") as fh:
        fh.write(RDM_HEADER.pack(RDM_MAGIC, Z.shape[0], Z.shape[1]))
        fh.write(np.ascontiguousarray(Z).tobytes())


def read_rdm_binary(path) -> np.ndarray:
    data = Path(path).read_bytes()
    magic, nc, nsym = RDM_HEADER.unpack_from(data)
    if magic != RDM_MAGIC:
        raise ValueError(f"not an RDM dump: magic {magic!r}")
    body = np.frombuffer(data, dtype=np.complex64, offset=RDM_HEADER.size)
    if body.size != nc * nsym:
        raise ValueError("truncated RDM dump")
    return body.reshape(nc, nsym).copy()


def write_rdm_csv(rdm, path, floor_db: float | None = None) -> None:
    """One row per bin: ``range_bin, velocity_bin, magnitude_db``.

    Bins more than 200 dB below the peak are clipped to keep the file finite.
    """
    mag = rdm.magnitude_db() if isinstance(rdm, RangeDopplerMap) else 10 * np.log10(np.abs(rdm) ** 2)
    lo = np.nanmax(mag) - 200 if floor_db is None else floor_db
    mag = np.maximum(mag, lo)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["range_bin", "velocity_bin", "magnitude_db"])
        for r in range(mag.shape[0]):
            for v in range(mag.shape[1]):
                w.writerow([r, v, f"{mag[r, v]:.3f}"])
