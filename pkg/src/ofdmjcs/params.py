"""System parameters with subcarrier indexing helpers and the unambiguous radar limits."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

C0 = 299_792_458.0


@dataclass(frozen=True)
class WindowSpec:
    """Window applied before a DFT.

    ``kind`` is one of ``"rectangular"``, ``"chebyshev"`` or ``"hann"``.
    ``sidelobe_db`` is only used by the Chebyshev window.
    """

    kind: str = "chebyshev"
    sidelobe_db: float = 120.0

    def __post_init__(self):
        if self.kind not in ("rectangular", "chebyshev", "hann"):
            raise ValueError(f"unknown window kind {self.kind!r}")
        if self.kind == "chebyshev" and self.sidelobe_db <= 0:
            raise ValueError("Chebyshev sidelobe level must be positive")

    def coefficients(self, n: int) -> np.ndarray:
        from scipy.signal import windows

        if self.kind == "rectangular":
            return np.ones(n)
        if self.kind == "hann":
            return windows.hann(n, sym=False)
        # the symmetric design keeps the full sidelobe suppression
        return windows.chebwin(n, at=self.sidelobe_db, sym=True)


@dataclass(frozen=True)
class SystemConfig:
    """OFDM burst parameterization.

    Field names follow the usual OFDM radar notation so that JSON config files
    can use them verbatim. ``Ncp`` defaults to ``round(Tcp * B)``.
    """

    Nc: int = 512
    Nsym: int = 256
    B: float = 1e9
    fc: float = 77e9
    Tcp: float = 0.5e-6
    Ncp: int | None = None
    window: WindowSpec = field(default_factory=WindowSpec)

    def __post_init__(self):
        if isinstance(self.window, dict):
            object.__setattr__(self, "window", WindowSpec(**self.window))
        if self.Nc <= 0 or self.Nc % 2:
            raise ValueError(f"Nc must be a positive even integer, got {self.Nc}")
        if self.Nsym <= 0 or self.Nsym % 2:
            raise ValueError(f"Nsym must be a positive even integer, got {self.Nsym}")
        if self.B <= 0 or self.fc <= 0 or self.Tcp < 0:
            raise ValueError("B and fc must be positive and Tcp non-negative")
        ncp = int(round(self.Tcp * self.B))
        if self.Ncp is None:
            object.__setattr__(self, "Ncp", ncp)
        elif int(self.Ncp) != ncp:
            raise ValueError(f"Ncp={self.Ncp} inconsistent with round(Tcp*B)={ncp}")

    @property
    def delta_f(self) -> float:
        return self.B / self.Nc

    @property
    def T(self) -> float:
        # stored as Nc/B so that delta_f * T == 1 up to one rounding
        return self.Nc / self.B

    @property
    def Ts(self) -> float:
        return 1.0 / self.B

    @property
    def symbol_duration(self) -> float:
        """OFDM symbol duration including the cyclic prefix."""
        return self.T + self.Tcp

    @property
    def samples_per_symbol(self) -> int:
        return self.Nc + self.Ncp

    def k_values(self) -> np.ndarray:
        """Subcarrier indices ``k`` in DFT bin order."""
        return bin_to_k(np.arange(self.Nc), self.Nc)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown SystemConfig fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "SystemConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def replace(self, **changes) -> "SystemConfig":
        if "Tcp" in changes or "B" in changes:
            changes.setdefault("Ncp", None)
        return replace(self, **changes)


def measurement_config() -> SystemConfig:
    """Parameters of the 76.6 GHz chamber measurement setup."""
    return SystemConfig(Nc=1024, Nsym=256, B=1e9, fc=76.6e9, Tcp=1e-6)


def k_to_bin(k, Nc: int):
    """Map symmetric subcarrier index(es) ``-Nc/2 <= k < Nc/2`` to DFT bins."""
    k_arr = np.asarray(k)
    if np.any(k_arr < -Nc // 2) or np.any(k_arr >= Nc // 2):
        raise ValueError(f"subcarrier index out of range for Nc={Nc}: {k}")
    out = np.mod(k_arr, Nc)
    return int(out) if out.ndim == 0 else out


def bin_to_k(b, Nc: int):
    """Inverse of :func:`k_to_bin`."""
    b_arr = np.asarray(b)
    if np.any(b_arr < 0) or np.any(b_arr >= Nc):
        raise ValueError(f"bin index out of range for Nc={Nc}: {b}")
    out = np.where(b_arr >= Nc // 2, b_arr - Nc, b_arr)
    return int(out) if out.ndim == 0 else out


def mirror_bins(Nc: int) -> np.ndarray:
    """For every bin ``b`` (subcarrier k) return the bin of subcarrier ``-k``.

    ``k = -Nc/2`` has no mirror inside the band; it maps onto itself and callers
    that need the image term must zero it explicitly.
    """
    return np.mod(-np.arange(Nc), Nc)


def unambiguous_limits(cfg: SystemConfig, c0: float = C0) -> tuple[float, float]:
    """Maximum unambiguous range (m) and velocity (m/s) of the range-Doppler map."""
    r_max = c0 * cfg.Nc / (2 * cfg.B)
    v_max = c0 / (4 * cfg.fc * (cfg.T + cfg.Tcp))
    return r_max, v_max
