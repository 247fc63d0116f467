"""Network geometry, large-scale fading, and spatial correlation matrices.

All correlation matrices produced here are noise normalized: the path gain is
divided by the receiver noise power so that every later expression can assume
unit-variance additive noise and powers can be plugged in directly in mW.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, fields, replace
from enum import Enum
from pathlib import Path

import numpy as np

THERMAL_NOISE_DBM_PER_HZ = -174.0


class CorrelationModel(str, Enum):
    LOCAL_SCATTERING = "local_scattering"
    EXPONENTIAL = "exponential"
    IDENTITY = "identity"


class PathlossModel(str, Enum):
    LOG_DISTANCE = "log_distance"


class PilotKind(str, Enum):
    RANDOM = "random"
    ORTHOGONAL = "orthogonal"


@dataclass(frozen=True)
class ScenarioConfig:
    """Deterministic simulation parameters for one network scenario.

    Array geometry, frame structure and power levels; everything random is
    derived from ``master_seed``.  Defaults follow the standard simulation
    setup (1.9 GHz carrier, 20 MHz bandwidth, 9 dB noise figure, 200-use
    coherence blocks with 16 pilot uses, 20/20/200 mW pilot/UL/DL powers,
    16 users on a 100 m square); the array sizes have no canonical default
    and must always be given.
    """

    num_aps: int                          # M
    antennas_per_ap: int                  # N
    rf_chains: int                        # N_RF <= N
    num_users: int = 16                   # K
    coherence_len: int = 200              # tau_c, channel uses per block
    pilot_len: int = 16                   # tau_p <= tau_c
    pilot_power_mw: float = 20.0
    ul_power_max_mw: float = 20.0         # per-user cap
    dl_power_max_mw: float = 200.0        # per-user DL power
    carrier_freq_ghz: float = 1.9
    bandwidth_mhz: float = 20.0
    noise_figure_db: float = 9.0
    area_side_m: float = 100.0
    correlation_model: CorrelationModel = CorrelationModel.LOCAL_SCATTERING
    angular_spread_deg: float = 15.0      # local scattering only
    correlation_coefficient: float = 0.5  # exponential model only, |r| < 1
    pathloss_model: PathlossModel = PathlossModel.LOG_DISTANCE
    pathloss_ref_db: float = 30.0         # loss at 1 m
    pathloss_exponent: float = 3.7
    min_distance_m: float = 1.0           # clamp avoids the d=0 singularity
    pilot_kind: PilotKind = PilotKind.RANDOM
    master_seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if min(self.num_aps, self.antennas_per_ap, self.rf_chains, self.num_users) < 1:
            raise ValueError("num_aps, antennas_per_ap, rf_chains and num_users must be >= 1")
        if self.rf_chains > self.antennas_per_ap:
            raise ValueError("rf_chains must not exceed antennas_per_ap")
        if not 1 <= self.pilot_len <= self.coherence_len:
            raise ValueError("pilot_len must satisfy 1 <= pilot_len <= coherence_len")
        if min(self.pilot_power_mw, self.ul_power_max_mw, self.dl_power_max_mw) <= 0:
            raise ValueError("all powers must be positive")
        if self.bandwidth_mhz <= 0:
            raise ValueError("bandwidth must be positive")
        if self.area_side_m < 0:
            raise ValueError("area_side_m must be nonnegative")
        if self.angular_spread_deg < 0:
            raise ValueError("angular_spread_deg must be nonnegative")
        if abs(self.correlation_coefficient) >= 1:
            raise ValueError("exponential correlation coefficient must satisfy |r| < 1")
        if self.min_distance_m <= 0:
            raise ValueError("min_distance_m must be positive")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")

    @property
    def total_rf_chains(self) -> int:
        return self.num_aps * self.rf_chains

    def fingerprint(self) -> str:
        """Stable 16-hex-digit digest of every configuration field."""
        items = [(f.name, getattr(self, f.name)) for f in fields(self)]
        text = ";".join(f"{k}={v.value if isinstance(v, Enum) else v!r}" for k, v in items)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Geometry:
    """AP and user positions (meters) in the square service area."""

    aps: np.ndarray    # (M, 2)
    users: np.ndarray  # (K, 2)


@dataclass(frozen=True)
class SpatialCorrelationSet:
    """Noise-normalized spatial correlation matrices for every AP-user link.

    ``matrices[m, k]`` is the N x N Hermitian PSD correlation matrix of the
    channel between AP m and user k; ``large_scale[m, k]`` is the linear gain
    tr(R_mk)/N after noise normalization.
    """

    matrices: np.ndarray      # (M, K, N, N) complex
    large_scale: np.ndarray   # (M, K) real
    noise_power_dbm: float

    @property
    def num_aps(self) -> int:
        return self.matrices.shape[0]

    @property
    def num_users(self) -> int:
        return self.matrices.shape[1]

    @property
    def num_antennas(self) -> int:
        return self.matrices.shape[2]


_GEOMETRY_DOMAIN = 0x47454F


def generate_geometry(config: ScenarioConfig, seed) -> Geometry:
    """Draw AP and user positions i.i.d. uniform over the square area."""
    rng = np.random.default_rng(np.random.SeedSequence(_as_entropy(seed, _GEOMETRY_DOMAIN)))
    aps = rng.uniform(0.0, config.area_side_m, size=(config.num_aps, 2))
    users = rng.uniform(0.0, config.area_side_m, size=(config.num_users, 2))
    return Geometry(aps=aps, users=users)


def noise_power_dbm(config: ScenarioConfig) -> float:
    """Receiver noise power: thermal floor + 10 log10(BW) + noise figure."""
    bw_hz = config.bandwidth_mhz * 1e6
    return THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(bw_hz) + config.noise_figure_db


def pathloss_db(config: ScenarioConfig, distance_m: np.ndarray) -> np.ndarray:
    """Log-distance path loss, with distances clamped at min_distance_m."""
    d = np.maximum(np.asarray(distance_m, dtype=float), config.min_distance_m)
    return config.pathloss_ref_db + 10.0 * config.pathloss_exponent * np.log10(d)


def build_correlation(config: ScenarioConfig, geometry: Geometry) -> SpatialCorrelationSet:
    """Build R_mk = beta_mk * Sigma_mk for every AP-user pair.

    Sigma_mk is a trace-N correlation shape from the configured model and
    beta_mk combines log-distance path loss with the noise normalization.
    Local scattering uses a half-wavelength uniform linear array with a
    Gaussian angular spread around the AP-to-user bearing.
    """
    m, k, n = config.num_aps, config.num_users, config.antennas_per_ap
    delta = geometry.users[None, :, :] - geometry.aps[:, None, :]   # (M, K, 2)
    dist = np.hypot(delta[..., 0], delta[..., 1])
    n_dbm = noise_power_dbm(config)
    beta = 10.0 ** ((-pathloss_db(config, dist) - n_dbm) / 10.0)    # (M, K)

    if config.correlation_model is CorrelationModel.IDENTITY:
        shape = np.broadcast_to(np.eye(n, dtype=complex), (m, k, n, n)).copy()
    elif config.correlation_model is CorrelationModel.EXPONENTIAL:
        r = config.correlation_coefficient
        lags = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
        shape = np.broadcast_to((r ** lags).astype(complex), (m, k, n, n)).copy()
    elif config.correlation_model is CorrelationModel.LOCAL_SCATTERING:
        bearing = np.arctan2(delta[..., 1], delta[..., 0])          # (M, K)
        spread = math.radians(config.angular_spread_deg)
        lag = np.subtract.outer(np.arange(n), np.arange(n))         # (N, N)
        phase = np.pi * lag[None, None] * np.sin(bearing)[..., None, None]
        damp = 0.5 * (spread * np.pi * lag[None, None] * np.cos(bearing)[..., None, None]) ** 2
        shape = np.exp(1j * phase - damp)
    else:  # pragma: no cover - enum is exhaustive
        raise ValueError(f"unknown correlation model {config.correlation_model}")

    matrices = beta[..., None, None] * shape
    matrices = 0.5 * (matrices + np.conj(np.swapaxes(matrices, -1, -2)))
    return SpatialCorrelationSet(matrices=matrices, large_scale=beta, noise_power_dbm=n_dbm)


def _as_entropy(seed, domain: int):
    """Seeds may be plain integers or tuples of integers (sub-stream keys)."""
    if isinstance(seed, (tuple, list)):
        return tuple(seed) + (domain,)
    return (int(seed), domain)


# --------------------------------------------------------------------------
# Config file interface: flat "key = value" lines mirroring ScenarioConfig.
# --------------------------------------------------------------------------

_FIELD_PARSERS = {
    "num_aps": int,
    "antennas_per_ap": int,
    "rf_chains": int,
    "num_users": int,
    "coherence_len": int,
    "pilot_len": int,
    "pilot_power_mw": float,
    "ul_power_max_mw": float,
    "dl_power_max_mw": float,
    "carrier_freq_ghz": float,
    "bandwidth_mhz": float,
    "noise_figure_db": float,
    "area_side_m": float,
    "correlation_model": CorrelationModel,
    "angular_spread_deg": float,
    "correlation_coefficient": float,
    "pathloss_model": PathlossModel,
    "pathloss_ref_db": float,
    "pathloss_exponent": float,
    "min_distance_m": float,
    "pilot_kind": PilotKind,
    "master_seed": int,
}

_REQUIRED_KEYS = ("num_aps", "antennas_per_ap", "rf_chains")


def parse_scenario_text(text: str) -> ScenarioConfig:
    """Parse a flat key = value document into a ScenarioConfig.

    Blank lines and '#' comments are ignored.  Unknown keys are an error, as
    is omitting any of num_aps / antennas_per_ap / rf_chains.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _FIELD_PARSERS:
            raise ValueError(f"line {lineno}: unknown configuration key {key!r}")
        if key in values:
            raise ValueError(f"line {lineno}: duplicate configuration key {key!r}")
        try:
            values[key] = _FIELD_PARSERS[key](val)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    missing = [k for k in _REQUIRED_KEYS if k not in values]
    if missing:
        raise ValueError(f"missing required configuration keys: {', '.join(missing)}")
    return ScenarioConfig(**values)


def load_scenario(path) -> ScenarioConfig:
    return parse_scenario_text(Path(path).read_text())


def format_scenario(config: ScenarioConfig) -> str:
    """Render a config back to the flat key = value format."""
    lines = []
    for f in fields(config):
        v = getattr(config, f.name)
        lines.append(f"{f.name} = {v.value if isinstance(v, Enum) else v}")
    return "\n".join(lines) + "\n"


def with_overrides(config: ScenarioConfig, **kwargs) -> ScenarioConfig:
    return replace(config, **kwargs)
