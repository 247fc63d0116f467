"""SINR/SE reporting types shared by the uplink and downlink paths."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .scenario import ScenarioConfig


class Method(str, Enum):
    """Provenance of a SINR value."""

    EXACT_MC = "exact_mc"        # uplink, per realization with the MMSE combiner
    APPROX1 = "approx1"          # uplink first random-matrix approximation
    APPROX2 = "approx2"          # uplink fixed-point approximation
    DL_EXACT_MC = "dl_exact_mc"  # downlink, Monte Carlo expectations
    DL_APPROX = "dl_approx"      # downlink deterministic equivalent


def se_prefactor(config: ScenarioConfig) -> float:
    """Fraction of the coherence block carrying one direction of data."""
    return (config.coherence_len - config.pilot_len) / (2.0 * config.coherence_len)


def spectral_efficiency(sinr, config: ScenarioConfig) -> np.ndarray:
    """SE in bits/s/Hz; negative SINRs (truncated expansions) clamp to zero rate."""
    return se_prefactor(config) * np.log2(1.0 + np.maximum(np.asarray(sinr, dtype=float), 0.0))


@dataclass(frozen=True)
class SinrReport:
    """Per-user SINR and SE values with provenance and campaign metadata."""

    method: Method
    sinr: np.ndarray              # (K,) linear
    se: np.ndarray                # (K,) bits/s/Hz
    config_fingerprint: str
    seed: int
    trials: int = field(default=1)


def make_report(method: Method, sinr, config: ScenarioConfig, seed: int,
                trials: int = 1) -> SinrReport:
    sinr = np.asarray(sinr, dtype=float)
    return SinrReport(method=method, sinr=sinr, se=spectral_efficiency(sinr, config),
                      config_fingerprint=config.fingerprint(), seed=int(seed),
                      trials=int(trials))
