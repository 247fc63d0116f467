"""Campaign driver: Monte Carlo sweeps over geometries and coherence blocks,
SE pooling, CDF/outage statistics, and result serialization.

Two-level structure: the outer loop redraws geometry and large-scale state
(which fully determines the approximations), the inner loop redraws
small-scale blocks (which drive the exact expressions).  All sub-streams are
derived from (master_seed, geometry_index), so campaigns are reproducible
and two half campaigns over disjoint geometry ranges pool to the same
samples as one full campaign.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analog_bf import AnalogPrecoder, RfAllocation, allocate_rf_chains, build_precoder
from .channel import correlation_factors, draw_channel_blocks
from .downlink import (default_rzf_rho, downlink_sinr_approx, downlink_sinr_exact_mc,
                       full_dl_power)
from .estimation import (EffectiveChannelStatistics, PilotBook, apply_lmmse,
                         effective_inputs, estimate_covariances, generate_pilots,
                         lmmse_filters, receive_pilot_blocks)
from .report import Method, spectral_efficiency
from .scenario import (Geometry, ScenarioConfig, SpatialCorrelationSet,
                       build_correlation, generate_geometry)
from .uplink import (PowerVector, full_power, maxmin_power, uplink_sinr_approx1,
                     uplink_sinr_approx2, uplink_sinr_exact)

UPLINK_MODES = (Method.EXACT_MC, Method.APPROX1, Method.APPROX2)
BLOCK_FREE_MODES = (Method.APPROX1, Method.APPROX2, Method.DL_APPROX, Method.DL_EXACT_MC)

CSV_HEADER = ("geometry_id", "block_id", "user", "mode", "sinr_linear", "se_bps_hz")
_CDF_GRID = tuple(round(0.05 * i, 2) for i in range(1, 20))


class CampaignError(RuntimeError):
    """A module failed inside a campaign; message carries the coordinates."""


@dataclass(frozen=True)
class Campaign:
    """One batch experiment over geometries x blocks for a set of SINR methods."""

    config: ScenarioConfig
    modes: tuple = (Method.EXACT_MC, Method.APPROX2)
    geometry_draws: int = 10
    blocks_per_geometry: int = 100
    power_opt: bool = False          # optimize UL powers per geometry (approx2 utility)
    geometry_offset: int = 0         # first absolute geometry index

    def __post_init__(self):
        if self.geometry_draws < 1 or self.blocks_per_geometry < 1:
            raise ValueError("geometry_draws and blocks_per_geometry must be >= 1")


@dataclass(frozen=True)
class GeometryArtifacts:
    """Everything deterministic given (config, geometry index)."""

    index: int
    seed: tuple
    geometry: Geometry
    correlations: SpatialCorrelationSet
    allocation: RfAllocation
    precoder: AnalogPrecoder
    pilots: PilotBook
    r_e: np.ndarray
    cz: np.ndarray
    stats: EffectiveChannelStatistics


@dataclass(frozen=True)
class ModeSummary:
    mean_se: float
    outage95_se: float
    n_samples: int
    cdf_quantiles: dict  # fraction -> SE value


@dataclass(frozen=True)
class CampaignResult:
    rows: list            # (geometry_id, block_id, user, mode, sinr, se)
    summaries: dict       # mode value -> ModeSummary

    def se_samples(self, mode: Method) -> np.ndarray:
        return np.array([r[5] for r in self.rows if r[3] == mode.value])

    def sinr_samples(self, mode: Method) -> np.ndarray:
        return np.array([r[4] for r in self.rows if r[3] == mode.value])


def build_geometry_artifacts(config: ScenarioConfig, geometry_index: int,
                             require_full_coverage: bool = True,
                             ul_powers_mw=None) -> GeometryArtifacts:
    """Run the large-scale pipeline for one geometry draw."""
    seed = (config.master_seed, geometry_index)
    geometry = generate_geometry(config, seed)
    correlations = build_correlation(config, geometry)
    allocation = allocate_rf_chains(correlations, config, require_full_coverage)
    precoder = build_precoder(correlations, allocation)
    pilots = generate_pilots(config, seed)
    r_e, cz = effective_inputs(correlations, precoder)
    if ul_powers_mw is None:
        ul_powers_mw = np.full(config.num_users, config.ul_power_max_mw)
    stats = estimate_covariances(r_e, cz, pilots, config.pilot_power_mw, ul_powers_mw)
    return GeometryArtifacts(index=geometry_index, seed=seed, geometry=geometry,
                             correlations=correlations, allocation=allocation,
                             precoder=precoder, pilots=pilots, r_e=r_e, cz=cz,
                             stats=stats)


def uplink_block_estimates(artifacts: GeometryArtifacts, config: ScenarioConfig,
                           num_blocks: int, first_block: int = 0) -> np.ndarray:
    """LMMSE estimates for a batch of blocks, shape (B, K, M, N_RF)."""
    factors = correlation_factors(artifacts.correlations)
    h = draw_channel_blocks(factors, artifacts.seed, num_blocks, first_block)
    y = receive_pilot_blocks(artifacts.precoder, h, artifacts.pilots,
                             config.pilot_power_mw, artifacts.seed, first_block)
    filters = lmmse_filters(artifacts.r_e, artifacts.cz, artifacts.pilots,
                            config.pilot_power_mw)
    return apply_lmmse(filters, y)


def _optimized_powers(artifacts: GeometryArtifacts, config: ScenarioConfig) -> np.ndarray:
    result = maxmin_power(lambda p: uplink_sinr_approx2(artifacts.stats, p),
                          full_power(config))
    return result.powers.p


def run_campaign(campaign: Campaign, out_dir=None) -> CampaignResult:
    """Execute the campaign and optionally write samples.csv / summary.json.

    Emits one SE sample per (geometry, block, user) for the exact uplink mode
    and one per (geometry, user) for the block-independent modes, which carry
    block_id -1.  Deterministic given config.master_seed.
    """
    config = campaign.config
    rows = []
    for i in range(campaign.geometry_draws):
        g = campaign.geometry_offset + i
        try:
            artifacts = build_geometry_artifacts(config, g)
            ul_powers = (_optimized_powers(artifacts, config) if campaign.power_opt
                         else full_power(config).p)
            dl_powers = full_dl_power(config)
            for mode in campaign.modes:
                rows.extend(_evaluate_mode(mode, artifacts, config, campaign,
                                           ul_powers, dl_powers, g))
        except Exception as exc:
            raise CampaignError(f"campaign failed at geometry {g}: {exc}") from exc
    result = CampaignResult(rows=rows, summaries=_summarize(rows))
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_samples_csv(out_dir / "samples.csv", rows)
        write_summary_json(out_dir / "summary.json", campaign, result.summaries)
    return result


def _evaluate_mode(mode, artifacts, config, campaign, ul_powers, dl_powers, g):
    stats = artifacts.stats
    if mode is Method.EXACT_MC:
        hhat = uplink_block_estimates(artifacts, config, campaign.blocks_per_geometry)
        sinr = uplink_sinr_exact(hhat, stats, ul_powers)        # (B, K)
        se = spectral_efficiency(sinr, config)
        return [(g, b, k, mode.value, float(sinr[b, k]), float(se[b, k]))
                for b in range(sinr.shape[0]) for k in range(sinr.shape[1])]
    if mode is Method.APPROX1:
        sinr = uplink_sinr_approx1(stats, ul_powers)
    elif mode is Method.APPROX2:
        sinr = uplink_sinr_approx2(stats, ul_powers)
    elif mode is Method.DL_APPROX:
        sinr = downlink_sinr_approx(stats, dl_powers, default_rzf_rho(config))
    elif mode is Method.DL_EXACT_MC:
        sinr = downlink_sinr_exact_mc(artifacts.correlations, artifacts.precoder,
                                      artifacts.pilots, config, dl_powers,
                                      trials=campaign.blocks_per_geometry,
                                      seed=artifacts.seed)
    else:
        raise ValueError(f"unknown mode {mode}")
    se = spectral_efficiency(sinr, config)
    return [(g, -1, k, mode.value, float(sinr[k]), float(se[k]))
            for k in range(len(sinr))]


def _summarize(rows) -> dict:
    summaries = {}
    modes = sorted({r[3] for r in rows})
    for mode in modes:
        se = np.array([r[5] for r in rows if r[3] == mode])
        summaries[mode] = ModeSummary(
            mean_se=float(se.mean()),
            outage95_se=float(quantile(se, 0.05)),
            n_samples=int(se.size),
            cdf_quantiles={q: float(quantile(se, q)) for q in _CDF_GRID})
    return summaries


# --------------------------------------------------------------------------
# Empirical CDF utilities
# --------------------------------------------------------------------------

def empirical_cdf(samples) -> tuple[np.ndarray, np.ndarray]:
    """Right-continuous step CDF: sorted values and fractions (i+1)/n."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("empirical_cdf needs at least one sample")
    values = np.sort(samples)
    return values, np.arange(1, values.size + 1) / values.size


def quantile(samples, q: float) -> float:
    """Linear-interpolation quantile of the sample set."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("quantile needs at least one sample")
    return float(np.quantile(samples, q))


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov distance between empirical CDFs."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------

def write_samples_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for g, b, k, mode, sinr, se in rows:
            writer.writerow([g, b, k, mode, repr(sinr), repr(se)])


def write_summary_json(path, campaign: Campaign, summaries: dict) -> None:
    doc = {
        "config_fingerprint": campaign.config.fingerprint(),
        "master_seed": campaign.config.master_seed,
        "geometry_draws": campaign.geometry_draws,
        "blocks_per_geometry": campaign.blocks_per_geometry,
        "power_opt": campaign.power_opt,
        "modes": {
            mode: {
                "mean_se": s.mean_se,
                "outage95_se": s.outage95_se,
                "n_samples": s.n_samples,
                "cdf_quantiles": {f"{q:.2f}": v for q, v in s.cdf_quantiles.items()},
            }
            for mode, s in summaries.items()
        },
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
