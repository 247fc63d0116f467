"""Cell-free massive MIMO with hybrid beamforming: link simulator, random-
matrix SINR approximations, and max-min uplink power control."""

from .analog_bf import (AnalogPrecoder, RfAllocation, allocate_rf_chains,
                        build_precoder, effective_correlation, eigen_beamformer)
from .channel import ChannelRealization, draw_channel_blocks, draw_channels
from .downlink import (DlPrecoderSet, default_rzf_rho, downlink_rate,
                       downlink_sinr_approx, downlink_sinr_exact_mc,
                       normalize_precoder, rzf_precoder)
from .estimation import (EffectiveChannelEstimate, EffectiveChannelStatistics,
                         PilotBook, estimate_covariances, generate_pilots,
                         lmmse_estimate, receive_pilots)
from .harness import (Campaign, CampaignResult, build_geometry_artifacts,
                      empirical_cdf, ks_distance, quantile, run_campaign)
from .report import Method, SinrReport, make_report, se_prefactor, spectral_efficiency
from .rmt import (DerivativeEquivalent, FixedPointError, FixedPointSolution,
                  rank_one_update_identity, solve_derivative, solve_fixed_point,
                  trace_lemma_oracle)
from .scenario import (CorrelationModel, Geometry, PathlossModel, PilotKind,
                       ScenarioConfig, SpatialCorrelationSet, build_correlation,
                       generate_geometry, load_scenario, noise_power_dbm,
                       parse_scenario_text)
from .uplink import (MaxMinResult, PowerVector, maxmin_power, mmse_combiner,
                     uplink_rate, uplink_sinr_approx1, uplink_sinr_approx2,
                     uplink_sinr_exact, uplink_sinr_for_combiner)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
