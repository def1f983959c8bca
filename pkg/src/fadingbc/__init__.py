"""Optimal dynamic resource allocation for a fading multi-antenna downlink.

The solver works in the dual uplink domain, where the per-state capacity
region is a polymatroid and weighted-sum-rate corners come from successive
decoding.  A two-layer multiplier scheme serves mixed traffic: outer
multipliers track average-rate (NDC) targets, per-state multipliers hold
constant-rate (DC) targets.  Throughput characterization, TDMA/ZF
baselines, an online variant and experiment runners sit on top.
"""

from .errors import (ConfigError, DimensionError, DivergenceError,
                     FadingBCError, InfeasibleError)
from .fading import (ChannelSet, FadingSpec, estimate_rho, generate,
                     load_channels, save_channels)
from .macregion import corner_rates, in_region, subset_bound
from .wsolver import (P3Config, P3Solution, coordinate_min, kkt_residual,
                      order_from_weights, p3_objective, solve_p3,
                      solve_p3_batch)
from .scheduler import (DC, NDC, Allocation, DualState, OfflineResult,
                        OnlineScheduler, PfsScheduler, SolverConfig,
                        UserProfile, delta_update, dual_value, mu_update,
                        solve_p1_offline, solve_p2, subgradient_certificate)
from .throughput import (RateProfile, ThroughputReport, delay_penalty,
                         fairness_penalty, min_power_for_profile,
                         sum_capacity_profile, theorem_bound, throughput)
from .baselines import (PrecoderSet, coherent_precoders, inversion_power,
                        tdma_power, waterfill_power, zf_precoders,
                        zf_sdma_power)
from .experiments import (ResultRow, Scenario, load_scenario,
                          run_fairness, run_mixed_traffic, run_online,
                          run_tradeoff, write_rows)

__version__ = "0.1.0"

__all__ = [
    "Allocation", "ChannelSet", "ConfigError", "DC", "DimensionError",
    "DivergenceError", "DualState", "FadingBCError", "FadingSpec",
    "InfeasibleError", "NDC", "OfflineResult", "OnlineScheduler",
    "P3Config", "P3Solution", "PfsScheduler", "PrecoderSet", "RateProfile",
    "ResultRow", "Scenario", "SolverConfig", "ThroughputReport",
    "UserProfile", "coherent_precoders", "coordinate_min", "corner_rates",
    "delay_penalty", "delta_update", "dual_value", "estimate_rho",
    "fairness_penalty", "generate", "in_region", "inversion_power",
    "kkt_residual", "load_channels", "load_scenario",
    "min_power_for_profile", "mu_update", "order_from_weights",
    "p3_objective", "run_fairness", "run_mixed_traffic", "run_online",
    "run_tradeoff", "save_channels", "solve_p1_offline", "solve_p2",
    "solve_p3", "solve_p3_batch", "subgradient_certificate", "subset_bound",
    "sum_capacity_profile", "tdma_power", "theorem_bound", "throughput",
    "waterfill_power", "write_rows", "zf_precoders", "zf_sdma_power",
]
