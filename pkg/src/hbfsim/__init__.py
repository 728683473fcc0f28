"""Multiuser mmWave hybrid beamforming with imperfect phase shifters."""

from .analysis import (ImpairmentMoments, RateResult, ceiling, ceiling_three_term,
                       conditional_expected_interference, estimate_pKI, expected_interference,
                       impairment_moments, interference_sample, rate_loss, sum_rate_error_approx,
                       sum_rate_perfect)
from .beamforming import (EquivalentChannel, HybridBeamformer, design_svd_abf, equivalent_channel,
                          power_factor, rzf_precoder, schedule_users, zf_precoder)
from .config import ScenarioConfig
from .errors import ConfigError, DegenerateInputError, SingularMatrixError
from .estimation import (AodEstimate, Stage1Observation, design_abf_from_aod, estimate_heq,
                         jacobsen_estimate, run_algorithm1, run_codebook_baseline, simulate_stage1,
                         ue_combiner_search)
from .geometry import ChannelRealization, PathSet, array_response, draw_channel
from .hardware import AnalogMatrix, PhaseErrorProfile, apply_impairments, pilot_matrix, quantize_phase
from .harness import ResultRow, figure_preset, read_csv, run_scenario, sum_rate_error_mc, write_csv

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
