"""Pricing and calibration engine for a Poisson jump-intensity price model
with GARCH/GJR intensity dynamics."""

from .calibration import (FitResult, FitSettings, ReturnSeries, fit_mle,
                          ingest_returns, log_likelihood, read_returns_csv)
from .errors import (DensityMismatch, DivergentMoment, DomainError, EmptyInput,
                     EmptySample, InfeasibleDrift, NoConvergence, NonFiniteInput,
                     OutOfBand)
from .generalized import (GeneralMeasureSpec, JumpKind, JumpSizeDistribution, Side,
                          general_conditional_moments, general_rn_step, jump_moments,
                          mean_correction_check, solve_general_risk_neutral_intensities)
from .measure import (MeasurePolicy, PolicyKind, RadonNikodymAccumulator,
                      rn_expectation_check, rn_step, solve_risk_neutral_intensities)
from .model import (IntensityState, ModelParams, RecursionKind, ReturnDecomposition,
                    conditional_moments, decompose, initial_state, step_intensity,
                    variance_recursion_check)
from .montecarlo import (MeasureKind, PathRecord, Record, SimulationResult,
                         SimulationSpec, derive_substream, replay_states,
                         sample_one_step_returns, simulate, write_paths_csv)
from .pricing import (OptionKind, OptionSpec, SmileRow, SmileTable, bs_price,
                      bs_vega, build_smile, implied_vol, price_european)
from .skellam import (SkellamParams, bessel_i, log_bessel_i, skellam_log_pmf,
                      skellam_pmf)

__all__ = [name for name in dir() if not name.startswith("_")]
