"""Simulation and verification toolkit for anisotropic Gaussian random fields."""

from .errors import ModelRejected, PhaseJumpTooLarge, Refusal, ZeroHit
from .metric import (BallCover, ChainingSchedule, EuclideanBall, GridCover,
                     HurstVector, IndexSet, anisotropy_index,
                     ball_bounding_box, chaining_schedule,
                     chaining_series_bound, covering_number_upper,
                     entropy_integral_closed_form, grid_cover,
                     hausdorff_premeasure, rho_distance)
from .field import (FieldModel, Grid, ModulusReport, SamplePathSet,
                    build_covariance, modulus_statistic, sample_paths,
                    verify_condition1, verify_condition2)
from .hitting import (HittingEstimate, LipschitzDrift, ScalingReport,
                      hitting_probability, lipschitz_verify, polarity_scan,
                      scaling_exponent, wilson_interval)
from .calibration import (FrequencyGrid, NoiseLevel, OptionModel, PsiEstimate,
                          distinguished_log, fourier_O, holder_bound_check,
                          holder_exponent, ito_covariance, lambda_min_on_IV,
                          psi_estimator, simulate_spectral_noise,
                          tail_integral, total_mass)
from .seeds import derive_seed

__version__ = "0.1.0"
