"""Estimation of Schatten norms, effective ranks and singular spectra of a
matrix A observed once through Y = A + E with iid unit-variance noise."""

from .debias import (DebiasPlan, derive_debias_plan, evaluate_U_k, get_plan, hermite_direct_U_k,
                     load_plans, save_plans, wick_expectation)
from .errors import CapacityError, ConfigurationError, DegreeBoundError, InputError, NumericalError
from .estimators import (EstimateReport, PolySpec, estimate, estimate_even_schatten, estimate_frobenius,
                         estimate_naive, estimate_operator, estimate_plugin_Ts, estimate_poly_schatten)
from .linalg import DenseMatrix, read_csv_matrix, schatten_norm, svd_values, trace_powers, write_csv_matrix
from .lp import solve_l1_simplex_lp
from .polys import PolyCoeffs, abs_expansion, chebyshev_coeffs, hermite_coeffs, remez_best_poly
from .ranks import EffectiveRankReport, effective_ranks, estimate_er2inf
from .sim import ExperimentConfig, RiskReport, generate_noise, generate_signal, run_risk_experiment
from .spectrum import (GridDistribution, MomentVector, normalized_moments, plugin_spectrum,
                       recover_spectrum, wasserstein_sorted)

__version__ = "0.1.0"
