"""Stable Lasso: Lasso with rank-based penalty factors inside Stability Selection."""

from .data import Dataset, SeedSpec, load_csv, rng_stream, standardize, unstandardize, write_csv
from .errors import MaxIterExceeded, StableLassoError
from .ranking import Ranking, air_holp, default_threshold, ranks_to_weights, ridge_holp
from .scenarios import (EvalReport, ScenarioSpec, WeightScheme, condition_number_diagnostic, f1_curve, generate,
                        make_weights, preset, run_experiment)
from .solver import FitResult, PenaltySpec, cd_fit, fit_path, kkt_check, lambda_max, lambda_path
from .stability import (StabilityProfile, make_plan, nogueira_stability, run_stability_selection, select,
                        stability_sd, tune_lambda)

__all__ = [
    "Dataset", "SeedSpec", "load_csv", "rng_stream", "standardize", "unstandardize", "write_csv",
    "MaxIterExceeded", "StableLassoError",
    "Ranking", "air_holp", "default_threshold", "ranks_to_weights", "ridge_holp",
    "EvalReport", "ScenarioSpec", "WeightScheme", "condition_number_diagnostic", "f1_curve", "generate",
    "make_weights", "preset", "run_experiment",
    "FitResult", "PenaltySpec", "cd_fit", "fit_path", "kkt_check", "lambda_max", "lambda_path",
    "StabilityProfile", "make_plan", "nogueira_stability", "run_stability_selection", "select", "stability_sd",
    "tune_lambda",
]
