"""Synthetic block-correlated designs, baseline weighting schemes, selection
metrics and the Monte-Carlo benchmark loop."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .data import STREAM_DATA, STREAM_WEIGHTS, Dataset, SeedSpec, rng_stream, standardize, standardize_rows
from .errors import InvalidRho, OlsUnderdetermined, OracleUnavailable, TaggedError
from .ranking import air_holp, default_threshold, ranks_to_weights
from .solver import PenaltySpec, cd_fit, fit_path, lambda_path
from .stability import make_plan, run_stability_selection, tune_lambda
from . import _cd
from .solver import MAX_SWEEPS, TOL

THRESHOLDS = tuple(round(0.1 * k, 1) for k in range(1, 10))
ADAPTIVE_EPS = 1e-6

MAIN_RHOS = (0.8, 0.85, 0.9, 0.95, 0.99)
LOWCORR_RHOS = (0.4, 0.5, 0.6, 0.7, 0.8)
MAIN_BETA = (3.0, 2.5, 2.0, 1.5, 1.0)


@dataclass(frozen=True)
class ScenarioSpec:
    """Gaussian design with independent compound-symmetric blocks.

    ``groups`` holds ``(start, stop, rho)`` with 0-based half-open index
    ranges; ``beta_true`` maps 0-based indices to coefficients.
    """

    n: int
    p: int
    groups: tuple
    beta_true: dict
    noise_sd: float = 1.0
    seed: SeedSpec = SeedSpec(0)
    name: str = "custom"

    def __post_init__(self):
        covered = np.zeros(self.p, dtype=int)
        for start, stop, rho in self.groups:
            if not 0 <= rho < 1:
                raise InvalidRho(f"rho must lie in [0, 1), got {rho}")
            covered[start:stop] += 1
        if not np.all(covered == 1):
            raise ValueError("groups must partition the predictor indices")
        if any(not 0 <= j < self.p for j in self.beta_true):
            raise ValueError("beta_true index out of range")

    @property
    def true_support(self) -> set[int]:
        return {j for j, b in self.beta_true.items() if b != 0}

    def beta_vector(self) -> np.ndarray:
        beta = np.zeros(self.p)
        for j, b in self.beta_true.items():
            beta[j] = b
        return beta

    def with_seed(self, seed: SeedSpec) -> "ScenarioSpec":
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        return {
            "name": self.name, "n": self.n, "p": self.p,
            "groups": [list(g) for g in self.groups],
            "beta_true": {str(k): v for k, v in self.beta_true.items()},
            "noise_sd": self.noise_sd,
            "seed": asdict(self.seed),
        }


def five_group_design(n: int, p: int, rhos: Sequence[float], beta=MAIN_BETA, seed=SeedSpec(0), name="custom"):
    """Five equal consecutive groups; the last variable of each group is relevant."""
    if p % 5:
        raise ValueError("p must be divisible by 5")
    g = p // 5
    groups = tuple((k * g, (k + 1) * g, float(rho)) for k, rho in enumerate(rhos))
    beta_true = {(k + 1) * g - 1: float(b) for k, b in enumerate(beta)}
    return ScenarioSpec(n, p, groups, beta_true, 1.0, seed, name)


PRESETS = {
    "main": lambda seed=SeedSpec(0): five_group_design(100, 1000, MAIN_RHOS, seed=seed, name="main"),
    "lowdim": lambda seed=SeedSpec(0): five_group_design(100, 80, MAIN_RHOS, seed=seed, name="lowdim"),
    "lowcorr": lambda seed=SeedSpec(0): five_group_design(100, 1000, LOWCORR_RHOS, seed=seed, name="lowcorr"),
}


def preset(name: str, seed: SeedSpec = SeedSpec(0)) -> ScenarioSpec:
    try:
        return PRESETS[name](seed)
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def generate(spec: ScenarioSpec):
    """Draw ``(raw_x, raw_y, true_support)``.

    Each block uses the shared-factor construction
    ``x = sqrt(rho) * z + sqrt(1 - rho) * e``, exact for compound symmetry.
    """
    rng = rng_stream(spec.seed, STREAM_DATA)
    x = np.empty((spec.n, spec.p), order="F")
    for start, stop, rho in spec.groups:
        shared = rng.standard_normal((spec.n, 1))
        own = rng.standard_normal((spec.n, stop - start))
        x[:, start:stop] = np.sqrt(rho) * shared + np.sqrt(1.0 - rho) * own
    y = x @ spec.beta_vector() + spec.noise_sd * rng.standard_normal(spec.n)
    return x, y, spec.true_support


def condition_number_diagnostic(spec: ScenarioSpec) -> float:
    """Condition number of the block compound-symmetric covariance, in closed form."""
    top, bottom = 0.0, np.inf
    for start, stop, rho in spec.groups:
        if not 0 <= rho < 1:
            raise InvalidRho(f"rho must lie in [0, 1), got {rho}")
        m = stop - start
        top = max(top, 1.0 + (m - 1) * rho)
        bottom = min(bottom, 1.0 - rho if m > 1 else 1.0)
    return top / bottom


# ---------------------------------------------------------------------------
# weighting schemes

SCHEMES = ("stable", "uniform", "adaptive_lasso_init", "adaptive_univariate",
           "adaptive_ols", "adaptive_oracle", "randomized")


@dataclass(frozen=True)
class WeightScheme:
    kind: str
    gamma: float = 1.0
    alpha: float = 0.2
    prob: float = 0.5
    max_iter: int = 10
    cv_folds: int = 10

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ValueError(f"unknown weight scheme {self.kind!r}")


def _adaptive(beta_init, gamma):
    return 1.0 / (np.abs(beta_init) + ADAPTIVE_EPS) ** gamma


def cv_lasso(data: Dataset, folds: int = 10, seed: SeedSpec = SeedSpec(0), lambdas=None):
    """Lasso at the lambda minimizing K-fold cross-validated mean squared error.

    Returns ``(beta, lambda_min, lambdas, cv_mse)``.
    """
    if lambdas is None:
        lambdas = lambda_path(data).values
    lambdas = np.asarray(lambdas)
    rng = rng_stream(seed, STREAM_WEIGHTS)
    fold_of = rng.permutation(np.arange(data.n) % folds)
    err = np.zeros(lambdas.size)
    ones = np.ones(data.p)
    for f in range(folds):
        train, test = fold_of != f, fold_of == f
        xt = data.x[train]
        mu, sd = xt.mean(axis=0), xt.std(axis=0)
        xs, ys, col_sq = standardize_rows(xt, data.y[train])
        sd = np.where(col_sq > 0, sd, 1.0)
        xv = (data.x[test] - mu) / sd
        y_off = data.y[train].mean()
        beta = np.zeros(data.p)
        r = ys.copy()
        for k, lam in enumerate(lambdas):
            _cd.cd_solve(xs, r, beta, col_sq, lam * ones, _cd.LASSO, 0.0, TOL, MAX_SWEEPS, np.empty(0), ys)
            pred = y_off + xv @ beta
            err[k] += np.sum((data.y[test] - pred) ** 2)
    err /= data.n
    k = int(np.argmin(err))
    beta = fit_path(data, PenaltySpec("lasso"), lambdas[: k + 1])[-1].beta
    return beta, float(lambdas[k]), lambdas, err


def make_weights(scheme: WeightScheme, data: Dataset, true_beta=None, seed: SeedSpec = SeedSpec(0)) -> np.ndarray:
    """Penalty factors for one of the supported weighting schemes."""
    kind = scheme.kind
    if kind == "stable":
        return ranks_to_weights(air_holp(data, default_threshold(data.n), scheme.max_iter))
    if kind == "uniform":
        return np.ones(data.p)
    if kind == "adaptive_lasso_init":
        beta, *_ = cv_lasso(data, scheme.cv_folds, seed)
        return _adaptive(beta, scheme.gamma)
    if kind == "adaptive_univariate":
        return _adaptive(data.x.T @ data.y / data.n, scheme.gamma)
    if kind == "adaptive_ols":
        if data.n <= data.p:
            raise OlsUnderdetermined(f"OLS needs n > p, got n={data.n}, p={data.p}")
        beta, *_ = np.linalg.lstsq(data.x, data.y, rcond=None)
        return _adaptive(beta, scheme.gamma)
    if kind == "adaptive_oracle":
        if true_beta is None:
            raise OracleUnavailable("adaptive_oracle needs the true coefficients")
        return _adaptive(np.asarray(true_beta, dtype=np.float64), scheme.gamma)
    # randomized: penalty factor 1/alpha with probability prob, else 1; drawn once
    rng = rng_stream(seed, STREAM_WEIGHTS)
    return np.where(rng.random(data.p) < scheme.prob, 1.0 / scheme.alpha, 1.0)


# ---------------------------------------------------------------------------
# metrics


def f1_curve(frequencies, true_support, thresholds=THRESHOLDS) -> list[dict]:
    """Precision, recall and F1 of ``{j : freq_j >= t}`` for each threshold ``t``.

    An empty selection has precision 1, recall 0 and F1 0.
    """
    freqs = np.asarray(frequencies)
    truth = set(int(j) for j in true_support)
    rows = []
    for t in thresholds:
        chosen = set(np.flatnonzero(freqs >= t).tolist())
        tp = len(chosen & truth)
        precision = tp / len(chosen) if chosen else 1.0
        recall = tp / len(truth) if truth else 1.0
        f1 = 2 * precision * recall / (precision + recall) if tp else 0.0
        rows.append({"threshold": float(t), "precision": precision, "recall": recall,
                     "f1": f1, "n_selected": len(chosen)})
    return rows


# ---------------------------------------------------------------------------
# experiment loop


@dataclass
class ReplicateResult:
    replicate: int
    scheme: str
    tuned_mode: str
    tuned_lambda: float
    stability: float
    max_stability: float
    f1: list
    true_freqs: list
    max_irrelevant_freq: float
    seconds: float

    @property
    def prioritizes_truth(self) -> bool:
        return min(self.true_freqs) > self.max_irrelevant_freq


@dataclass
class EvalReport:
    scenario: dict
    schemes: list
    thresholds: list
    replicates: list = field(default_factory=list)

    def for_scheme(self, scheme: str) -> list[ReplicateResult]:
        return [r for r in self.replicates if r.scheme == scheme]

    def stability_summary(self, scheme: str) -> dict:
        s = np.array([r.stability for r in self.for_scheme(scheme)])
        q1, med, q3 = np.percentile(s, [25, 50, 75])
        return {"median": float(med), "q1": float(q1), "q3": float(q3)}

    def f1_matrix(self, scheme: str) -> np.ndarray:
        return np.array([[row["f1"] for row in r.f1] for r in self.for_scheme(scheme)])

    def median_f1(self, scheme: str) -> np.ndarray:
        return np.median(self.f1_matrix(scheme), axis=0)

    def mean_f1(self, scheme: str) -> np.ndarray:
        return self.f1_matrix(scheme).mean(axis=0)

    def to_dict(self, timing: bool = True) -> dict:
        """Plain-data form; ``timing=False`` drops wall-clock fields so the
        result is a pure function of the inputs."""
        summary = {}
        for s in self.schemes:
            summary[s] = {"stability": self.stability_summary(s),
                          "median_f1": self.median_f1(s).tolist(),
                          "mean_f1": self.mean_f1(s).tolist()}
            if timing:
                summary[s]["seconds"] = self.seconds(s)
        reps = [asdict(r) for r in self.replicates]
        if not timing:
            for r in reps:
                r.pop("seconds")
        return {"scenario": self.scenario, "schemes": self.schemes, "thresholds": self.thresholds,
                "summary": summary, "replicates": reps}

    def seconds(self, scheme: str) -> float:
        return float(sum(r.seconds for r in self.for_scheme(scheme)))

    def threshold_rows(self) -> list[dict]:
        rows = []
        for s in self.schemes:
            med, mean = self.median_f1(s), self.mean_f1(s)
            for k, t in enumerate(self.thresholds):
                rows.append({"scheme": s, "threshold": t, "median_f1": float(med[k]),
                             "mean_f1": float(mean[k])})
        return rows


def evaluate_scheme(data: Dataset, scheme: WeightScheme, true_beta, plan, *, seed: SeedSpec,
                    family: str = "lasso", num_lambdas: int = 100, force_1sd: bool = True,
                    thresholds=THRESHOLDS, threads: int = 1, sd_rule: str = "grid"):
    """One scheme on one dataset: weights, stability profile, tuning, metrics."""
    weights = make_weights(scheme, data, true_beta, seed)
    grid = lambda_path(data, weights, num_lambdas).values
    profile = run_stability_selection(data, plan, family, weights, grid, threads=threads)
    tuned = tune_lambda(profile, force_1sd=force_1sd, sd_rule=sd_rule)
    return weights, profile, tuned


def run_experiment(scenario: ScenarioSpec, schemes: Sequence[WeightScheme | str], replicates: int, b: int,
                   seed: SeedSpec, *, family: str = "lasso", num_lambdas: int = 100, force_1sd: bool = True,
                   thresholds=THRESHOLDS, threads: int = 1, sd_rule: str = "grid",
                   progress=None) -> EvalReport:
    """Monte-Carlo comparison of weighting schemes.

    Replicate ``r`` uses ``SeedSpec(seed.master_seed, seed.stream_id + r)`` for
    its data, subsample plan and any random weights; every scheme in a
    replicate sees the same data and the same subsamples.
    """
    if replicates < 1:
        raise ValueError("replicates must be at least 1")
    schemes = [s if isinstance(s, WeightScheme) else WeightScheme(s) for s in schemes]
    report = EvalReport(scenario.to_dict(), [s.kind for s in schemes], list(thresholds))
    truth = sorted(scenario.true_support)
    for rep in range(replicates):
        rseed = seed.child(seed.stream_id + rep)
        spec = scenario.with_seed(rseed)
        raw_x, raw_y, _ = generate(spec)
        data = standardize(raw_x, raw_y)
        plan = make_plan(data.n, b, rseed)
        beta = spec.beta_vector()
        for scheme in schemes:
            t0 = time.perf_counter()
            try:
                _, profile, tuned = evaluate_scheme(data, scheme, beta, plan, seed=rseed, family=family,
                                                    num_lambdas=num_lambdas, force_1sd=force_1sd,
                                                    thresholds=thresholds, threads=threads,
                                                    sd_rule=sd_rule)
            except Exception as exc:
                raise TaggedError({"replicate": rep, "scheme": scheme.kind}, exc) from exc
            freqs = profile.frequencies[tuned.index]
            irrelevant = np.delete(freqs, truth)
            report.replicates.append(ReplicateResult(
                replicate=rep, scheme=scheme.kind, tuned_mode=tuned.mode, tuned_lambda=tuned.lam,
                stability=float(profile.phi[tuned.index]), max_stability=float(profile.phi.max()),
                f1=f1_curve(freqs, truth, thresholds), true_freqs=[float(freqs[j]) for j in truth],
                max_irrelevant_freq=float(irrelevant.max()) if irrelevant.size else 0.0,
                seconds=time.perf_counter() - t0,
            ))
            if progress is not None:
                progress(report.replicates[-1])
    return report
