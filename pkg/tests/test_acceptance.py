"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The Monte-Carlo runs are shared through module-scoped fixtures. Criterion 10
needs the external mice PCR expression data; point ``STABLE_LASSO_MICE_CSV``
at a CSV (header row, response column named by ``STABLE_LASSO_MICE_RESPONSE``,
default ``y``) to enable it.
"""

import os
import time

import numpy as np
import pytest
from scipy import stats

import oracles
from conftest import ACCEPTANCE_LINES, make_dataset
from stable_lasso.data import SeedSpec, load_csv, rng_stream, standardize
from stable_lasso.scenarios import (THRESHOLDS, condition_number_diagnostic, five_group_design, generate,
                                    make_weights, preset, run_experiment, WeightScheme)
from stable_lasso.solver import PenaltySpec, cd_fit, kkt_check, lambda_max, lambda_path
from stable_lasso.stability import make_plan, nogueira_stability, run_stability_selection, tune_lambda

REPLICATES = 20
B = 100
SEED = SeedSpec(1)


def record(number, passed, detail):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def fmt(values):
    return "[" + ", ".join(f"{v:.3f}" for v in values) + "]"


@pytest.fixture(scope="module")
def main_report():
    return run_experiment(preset("main"), ["stable", "uniform"], REPLICATES, B, SEED)


@pytest.fixture(scope="module")
def lowcorr_report():
    schemes = ["stable", "uniform", "adaptive_lasso_init", "adaptive_univariate", "randomized"]
    return run_experiment(preset("lowcorr"), schemes, REPLICATES, B, SEED)


@pytest.fixture(scope="module")
def lowdim_report():
    schemes = ["stable", "uniform", "adaptive_lasso_init", "adaptive_univariate", "adaptive_ols",
               "adaptive_oracle", "randomized"]
    return run_experiment(preset("lowdim"), schemes, REPLICATES, B, SEED)


def test_criterion_01_weighted_lasso_correctness():
    t0 = time.perf_counter()
    worst_coef, worst_kkt, converged = 0.0, 0.0, 0
    for k in range(20):
        rng = np.random.default_rng(1000 + k)
        x, y = oracles.standardized_problem(rng, 50, 100)
        lam = lambda_max(x, y, np.ones(100)) * rng.uniform(0.05, 0.5)
        data = make_dataset(x, y)
        fit = cd_fit(data, PenaltySpec("lasso", lam))
        ref = oracles.proximal_gradient(x, y, lam)
        worst_coef = max(worst_coef, float(np.max(np.abs(fit.beta - ref))))
        if fit.converged:
            converged += 1
            worst_kkt = max(worst_kkt, kkt_check(data, PenaltySpec("lasso", lam), fit.beta))
    secs = time.perf_counter() - t0
    ok = worst_coef <= 1e-6 and worst_kkt <= 1e-6 and converged == 20 and secs < 60
    assert record(1, ok, f"max |beta - oracle| = {worst_coef:.2e}, max KKT = {worst_kkt:.2e}, "
                         f"converged {converged}/20, {secs:.1f}s")


def test_criterion_02_stability_fixtures():
    vals = (nogueira_stability(np.tile([1, 0, 1, 0], (5, 1))),
            nogueira_stability([[1, 1, 0], [1, 0, 0]]),
            nogueira_stability([[1, 0], [0, 1]]))
    ok = vals[0] == 1.0 and abs(vals[1] - 1 / 3) <= 1e-15 and vals[2] == -1.0
    assert record(2, ok, f"identical rows {vals[0]!r}, worked case {vals[1]!r}, anti-stable {vals[2]!r}")


def test_criterion_03_main_stability(main_report):
    stable = main_report.stability_summary("stable")["median"]
    uniform = main_report.stability_summary("uniform")["median"]
    ok = 0.65 <= stable <= 0.85 and stable > uniform
    assert record(3, ok, f"median tuned stability: stable {stable:.3f}, uniform {uniform:.3f} "
                         f"({REPLICATES} replicates, B={B})")


def test_criterion_04_main_accuracy(main_report):
    s, u = main_report.median_f1("stable"), main_report.median_f1("uniform")
    weak = int(np.sum(s >= u))
    strict = int(np.sum(s > u))
    ok = weak == len(THRESHOLDS) and strict >= 7
    assert record(4, ok, f"median F1 stable {fmt(s)} vs uniform {fmt(u)}; >= at {weak}/9, > at {strict}/9")


def test_criterion_05_lowcorr_accuracy(lowcorr_report):
    med = {s: lowcorr_report.median_f1(s) for s in lowcorr_report.schemes}
    best = np.max(np.array([med[s] for s in med if s != "stable"]), axis=0)
    wins = int(np.sum(med["stable"] >= best))
    leaders = [max(med, key=lambda s: med[s][k]) for k in range(len(THRESHOLDS))]
    ok = wins >= 7
    assert record(5, ok, f"stable highest at {wins}/9 thresholds; stable {fmt(med['stable'])}, "
                         f"best other {fmt(best)}; leaders {leaders}")


def test_criterion_06_lowdim_accuracy(lowdim_report):
    # schemes are ranked by the mean over thresholds of the replicate-median F1 curve
    score = {s: float(np.mean(lowdim_report.median_f1(s))) for s in lowdim_report.schemes}
    order = sorted(score, key=score.get, reverse=True)
    ok = order[0] == "adaptive_oracle" and order[1] == "stable"
    detail = ", ".join(f"{s} {score[s]:.3f}" for s in order)
    assert record(6, ok, f"ranking by threshold-averaged median F1: {detail}")


def _toy(rep):
    seed = SeedSpec(7, rep)
    rng = rng_stream(seed, 2)
    z = rng.standard_normal((100, 2))
    x = np.column_stack([z[:, 0], 0.95 * z[:, 0] + np.sqrt(1 - 0.95**2) * z[:, 1]])
    y = x[:, 0] + rng.standard_normal(100)
    return standardize(x, y), make_plan(100, B, seed)


def test_criterion_07_weighting_increases_stability():
    weighted, uniform = [], []
    for rep in range(REPLICATES):
        data, plan = _toy(rep)
        grid = lambda_path(data, np.ones(2)).values
        lam = grid[grid.size // 2 - 1]  # middle of the default 100-value path
        weighted.append(run_stability_selection(data, plan, weights=np.array([0.0, 0.5]), lambdas=[lam]).phi[0])
        uniform.append(run_stability_selection(data, plan, weights=np.ones(2), lambdas=[lam]).phi[0])
    pval = stats.ttest_rel(weighted, uniform, alternative="greater").pvalue
    ok = np.mean(weighted) >= np.mean(uniform) and pval < 0.05
    assert record(7, ok, f"mean phi weighted {np.mean(weighted):.3f} vs uniform {np.mean(uniform):.3f}, "
                         f"one-sided paired t p = {pval:.3g} (lambda at the path midpoint, ~0.01 lambda_max)")


def test_criterion_08_relevant_prioritized(main_report):
    reps = main_report.for_scheme("stable")
    hits = sum(r.prioritizes_truth for r in reps)
    weakest = np.median([min(r.true_freqs) for r in reps])
    ok = hits >= 0.8 * len(reps)
    assert record(8, ok, f"{hits}/{len(reps)} replicates rank all true frequencies above every irrelevant one; "
                         f"median weakest true frequency {weakest:.2f}")


def test_criterion_09_generator_and_condition_number():
    spec = five_group_design(10_000, 50, (0.8, 0.85, 0.9, 0.95, 0.99), seed=SeedSpec(3))
    x, _, _ = generate(spec)
    c = np.corrcoef(x, rowvar=False)
    dev = 0.0
    for start, stop, rho in spec.groups:
        block = c[start:stop, start:stop][~np.eye(stop - start, dtype=bool)]
        dev = max(dev, float(np.max(np.abs(block - rho))))
    kappa = condition_number_diagnostic(preset("main"))
    sigma = np.full((200, 200), 0.99) + 0.01 * np.eye(200)
    eig = np.linalg.eigvalsh(sigma)
    ok = dev <= 0.02 and kappa == 19701
    assert record(9, ok, f"max block correlation error {dev:.4f}; kappa(main) = {kappa:.6g} "
                         f"(target 19701; direct eigenvalues give {eig[-1] / eig[0]:.6g})")


MICE = os.environ.get("STABLE_LASSO_MICE_CSV")


@pytest.mark.skipif(not MICE, reason="set STABLE_LASSO_MICE_CSV to the mice PCR data to run")
def test_criterion_10_mice_pcr():
    raw = load_csv(MICE, os.environ.get("STABLE_LASSO_MICE_RESPONSE", "y"))
    data = standardize(raw.x, raw.y)
    plan = make_plan(data.n, B, SEED)
    out = {}
    for kind in ("uniform", "stable"):
        w = make_weights(WeightScheme(kind), data)
        prof = run_stability_selection(data, plan, weights=w, lambdas=lambda_path(data, w).values)
        out[kind] = float(prof.phi.max())
        out[kind + "_tuned"] = tune_lambda(prof).mode
    ok = out["uniform"] < 0.2 and out["stable"] > 0.6
    assert record(10, ok, f"max stability uniform {out['uniform']:.3f}, stable {out['stable']:.3f}")
