"""Stability Selection: subsample plans, selection matrices, the Nogueira
stability estimate, and stability-driven choice of lambda."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _cd
from .data import STREAM_BOOT, STREAM_PLAN, Dataset, SeedSpec, rng_stream, standardize_rows
from .errors import EmptyProfile, LambdaNotInProfile, MaxIterExceeded, NonConvexDiverged, TaggedError
from .solver import FAMILY_CODES, MAX_SWEEPS, TOL

STABLE_LEVEL = 0.75
N_BOOT = 200


@dataclass(frozen=True)
class SubsamplePlan:
    indices: np.ndarray  # (B, floor(n/2)) row indices
    seed: SeedSpec

    @property
    def b(self) -> int:
        return self.indices.shape[0]


@dataclass
class StabilityProfile:
    lambdas: np.ndarray
    phi: np.ndarray
    phi_sd: np.ndarray
    frequencies: np.ndarray  # (L, p)
    selections: Optional[np.ndarray] = None  # (L, B, p) uint8

    def index_of(self, lam: float) -> int:
        hit = np.flatnonzero(np.isclose(self.lambdas, lam, rtol=1e-12, atol=0.0))
        if hit.size == 0:
            raise LambdaNotInProfile(f"lambda {lam!r} is not on the profile grid")
        return int(hit[0])

    def to_dict(self, sparse_tol: float = 0.0) -> dict:
        freqs = []
        for row in self.frequencies:
            nz = np.flatnonzero(row > sparse_tol)
            freqs.append({int(j): float(row[j]) for j in nz})
        return {
            "lambdas": self.lambdas.tolist(),
            "phi": self.phi.tolist(),
            "phi_sd": self.phi_sd.tolist(),
            "frequencies": freqs,
        }


@dataclass(frozen=True)
class TunedLambda:
    mode: str  # "stable" or "stable_1sd"
    lam: float
    index: int

    def to_dict(self) -> dict:
        return {"mode": self.mode, "lambda": self.lam}


def make_plan(n: int, b: int, seed: SeedSpec) -> SubsamplePlan:
    """``b`` subsamples of ``floor(n/2)`` distinct rows each."""
    if n < 4 or b < 2:
        raise ValueError("need n >= 4 and b >= 2")
    rng = rng_stream(seed, STREAM_PLAN)
    m = n // 2
    idx = np.stack([np.sort(rng.choice(n, m, replace=False)) for _ in range(b)])
    idx.setflags(write=False)
    return SubsamplePlan(idx, seed)


def nogueira_stability(m) -> float:
    """Stability of a binary selection matrix (rows = subsamples).

    One minus the mean unbiased column variance over its value under
    random selection of the same average size. Returns 0 when the average
    selection size is 0 or p.
    """
    m = np.asarray(m, dtype=np.float64)
    b, p = m.shape
    if b < 2:
        raise ValueError("need at least two rows")
    kbar = m.sum(axis=1).mean()
    denom = (kbar / p) * (1.0 - kbar / p)
    if denom <= 0:
        return 0.0
    phat = m.mean(axis=0)
    s2 = b / (b - 1) * phat * (1.0 - phat)
    return float(1.0 - s2.mean() / denom)


def _phi_from_counts(counts, m):
    """Vectorized stability for many row-resamplings given as count vectors."""
    nb, b = counts.shape
    p_total = m.shape[1]
    used = np.flatnonzero(m.any(axis=0))
    phat = counts @ m[:, used] / b
    kbar = counts @ m.sum(axis=1) / b
    s2_sum = (b / (b - 1)) * np.sum(phat * (1.0 - phat), axis=1)
    denom = (kbar / p_total) * (1.0 - kbar / p_total)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = 1.0 - (s2_sum / p_total) / denom
    return np.where(denom > 0, phi, 0.0)


def stability_sd(m, n_boot: int = N_BOOT, seed: SeedSpec | np.random.Generator = SeedSpec(0)) -> float:
    """Bootstrap standard deviation of the stability estimate over rows of ``m``."""
    if n_boot < 2:
        raise ValueError("n_boot must be at least 2")
    m = np.asarray(m, dtype=np.float64)
    rng = seed if isinstance(seed, np.random.Generator) else rng_stream(seed)
    b = m.shape[0]
    counts = rng.multinomial(b, np.full(b, 1.0 / b), size=n_boot).astype(np.float64)
    return float(np.std(_phi_from_counts(counts, m), ddof=1))


def _fit_subsample(data, rows, weights, lambdas, code, param):
    xs, ys, col_sq = standardize_rows(data.x[rows], data.y[rows])
    return _cd.cd_path_support(xs, ys, col_sq, weights, lambdas, code, param, TOL, MAX_SWEEPS)


def run_stability_selection(data: Dataset, plan: SubsamplePlan, penalty_family: str = "lasso",
                            weights=None, lambdas: Sequence[float] = (), *, scad_a: float = 3.7,
                            mcp_gamma: float = 3.0, n_boot: int = N_BOOT, threads: int = 1,
                            keep_selections: bool = False) -> StabilityProfile:
    """Fit every subsample of ``plan`` along ``lambdas`` and summarize stability.

    Each subsample is re-centered and re-scaled on its own rows; the penalty
    factors are the full-data ``weights`` and are never recomputed.
    """
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if lambdas.size == 0:
        raise ValueError("lambdas must be non-empty")
    w = np.ones(data.p) if weights is None else np.asarray(weights, dtype=np.float64)
    code = FAMILY_CODES[penalty_family]
    param = {"lasso": 0.0, "scad": scad_a, "mcp": mcp_gamma}[penalty_family]

    def task(bi):
        return _fit_subsample(data, plan.indices[bi], w, lambdas, code, param)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(task, range(plan.b)))
    else:
        results = [task(bi) for bi in range(plan.b)]

    sel = np.empty((lambdas.size, plan.b, data.p), dtype=np.uint8)
    for bi, (support, status) in enumerate(results):
        bad = np.flatnonzero(status == _cd.DIVERGED)
        if bad.size:
            k = int(bad[0])
            raise TaggedError({"lambda": float(lambdas[k]), "subsample": bi},
                              NonConvexDiverged("objective increased for 100 consecutive sweeps"))
        slow = np.flatnonzero(status == _cd.MAX_ITER)
        if slow.size:
            warnings.warn(f"subsample {bi}: no convergence at lambda={lambdas[slow[0]]:g}", MaxIterExceeded)
        sel[:, bi, :] = support

    phi = np.array([nogueira_stability(sel[k]) for k in range(lambdas.size)])
    phi_sd = np.array([stability_sd(sel[k], n_boot, rng_stream(plan.seed, STREAM_BOOT, k))
                       for k in range(lambdas.size)])
    freqs = sel.mean(axis=1)
    return StabilityProfile(lambdas, phi, phi_sd, freqs, sel if keep_selections else None)


def tune_lambda(profile: StabilityProfile, force_1sd: bool = False, level: float = STABLE_LEVEL,
                sd_rule: str = "grid") -> TunedLambda:
    """Pick lambda from a stability profile.

    ``stable``: the smallest lambda with stability >= ``level``. If there is
    none (or ``force_1sd``), ``stable_1sd``: the smallest lambda whose
    stability is at least ``max(phi) - sd``. ``sd_rule="grid"`` takes ``sd``
    as the sample standard deviation of ``phi`` over the lambda grid;
    ``sd_rule="bootstrap"`` uses ``phi_sd`` at the maximizing lambda.
    """
    if profile.lambdas.size == 0 or profile.phi.size == 0:
        raise EmptyProfile("profile has no lambda values")
    lam, phi = profile.lambdas, profile.phi
    if not force_1sd:
        ok = np.flatnonzero(phi >= level)
        if ok.size:
            k = int(ok[np.argmin(lam[ok])])
            return TunedLambda("stable", float(lam[k]), k)
    best = int(np.argmax(phi))
    if sd_rule == "grid":
        sd = float(np.std(phi, ddof=1)) if phi.size > 1 else 0.0
    elif sd_rule == "bootstrap":
        sd = float(profile.phi_sd[best])
    else:
        raise ValueError(f"unknown sd_rule {sd_rule!r}")
    ok = np.flatnonzero(phi >= phi[best] - sd)
    k = int(ok[np.argmin(lam[ok])])
    return TunedLambda("stable_1sd", float(lam[k]), k)


def select(profile: StabilityProfile, lam: float, pi_thr: float) -> set[int]:
    k = profile.index_of(lam)
    return {int(j) for j in np.flatnonzero(profile.frequencies[k] >= pi_thr)}
