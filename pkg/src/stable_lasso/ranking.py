"""Correlation-adjusted ranking (Ridge-HOLP / Air-HOLP) and rank-based penalty factors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .data import Dataset
from .errors import SingularSystem

COND_LIMIT = 1e12
DEFAULT_RIDGE = 10.0


@dataclass(frozen=True)
class Ranking:
    ranks: np.ndarray
    scores: np.ndarray
    ridge_penalty: float
    iterations_used: int = 1

    def top(self, d: int) -> np.ndarray:
        return np.flatnonzero(self.ranks <= d)

    def to_dict(self) -> dict:
        return {
            "ranks": self.ranks.tolist(),
            "scores": self.scores.tolist(),
            "ridge_penalty": self.ridge_penalty,
            "iterations_used": self.iterations_used,
        }


def ranks_from_scores(scores) -> np.ndarray:
    """Rank 1 for the largest score; ties go to the lower variable index."""
    scores = np.asarray(scores)
    order = np.lexsort((np.arange(scores.shape[0]), -scores))
    ranks = np.empty(scores.shape[0], dtype=np.int64)
    ranks[order] = np.arange(1, scores.shape[0] + 1)
    return ranks


class _Gram:
    """Eigen-decomposition of ``X X'`` shared by every ridge penalty tried."""

    def __init__(self, data: Dataset):
        self.x, self.y = data.x, data.y
        self.k = data.x @ data.x.T
        self.evals, self.evecs = linalg.eigh(self.k)
        self.evals = np.clip(self.evals, 0.0, None)
        self.uy = self.evecs.T @ self.y

    def scores(self, r: float) -> np.ndarray:
        cond = (self.evals[-1] + r) / (self.evals[0] + r) if self.evals[0] + r > 0 else np.inf
        if not cond <= COND_LIMIT:
            raise SingularSystem(f"X X' + {r:g} I is numerically singular (condition {cond:.3g})")
        a = self.k + r * np.eye(self.k.shape[0])
        try:
            alpha = linalg.cho_solve(linalg.cho_factor(a), self.y)
        except linalg.LinAlgError as exc:
            raise SingularSystem(str(exc)) from None
        return np.abs(self.x.T @ alpha)

    def gcv(self, r: float) -> float:
        """Generalized cross-validation score of the kernel ridge fit K (K + rI)^-1 y."""
        n = self.y.shape[0]
        shrink = r / (self.evals + r)
        rss = float(np.sum((shrink * self.uy) ** 2))
        dof_left = float(np.sum(shrink))
        if dof_left <= 0:
            return np.inf
        return n * rss / dof_left**2


def ridge_holp(data: Dataset, ridge_penalty: float = DEFAULT_RIDGE) -> Ranking:
    """Rank variables by ``|X' (X X' + r I)^-1 y|`` using an n-by-n solve."""
    if not ridge_penalty > 0:
        raise ValueError("ridge_penalty must be positive")
    scores = _Gram(data).scores(ridge_penalty)
    return Ranking(ranks_from_scores(scores), scores, float(ridge_penalty), 1)


def _argmin_gcv(gram: _Gram, grid) -> float:
    vals = [gram.gcv(r) for r in grid]
    return float(grid[int(np.argmin(vals))])


def air_holp(data: Dataset, threshold_d: int | None = None, max_iter: int = 10) -> Ranking:
    """Ridge-HOLP with a data-adaptive ridge penalty.

    The first penalty minimizes GCV over ``base * 10**k`` for ``k = -2..4``
    with ``base = (n/p) * trace(X X')/n``. Each later iteration re-runs the
    GCV search on a grid around the current penalty whose half-width halves
    every time (starting at half a decade), then re-ranks. Iteration stops
    once the top-``threshold_d`` set no longer changes, or at ``max_iter``.
    """
    n, p = data.n, data.p
    if threshold_d is None:
        threshold_d = default_threshold(n)
    if not 1 <= threshold_d <= min(n, p):
        raise ValueError(f"threshold_d must lie in [1, {min(n, p)}]")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")

    gram = _Gram(data)
    base = (n / p) * float(np.trace(gram.k)) / n
    r = _argmin_gcv(gram, base * 10.0 ** np.arange(-2, 5))
    ranks = ranks_from_scores(scores := gram.scores(r))
    top = set(np.flatnonzero(ranks <= threshold_d))
    it = 1
    half_width = 0.5
    while it < max_iter:
        it += 1
        r = _argmin_gcv(gram, r * 10.0 ** np.linspace(-half_width, half_width, 7))
        half_width /= 2
        ranks = ranks_from_scores(scores := gram.scores(r))
        new_top = set(np.flatnonzero(ranks <= threshold_d))
        if new_top == top:
            break
        top = new_top
    return Ranking(ranks, scores, r, it)


def ranks_to_weights(ranking) -> np.ndarray:
    """Penalty factors ``1 - 1/rank``: zero for rank 1, approaching 1 for large ranks."""
    ranks = ranking.ranks if isinstance(ranking, Ranking) else np.asarray(ranking)
    return 1.0 - 1.0 / ranks.astype(np.float64)


def default_threshold(n: int) -> int:
    """Screening size ``floor(n / ln n)``, at least 1."""
    if n < 3:
        raise ValueError("n must be at least 3")
    return max(1, math.floor(n / math.log(n)))
