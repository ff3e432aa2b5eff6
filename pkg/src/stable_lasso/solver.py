"""Weighted Lasso / SCAD / MCP by coordinate descent.

The internal objective is

    (1/(2n)) ||y - X beta||^2 + sum_j P(|beta_j|; lam * w_j)

where ``P(.; t)`` is the l1 penalty ``t|b|`` for the Lasso, and the SCAD or
MCP penalty with threshold ``t`` otherwise. Penalty factors ``w`` are used as
given (no rescaling), so a zero weight leaves the coordinate unpenalized.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from . import _cd
from .data import Dataset
from .errors import AllWeightsZero, MaxIterExceeded, NonConvexDiverged

Family = Literal["lasso", "scad", "mcp"]
FAMILY_CODES = {"lasso": _cd.LASSO, "scad": _cd.SCAD, "mcp": _cd.MCP}

TOL = 1e-8
MAX_SWEEPS = 10_000

soft_threshold = _cd.soft_threshold
scad_update = _cd.scad_update
mcp_update = _cd.mcp_update


@dataclass(frozen=True)
class PenaltySpec:
    family: Family = "lasso"
    lam: float = 0.0
    weights: Optional[np.ndarray] = None
    scad_a: float = 3.7
    mcp_gamma: float = 3.0

    def __post_init__(self):
        if self.family not in FAMILY_CODES:
            raise ValueError(f"unknown penalty family {self.family!r}")
        if not self.lam >= 0:
            raise ValueError("lambda must be non-negative")
        if self.scad_a <= 2:
            raise ValueError("scad_a must exceed 2")
        if self.mcp_gamma <= 1:
            raise ValueError("mcp_gamma must exceed 1")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.ndim != 1 or np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError("weights must be a finite non-negative vector")
            object.__setattr__(self, "weights", w)

    @property
    def param(self) -> float:
        return {"lasso": 0.0, "scad": self.scad_a, "mcp": self.mcp_gamma}[self.family]

    @property
    def code(self) -> int:
        return FAMILY_CODES[self.family]

    def factors(self, p: int) -> np.ndarray:
        if self.weights is None:
            return np.ones(p)
        if self.weights.shape[0] != p:
            raise ValueError(f"weights have length {self.weights.shape[0]}, expected {p}")
        return self.weights

    def with_lambda(self, lam: float) -> "PenaltySpec":
        return PenaltySpec(self.family, lam, self.weights, self.scad_a, self.mcp_gamma)


@dataclass
class FitResult:
    beta: np.ndarray
    lam: float
    iterations: int
    converged: bool
    objective: float
    trace: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.beta)


@dataclass(frozen=True)
class LambdaPath:
    values: np.ndarray
    min_ratio: float

    @property
    def num_values(self) -> int:
        return self.values.shape[0]

    @property
    def lambda_max(self) -> float:
        return float(self.values[0])


def _col_sq(x):
    return np.einsum("ij,ij->j", x, x) / x.shape[0]


def cd_fit(data: Dataset, penalty: PenaltySpec, init=None, *, tol: float = TOL,
           max_sweeps: int = MAX_SWEEPS, record_trace: bool = False) -> FitResult:
    """Minimize the weighted penalized least-squares objective at one lambda.

    Parameters
    ----------
    data : Dataset
        Standardized data (1/n column scaling).
    penalty : PenaltySpec
    init : array_like, optional
        Warm-start coefficients.
    record_trace : bool
        Store the objective after every sweep in ``FitResult.trace``.
    """
    x = np.asfortranarray(data.x)
    y = np.asarray(data.y, dtype=np.float64)
    p = x.shape[1]
    w = penalty.factors(p)
    beta = np.zeros(p) if init is None else np.array(init, dtype=np.float64)
    r = y - x @ beta
    pen = penalty.lam * w
    trace = np.zeros(max_sweeps if record_trace else 0)
    sweeps, status = _cd.cd_solve(x, r, beta, _col_sq(x), pen, penalty.code, penalty.param,
                                  tol, max_sweeps, trace)
    if status == _cd.DIVERGED:
        raise NonConvexDiverged(f"{penalty.family} objective increased for 100 consecutive sweeps "
                                f"(lambda={penalty.lam:g})")
    if status == _cd.MAX_ITER:
        warnings.warn(f"coordinate descent did not converge in {sweeps} sweeps "
                      f"(lambda={penalty.lam:g})", MaxIterExceeded, stacklevel=2)
    obj = float(_cd.objective(r, beta, pen, penalty.code, penalty.param))
    return FitResult(beta, float(penalty.lam), int(sweeps), status == _cd.OK, obj, trace[:sweeps])


def fit_path(data: Dataset, penalty: PenaltySpec, lambdas) -> list[FitResult]:
    """Warm-started fits along a decreasing lambda sequence."""
    out, beta = [], None
    for lam in np.asarray(lambdas, dtype=np.float64):
        res = cd_fit(data, penalty.with_lambda(float(lam)), init=beta)
        beta = res.beta
        out.append(res)
    return out


def _unpenalized_residual(x, y, w):
    free = np.flatnonzero(w == 0)
    if free.size == 0:
        return y
    coef, *_ = np.linalg.lstsq(x[:, free], y, rcond=None)
    return y - x[:, free] @ coef


def lambda_max(x, y, weights) -> float:
    """Smallest lambda at which every positively weighted coefficient is zero.

    Unpenalized (zero-weight) columns are partialled out of ``y`` first.
    """
    w = np.asarray(weights, dtype=np.float64)
    pos = w > 0
    if not pos.any():
        raise AllWeightsZero("at least one penalty factor must be positive")
    r = _unpenalized_residual(x, y, w)
    grad = np.abs(x[:, pos].T @ r) / x.shape[0]
    # the relative nudge absorbs summation-order rounding in the compiled kernel
    return float(np.max(grad / w[pos])) * (1.0 + 1e-12)


def lambda_path(data: Dataset, weights=None, num_values: int = 100, min_ratio: Optional[float] = None) -> LambdaPath:
    """Log-spaced grid from ``lambda_max`` down to ``min_ratio * lambda_max``.

    ``min_ratio`` defaults to 0.01 when ``p >= n`` and 1e-4 otherwise.
    """
    w = np.ones(data.p) if weights is None else np.asarray(weights, dtype=np.float64)
    if min_ratio is None:
        min_ratio = 0.01 if data.p >= data.n else 1e-4
    if not 0 < min_ratio < 1:
        raise ValueError("min_ratio must lie in (0, 1)")
    lmax = lambda_max(data.x, data.y, w)
    if lmax <= 0:
        raise ValueError("response is orthogonal to every penalized column; lambda_max is 0")
    values = np.geomspace(lmax, min_ratio * lmax, num_values)
    values[0], values[-1] = lmax, min_ratio * lmax
    return LambdaPath(values, float(min_ratio))


def kkt_check(data: Dataset, penalty: PenaltySpec, beta) -> float:
    """Largest violation of the (sub)gradient optimality conditions.

    For nonconvex families this is the residual of the local stationarity
    condition, using the penalty's derivative at the current coefficients.
    """
    x, y = data.x, data.y
    beta = np.asarray(beta, dtype=np.float64)
    w = penalty.factors(x.shape[1])
    grad = x.T @ (y - x @ beta) / x.shape[0]
    t = penalty.lam * w
    nz = beta != 0
    res = np.maximum(np.abs(grad) - t, 0.0)
    if nz.any():
        slope = np.array([_cd.penalty_slope(b, tj, penalty.code, penalty.param)
                          for b, tj in zip(beta[nz], t[nz])])
        res[nz] = np.abs(grad[nz] - slope * np.sign(beta[nz]))
    return float(res.max()) if res.size else 0.0
