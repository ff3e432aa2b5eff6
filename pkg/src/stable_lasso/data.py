"""Dataset container, standardization, CSV ingestion and seeded random streams."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConstantColumn, DimensionMismatch, MissingResponseColumn, ParseError, RaggedRows

SD_TOL = 1e-12

# purpose sub-keys for streams derived from one SeedSpec
STREAM_PLAN, STREAM_BOOT, STREAM_DATA, STREAM_WEIGHTS = 0, 1, 2, 3


@dataclass(frozen=True)
class Dataset:
    """Standardized design matrix and centered response.

    Columns of ``x`` have mean zero and ``(1/n) * sum(x_j**2) == 1``; ``y`` is
    centered. The stored means and scales allow the raw data to be recovered
    with :func:`unstandardize`.
    """

    x: np.ndarray
    y: np.ndarray
    column_means: np.ndarray
    column_sds: np.ndarray
    y_mean: float

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def rows(self, idx) -> tuple[np.ndarray, np.ndarray]:
        return self.x[idx], self.y[idx]


class RawData(NamedTuple):
    x: np.ndarray
    y: np.ndarray
    feature_names: list[str]


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus a logical stream id.

    Streams are derived with :class:`numpy.random.SeedSequence` keyed on
    ``(stream_id, *subkeys)`` and drawn through the counter-based Philox bit
    generator, so a stream never depends on which thread consumes it.
    """

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if int(self.stream_id) < 0:
            raise ValueError("stream_id must be non-negative")

    def child(self, stream_id: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, stream_id)


def rng_stream(spec: SeedSpec, *subkeys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(spec.master_seed), spawn_key=(int(spec.stream_id), *map(int, subkeys)))
    return np.random.Generator(np.random.Philox(ss))


def _freeze(a):
    a.setflags(write=False)
    return a


def standardize(raw_x, raw_y) -> Dataset:
    x = np.array(raw_x, dtype=np.float64, order="F")
    y = np.array(raw_y, dtype=np.float64).ravel()
    if x.ndim != 2:
        raise DimensionMismatch(f"predictors must be a 2-d matrix, got shape {x.shape}")
    n, p = x.shape
    if n < 2 or p < 1:
        raise DimensionMismatch(f"need n >= 2 and p >= 1, got {x.shape}")
    if y.shape[0] != n:
        raise DimensionMismatch(f"response has length {y.shape[0]} but predictors have {n} rows")

    means = x.mean(axis=0)
    x -= means
    sds = np.sqrt(np.mean(x**2, axis=0))
    bad = np.flatnonzero(sds < SD_TOL)
    if bad.size:
        raise ConstantColumn(int(bad[0]))
    x /= sds
    y_mean = float(y.mean())
    y = y - y_mean
    return Dataset(_freeze(x), _freeze(y), _freeze(means), _freeze(sds), y_mean)


def unstandardize(data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    return data.x * data.column_sds + data.column_means, data.y + data.y_mean


def standardize_rows(x: np.ndarray, y: np.ndarray):
    """Center and scale a row subset without raising on constant columns.

    Constant columns are returned as all-zero columns (they can never enter
    a penalized fit). Returns ``(x, y, col_sq)`` where ``col_sq`` holds
    ``(1/n) * sum(x_j**2)``, which is 1 or 0 per column.
    """
    x = np.array(x, dtype=np.float64, order="F")
    x -= x.mean(axis=0)
    sds = np.sqrt(np.mean(x**2, axis=0))
    ok = sds >= SD_TOL
    x[:, ok] /= sds[ok]
    x[:, ~ok] = 0.0
    return x, y - y.mean(), ok.astype(np.float64)


def _resolve_response(header: Sequence[str] | None, ncol: int, response_column):
    if isinstance(response_column, (int, np.integer)):
        idx = int(response_column)
        if idx < 0:
            idx += ncol
        if not 0 <= idx < ncol:
            raise MissingResponseColumn(f"response index {response_column} out of range for {ncol} columns")
        return idx
    if header is not None and response_column in header:
        return list(header).index(response_column)
    if header is None and str(response_column).lstrip("-").isdigit():
        return _resolve_response(None, ncol, int(response_column))
    raise MissingResponseColumn(f"response column {response_column!r} not found")


def load_csv(path, response_column, has_header: bool = True) -> RawData:
    """Read a numeric comma-delimited file into a raw predictor/response pair.

    ``response_column`` is a header name or a column index. Parse errors
    report the 1-based line number and the 0-based field index.
    """
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise DimensionMismatch(f"{path} contains no rows")

    header = [h.strip() for h in rows[0]] if has_header else None
    body = rows[1:] if has_header else rows
    first_line = 2 if has_header else 1
    ncol = len(header) if header is not None else len(body[0]) if body else 0
    resp = _resolve_response(header, ncol, response_column)

    values = np.empty((len(body), ncol))
    for i, row in enumerate(body):
        if len(row) != ncol:
            raise RaggedRows(i + first_line, ncol, len(row))
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise ParseError(i + first_line, j, cell) from None
            if not np.isfinite(values[i, j]):
                raise ParseError(i + first_line, j, cell)

    keep = [j for j in range(ncol) if j != resp]
    names = [header[j] for j in keep] if header is not None else [f"x{j}" for j in keep]
    return RawData(values[:, keep], values[:, resp].copy(), names)


def write_csv(path, x: np.ndarray, y: np.ndarray, feature_names=None, response_name: str = "y") -> None:
    p = x.shape[1]
    names = list(feature_names) if feature_names is not None else [f"x{j + 1}" for j in range(p)]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*names, response_name])
        for xi, yi in zip(x, y):
            w.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])
