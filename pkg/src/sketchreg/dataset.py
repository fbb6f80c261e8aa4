"""Data ingestion, full-data least squares and SVD diagnostics."""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, RankDeficientError

RANK_TOL = 1e-12


def numerical_rank(s: np.ndarray, shape: tuple[int, int]) -> int:
    """Count singular values above max(n, p) * s_max * 1e-12."""
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > max(shape) * s[0] * RANK_TOL))


@dataclass(frozen=True)
class FitSummary:
    beta_f: np.ndarray
    tss: float
    rss: float
    mss: float
    r_squared: float
    sigma_min_x: float

    def to_dict(self) -> dict:
        return {
            "beta_f": self.beta_f.tolist(),
            "tss": self.tss,
            "rss": self.rss,
            "mss": self.mss,
            "r_squared": self.r_squared,
            "sigma_min_x": self.sigma_min_x,
        }


@dataclass(frozen=True)
class LeverageProfile:
    scores: np.ndarray
    max_score: float
    sum_scores: float


@dataclass(frozen=True, eq=False)
class Dataset:
    """Response ``y`` (length n) and design ``X`` (n x p).

    Arrays are copied and made read-only on construction, so a Dataset can be
    shared between threads. The stacked matrix ``A = [y, X]`` has d = p + 1
    columns.
    """

    y: np.ndarray
    X: np.ndarray
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        y = np.array(self.y, dtype=float).reshape(-1)
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DataError(f"shape mismatch: y has {y.shape[0]} rows, X has shape {X.shape}")
        n, p = X.shape
        if p < 1:
            raise DataError("X must have at least one column")
        if n <= p:
            raise DataError(f"need n > p, got n={n}, p={p}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("data contain non-finite values")
        zero_cols = np.flatnonzero(~np.any(X != 0, axis=0))
        if zero_cols.size:
            raise RankDeficientError(f"column(s) {zero_cols.tolist()} of X are all zero")
        names = tuple(self.names) if self.names else tuple(f"x{j + 1}" for j in range(p))
        if len(names) != p:
            raise DataError(f"expected {p} column names, got {len(names)}")
        y.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def d(self) -> int:
        return self.p + 1

    @cached_property
    def A(self) -> np.ndarray:
        a = np.column_stack([self.y, self.X])
        a.setflags(write=False)
        return a

    @cached_property
    def fit(self) -> FitSummary:
        return fit_full(self)

    @cached_property
    def xtx_inv(self) -> np.ndarray:
        _, s, vt = _svd(self.X)
        return (vt.T / s**2) @ vt

    @cached_property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.n}x{self.p}".encode())
        h.update(np.ascontiguousarray(self.A).tobytes())
        return h.hexdigest()[:16]

    def head(self, n: int) -> "Dataset":
        """First ``n`` rows as a new dataset."""
        return Dataset(self.y[:n], self.X[:n], self.names)


def _svd(M: np.ndarray, what: str = "X"):
    u, s, vt = np.linalg.svd(M, full_matrices=False)
    rank = numerical_rank(s, M.shape)
    if rank < M.shape[1]:
        raise RankDeficientError(
            f"{what} is rank deficient: numerical rank {rank} < {M.shape[1]} columns", rank=rank
        )
    return u, s, vt


def fit_full(d: Dataset) -> FitSummary:
    """Exact least squares on the full data via the thin SVD of X."""
    u, s, vt = _svd(d.X)
    uty = u.T @ d.y
    beta = vt.T @ (uty / s)
    fitted = u @ uty
    resid = d.y - fitted
    tss = float(d.y @ d.y)
    rss = float(resid @ resid)
    mss = float(fitted @ fitted)
    return FitSummary(
        beta_f=beta,
        tss=tss,
        rss=rss,
        mss=mss,
        r_squared=mss / tss if tss > 0 else 1.0,
        sigma_min_x=float(s[-1]),
    )


def leverage_scores(M: np.ndarray, what: str = "matrix") -> np.ndarray:
    u, _, _ = _svd(np.asarray(M, dtype=float), what)
    return np.einsum("ij,ij->i", u, u)


def leverage_profile(d: Dataset, which: str = "stacked") -> LeverageProfile:
    """Leverage scores of X (``design_only``) or of A = [y, X] (``stacked``)."""
    if which == "design_only":
        M, what = d.X, "X"
    elif which == "stacked":
        M, what = d.A, "A = [y, X]"
    else:
        raise ValueError(f"which must be 'design_only' or 'stacked', got {which!r}")
    scores = leverage_scores(M, what)
    return LeverageProfile(scores=scores, max_score=float(scores.max()), sum_scores=float(scores.sum()))


def load_csv(
    path: str | Path,
    response: str,
    *,
    intercept: bool = False,
    columns: Sequence[str] | None = None,
) -> Dataset:
    """Read a numeric CSV with a header row.

    ``response`` names the y column; the remaining columns (or ``columns``, if
    given) form X in file order. With ``intercept`` a column of ones named
    ``(Intercept)`` is prepended. Missing or non-numeric cells are errors; the
    message cites the 1-based data row (the header is row 0).
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 2:
            raise DataError(f"{path}: need at least 2 columns, found {len(header)}")
        if response not in header:
            raise DataError(f"{path}: response column {response!r} not found in header {header}")
        if columns is None:
            xcols = [h for h in header if h != response]
        else:
            missing = [c for c in columns if c not in header]
            if missing:
                raise DataError(f"{path}: column(s) {missing} not found in header")
            xcols = list(columns)
        idx = {h: i for i, h in enumerate(header)}
        rows = []
        for rownum, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {rownum} has {len(row)} fields, expected {len(header)}"
                )
            try:
                vals = [float(c) for c in row]
            except ValueError:
                bad = next(c for c in row if not _is_float(c))
                raise DataError(f"{path}: non-numeric cell {bad!r} at row {rownum}") from None
            if not all(math.isfinite(v) for v in vals):
                raise DataError(f"{path}: missing or non-finite value at row {rownum}")
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    data = np.array(rows)
    y = data[:, idx[response]]
    X = data[:, [idx[c] for c in xcols]]
    names = list(xcols)
    if intercept:
        X = np.column_stack([np.ones(len(y)), X])
        names = ["(Intercept)"] + names
    return Dataset(y, X, tuple(names))


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True
