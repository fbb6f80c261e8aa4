"""Sketched least-squares estimators.

All estimators share one QR factorization of the sketched design, so the
complete, partial and combined estimators from a single sketch cost one
O(kp^2) factorization plus triangular solves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .dataset import Dataset, numerical_rank
from .errors import DataError, RankDeficientError, SketchSizeError
from .sketches import SketchedData, SketchSpec

ESTIMATOR_KINDS = ("full", "complete", "partial", "partial_unbiased", "combined", "one_step")


@dataclass(frozen=True)
class FullMoments:
    """Exact full-data quantities kept alongside a sketch (X'y, (X'X)^-1, sums of squares)."""

    xty: np.ndarray
    xtx_inv: np.ndarray
    mss: float
    rss: float
    beta_f: np.ndarray | None = None
    xtx: np.ndarray | None = None

    @classmethod
    def from_dataset(cls, d: Dataset) -> "FullMoments":
        fit = d.fit
        return cls(
            xty=d.X.T @ d.y,
            xtx_inv=d.xtx_inv,
            mss=fit.mss,
            rss=fit.rss,
            beta_f=fit.beta_f,
            xtx=d.X.T @ d.X,
        )


@dataclass(frozen=True, eq=False)
class Estimate:
    """A coefficient vector tagged with how it was produced."""

    kind: str
    beta: np.ndarray
    variance: np.ndarray | None = None
    spec: SketchSpec | None = None
    source: str | None = None
    aux: dict = field(default_factory=dict)

    @property
    def rank_deficient(self) -> bool:
        return bool(self.aux.get("rank_deficient", False))

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "beta": self.beta.tolist()}
        if self.variance is not None:
            out["variance"] = self.variance.tolist()
        if "rss_s" in self.aux:
            out["rss_s"] = self.aux["rss_s"]
        if self.spec is not None:
            out["spec"] = self.spec.to_dict()
        if self.rank_deficient:
            out["rank_deficient"] = True
        return out


class SketchedGram:
    """QR of the sketched design X~ = QR, used to solve (X~'X~) b = c.

    When X~ is numerically rank deficient every solve goes through the
    Moore-Penrose pseudo-inverse and ``rank_deficient`` is set.
    """

    def __init__(self, x_tilde: np.ndarray):
        self.x_tilde = np.asarray(x_tilde, dtype=float)
        k, p = self.x_tilde.shape
        self.q, self.r = np.linalg.qr(self.x_tilde, mode="reduced")
        rank = p if k >= p else k
        if k >= p:
            sv = np.linalg.svd(self.r, compute_uv=False)
            rank = numerical_rank(sv, self.x_tilde.shape)
        self.rank = rank
        self.rank_deficient = rank < p

    @cached_property
    def _pinv_gram(self) -> np.ndarray:
        return np.linalg.pinv(self.x_tilde.T @ self.x_tilde)

    def solve(self, c: np.ndarray) -> np.ndarray:
        """Solve (X~'X~) b = c with two triangular solves."""
        if self.rank_deficient:
            return self._pinv_gram @ c
        w = sla.solve_triangular(self.r, c, trans="T")
        return sla.solve_triangular(self.r, w)

    @cached_property
    def inverse(self) -> np.ndarray:
        """(X~'X~)^-1, or its pseudo-inverse."""
        if self.rank_deficient:
            return self._pinv_gram
        rinv = sla.solve_triangular(self.r, np.eye(self.r.shape[0]))
        return rinv @ rinv.T

    def lstsq(self, y: np.ndarray) -> np.ndarray:
        if self.rank_deficient:
            return np.linalg.lstsq(self.x_tilde, y, rcond=None)[0]
        return sla.solve_triangular(self.r, self.q.T @ y)


def _gram(sd: SketchedData, gram: SketchedGram | None) -> SketchedGram:
    return gram if gram is not None else SketchedGram(sd.x_tilde)


def _make(kind, beta, sd: SketchedData, gram: SketchedGram, **aux) -> Estimate:
    aux["rank_deficient"] = gram.rank_deficient
    return Estimate(kind=kind, beta=beta, spec=sd.spec, source=sd.source_fingerprint, aux=aux)


def _check_p(sd: SketchedData, fm: FullMoments) -> None:
    if fm.xty.shape != (sd.p,):
        raise DataError(f"full moments have p={fm.xty.shape[0]}, sketch has p={sd.p}")


def beta_full(d: Dataset) -> Estimate:
    return Estimate(kind="full", beta=d.fit.beta_f, source=d.fingerprint)


def beta_complete(sd: SketchedData, gram: SketchedGram | None = None) -> Estimate:
    """Least squares on the sketched data (y~, X~). aux carries RSS_S and MSS_S."""
    g = _gram(sd, gram)
    beta = g.lstsq(sd.y_tilde)
    fitted = sd.x_tilde @ beta
    resid = sd.y_tilde - fitted
    return _make(
        "complete", beta, sd, g, rss_s=float(resid @ resid), mss_s=float(fitted @ fitted)
    )


def beta_partial(sd: SketchedData, fm: FullMoments, gram: SketchedGram | None = None) -> Estimate:
    """Sketched Gram matrix with the exact X'y: solves (X~'X~) b = X'y."""
    _check_p(sd, fm)
    g = _gram(sd, gram)
    return _make("partial", g.solve(fm.xty), sd, g)


def partial_correction(k: int, p: int) -> float:
    """(k - p - 1) / k, the factor that removes the inverse-Wishart mean inflation."""
    if k <= p + 1:
        raise SketchSizeError(f"k must exceed p+1 for the bias correction (k={k}, p={p})", p + 2)
    return (k - p - 1) / k


def beta_partial_unbiased(
    sd: SketchedData, fm: FullMoments, gram: SketchedGram | None = None
) -> Estimate:
    factor = partial_correction(sd.k, sd.p)
    e = beta_partial(sd, fm, gram)
    return Estimate(
        kind="partial_unbiased", beta=factor * e.beta, spec=e.spec, source=e.source, aux=e.aux
    )


def phi_opt(trace_var_s: float, trace_var_pstar: float) -> float:
    """MSE-minimizing weight on the complete estimator for uncorrelated inputs."""
    if trace_var_s < 0 or trace_var_pstar < 0:
        raise ValueError("variance traces must be nonnegative")
    total = trace_var_s + trace_var_pstar
    if total == 0:
        raise ValueError("both variance traces are zero; phi is undefined")
    return trace_var_pstar / total


def beta_combined(e_s: Estimate, e_pstar: Estimate, phi: float) -> Estimate:
    """phi * beta_S + (1 - phi) * beta_P*, both from the same sketch."""
    if not 0.0 <= phi <= 1.0:
        raise ValueError(f"phi must lie in [0, 1], got {phi}")
    if e_s.kind != "complete" or e_pstar.kind != "partial_unbiased":
        raise ValueError("beta_combined expects a complete and a partial_unbiased estimate")
    if e_s.beta.shape != e_pstar.beta.shape:
        raise DataError("estimates have different dimensions")
    if e_s.spec != e_pstar.spec or e_s.source != e_pstar.source:
        raise DataError("estimates were not computed from the same sketch")
    beta = phi * e_s.beta + (1.0 - phi) * e_pstar.beta
    aux = {"phi": float(phi), "rank_deficient": e_s.rank_deficient or e_pstar.rank_deficient}
    return Estimate(kind="combined", beta=beta, spec=e_s.spec, source=e_s.source, aux=aux)


def beta_onestep(
    e_s: Estimate,
    sd: SketchedData,
    d: Dataset,
    gram: SketchedGram | None = None,
) -> Estimate:
    """One Newton step from beta_S using the sketched Gram and the full gradient."""
    if d.fingerprint != sd.source_fingerprint:
        raise DataError("dataset does not match the sketch source")
    g = _gram(sd, gram)
    gradient = d.X.T @ (d.y - d.X @ e_s.beta)
    beta = e_s.beta + g.solve(gradient)
    return _make("one_step", beta, sd, g)


def all_estimates(
    sd: SketchedData,
    d: Dataset,
    fm: FullMoments | None = None,
    phi: float | None = None,
) -> dict[str, Estimate]:
    """Every estimator from one factorization of X~.

    ``combined`` is included when ``phi`` is given; ``partial_unbiased`` and
    ``combined`` need k > p + 1.
    """
    fm = fm if fm is not None else FullMoments.from_dataset(d)
    g = SketchedGram(sd.x_tilde)
    out = {"full": beta_full(d)}
    out["complete"] = beta_complete(sd, g)
    out["partial"] = beta_partial(sd, fm, g)
    out["one_step"] = beta_onestep(out["complete"], sd, d, g)
    if sd.k > sd.p + 1:
        out["partial_unbiased"] = beta_partial_unbiased(sd, fm, g)
        if phi is not None:
            out["combined"] = beta_combined(out["complete"], out["partial_unbiased"], phi)
    return out


def require_full_rank(e: Estimate) -> Estimate:
    if e.rank_deficient:
        raise RankDeficientError("sketched design is rank deficient")
    return e
