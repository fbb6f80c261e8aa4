"""Variances, confidence intervals and embedding diagnostics for sketched estimators.

Formula tags in :class:`VarianceReport` name the closed form used:

``eq6``            RSS_F / (k-p+1) (X'X)^-1, as published for var(beta_S). This is
                   the scale matrix of the Student-t law of beta_S; its covariance
                   is ``eq6_moment``.
``eq6_moment``     RSS_F / (k-p-1) (X'X)^-1, the exact Gaussian-sketch covariance.
``eq7``, ``eq8``   covariance of beta_P and of the bias-corrected beta_P*.
``eq9``            plug-in estimate of the beta_P* covariance from one sketch.
``plugin_complete``  RSS_S / (k-p) (X~'X~)^-1 from one sketch.
``sec5_complete``, ``sec5_partial``  unconditional (population) variances,
                   with ``_moment`` variants that add var_y(beta_F).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy import stats

from .dataset import Dataset, FitSummary, leverage_profile
from .errors import DataError, RankDeficientError, SketchSizeError
from .estimators import Estimate, FullMoments, SketchedGram
from .sketches import SketchedData, SketchSpec, apply_sketch, next_pow2

LEVERAGE_WARNING = 0.1


@dataclass(frozen=True, eq=False)
class VarianceReport:
    matrix: np.ndarray
    basis: str
    formula_tag: str

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))

    def to_dict(self) -> dict:
        return {
            "matrix": self.matrix.tolist(),
            "trace": self.trace,
            "basis": self.basis,
            "formula_tag": self.formula_tag,
        }


@dataclass(frozen=True, eq=False)
class ConfidenceIntervals:
    level: float
    center: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    method: str

    def covers(self, target: np.ndarray) -> np.ndarray:
        return (self.lower <= target) & (target <= self.upper)

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "method": self.method,
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
        }


@dataclass(frozen=True)
class PopulationModel:
    """y = X beta0 + noise with noise variance sigma2; gamma2 = |X beta0|^2 / n."""

    beta0: np.ndarray
    sigma2: float
    gamma2: float

    def __post_init__(self):
        if not self.sigma2 > 0 and not (self.sigma2 == 0 and self.gamma2 == 0):
            raise ValueError("sigma2 must be positive")
        if self.gamma2 < 0:
            raise ValueError("gamma2 must be nonnegative")

    @classmethod
    def from_design(cls, X: np.ndarray, beta0: np.ndarray, sigma2: float) -> "PopulationModel":
        beta0 = np.asarray(beta0, dtype=float)
        mean = X @ beta0
        return cls(beta0=beta0, sigma2=float(sigma2), gamma2=float(mean @ mean) / X.shape[0])


def _need(k: int, p: int, excess: int, what: str) -> None:
    if k <= p + excess:
        raise SketchSizeError(
            f"k must exceed p+{excess} for {what} (k={k}, p={p})", minimum=p + excess + 1
        )


# -- conditional variances -------------------------------------------------


def var_complete(rss_f: float, k: int, p: int, xtx_inv: np.ndarray) -> VarianceReport:
    """Published closed form RSS_F / (k-p+1) (X'X)^-1 for beta_S (tag ``eq6``).

    Depends on (RSS_F, (X'X)^-1) and k only, not on n. See
    :func:`var_complete_moment` for the second moment of the Student-t law.
    """
    _need(k, p, 1, "the complete-sketch variance")
    return VarianceReport(rss_f / (k - p + 1) * np.asarray(xtx_inv), "analytic_conditional", "eq6")


def var_complete_moment(rss_f: float, k: int, p: int, xtx_inv: np.ndarray) -> VarianceReport:
    """Covariance of beta_S under a Gaussian sketch: RSS_F / (k-p-1) (X'X)^-1."""
    _need(k, p, 1, "the complete-sketch variance")
    return VarianceReport(
        rss_f / (k - p - 1) * np.asarray(xtx_inv), "analytic_conditional", "eq6_moment"
    )


def var_partial(
    mss_f: float,
    k: int,
    p: int,
    xtx_inv: np.ndarray,
    beta_f: np.ndarray,
    corrected: bool = True,
) -> VarianceReport:
    """Covariance of beta_P (``corrected=False``) or beta_P* (``corrected=True``)."""
    _need(k, p, 3, "partial variance")
    beta_f = np.asarray(beta_f, dtype=float)
    bracket = mss_f * np.asarray(xtx_inv) + (k - p + 1) / (k - p - 1) * np.outer(beta_f, beta_f)
    if corrected:
        factor = (k - p - 1) / ((k - p) * (k - p - 3))
        tag = "eq8"
    else:
        factor = k**2 / ((k - p) * (k - p - 1) * (k - p - 3))
        tag = "eq7"
    return VarianceReport(factor * bracket, "analytic_conditional", tag)


def var_partial_plugin(
    sd: SketchedData,
    e_pstar: Estimate,
    fm: FullMoments | None = None,
    gram: SketchedGram | None = None,
) -> VarianceReport:
    """Single-sketch estimate of var(beta_P*).

    (k-p-1)/((k-p)(k-p-3)) * ((k-p-1)/k * MSS_S (X~'X~)^-1 + beta_P* beta_P*'),
    with MSS_S = |X~ beta_S|^2 from the same sketch. ``fm`` is accepted for
    interface symmetry; only sketched quantities enter the formula.
    """
    k, p = sd.k, sd.p
    _need(k, p, 3, "partial variance")
    g = gram if gram is not None else SketchedGram(sd.x_tilde)
    if g.rank_deficient:
        raise RankDeficientError("sketched design is rank deficient", rank=g.rank)
    fitted = sd.x_tilde @ g.lstsq(sd.y_tilde)
    mss_s = float(fitted @ fitted)
    b = e_pstar.beta
    factor = (k - p - 1) / ((k - p) * (k - p - 3))
    mat = factor * ((k - p - 1) / k * mss_s * g.inverse + np.outer(b, b))
    return VarianceReport(mat, "plugin", "eq9")


def var_complete_plugin(
    sd: SketchedData, e_s: Estimate, gram: SketchedGram | None = None
) -> VarianceReport:
    """Single-sketch estimate RSS_S / (k-p) (X~'X~)^-1 of var(beta_S)."""
    k, p = sd.k, sd.p
    if k <= p:
        raise SketchSizeError(f"k must exceed p (k={k}, p={p})", minimum=p + 1)
    g = gram if gram is not None else SketchedGram(sd.x_tilde)
    rss_s = e_s.aux.get("rss_s")
    if rss_s is None:
        r = sd.y_tilde - sd.x_tilde @ e_s.beta
        rss_s = float(r @ r)
    return VarianceReport(rss_s / (k - p) * g.inverse, "plugin", "plugin_complete")


# -- confidence intervals --------------------------------------------------


def t_quantile(q: float, df: float) -> float:
    return float(stats.t.ppf(q, df))


def normal_quantile(q: float) -> float:
    return float(stats.norm.ppf(q))


def _check_alpha(alpha: float) -> None:
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def ci_complete(
    sd: SketchedData,
    e_s: Estimate,
    alpha: float = 0.05,
    method: str | None = None,
    gram: SketchedGram | None = None,
) -> ConfidenceIntervals:
    """beta_S(i) +- crit * sqrt(w_ii RSS_S / (k-p)), w = (X~'X~)^-1.

    ``exact_t`` uses the Student-t quantile with k-p degrees of freedom and is
    exact for the Gaussian sketch. ``asymptotic_normal`` uses the normal
    quantile, justified for other sketches when n is large relative to k.
    By default Gaussian sketches get ``exact_t`` and all others the normal.
    """
    _check_alpha(alpha)
    k, p = sd.k, sd.p
    if k <= p:
        raise SketchSizeError(f"k must exceed p for complete-sketch intervals (k={k}, p={p})", p + 1)
    if method is None:
        method = "exact_t" if sd.spec.kind == "gaussian" else "asymptotic_normal"
    if method == "exact_t":
        crit = t_quantile(1 - alpha / 2, k - p)
    elif method == "asymptotic_normal":
        crit = normal_quantile(1 - alpha / 2)
    else:
        raise ValueError(f"unknown interval method {method!r}")
    v = var_complete_plugin(sd, e_s, gram)
    half = crit * np.sqrt(np.diag(v.matrix))
    return ConfidenceIntervals(1 - alpha, e_s.beta, e_s.beta - half, e_s.beta + half, method)


def ci_partial(e_pstar: Estimate, v: VarianceReport, alpha: float = 0.05) -> ConfidenceIntervals:
    """beta_P*(i) +- z_{1-alpha/2} sqrt(v_ii)."""
    _check_alpha(alpha)
    half = normal_quantile(1 - alpha / 2) * np.sqrt(np.clip(np.diag(v.matrix), 0, None))
    return ConfidenceIntervals(
        1 - alpha, e_pstar.beta, e_pstar.beta - half, e_pstar.beta + half, "asymptotic_normal"
    )


# -- embedding quality and worst-case bounds -------------------------------


def embedding_epsilon(spec_or_S, A, weights=None) -> float:
    """Smallest epsilon for which the realized S is an epsilon-subspace embedding of A.

    With U an orthonormal basis of range(A), |SAz|^2 / |Az|^2 ranges exactly
    over the eigenvalues of M = (SU)'(SU), so epsilon = max(l_max - 1, 1 - l_min).
    ``spec_or_S`` is a SketchSpec or a dense k x n (or k x n') matrix.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    u, s, _ = np.linalg.svd(A, full_matrices=False)
    if s[-1] <= max(A.shape) * s[0] * 1e-12:
        raise RankDeficientError("A is rank deficient")
    if isinstance(spec_or_S, SketchSpec):
        su = apply_sketch(u, spec_or_S, weights)
    else:
        S = np.asarray(spec_or_S, dtype=float)
        n = u.shape[0]
        if S.shape[1] != n:
            if S.shape[1] != next_pow2(n):
                raise DataError(f"S has {S.shape[1]} columns, A has {n} rows")
            u = np.vstack([u, np.zeros((S.shape[1] - n, u.shape[1]))])
        su = S @ u
    lam = np.linalg.eigvalsh(su.T @ su)
    return float(max(lam[-1] - 1.0, 1.0 - lam[0], 0.0))


@dataclass(frozen=True)
class BoundCheck:
    bound_complete: float
    bound_partial: float | None
    err_sq: float
    applicable: str | None
    satisfied: bool | None

    def to_dict(self) -> dict:
        return {
            "bound_complete": self.bound_complete,
            "bound_partial": self.bound_partial if self.bound_partial is not None else "not applicable",
            "err_sq": self.err_sq,
            "applicable": self.applicable,
            "satisfied": self.satisfied,
        }


def check_worst_case_bounds(
    eps: float, fs: FitSummary, e: Estimate, beta_f: np.ndarray | None = None
) -> BoundCheck:
    """Compare |beta - beta_F|^2 with the epsilon-embedding bounds.

    complete: eps^2 RSS_F / sigma_min(X)^2.
    partial:  4 eps^2 MSS_F / sigma_min(X)^2, only for eps < 0.5.
    The bound matching ``e.kind`` decides ``satisfied``; other kinds get None.
    A round-off slack of 1e-9 relative is allowed.
    """
    beta_f = fs.beta_f if beta_f is None else np.asarray(beta_f)
    smin2 = fs.sigma_min_x**2
    b_c = eps**2 * fs.rss / smin2
    b_p = 4 * eps**2 * fs.mss / smin2 if eps < 0.5 else None
    diff = e.beta - beta_f
    err = float(diff @ diff)
    slack = 1e-18 * float(beta_f @ beta_f)
    if e.kind == "complete":
        applicable, bound = "complete", b_c
    elif e.kind == "partial" and b_p is not None:
        applicable, bound = "partial", b_p
    else:
        applicable, bound = None, None
    satisfied = None if bound is None else bool(err <= bound * (1 + 1e-9) + slack)
    return BoundCheck(b_c, b_p, err, applicable, satisfied)


# -- unconditional moments -------------------------------------------------


def unconditional_variance(
    pm: PopulationModel,
    n: int,
    k: int,
    p: int,
    xtx_inv: np.ndarray,
    kind: str,
    moment: bool = False,
) -> VarianceReport:
    """Variance of a Gaussian-sketch estimator over both the noise and the sketch.

    With ``moment=False`` the published closed forms are evaluated as written:

        complete:          (n-p) sigma2 / (k-p+1) (X'X)^-1
        partial_unbiased:  c {(p sigma2 + n gamma2) (X'X)^-1
                              + r (sigma2 (X'X)^-1 + beta0 beta0')}

    with c = (k-p-1)/((k-p)(k-p-3)) and r = (k-p+1)/(k-p-1). These omit
    var_y(beta_F) = sigma2 (X'X)^-1 and, for the complete estimator, use the
    t scale rather than the covariance. ``moment=True`` returns the exact law
    of total variance: (n-p) sigma2/(k-p-1) (X'X)^-1 + sigma2 (X'X)^-1 for the
    complete estimator and the partial form above plus sigma2 (X'X)^-1.
    """
    xtx_inv = np.asarray(xtx_inv, dtype=float)
    s2 = pm.sigma2
    if kind == "complete":
        _need(k, p, 1, "the complete-sketch variance")
        if moment:
            mat = ((n - p) * s2 / (k - p - 1) + s2) * xtx_inv
        else:
            mat = (n - p) * s2 / (k - p + 1) * xtx_inv
        tag = "sec5_complete"
    elif kind == "partial_unbiased":
        _need(k, p, 3, "partial variance")
        c = (k - p - 1) / ((k - p) * (k - p - 3))
        r = (k - p + 1) / (k - p - 1)
        b0 = np.asarray(pm.beta0, dtype=float)
        mat = c * ((p * s2 + n * pm.gamma2) * xtx_inv + r * (s2 * xtx_inv + np.outer(b0, b0)))
        if moment:
            mat = mat + s2 * xtx_inv
        tag = "sec5_partial"
    else:
        raise ValueError("kind must be 'complete' or 'partial_unbiased'")
    return VarianceReport(mat, "analytic_unconditional", tag + ("_moment" if moment else ""))


# -- distributional diagnostics --------------------------------------------


@dataclass(frozen=True)
class NormalityTest:
    statistic: float
    p_value: float
    reject: bool

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "p_value": self.p_value, "reject": self.reject}


def mahalanobis_normality_test(
    sketched, gram_over_n: np.ndarray, alpha: float = 0.05, *, n: int | None = None
) -> NormalityTest:
    """KS test of squared Mahalanobis distances of sketched rows against chi^2_d.

    Rows of sqrt(k/n) * A~ are compared with N(0, A'A/n). ``sketched`` is a
    SketchedData (rows [y~, X~], n taken from it) or a k x d array with ``n``.
    """
    _check_alpha(alpha)
    if isinstance(sketched, SketchedData):
        rows = sketched.A_tilde
        n = sketched.n if n is None else n
    else:
        rows = np.asarray(sketched, dtype=float)
        if rows.ndim == 1:
            rows = rows[:, None]
        if n is None:
            raise ValueError("n is required when passing a raw array")
    gram = np.atleast_2d(np.asarray(gram_over_n, dtype=float))
    k, dim = rows.shape
    if gram.shape != (dim, dim):
        raise DataError(f"gram has shape {gram.shape}, expected {(dim, dim)}")
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        raise DataError("gram matrix is singular or not positive definite") from None
    z = sla.solve_triangular(chol, (rows * math.sqrt(k / n)).T, lower=True)
    d2 = np.sum(z * z, axis=0)
    res = stats.kstest(d2, stats.chi2(dim).cdf)
    return NormalityTest(float(res.statistic), float(res.pvalue), bool(res.pvalue < alpha))


def assumption_diagnostics(d: Dataset) -> dict:
    """Max leverage of A = [y, X] and conditioning of A'A / n.

    The 0.1 warning threshold is a heuristic: large leverage means the
    normal approximation for Hadamard and Clarkson-Woodruff sketches is suspect.
    """
    lev = leverage_profile(d, "stacked")
    gram = d.A.T @ d.A / d.n
    return {
        "max_leverage": lev.max_score,
        "gram_condition": float(np.linalg.cond(gram)),
        "warning": bool(lev.max_score > LEVERAGE_WARNING),
        "threshold": LEVERAGE_WARNING,
        "threshold_note": "heuristic",
    }
