import math

import numpy as np
import pytest

from sketchreg import (
    Dataset,
    Estimate,
    FullMoments,
    PopulationModel,
    SketchSpec,
    all_estimates,
    assumption_diagnostics,
    beta_complete,
    beta_partial_unbiased,
    check_worst_case_bounds,
    ci_complete,
    ci_partial,
    embedding_epsilon,
    mahalanobis_normality_test,
    materialize_sketch,
    sketch_dataset,
    synthetic_dataset,
    unconditional_variance,
    var_complete,
    var_complete_moment,
    var_partial,
    var_partial_plugin,
)
from sketchreg.errors import DataError, RankDeficientError, SketchSizeError
from sketchreg.inference import VarianceReport
from sketchreg.rng import child_seed
from sketchreg.sketches import SketchedData

from conftest import identity_sketch, make_data, mc_cov_se

# Reference quantiles from standard statistical tables.
T_975_10 = 2.2281388519649385
Z_975 = 1.959963984540054


# -- closed forms ------------------------------------------------------------


def test_var_complete_zero_rss():
    assert not var_complete(0.0, 20, 3, np.eye(3)).matrix.any()


def test_var_complete_intercept_only():
    n, rss = 25, 7.0
    v = var_complete(rss, 11, 1, np.array([[1.0 / n]]))
    assert v.matrix[0, 0] == pytest.approx(rss / (11 * n))
    assert v.formula_tag == "eq6"


def test_var_complete_moment_relation():
    xtx_inv = np.array([[2.0, 0.3], [0.3, 1.0]])
    a = var_complete(5.0, 30, 2, xtx_inv).matrix
    b = var_complete_moment(5.0, 30, 2, xtx_inv).matrix
    assert np.allclose(b, a * (30 - 2 + 1) / (30 - 2 - 1))


def test_var_complete_threshold():
    with pytest.raises(SketchSizeError):
        var_complete(1.0, 4, 3, np.eye(3))


def test_var_complete_independent_of_n():
    # only the pair (RSS_F, (X'X)^-1) enters; no n argument exists
    a = var_complete(3.0, 40, 2, np.eye(2) / 100)
    b = var_complete(3.0, 40, 2, np.eye(2) / 100)
    assert np.array_equal(a.matrix, b.matrix)


def test_var_partial_ratio():
    rng = np.random.default_rng(0)
    M = rng.standard_normal((3, 3))
    xtx_inv = M @ M.T + np.eye(3)
    bf = rng.standard_normal(3)
    for k in (7, 10, 57):
        v7 = var_partial(2.5, k, 3, xtx_inv, bf, corrected=False)
        v8 = var_partial(2.5, k, 3, xtx_inv, bf, corrected=True)
        assert np.allclose(v7.matrix, (k / (k - 3 - 1)) ** 2 * v8.matrix, rtol=1e-13)
        assert (v7.formula_tag, v8.formula_tag) == ("eq7", "eq8")


def test_var_partial_zero_and_threshold():
    assert not var_partial(0.0, 20, 3, np.eye(3), np.zeros(3)).matrix.any()
    with pytest.raises(SketchSizeError, match=r"k must exceed p\+3 for partial variance"):
        var_partial(1.0, 6, 3, np.eye(3), np.ones(3))


def test_plugin_identity_substitution():
    d = make_data(n=30, p=3, seed=1)
    sd = identity_sketch(d)
    fm = FullMoments.from_dataset(d)
    e_p = beta_partial_unbiased(sd, fm)
    k, p = d.n, d.p
    bf, fit = d.fit.beta_f, d.fit
    assert np.allclose(e_p.beta, (k - p - 1) / k * bf)
    c = (k - p - 1) / ((k - p) * (k - p - 3))
    expect = c * ((k - p - 1) / k * fit.mss * d.xtx_inv + np.outer(e_p.beta, e_p.beta))
    v = var_partial_plugin(sd, e_p, fm)
    assert np.allclose(v.matrix, expect, rtol=1e-10)
    assert v.formula_tag == "eq9"


def test_plugin_threshold():
    d = make_data(n=100, p=3, seed=2)
    sd = sketch_dataset(d, SketchSpec("gaussian", 6, 1))
    fm = FullMoments.from_dataset(d)
    with pytest.raises(SketchSizeError):
        var_partial_plugin(sd, beta_partial_unbiased(sd, fm), fm)


def test_variance_report_serialization():
    v = var_partial(1.0, 20, 2, np.eye(2), np.ones(2))
    out = v.to_dict()
    assert set(out) == {"matrix", "trace", "basis", "formula_tag"}
    assert out["trace"] == pytest.approx(np.trace(v.matrix))
    assert np.allclose(v.matrix, v.matrix.T)
    assert np.all(np.diag(v.matrix) >= 0)


# -- intervals ----------------------------------------------------------------


def _unit_sketch():
    k, p = 12, 2
    xt = np.zeros((k, p))
    xt[:p, :p] = np.eye(p)
    yt = np.concatenate([[0.7, -1.2], np.ones(k - p)])
    sd = SketchedData(yt, xt, SketchSpec("gaussian", k), "fixture", 1000)
    return sd, beta_complete(sd)


def test_ci_complete_half_width_t():
    sd, e = _unit_sketch()
    assert e.aux["rss_s"] == pytest.approx(10.0)
    ci = ci_complete(sd, e, 0.05)
    assert ci.method == "exact_t"
    assert np.allclose(ci.upper - e.beta, T_975_10, atol=1e-9)
    assert np.allclose(e.beta - ci.lower, T_975_10, atol=1e-9)


def test_ci_complete_alpha_to_one():
    sd, e = _unit_sketch()
    ci = ci_complete(sd, e, 1 - 1e-12)
    assert np.allclose(ci.lower, e.beta, atol=1e-10)
    assert np.allclose(ci.upper, e.beta, atol=1e-10)


def test_ci_complete_method_by_kind():
    d = make_data(n=256, p=3, seed=3)
    for kind, method in (("gaussian", "exact_t"), ("hadamard", "asymptotic_normal"),
                         ("clarkson_woodruff", "asymptotic_normal")):
        sd = sketch_dataset(d, SketchSpec(kind, 20, 1))
        assert ci_complete(sd, beta_complete(sd)).method == method


def test_ci_complete_threshold():
    d = make_data(n=100, p=3, seed=4)
    sd = sketch_dataset(d, SketchSpec("gaussian", 3, 1))
    with pytest.raises(SketchSizeError):
        ci_complete(sd, beta_complete(sd))


def test_ci_complete_equivariance():
    d = make_data(n=200, p=3, seed=5)
    d2 = Dataset(-2.0 * d.y, d.X)
    spec = SketchSpec("hadamard", 25, 9)
    sd, sd2 = sketch_dataset(d, spec), sketch_dataset(d2, spec)
    a, b = ci_complete(sd, beta_complete(sd)), ci_complete(sd2, beta_complete(sd2))
    # a negative scale swaps the endpoints
    assert np.allclose(b.lower, -2.0 * a.upper, rtol=1e-9)
    assert np.allclose(b.upper, -2.0 * a.lower, rtol=1e-9)


def test_ci_partial_normal_quantile():
    e = Estimate("partial_unbiased", np.array([1.0, -2.0, 0.5]))
    v = VarianceReport(np.eye(3), "plugin", "eq9")
    ci = ci_partial(e, v, 0.05)
    assert np.allclose(ci.upper - e.beta, Z_975, atol=1e-9)
    assert ci.method == "asymptotic_normal"
    ci1 = ci_partial(e, v, 1 - 1e-12)
    assert np.allclose(ci1.upper, e.beta, atol=1e-10)
    assert np.all(ci.lower <= ci.upper)
    with pytest.raises(ValueError):
        ci_partial(e, v, 0.0)


# -- embedding epsilon -----------------------------------------------------------


def test_epsilon_identity_and_scaled():
    A = np.random.default_rng(6).standard_normal((15, 3))
    assert embedding_epsilon(np.eye(15), A) == pytest.approx(0.0, abs=1e-12)
    assert embedding_epsilon(2 * np.eye(15), A) == pytest.approx(3.0, abs=1e-12)


def test_epsilon_matches_random_search():
    from scipy.optimize import minimize

    rng = np.random.default_rng(7)
    A = rng.standard_normal((20, 3))
    S = materialize_sketch(SketchSpec("gaussian", 8, 2), 20)
    eps = embedding_epsilon(S, A)

    def dev(z):
        Az = A @ z
        return abs(np.sum((S @ Az) ** 2) / np.sum(Az**2) - 1)

    z = rng.standard_normal((100_000, 3))
    Az = z @ A.T
    ratio = np.sum((Az @ S.T) ** 2, axis=1) / np.sum(Az**2, axis=1)
    search = np.abs(ratio - 1)
    assert search.max() <= eps + 1e-12
    # polish the best random directions with a local optimizer
    starts = z[np.argsort(search)[-5:]]
    best = max(-minimize(lambda v: -dev(v), s0, method="Nelder-Mead",
                         options={"xatol": 1e-10, "fatol": 1e-14}).fun for s0 in starts)
    assert best <= eps + 1e-12
    assert eps - best <= 1e-6


def test_epsilon_spec_equals_dense():
    A = np.random.default_rng(8).standard_normal((40, 3))
    for kind in ("gaussian", "hadamard", "clarkson_woodruff"):
        spec = SketchSpec(kind, 12, 3)
        assert embedding_epsilon(spec, A) == pytest.approx(
            embedding_epsilon(materialize_sketch(spec, 40), A), rel=1e-10, abs=1e-12
        )


def test_epsilon_subspace_invariance():
    A = np.random.default_rng(9).standard_normal((50, 3))
    T = np.array([[1.0, 2.0, 0.0], [0.0, 1.0, 0.0], [3.0, 0.0, -1.0]])
    spec = SketchSpec("clarkson_woodruff", 10, 4)
    assert embedding_epsilon(spec, A) == pytest.approx(embedding_epsilon(spec, A @ T), rel=1e-9)


def test_epsilon_definition_audit():
    rng = np.random.default_rng(10)
    A = rng.standard_normal((64, 4))
    for kind in ("gaussian", "hadamard", "clarkson_woodruff", "uniform"):
        spec = SketchSpec(kind, 24, 5)
        S = materialize_sketch(spec, 64)[:, :64]
        eps = embedding_epsilon(spec, A)
        z = np.vstack([np.eye(4), rng.standard_normal((10_000, 4))])
        Az = z @ A.T
        lhs = np.sum((Az @ S.T) ** 2, axis=1)
        rhs = np.sum(Az**2, axis=1)
        tol = 1e-10 * rhs
        assert np.all(lhs >= (1 - eps) * rhs - tol)
        assert np.all(lhs <= (1 + eps) * rhs + tol)


def test_epsilon_rank_deficient():
    a = np.arange(10.0)
    with pytest.raises(RankDeficientError):
        embedding_epsilon(np.eye(10), np.column_stack([a, a]))


# -- worst-case bounds -------------------------------------------------------------


def test_bounds_identity():
    d = make_data(n=30, p=3, seed=11)
    sd = identity_sketch(d)
    chk = check_worst_case_bounds(0.0, d.fit, beta_complete(sd))
    assert chk.bound_complete == 0.0
    assert chk.err_sq <= 1e-25
    assert chk.satisfied is True


def test_bounds_partial_not_applicable():
    d = make_data(n=30, p=3, seed=12)
    sd = sketch_dataset(d, SketchSpec("gaussian", 10, 1))
    e = all_estimates(sd, d)["partial"]
    chk = check_worst_case_bounds(0.6, d.fit, e)
    assert chk.bound_partial is None
    assert chk.to_dict()["bound_partial"] == "not applicable"
    assert chk.satisfied is None
    chk = check_worst_case_bounds(0.4, d.fit, e)
    assert chk.bound_partial == pytest.approx(4 * 0.16 * d.fit.mss / d.fit.sigma_min_x**2)
    assert chk.applicable == "partial"


# -- unconditional moments ----------------------------------------------------------


def test_unconditional_zero_cases():
    pm = PopulationModel(np.zeros(3), 0.0, 0.0)
    assert not unconditional_variance(pm, 100, 20, 3, np.eye(3), "partial_unbiased").matrix.any()
    pm = PopulationModel(np.ones(3), 1.0, 3.0)
    assert not unconditional_variance(pm, 3, 20, 3, np.eye(3), "complete").matrix.any()


def test_unconditional_tags():
    pm = PopulationModel(np.ones(2), 0.5, 1.0)
    v = unconditional_variance(pm, 100, 20, 2, np.eye(2), "complete")
    assert v.formula_tag == "sec5_complete"
    assert v.basis == "analytic_unconditional"
    w = unconditional_variance(pm, 100, 20, 2, np.eye(2), "partial_unbiased", moment=True)
    assert w.formula_tag == "sec5_partial_moment"
    with pytest.raises(ValueError):
        unconditional_variance(pm, 100, 20, 2, np.eye(2), "partial")


def test_population_model_validation():
    with pytest.raises(ValueError):
        PopulationModel(np.ones(2), -1.0, 0.0)


@pytest.mark.slow
def test_unconditional_double_monte_carlo():
    n, p, k, reps = 500, 4, 40, 5000
    d0, pm = synthetic_dataset(n, p, seed=15)
    X, xtx_inv = d0.X, d0.xtx_inv
    rng = np.random.default_rng(99)
    betas = {"complete": [], "partial_unbiased": []}
    for r in range(reps):
        y = X @ pm.beta0 + math.sqrt(pm.sigma2) * rng.standard_normal(n)
        d = Dataset(y, X)
        est = all_estimates(sketch_dataset(d, SketchSpec("gaussian", k, child_seed(5, r, "gaussian"))), d)
        for name in betas:
            betas[name].append(est[name].beta)
    for name, b in betas.items():
        cov, se = mc_cov_se(np.array(b))
        target = unconditional_variance(pm, n, k, p, xtx_inv, name, moment=True).matrix
        assert np.all(np.abs(cov - target) <= 3 * se), name


# -- distributional diagnostics ----------------------------------------------------


def test_normality_null_calibration():
    rng = np.random.default_rng(16)
    G = np.array([[2.0, 0.5, 0.0], [0.5, 1.0, 0.2], [0.0, 0.2, 0.5]])
    L = np.linalg.cholesky(G)
    trials, k = 1000, 40
    rej = sum(
        mahalanobis_normality_test(rng.standard_normal((k, 3)) @ L.T, G, 0.05, n=k).reject
        for _ in range(trials)
    )
    assert abs(rej / trials - 0.05) <= 0.02


def test_normality_cw_with_n_equal_k_rejects():
    rng = np.random.default_rng(17)
    n = k = 64
    A = rng.exponential(size=(n, 3))
    G = A.T @ A / n
    rej = 0
    for s in range(200):
        from sketchreg import apply_sketch
        rows = apply_sketch(A, SketchSpec("clarkson_woodruff", k, s))
        rej += mahalanobis_normality_test(rows, G, 0.05, n=n).reject
    assert rej / 200 > 0.5


@pytest.mark.slow
def test_normality_hadamard_near_nominal():
    d, _ = synthetic_dataset(4096, 4, seed=18)
    G = d.A.T @ d.A / d.n
    rej = 0
    for s in range(500):
        sd = sketch_dataset(d, SketchSpec("hadamard", 32, child_seed(18, s, "hadamard")))
        rej += mahalanobis_normality_test(sd, G, 0.05).reject
    assert abs(rej / 500 - 0.05) <= 0.05


def test_normality_singular_gram():
    with pytest.raises(DataError):
        mahalanobis_normality_test(np.ones((5, 2)), np.ones((2, 2)), n=5)


def test_diagnostics_outlier():
    rng = np.random.default_rng(19)
    X = rng.standard_normal((200, 3))
    X[0, 1] = 1e4
    diag = assumption_diagnostics(Dataset(rng.standard_normal(200), X))
    assert diag["max_leverage"] > 0.99
    assert diag["warning"] is True
    assert diag["threshold_note"] == "heuristic"


def test_diagnostics_iid_gaussian():
    rng = np.random.default_rng(20)
    X = rng.standard_normal((10_000, 5))
    diag = assumption_diagnostics(Dataset(X @ np.ones(5) + rng.standard_normal(10_000), X))
    assert diag["max_leverage"] < 0.02
    assert diag["warning"] is False


def test_diagnostics_duplicated_rows_halve_leverage():
    d = make_data(n=50, p=3, seed=21)
    dd = Dataset(np.concatenate([d.y, d.y]), np.vstack([d.X, d.X]))
    a, b = assumption_diagnostics(d), assumption_diagnostics(dd)
    assert b["max_leverage"] == pytest.approx(a["max_leverage"] / 2, rel=1e-10)
