"""Deterministic replication engine for sketched-regression experiments.

Every replication r of sketch kind t draws its sketch from
``child_seed(master_seed, r, t)``, so a replication's output depends only on
the config and its index. Replications may run on a thread pool; results are
merged by index and aggregated with ``math.fsum``, which is exactly rounded and
therefore independent of scheduling.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset, load_csv
from .errors import ConfigError, SketchRegError
from .estimators import (
    FullMoments,
    SketchedGram,
    beta_combined,
    beta_complete,
    beta_onestep,
    beta_partial,
    beta_partial_unbiased,
    phi_opt,
)
from .inference import (
    PopulationModel,
    ci_complete,
    ci_partial,
    mahalanobis_normality_test,
    var_complete_moment,
    var_complete_plugin,
    var_partial,
    var_partial_plugin,
)
from .rng import child_seed, generator
from .sketches import (
    KINDS,
    SketchSpec,
    apply_sketch,
    canonical_kind,
    leverage_weights,
    sketch_dataset,
)

ESTIMATORS = ("full", "complete", "partial", "partial_unbiased", "combined", "one_step")
PARTIAL_FAMILY = ("partial", "partial_unbiased", "combined")
SUITES = ("mse", "coverage", "normality", "timing")
TARGETS = ("full_row", "residual")


# -- synthetic data ---------------------------------------------------------


def ar1_covariance(p: int, rho: float) -> np.ndarray:
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :]).astype(float)


def synthetic_dataset(
    n: int,
    p: int,
    seed: int,
    noise_var: float = 0.45,
    beta_var: float = 0.01,
    rho: float = 0.5,
) -> tuple[Dataset, PopulationModel]:
    """Gaussian design with AR(1) correlation rho^|i-j|, y = X beta0 + noise.

    Draw order from one Philox stream: the n x p standard normals behind X,
    then beta0 ~ N(0, beta_var), then noise ~ N(0, noise_var).
    """
    if n <= p:
        raise ValueError(f"need n > p, got n={n}, p={p}")
    if noise_var < 0 or beta_var < 0:
        raise ValueError("variances must be nonnegative")
    rng = generator(seed)
    chol = np.linalg.cholesky(ar1_covariance(p, rho))
    X = rng.standard_normal((n, p)) @ chol.T
    beta0 = rng.normal(0.0, math.sqrt(beta_var), size=p)
    y = X @ beta0 + rng.normal(0.0, math.sqrt(noise_var), size=n)
    return Dataset(y, X), PopulationModel.from_design(X, beta0, noise_var)


# -- configuration ----------------------------------------------------------

_SYNTH_DEFAULTS = {"seed": 0, "noise_var": 0.45, "beta_var": 0.01, "rho": 0.5}


@dataclass
class ExperimentConfig:
    """Experiment description, usually read from JSON.

    ``source`` is ``{"type": "synthetic", "n", "p", "seed", "noise_var",
    "beta_var", "rho"}`` or ``{"type": "csv", "path", "response",
    "intercept"}``. ``phi`` selects the combined-estimator weight:
    ``"oracle"`` (full-data variances), ``"plugin"`` (per-sketch estimates) or a
    number in [0, 1]. ``n_values`` is the subsample grid of the normality suite.
    ``parallelism`` 0 means one worker per CPU.
    """

    source: dict
    kinds: list = field(default_factory=lambda: ["gaussian"])
    k_values: list = field(default_factory=lambda: [40])
    estimators: list = field(default_factory=lambda: ["complete", "partial_unbiased"])
    replications: int = 100
    alpha: float = 0.05
    master_seed: int = 0
    parallelism: int = 1
    phi: object = "plugin"
    n_values: list | None = None
    timing_runs: int = 10
    store_betas: bool = True

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config field(s): {unknown}")
        if "source" not in raw:
            raise ConfigError("config needs a 'source'")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        return cls.from_dict(raw)

    def validate(self) -> None:
        src = self.source
        if not isinstance(src, dict) or src.get("type") not in ("synthetic", "csv"):
            raise ConfigError("source.type must be 'synthetic' or 'csv'")
        if src["type"] == "synthetic":
            extra = set(src) - {"type", "n", "p"} - set(_SYNTH_DEFAULTS)
            if extra:
                raise ConfigError(f"unknown synthetic source field(s): {sorted(extra)}")
            for key in ("n", "p"):
                if not _is_int(src.get(key)) or src[key] < 1:
                    raise ConfigError(f"source.{key} must be a positive integer")
            if src["n"] <= src["p"]:
                raise ConfigError("source.n must exceed source.p")
        else:
            extra = set(src) - {"type", "path", "response", "intercept"}
            if extra:
                raise ConfigError(f"unknown csv source field(s): {sorted(extra)}")
            if not isinstance(src.get("path"), str) or not isinstance(src.get("response"), str):
                raise ConfigError("csv source needs string 'path' and 'response'")
        if not isinstance(self.kinds, list) or not self.kinds:
            raise ConfigError("kinds must be a non-empty list")
        try:
            self.kinds = [canonical_kind(k) for k in self.kinds]
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from None
        if not isinstance(self.k_values, list) or not self.k_values:
            raise ConfigError("k_values must be a non-empty list")
        if not all(_is_int(k) and k >= 1 for k in self.k_values):
            raise ConfigError("k_values must be positive integers")
        if not isinstance(self.estimators, list) or not self.estimators:
            raise ConfigError("estimators must be a non-empty list")
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad:
            raise ConfigError(f"unknown estimator(s) {bad}; choose from {list(ESTIMATORS)}")
        if not _is_int(self.replications) or self.replications < 1:
            raise ConfigError("replications must be an integer >= 1")
        if not isinstance(self.alpha, (int, float)) or not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if not _is_int(self.master_seed) or not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be an integer in [0, 2^64)")
        if not _is_int(self.parallelism) or self.parallelism < 0:
            raise ConfigError("parallelism must be a nonnegative integer")
        if isinstance(self.phi, str):
            if self.phi not in ("oracle", "plugin"):
                raise ConfigError("phi must be 'oracle', 'plugin' or a number in [0, 1]")
        elif not isinstance(self.phi, (int, float)) or not 0 <= self.phi <= 1:
            raise ConfigError("phi must be 'oracle', 'plugin' or a number in [0, 1]")
        if self.n_values is not None:
            if not isinstance(self.n_values, list) or not all(
                _is_int(n) and n >= 2 for n in self.n_values
            ):
                raise ConfigError("n_values must be a list of integers >= 2")
        if not _is_int(self.timing_runs) or self.timing_runs < 10:
            raise ConfigError("timing_runs must be an integer >= 10")
        p = self.source.get("p") if self.source["type"] == "synthetic" else None
        if p is not None:
            self.check_k(p)

    def check_k(self, p: int) -> None:
        """k must exceed p, and p+3 whenever a partial-family estimator is requested."""
        need = 3 if any(e in PARTIAL_FAMILY for e in self.estimators) else 0
        low = [k for k in self.k_values if k <= p + need]
        if low:
            raise ConfigError(f"k values {low} must exceed p+{need} = {p + need}")

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.source["type"] == "csv":
            out["source"] = dict(self.source, path=Path(self.source["path"]).name)
        return out

    def workers(self) -> int:
        return self.parallelism or (os.cpu_count() or 1)


def _is_int(v) -> bool:
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def load_source(cfg: ExperimentConfig, base: str | Path | None = None):
    """Build the dataset named by ``cfg.source``; returns (Dataset, PopulationModel or None)."""
    src = cfg.source
    if src["type"] == "synthetic":
        kw = {**_SYNTH_DEFAULTS, **{k: v for k, v in src.items() if k != "type"}}
        return synthetic_dataset(**kw)
    path = Path(src["path"])
    if base is not None and not path.is_absolute():
        path = Path(base) / path
    return load_csv(path, src["response"], intercept=bool(src.get("intercept", False))), None


# -- report -----------------------------------------------------------------


@dataclass
class ExperimentReport:
    """Aggregated cells, per-replication records and metadata.

    ``timing`` holds wall-clock durations and is excluded from the canonical
    JSON, which is reproducible byte-for-byte for a fixed config.
    """

    suite: str
    config: dict
    metadata: dict
    cells: list = field(default_factory=list)
    records: list = field(default_factory=list)
    normality: list = field(default_factory=list)
    timing: dict | None = None

    def cell(self, **match) -> dict:
        hits = [c for c in self.cells if all(c.get(k) == v for k, v in match.items())]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} cells match {match}")
        return hits[0]

    def to_dict(self, canonical: bool = True, records: bool = False) -> dict:
        out = {
            "suite": self.suite,
            "config": self.config,
            "metadata": self.metadata,
            "cells": self.cells,
        }
        if self.normality:
            out["normality"] = self.normality
        if records:
            out["records"] = [_public_record(r) for r in self.records]
        if not canonical and self.timing is not None:
            out["timing"] = self.timing
        return out

    def to_json(self, canonical: bool = True, records: bool = False) -> str:
        return json.dumps(self.to_dict(canonical, records), indent=2, sort_keys=True) + "\n"

    def cells_csv(self) -> str:
        rows = []
        for c in self.cells:
            row = {k: v for k, v in c.items() if not isinstance(v, list)}
            rows.append(row)
        return _csv(rows)

    def records_csv(self) -> str:
        return _csv([_public_record(r, with_beta=False) for r in self.records])

    def curves_csv(self) -> str:
        """Tidy curves with columns n, k, kind, target, value."""
        rows = []
        if self.normality:
            for r in self.normality:
                rows.append(
                    {"n": r["n"], "k": r["k"], "kind": r["kind"], "target": r["target"],
                     "value": r["rejection_rate"]}
                )
        else:
            key = "coverage" if self.suite == "coverage" else "mse_mean"
            if self.suite == "timing":
                key = "timing_mean_seconds"
            for c in self.cells:
                rows.append(
                    {"n": self.metadata.get("n"), "k": c["k"], "kind": c["kind"],
                     "target": c.get("estimator", "sketch"), "value": c.get(key)}
                )
        return _csv(rows, ["n", "k", "kind", "target", "value"])


def _public_record(r: dict, with_beta: bool = True) -> dict:
    out = {k: v for k, v in r.items() if k != "beta"}
    if with_beta and r.get("beta") is not None:
        out["beta"] = [float(b) for b in r["beta"]]
    return out


def format_number(v) -> str:
    """Shortest round-trip decimal text for floats; plain text otherwise."""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def _csv(rows: list[dict], columns: list[str] | None = None) -> str:
    if columns is None:
        columns = []
        for r in rows:
            columns.extend(c for c in r if c not in columns)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_number(r.get(c)) for c in columns])
    return buf.getvalue()


# -- engine -----------------------------------------------------------------


class _Context:
    """Read-only state shared by all replications of one experiment."""

    def __init__(self, cfg: ExperimentConfig, d: Dataset):
        self.cfg = cfg
        self.d = d
        self.fm = FullMoments.from_dataset(d)
        self.beta_f = d.fit.beta_f
        self.weights = {}
        if "leverage_aware" in cfg.kinds:
            self.weights["leverage_aware"] = leverage_weights(d.A)
        self.oracle_phi = {}
        if "combined" in cfg.estimators and cfg.phi == "oracle":
            for k in cfg.k_values:
                self.oracle_phi[k] = oracle_phi(d, k)


def oracle_phi(d: Dataset, k: int) -> float:
    """phi_opt from the exact Gaussian-sketch variances of beta_S and beta_P*."""
    fit = d.fit
    tr_s = var_complete_moment(fit.rss, k, d.p, d.xtx_inv).trace
    tr_p = var_partial(fit.mss, k, d.p, d.xtx_inv, fit.beta_f, corrected=True).trace
    return phi_opt(tr_s, tr_p)


def _replicate(ctx: _Context, kind: str, k: int, rep: int, coverage: bool) -> list[dict]:
    cfg, d = ctx.cfg, ctx.d
    seed = child_seed(cfg.master_seed, rep, kind)
    base = {"replication": rep, "kind": kind, "k": k, "seed": seed}

    def rec(estimator, beta=None, status="ok", **extra):
        r = dict(base, estimator=estimator, status=status)
        if beta is not None:
            diff = beta - ctx.beta_f
            r["err_sq"] = math.fsum(diff * diff)
            r["beta"] = np.array(beta) if cfg.store_betas else None
        else:
            r["err_sq"] = None
            r["beta"] = None
        r.update(extra)
        return r

    out = []
    if "full" in cfg.estimators:
        out.append(rec("full", ctx.beta_f, covered=None))
    sketched = [e for e in cfg.estimators if e != "full"]
    if not sketched:
        return out
    try:
        sd = sketch_dataset(d, SketchSpec(kind, k, seed), ctx.weights.get(kind))
        g = SketchedGram(sd.x_tilde)
        if g.rank_deficient:
            return out + [rec(e, status="rank_deficient") for e in sketched]
        est = {}
        e_s = beta_complete(sd, g)
        est["complete"] = e_s
        if "one_step" in sketched:
            est["one_step"] = beta_onestep(e_s, sd, d, g)
        if any(e in PARTIAL_FAMILY for e in sketched):
            est["partial"] = beta_partial(sd, ctx.fm, g)
            est["partial_unbiased"] = beta_partial_unbiased(sd, ctx.fm, g)
        phi = None
        if "combined" in sketched:
            if cfg.phi == "oracle":
                phi = ctx.oracle_phi[k]
            elif cfg.phi == "plugin":
                v_s = var_complete_plugin(sd, e_s, g).trace
                v_p = var_partial_plugin(sd, est["partial_unbiased"], ctx.fm, g).trace
                phi = phi_opt(v_s, v_p)
            else:
                phi = float(cfg.phi)
            est["combined"] = beta_combined(e_s, est["partial_unbiased"], phi)
        for name in sketched:
            extra = {}
            if name == "combined":
                extra["phi"] = phi
            if coverage:
                if name == "complete":
                    ci = ci_complete(sd, e_s, cfg.alpha, gram=g)
                else:
                    v = var_partial_plugin(sd, est[name], ctx.fm, g)
                    ci = ci_partial(est[name], v, cfg.alpha)
                extra["covered"] = int(np.sum(ci.covers(ctx.beta_f)))
                extra["method"] = ci.method
            out.append(rec(name, est[name].beta, **extra))
    except (SketchRegError, np.linalg.LinAlgError) as exc:
        out = [r for r in out if r["estimator"] == "full"]
        out += [rec(e, status=f"failed: {exc}") for e in sketched]
    return out


def _run_tasks(cfg: ExperimentConfig, tasks, fn) -> list:
    """Run ``fn`` over ``tasks`` and return results in task order."""
    workers = cfg.workers()
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _metadata(cfg: ExperimentConfig, d: Dataset, pm: PopulationModel | None) -> dict:
    meta = {
        "master_seed": cfg.master_seed,
        "replications": cfg.replications,
        "n": d.n,
        "p": d.p,
        "dataset_fingerprint": d.fingerprint,
        "r_squared": d.fit.r_squared,
        "beta_f": d.fit.beta_f.tolist(),
        "seeding": "child_seed = mix(master_seed, replication, kind_tag)",
    }
    if pm is not None:
        meta["population"] = {"sigma2": pm.sigma2, "gamma2": pm.gamma2}
    return meta


def _mean_se(values: list[float]) -> tuple[float, float]:
    m = len(values)
    mean = math.fsum(values) / m
    if m < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (m - 1)
    return mean, math.sqrt(var / m)


def _aggregate(ctx: _Context, records: list[dict], coverage: bool) -> list[dict]:
    cfg, p = ctx.cfg, ctx.d.p
    cells = []
    for kind in cfg.kinds:
        for k in cfg.k_values:
            for est in cfg.estimators:
                rows = [
                    r for r in records
                    if r["kind"] == kind and r["k"] == k and r["estimator"] == est
                ]
                ok = [r for r in rows if r["status"] == "ok"]
                cell = {
                    "kind": kind,
                    "k": k,
                    "estimator": est,
                    "replications_ok": len(ok),
                    "replications_failed": len(rows) - len(ok),
                }
                if ok:
                    cell["mse_mean"], cell["mse_se"] = _mean_se([r["err_sq"] for r in ok])
                    if cfg.store_betas:
                        betas = np.array([r["beta"] for r in ok])
                        mean = np.array([math.fsum(col) / len(ok) for col in betas.T])
                        cell["beta_mean"] = mean.tolist()
                        cell["bias"] = (mean - ctx.beta_f).tolist()
                        sd = betas.std(axis=0, ddof=1) if len(ok) > 1 else np.zeros(p)
                        cell["bias_se"] = (sd / math.sqrt(len(ok))).tolist()
                    if est == "combined":
                        cell["phi_mean"] = math.fsum(r["phi"] for r in ok) / len(ok)
                    if coverage and est != "full":
                        pairs = len(ok) * p
                        c = sum(r["covered"] for r in ok) / pairs
                        cell["coverage"] = c
                        cell["coverage_se"] = math.sqrt(c * (1 - c) / pairs)
                        cell["pairs"] = pairs
                        cell["method"] = ok[0]["method"]
                else:
                    cell["mse_mean"] = cell["mse_se"] = None
                cells.append(cell)
    return cells


def _replication_suite(cfg: ExperimentConfig, d, pm, coverage: bool) -> ExperimentReport:
    cfg.check_k(d.p)
    ctx = _Context(cfg, d)
    tasks = [
        (kind, k, rep)
        for kind in cfg.kinds
        for k in cfg.k_values
        for rep in range(cfg.replications)
    ]
    results = _run_tasks(cfg, tasks, lambda t: _replicate(ctx, *t, coverage=coverage))
    records = [r for batch in results for r in batch]
    meta = _metadata(cfg, d, pm)
    if "combined" in cfg.estimators:
        meta["phi_mode"] = cfg.phi if isinstance(cfg.phi, str) else "value"
        if ctx.oracle_phi:
            meta["phi_oracle"] = {str(k): v for k, v in ctx.oracle_phi.items()}
    return ExperimentReport(
        suite="coverage" if coverage else "mse",
        config=cfg.to_dict(),
        metadata=meta,
        cells=_aggregate(ctx, records, coverage),
        records=records,
    )


def run_mse_experiment(
    cfg: ExperimentConfig, data: tuple[Dataset, PopulationModel | None] | None = None
) -> ExperimentReport:
    """Squared error |beta_hat - beta_F|^2 per replication, with mean, SE and bias per cell.

    ``data`` overrides the configured source (useful when the dataset is
    already in memory).
    """
    d, pm = data if data is not None else load_source(cfg)
    return _replication_suite(cfg, d, pm, coverage=False)


def run_coverage_experiment(
    cfg: ExperimentConfig, data: tuple[Dataset, PopulationModel | None] | None = None
) -> ExperimentReport:
    """Pooled proportion of (replication, coefficient) intervals that contain beta_F.

    ``complete`` uses the exact-t interval for Gaussian sketches and the normal
    interval otherwise; ``partial_unbiased`` uses the normal interval with the
    plug-in variance.
    """
    bad = [e for e in cfg.estimators if e not in ("complete", "partial_unbiased")]
    if bad:
        raise ConfigError(f"coverage supports only complete and partial_unbiased, got {bad}")
    d, pm = data if data is not None else load_source(cfg)
    return _replication_suite(cfg, d, pm, coverage=True)


def run_normality_experiment(
    cfg: ExperimentConfig, data: tuple[Dataset, PopulationModel | None] | None = None
) -> ExperimentReport:
    """Rejection rates of the Mahalanobis/KS normality test per (n, k, kind, target).

    Each n uses the first n rows of one parent dataset. ``full_row`` tests the
    sketched rows [y~, X~]; ``residual`` tests S(y - X beta_F) with beta_F fitted
    on that subsample. Both targets share the same realized sketch.
    """
    d, pm = data if data is not None else load_source(cfg)
    n_values = cfg.n_values or [d.n]
    too_big = [n for n in n_values if n > d.n]
    if too_big:
        raise ConfigError(f"n values {too_big} exceed the parent dataset size {d.n}")
    rows = []
    for n in n_values:
        sub = d.head(n)
        resid = sub.y - sub.X @ sub.fit.beta_f
        stacked = np.column_stack([sub.A, resid])
        grams = {
            "full_row": sub.A.T @ sub.A / n,
            "residual": np.array([[resid @ resid / n]]),
        }
        weights = leverage_weights(sub.A) if "leverage_aware" in cfg.kinds else None
        for kind in cfg.kinds:
            for k in cfg.k_values:

                def one(rep, kind=kind, k=k):
                    spec = SketchSpec(kind, k, child_seed(cfg.master_seed, rep, kind))
                    w = weights if kind == "leverage_aware" else None
                    sk = apply_sketch(stacked, spec, w)
                    a = mahalanobis_normality_test(sk[:, :-1], grams["full_row"], cfg.alpha, n=n)
                    b = mahalanobis_normality_test(sk[:, -1:], grams["residual"], cfg.alpha, n=n)
                    return a.reject, b.reject

                res = _run_tasks(cfg, list(range(cfg.replications)), one)
                for t, target in enumerate(TARGETS):
                    rej = sum(r[t] for r in res)
                    rate = rej / len(res)
                    rows.append(
                        {
                            "n": n,
                            "k": k,
                            "kind": kind,
                            "target": target,
                            "rejections": rej,
                            "rejection_rate": rate,
                            "rejection_se": math.sqrt(rate * (1 - rate) / len(res)),
                            "replications": len(res),
                        }
                    )
    meta = _metadata(cfg, d, pm)
    meta["alpha"] = cfg.alpha
    return ExperimentReport("normality", cfg.to_dict(), meta, normality=rows)


def run_timing_experiment(
    cfg: ExperimentConfig,
    data: tuple[Dataset, PopulationModel | None] | None = None,
    groups: int = 5,
) -> ExperimentReport:
    """Wall-clock time to form S A per (kind, k).

    One warm-up sketch is discarded, then ``timing_runs`` sketches are timed
    with a monotonic clock. Runs are split into ``groups`` consecutive groups
    and the median of the group means is the headline figure. Timing runs are
    sequential regardless of ``parallelism``.
    """
    d, pm = data if data is not None else load_source(cfg)
    A = np.ascontiguousarray(d.A)
    weights = leverage_weights(A) if "leverage_aware" in cfg.kinds else None
    runs = cfg.timing_runs
    groups = max(1, min(groups, runs))
    cells, timing = [], {}
    for kind in cfg.kinds:
        for k in cfg.k_values:
            w = weights if kind == "leverage_aware" else None

            def sketch(rep, kind=kind, k=k, w=w):
                apply_sketch(A, SketchSpec(kind, k, child_seed(cfg.master_seed, rep, kind)), w)

            sketch(runs)
            times = []
            for rep in range(runs):
                t0 = time.perf_counter()
                sketch(rep)
                times.append(time.perf_counter() - t0)
            means = [float(np.mean(g)) for g in np.array_split(np.array(times), groups)]
            key = f"{kind}/{k}"
            timing[key] = {
                "kind": kind,
                "k": k,
                "runs": runs,
                "timing_mean_seconds": math.fsum(times) / runs,
                "timing_median_of_means_seconds": float(np.median(means)),
                "timing_min_seconds": min(times),
            }
            cells.append({"kind": kind, "k": k, "runs": runs})
    base = min(v["timing_median_of_means_seconds"] for v in timing.values())
    for v in timing.values():
        v["ratio_to_fastest"] = v["timing_median_of_means_seconds"] / base
    meta = _metadata(cfg, d, pm)
    meta["clock"] = "time.perf_counter, warm-up discarded, median of group means"
    return ExperimentReport("timing", cfg.to_dict(), meta, cells=cells, timing=timing)


def timing_table(report: ExperimentReport) -> dict:
    """Median-of-means seconds keyed by (kind, k)."""
    return {(v["kind"], v["k"]): v["timing_median_of_means_seconds"] for v in report.timing.values()}


def run_suite(suite: str, cfg: ExperimentConfig, base: str | Path | None = None) -> ExperimentReport:
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; choose from {list(SUITES)}")
    data = load_source(cfg, base)
    return {
        "mse": run_mse_experiment,
        "coverage": run_coverage_experiment,
        "normality": run_normality_experiment,
        "timing": run_timing_experiment,
    }[suite](cfg, data)


__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "KINDS",
    "load_source",
    "oracle_phi",
    "run_coverage_experiment",
    "run_mse_experiment",
    "run_normality_experiment",
    "run_suite",
    "run_timing_experiment",
    "synthetic_dataset",
    "timing_table",
]
