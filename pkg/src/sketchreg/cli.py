"""Command-line front end: ``sketchreg {sketch,fit,diagnose,experiment}``.

Exit codes: 0 success, 2 usage or configuration error, 3 data or numerical
error. All randomness comes from ``--seed`` (or the config's master seed).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .dataset import Dataset, load_csv
from .errors import ConfigError, SketchRegError
from .estimators import (
    FullMoments,
    SketchedGram,
    beta_combined,
    beta_complete,
    beta_full,
    beta_onestep,
    beta_partial,
    beta_partial_unbiased,
    phi_opt,
)
from .inference import (
    VarianceReport,
    assumption_diagnostics,
    check_worst_case_bounds,
    ci_complete,
    ci_partial,
    embedding_epsilon,
    mahalanobis_normality_test,
    var_complete_plugin,
    var_partial_plugin,
)
from .montecarlo import SUITES, ExperimentConfig, format_number, oracle_phi, run_suite
from .rng import child_seed
from .sketches import (
    OBLIVIOUS,
    SketchSpec,
    canonical_kind,
    leverage_weights,
    materialize_sketch,
    sketch_dataset,
    sketch_size_table,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 2, 3
METHODS = ("gaussian", "hadamard", "cw", "uniform", "leverage")
METHOD_ALIASES = ("clarkson_woodruff", "countsketch", "srht", "leverage_aware")
ESTIMATOR_FLAGS = {
    "s": "complete",
    "p": "partial",
    "pstar": "partial_unbiased",
    "combined": "combined",
    "onestep": "one_step",
    "full": "full",
}


class UsageError(Exception):
    """A flag combination that argparse cannot check on its own."""


# -- argument parsing -------------------------------------------------------


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return v


def _open_unit(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1), got {text!r}")
    return v


def _phi(text: str):
    if text in ("oracle", "plugin"):
        return text
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("phi must be 'oracle', 'plugin' or a number") from None
    if not 0 <= v <= 1:
        raise argparse.ArgumentTypeError("phi must lie in [0, 1]")
    return v


def _int_list(text: str) -> list[int]:
    try:
        return [_positive_int(t) for t in text.split(",") if t]
    except argparse.ArgumentTypeError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}: {exc}") from None


def _str_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=None, help="master seed (default 0)")
    common.add_argument("-o", "--output", help="output path (default: standard output)")
    common.add_argument("--format", choices=("json", "csv"), default=None)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--input", required=True, help="CSV file with a header row")
    data.add_argument("--response", required=True, help="name of the response column")
    data.add_argument("--intercept", action="store_true", help="prepend a column of ones")
    data.add_argument(
        "--method", required=True, choices=METHODS + METHOD_ALIASES, metavar="{" + "|".join(METHODS) + "}"
    )
    data.add_argument("--k", type=_positive_int, required=True, help="sketch size")

    parser = argparse.ArgumentParser(
        prog="sketchreg", description="Sketched least-squares regression."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sketch", parents=[common, data], help="write a sketched dataset")
    p.add_argument("--materialize", action="store_true", help="write the dense k x n matrix S instead")

    p = sub.add_parser("fit", parents=[common, data], help="fit a sketched estimator")
    p.add_argument("--estimator", choices=tuple(ESTIMATOR_FLAGS), default="s")
    p.add_argument("--alpha", type=_open_unit, default=0.05)
    p.add_argument("--phi", type=_phi, default="plugin")

    p = sub.add_parser("diagnose", parents=[common, data], help="embedding and normality diagnostics")
    p.add_argument("--reps", type=_positive_int, default=None, help="sketches for the epsilon summary")
    p.add_argument("--alpha", type=_open_unit, default=0.05)
    p.add_argument("--epsilon", type=float, default=0.5, help="target epsilon for the size table")
    p.add_argument("--delta", type=_open_unit, default=0.1, help="failure probability for the size table")

    p = sub.add_parser("experiment", parents=[common], help="run a Monte Carlo suite")
    p.add_argument("--suite", choices=SUITES, required=True)
    p.add_argument("--config", help="ExperimentConfig JSON file or bundled config name")
    p.add_argument("--out", help="report path (alias of --output)")
    p.add_argument("--records", help="write per-replication CSV here")
    p.add_argument("--curves", help="write tidy curve CSV here")
    p.add_argument("--parallelism", type=int, default=None)
    p.add_argument("--synthetic-n", type=_positive_int)
    p.add_argument("--synthetic-p", type=_positive_int)
    p.add_argument("--noise-var", type=float)
    p.add_argument("--kinds", type=_str_list)
    p.add_argument("--k-values", type=_int_list)
    p.add_argument("--n-values", type=_int_list)
    p.add_argument("--estimators", type=_str_list)
    p.add_argument("--replications", type=_positive_int)
    p.add_argument("--alpha", type=_open_unit)
    p.add_argument("--phi", type=_phi)
    return parser


# -- helpers ---------------------------------------------------------------


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _matrix_csv(M: np.ndarray, header: list[str] | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header is not None:
        w.writerow(header)
    for row in M:
        w.writerow([format_number(float(v)) for v in row])
    return buf.getvalue()


def _load(args) -> Dataset:
    return load_csv(args.input, args.response, intercept=args.intercept)


def _spec(args) -> SketchSpec:
    return SketchSpec(canonical_kind(args.method), args.k, args.seed)


def _weights(spec: SketchSpec, d: Dataset):
    return leverage_weights(d.A) if spec.kind == "leverage_aware" else None


def _data_info(d: Dataset) -> dict:
    return {"n": d.n, "p": d.p, "names": list(d.names), "fingerprint": d.fingerprint}


# -- subcommands ------------------------------------------------------------


def cmd_sketch(args) -> int:
    if args.format == "json":
        raise UsageError("sketch writes CSV only")
    d = _load(args)
    spec = _spec(args)
    w = _weights(spec, d)
    if args.materialize:
        S = materialize_sketch(spec, d.n, w)
        _emit(_matrix_csv(S), args.output)
        return EXIT_OK
    sd = sketch_dataset(d, spec, w)
    _emit(_matrix_csv(sd.A_tilde, ["y_tilde", *d.names]), args.output)
    return EXIT_OK


def _combined_variance(v_s: VarianceReport, v_p: VarianceReport, phi: float) -> VarianceReport:
    return VarianceReport(phi**2 * v_s.matrix + (1 - phi) ** 2 * v_p.matrix, "plugin", "plugin_combined")


def cmd_fit(args) -> int:
    if args.format == "csv":
        raise UsageError("fit writes JSON only")
    d = _load(args)
    name = ESTIMATOR_FLAGS[args.estimator]
    out = {"data": _data_info(d), "estimator": name}
    diag = assumption_diagnostics(d)
    if name == "full":
        out.update(estimate=beta_full(d).to_dict(), intervals=None, variance=None)
        out["diagnostics"] = {"max_leverage": diag["max_leverage"], "leverage_warning": diag["warning"]}
        _emit(_json(out), args.output)
        return EXIT_OK

    spec = _spec(args)
    w = _weights(spec, d)
    sd = sketch_dataset(d, spec, w)
    fm = FullMoments.from_dataset(d)
    g = SketchedGram(sd.x_tilde)
    e_s = beta_complete(sd, g)
    variance = intervals = None
    if name == "complete":
        est = e_s
        variance = var_complete_plugin(sd, e_s, g)
        intervals = ci_complete(sd, e_s, args.alpha, gram=g)
    elif name == "partial":
        est = beta_partial(sd, fm, g)
    elif name == "one_step":
        est = beta_onestep(e_s, sd, d, g)
    else:
        e_p = beta_partial_unbiased(sd, fm, g)
        v_p = var_partial_plugin(sd, e_p, fm, g)
        if name == "partial_unbiased":
            est, variance = e_p, v_p
        else:
            v_s = var_complete_plugin(sd, e_s, g)
            if args.phi == "oracle":
                phi = oracle_phi(d, sd.k)
            elif args.phi == "plugin":
                phi = phi_opt(v_s.trace, v_p.trace)
            else:
                phi = args.phi
            est = beta_combined(e_s, e_p, phi)
            variance = _combined_variance(v_s, v_p, phi)
            out["phi"] = {"mode": args.phi if isinstance(args.phi, str) else "value", "value": phi}
        intervals = ci_partial(est, variance, args.alpha)
    out["estimate"] = est.to_dict()
    out["intervals"] = intervals.to_dict() if intervals is not None else None
    out["variance"] = variance.to_dict() if variance is not None else None
    out["diagnostics"] = {
        "epsilon": embedding_epsilon(spec, d.A, w),
        "max_leverage": diag["max_leverage"],
        "leverage_warning": diag["warning"],
        "rank_deficient": g.rank_deficient,
    }
    _emit(_json(out), args.output)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    if args.format == "csv":
        raise UsageError("diagnose writes JSON only")
    if not 0 < args.epsilon <= 1:
        raise UsageError("--epsilon must lie in (0, 1]")
    d = _load(args)
    spec = _spec(args)
    w = _weights(spec, d)
    sd = sketch_dataset(d, spec, w)
    eps = embedding_epsilon(spec, d.A, w)
    fm = FullMoments.from_dataset(d)
    g = SketchedGram(sd.x_tilde)
    bounds = {
        "complete": check_worst_case_bounds(eps, d.fit, beta_complete(sd, g)).to_dict(),
        "partial": check_worst_case_bounds(eps, d.fit, beta_partial(sd, fm, g)).to_dict(),
    }
    diag = assumption_diagnostics(d)
    normality = mahalanobis_normality_test(sd, d.A.T @ d.A / d.n, args.alpha)
    out = {
        "data": _data_info(d),
        "spec": spec.to_dict(),
        "epsilon": eps,
        "max_leverage": diag["max_leverage"],
        "gram_condition": diag["gram_condition"],
        "leverage_warning": diag["warning"],
        "leverage_threshold": {"value": diag["threshold"], "note": diag["threshold_note"]},
        "bounds": bounds,
        "normality": normality.to_dict(),
        "recommended_k": sketch_size_table(d.d, d.n, args.epsilon, args.delta),
    }
    if spec.kind not in OBLIVIOUS:
        out["recommended_k"]["note"] = "size rules cover the oblivious kinds only"
    if args.reps:
        eps_all = np.array(
            [
                embedding_epsilon(
                    SketchSpec(spec.kind, spec.k, child_seed(args.seed, r, spec.kind)), d.A, w
                )
                for r in range(args.reps)
            ]
        )
        out["epsilon_summary"] = {
            "reps": args.reps,
            "median": float(np.quantile(eps_all, 0.5)),
            "q95": float(np.quantile(eps_all, 0.95)),
            "max": float(eps_all.max()),
            "fraction_below_half": float(np.mean(eps_all < 0.5)),
        }
    _emit(_json(out), args.output)
    return EXIT_OK


def bundled_configs() -> list[str]:
    return sorted(
        p.name[:-5] for p in resources.files("sketchreg").joinpath("configs").iterdir()
        if p.name.endswith(".json")
    )


def _read_config(ref: str) -> tuple[dict, Path | None]:
    path = Path(ref)
    if path.is_file():
        text, base = path.read_text(), path.parent
    else:
        res = resources.files("sketchreg").joinpath("configs", ref.removesuffix(".json") + ".json")
        if not res.is_file():
            raise ConfigError(f"config {ref!r} not found (bundled: {', '.join(bundled_configs())})")
        text, base = res.read_text(), None
    try:
        return json.loads(text), base
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {ref!r} is not valid JSON: {exc}") from None


def cmd_experiment(args) -> int:
    raw, base = _read_config(args.config) if args.config else ({}, None)
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if args.synthetic_n or args.synthetic_p or args.noise_var is not None:
        src = dict(raw.get("source") or {"type": "synthetic"})
        if src.get("type") != "synthetic":
            raise ConfigError("--synthetic-* flags need a synthetic source")
        for key, val in (("n", args.synthetic_n), ("p", args.synthetic_p), ("noise_var", args.noise_var)):
            if val is not None:
                src[key] = val
        raw["source"] = src
    overrides = {
        "kinds": args.kinds,
        "k_values": args.k_values,
        "n_values": args.n_values,
        "estimators": args.estimators,
        "replications": args.replications,
        "alpha": args.alpha,
        "phi": args.phi,
        "parallelism": args.parallelism,
    }
    raw.update({k: v for k, v in overrides.items() if v is not None})
    if args.seed is not None:
        raw["master_seed"] = args.seed
    cfg = ExperimentConfig.from_dict(raw)
    report = run_suite(args.suite, cfg, base)
    out_path = args.out or args.output
    if args.format == "csv":
        _emit(report.cells_csv(), out_path)
    else:
        _emit(report.to_json(canonical=args.suite != "timing"), out_path)
    if args.records:
        Path(args.records).write_text(report.records_csv())
    if args.curves:
        Path(args.curves).write_text(report.curves_csv())
    return EXIT_OK


COMMANDS = {
    "sketch": cmd_sketch,
    "fit": cmd_fit,
    "diagnose": cmd_diagnose,
    "experiment": cmd_experiment,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.seed is None and args.command != "experiment":
        args.seed = 0
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        parser.print_usage(sys.stderr)
        print(f"sketchreg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SketchRegError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"sketchreg: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"sketchreg: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
