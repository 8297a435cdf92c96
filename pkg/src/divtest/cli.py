"""Command-line experiment runner.

Every subcommand reads an optional TOML file (``--config``) whose keys are
the fields of :class:`ExperimentConfig`; any field can be overridden by a
flag of the same name (``--null-dist 0.7,0.3`` or ``--null_dist 0.7,0.3``).

Row output is CSV with a header; reports are JSON carrying a schema version
and the fully resolved config. With ``output_path`` set, CSV goes to that file
and the JSON report to the same path with a ``.json`` suffix; otherwise both
go to stdout.

Exit codes: 0 ok/PASS, 1 FAIL verdict, 2 config error, 3 budget exceeded,
4 math-domain error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .asymptotics import (
    berry_esseen_sup,
    np_series,
    predict_divergence_test,
    predict_np,
    residual_verdict,
    second_order_series,
)
from .divergences import DivergenceSpec, chi_sq, pq_statistics
from .engine import (
    TestConfig,
    asymptotic_threshold,
    exact_calibrate,
    type1_exact,
    type1_mc,
    type2_exact,
    type2_mc,
)
from .errors import BudgetExceeded, DivtestError, MathDomainError, ValidationError
from .optimizer import brute_force_min, ell, feasibility_data, kkt_minimize, round_to_type, rounding_checks
from .simplex import SeededSource, make_distribution

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

SCHEMA_VERSION = 1
SEED_ENV = "DIVTEST_SEED"

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BUDGET, EXIT_MATH = 0, 1, 2, 3, 4


class ConfigError(ValidationError):
    """A config field is missing or invalid; the message names the field."""


@dataclass(frozen=True)
class ExperimentConfig:
    null_dist: tuple[float, ...] | None = None
    alt_dist: tuple[float, ...] | None = None
    divergence: str = "kl"
    alpha: float | None = None
    eps: float = 0.05
    n_grid: tuple[int, ...] = ()
    mode: str = "exact"
    trials: int = 10_000
    seed: int = 0
    output_path: str | None = None
    margin: float = 0.0
    r_tilde: float | None = None
    grid_step: float = 1e-3
    threads: int = 1
    prediction_dof: int | None = None

    def spec(self) -> DivergenceSpec:
        name = self.divergence.lower()
        try:
            if name == "kl":
                return DivergenceSpec.kl()
            if name == "chisq":
                return DivergenceSpec.chisq()
            if name in ("alpha", "renyi"):
                if self.alpha is None:
                    raise ConfigError(f"divergence: '{name}' needs the alpha field")
                make = DivergenceSpec.alpha_divergence if name == "alpha" else DivergenceSpec.renyi
                return make(self.alpha)
        except ConfigError:
            raise
        except ValidationError as exc:
            raise ConfigError(f"alpha: {exc}") from exc
        raise ConfigError(f"divergence: unknown divergence {self.divergence!r} (kl, alpha, renyi, chisq)")

    def null(self):
        return _dist("null_dist", self.null_dist)

    def alt(self):
        return _dist("alt_dist", self.alt_dist)


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_MODES = ("exact", "mc", "both")


def _dist(name: str, weights):
    if weights is None:
        raise ConfigError(f"{name}: required by this command")
    try:
        return make_distribution(weights)
    except ValidationError as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def _floats(name: str, value) -> tuple[float, ...]:
    items = value.split(",") if isinstance(value, str) else value
    try:
        return tuple(float(x) for x in items)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: expected a list of numbers, got {value!r}") from exc


def _ints(name: str, value) -> tuple[int, ...]:
    items = [x for x in value.split(",") if x.strip()] if isinstance(value, str) else value
    out = []
    for x in items:
        try:
            v = float(x)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{name}: expected integers, got {value!r}") from exc
        if v != int(v):
            raise ConfigError(f"{name}: {x!r} is not an integer")
        out.append(int(v))
    return tuple(out)


def _scalar(name: str, value, kind):
    try:
        if kind is int:
            v = float(value)
            if v != int(v):
                raise ValueError
            return int(v)
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: cannot parse {value!r}") from exc


_PARSERS: dict[str, Callable[[str, Any], Any]] = {
    "null_dist": _floats,
    "alt_dist": _floats,
    "n_grid": _ints,
    "divergence": lambda n, v: _scalar(n, v, str),
    "mode": lambda n, v: _scalar(n, v, str),
    "output_path": lambda n, v: _scalar(n, v, str),
    "alpha": lambda n, v: _scalar(n, v, float),
    "eps": lambda n, v: _scalar(n, v, float),
    "margin": lambda n, v: _scalar(n, v, float),
    "r_tilde": lambda n, v: _scalar(n, v, float),
    "grid_step": lambda n, v: _scalar(n, v, float),
    "trials": lambda n, v: _scalar(n, v, int),
    "seed": lambda n, v: _scalar(n, v, int),
    "threads": lambda n, v: _scalar(n, v, int),
    "prediction_dof": lambda n, v: _scalar(n, v, int),
}


def _validate(cfg: ExperimentConfig) -> None:
    if not 0.0 < cfg.eps < 1.0:
        raise ConfigError(f"eps: must lie in (0, 1), got {cfg.eps!r}")
    if cfg.mode not in _MODES:
        raise ConfigError(f"mode: must be one of {', '.join(_MODES)}, got {cfg.mode!r}")
    if any(n < 1 for n in cfg.n_grid):
        raise ConfigError("n_grid: sample sizes must be >= 1")
    if any(b <= a for a, b in zip(cfg.n_grid, cfg.n_grid[1:])):
        raise ConfigError("n_grid: must be strictly increasing")
    if cfg.trials < 1:
        raise ConfigError("trials: must be >= 1")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed: must be a 64-bit unsigned integer")
    if cfg.threads < 1:
        raise ConfigError("threads: must be >= 1")
    if not 0.0 <= cfg.margin < cfg.eps:
        raise ConfigError(f"margin: must satisfy 0 <= margin < eps, got {cfg.margin!r}")
    if cfg.r_tilde is not None and not cfg.r_tilde > 0:
        raise ConfigError("r_tilde: must be > 0")
    if not 0.0 < cfg.grid_step <= 0.1:
        raise ConfigError("grid_step: must lie in (0, 0.1]")
    if cfg.prediction_dof is not None and cfg.prediction_dof < 1:
        raise ConfigError("prediction_dof: must be >= 1")
    cfg.spec()


def resolve_config(args: argparse.Namespace, environ=os.environ) -> ExperimentConfig:
    """Merge TOML file, flags and environment into a validated config."""
    raw: dict[str, Any] = {}
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config: invalid TOML: {exc}") from exc
        unknown = sorted(set(raw) - set(_FIELDS))
        if unknown:
            raise ConfigError(f"{unknown[0]}: unknown config field")
    for name in _FIELDS:
        flag = getattr(args, name, None)
        if flag is not None:
            raw[name] = flag
    if "seed" not in raw and environ.get(SEED_ENV):
        raw["seed"] = environ[SEED_ENV]
    values = {name: _PARSERS[name](name, value) for name, value in raw.items()}
    cfg = ExperimentConfig(**values)
    _validate(cfg)
    return cfg


def _need_grid(cfg: ExperimentConfig, minimum: int = 1) -> tuple[int, ...]:
    if len(cfg.n_grid) < minimum:
        what = "must not be empty" if minimum == 1 else f"needs at least {minimum} points"
        raise ConfigError(f"n_grid: {what}")
    return cfg.n_grid


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return "" if value is None else str(value)


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, frozenset, set)):
        items = sorted(value) if isinstance(value, (set, frozenset)) else value
        return [_jsonable(v) for v in items]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    return value


def _report_text(cfg: ExperimentConfig, command: str, body: dict) -> str:
    report = {"schema_version": SCHEMA_VERSION, "command": command, "divtest_version": __version__,
              "config": asdict(cfg), **body}
    return json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"


def _emit(cfg: ExperimentConfig, csv_text: str | None, json_text: str | None, out) -> None:
    if cfg.output_path:
        path = Path(cfg.output_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        if csv_text is not None:
            path.write_text(csv_text)
        if json_text is not None:
            path.with_suffix(".json").write_text(json_text)
        return
    for text in (csv_text, json_text):
        if text is not None:
            out.write(text)


def _pmap(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def cmd_calibrate(cfg: ExperimentConfig, out) -> int:
    spec, p0 = cfg.spec(), cfg.null()
    grid = _need_grid(cfg)

    def row(n):
        cal = exact_calibrate(spec, p0, n, cfg.eps)
        r_asym = asymptotic_threshold(spec, p0.k, n, cfg.eps, cfg.margin)
        return [n, cfg.eps, cal.r_star, cal.achieved_type1, r_asym]

    rows = _pmap(row, grid, cfg.threads)
    _emit(cfg, _csv_text(["n", "eps", "r_star", "achieved_type1", "r_asymptotic"], rows), None, out)
    return EXIT_OK


def cmd_errors(cfg: ExperimentConfig, out) -> int:
    spec, p0, q = cfg.spec(), cfg.null(), cfg.alt()
    grid = _need_grid(cfg)
    exact = cfg.mode in ("exact", "both")
    mc = cfg.mode in ("mc", "both")

    def row(idx_n):
        idx, n = idx_n
        if exact:
            r, source = exact_calibrate(spec, p0, n, cfg.eps).r_star, "exact"
        else:
            r, source = asymptotic_threshold(spec, p0.k, n, cfg.eps, cfg.margin), "asymptotic"
        test = TestConfig(spec, r, p0)
        vals: list[Any] = [n, source, r]
        if exact:
            a, b = type1_exact(test, n), type2_exact(test, q, n)
            vals += [a.value, b.value, b.ln_value]
        if mc:
            src = SeededSource(cfg.seed, 2 * idx)
            a_mc = type1_mc(test, n, cfg.trials, src)
            b_mc = type2_mc(test, q, n, cfg.trials, SeededSource(cfg.seed, 2 * idx + 1))
            vals += [a_mc.estimate, a_mc.ci_low, a_mc.ci_high, b_mc.estimate, b_mc.ci_low, b_mc.ci_high]
        return vals

    header = ["n", "r_source", "r"]
    if exact:
        header += ["type1_exact", "type2_exact", "ln_type2_exact"]
    if mc:
        header += ["type1_mc", "type1_ci_low", "type1_ci_high", "type2_mc", "type2_ci_low", "type2_ci_high"]
    rows = _pmap(row, list(enumerate(grid)), cfg.threads)
    _emit(cfg, _csv_text(header, rows), None, out)
    return EXIT_OK


def cmd_predict(cfg: ExperimentConfig, out) -> int:
    p, q = cfg.null(), cfg.alt()
    rows = []
    for n in _need_grid(cfg):
        div = predict_divergence_test(p, q, n, cfg.eps, dof=cfg.prediction_dof)
        lrt = predict_np(p, q, n, cfg.eps)
        rows.append([n, div.first_order, div.second_order, div.predicted_minus_ln_beta,
                     lrt.second_order, lrt.predicted_minus_ln_beta])
    header = ["n", "first_order", "divergence_second_order", "divergence_prediction",
              "np_second_order", "np_prediction"]
    _emit(cfg, _csv_text(header, rows), None, out)
    return EXIT_OK


def cmd_verify_asymptotics(cfg: ExperimentConfig, out) -> int:
    spec, p, q = cfg.spec(), cfg.null(), cfg.alt()
    grid = _need_grid(cfg, minimum=4)
    series = second_order_series(spec, p, q, cfg.eps, grid, dof=cfg.prediction_dof, threads=cfg.threads)
    verdict = residual_verdict(series, p, q, cfg.eps)
    rows = [[int(n), e, pr, r, s] for n, e, pr, r, s in
            zip(series.n, series.exact, series.predicted, series.residual, series.residual / np.sqrt(series.n))]
    header = ["n", "exact_minus_ln_beta", "predicted", "residual", "residual_over_sqrt_n"]
    body = {
        "verdict": "PASS" if verdict.passed else "FAIL",
        "checks": verdict.checks,
        "fit": {"const": series.coef_const, "ln_n": series.coef_ln, "sqrt_n": series.coef_sqrt},
        "details": verdict.details,
    }
    _emit(cfg, _csv_text(header, rows), _report_text(cfg, "verify-asymptotics", body), out)
    return EXIT_OK if verdict.passed else EXIT_FAIL


def cmd_berry_esseen(cfg: ExperimentConfig, out) -> int:
    spec, p0 = cfg.spec(), cfg.null()
    grid = _need_grid(cfg)
    sups = _pmap(lambda n: berry_esseen_sup(spec, p0, n), grid, cfg.threads)
    rows = [[n, s, math.sqrt(n) * s] for n, s in zip(grid, sups)]
    _emit(cfg, _csv_text(["n", "sup_distance", "sqrt_n_sup_distance"], rows), None, out)
    return EXIT_OK


def cmd_optimizer_check(cfg: ExperimentConfig, out) -> int:
    p, q = cfg.null(), cfg.alt()
    st = pq_statistics(p, q)
    feas = feasibility_data(p, q)
    r = cfg.r_tilde if cfg.r_tilde is not None else 0.25 * st.V / feas.tau**2
    sol = kkt_minimize(p, q, r)
    g = sol.gamma_star.probs
    pv = p.probs
    stationarity = st.alphas + 2.0 * sol.lambda0 * (g / pv - 1.0) + sol.mu
    brute_value, brute_point = brute_force_min(p, q, r, cfg.grid_step)
    lipschitz = float(np.max(np.abs(st.alphas))) * math.sqrt(p.k) * cfg.grid_step
    checks = {
        "positive": bool(np.all(g > 0)),
        "on_boundary": abs(chi_sq(g, pv) - r) <= 1e-10,
        "analytic_minimum": abs(ell(g, pv, st.alphas) - sol.min_value) <= 1e-10,
        "stationarity": float(np.max(np.abs(stationarity))) <= 1e-10,
        "brute_force_above": brute_value >= sol.min_value - 1e-12,
        "brute_force_close": brute_value <= sol.min_value + lipschitz,
    }
    rounding = []
    for n in cfg.n_grid:
        rt = round_to_type(p, q, n, r)
        rc = rounding_checks(p, rt, n, r)
        checks.update({f"rounding_n{n}_{k}": v for k, v in rc.items()})
        rounding.append({"n": n, "t_star": list(rt.t_star.counts), "case": rt.case, "m": rt.m,
                         "c_prime": rt.c_prime, "kappa_bound": rt.kappa_bound, "ell_gap": rt.ell_gap,
                         "permutation": list(rt.permutation)})
    body = {
        "r_tilde": r,
        "kkt": {"gamma_star": g, "min_value": sol.min_value, "tau": sol.tau, "index_set_I": sol.index_set_I,
                "value_set_B": sol.value_set_B, "lambda0": sol.lambda0, "mu": sol.mu},
        "brute_force": {"value": brute_value, "argmin": brute_point, "tolerance": lipschitz},
        "rounding": rounding,
        "checks": checks,
        "verdict": "PASS" if all(checks.values()) else "FAIL",
    }
    _emit(cfg, None, _report_text(cfg, "optimizer-check", body), out)
    return EXIT_OK if all(checks.values()) else EXIT_FAIL


def cmd_sweep(cfg: ExperimentConfig, out) -> int:
    """Exact -ln beta of the divergence and likelihood-ratio tests next to their predictions."""
    spec, p, q = cfg.spec(), cfg.null(), cfg.alt()
    grid = _need_grid(cfg)

    def row(n):
        cal = exact_calibrate(spec, p, n, cfg.eps)
        beta = type2_exact(TestConfig(spec, cal.r_star, p), q, n)
        return n, cal.r_star, cal.achieved_type1, -beta.ln_value

    div_rows = _pmap(row, grid, cfg.threads)
    lrt_rows = np_series(p, q, cfg.eps, grid, threads=cfg.threads)
    rows = []
    for (n, r, a, div_exact), (_, np_exact, np_pred) in zip(div_rows, lrt_rows):
        div_pred = predict_divergence_test(p, q, n, cfg.eps, dof=cfg.prediction_dof).predicted_minus_ln_beta
        rows.append([n, r, a, div_exact, div_pred, np_exact, np_pred, np_exact - div_exact, np_pred - div_pred])
    header = ["n", "r_star", "achieved_type1", "divergence_exact", "divergence_predicted",
              "np_exact", "np_predicted", "exact_gap", "predicted_gap"]
    _emit(cfg, _csv_text(header, rows), None, out)
    return EXIT_OK


COMMANDS: dict[str, tuple[Callable[[ExperimentConfig, Any], int], str]] = {
    "calibrate": (cmd_calibrate, "exact and asymptotic thresholds per n"),
    "errors": (cmd_errors, "exact and/or Monte Carlo type-I/II errors per n"),
    "predict": (cmd_predict, "second-order predictions of -ln beta"),
    "verify-asymptotics": (cmd_verify_asymptotics, "residual fit against the second-order law"),
    "berry-esseen": (cmd_berry_esseen, "sup distance of the null law to chi-squared"),
    "optimizer-check": (cmd_optimizer_check, "ball minimiser, grid oracle and rounding checks"),
    "sweep": (cmd_sweep, "divergence test vs likelihood-ratio test over n"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="divtest", description="Divergence-based hypothesis test experiments.")
    parser.add_argument("--version", action="version", version=f"divtest {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="TOML file with experiment fields")
        # flags are parsed as strings and converted like TOML values
        for field_name in _FIELDS:
            flags = dict.fromkeys([f"--{field_name.replace('_', '-')}", f"--{field_name}"])
            sp.add_argument(*flags, dest=field_name, default=None)
    return parser


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    handler = COMMANDS[args.command][0]
    try:
        cfg = resolve_config(args)
        return handler(cfg, out)
    except ValidationError as exc:
        print(f"divtest: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceeded as exc:
        print(f"divtest: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except MathDomainError as exc:
        print(f"divtest: math domain error: {exc}", file=sys.stderr)
        return EXIT_MATH
    except DivtestError as exc:  # pragma: no cover - every subclass is handled above
        print(f"divtest: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
