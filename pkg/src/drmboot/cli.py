"""Command-line front end.

CSV in, JSON/CSV out; every output is a deterministic function of the
input files, the configuration and the seed, independent of worker count.
Exit codes: 0 success, 2 configuration or input validation, 3 I/O,
4 fit failure, 5 bootstrap instability.
"""

from __future__ import annotations

import csv
import functools
import json
import os
import re
import sys

import click
import numpy as np

from .basis import BasisSpec
from .bootstrap import FunctionalSpec, bootstrap_run
from .errors import (
    BasisDomainError,
    BootstrapError,
    ConfigError,
    DrmError,
    EvaluationError,
    FitError,
)
from .estimators import cdf_estimate, quantile
from .likelihood import MultiSampleData
from .optimizer import DrmFit, fit_mele
from .simulation import (
    cdf_targets,
    coverage_experiment,
    quantile_targets,
    scenario_by_name,
    theta_targets,
)

__all__ = ["main", "load_csv"]

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_FIT = 4
EXIT_BOOTSTRAP = 5


def default_workers() -> int:
    env = os.environ.get("DRMBOOT_WORKERS", "").strip()
    if env:
        try:
            w = int(env)
            if w >= 1:
                return w
        except ValueError:
            pass
    return os.cpu_count() or 1


def load_csv(
    path, group_col: str, value_col: str, basis: BasisSpec, baseline=None
) -> MultiSampleData:
    """Read a long-format CSV into grouped samples.

    Groups are ordered by first appearance; ``baseline`` promotes one
    label to group 0.  Unparseable or domain-violating values are
    rejected with their file row number (header is row 1).
    """
    labels_in_order: list[str] = []
    by_label: dict[str, list[float]] = {}
    values: list[float] = []
    rows: list[int] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ConfigError(f"{path}: empty file")
        for col in (group_col, value_col):
            if col not in reader.fieldnames:
                raise ConfigError(
                    f"{path}: missing column {col!r}; has {reader.fieldnames}"
                )
        for lineno, rec in enumerate(reader, start=2):
            raw = rec.get(value_col)
            try:
                v = float(raw)
            except (TypeError, ValueError):
                raise ConfigError(
                    f"{path} row {lineno}: cannot parse value {raw!r}"
                ) from None
            if not np.isfinite(v):
                raise ConfigError(f"{path} row {lineno}: non-finite value {raw!r}")
            label = rec.get(group_col)
            if label is None:
                raise ConfigError(f"{path} row {lineno}: missing group label")
            if label not in by_label:
                by_label[label] = []
                labels_in_order.append(label)
            by_label[label].append(v)
            values.append(v)
            rows.append(lineno)
    if not values:
        raise ConfigError(f"{path}: no data rows")
    if len(labels_in_order) < 2:
        raise ConfigError(
            f"{path}: found a single group {labels_in_order}; need at least two"
        )
    try:
        basis.check_domain(values)
    except BasisDomainError as exc:
        raise ConfigError(
            f"{path} row {rows[exc.index]}: value {exc.value!r} outside basis "
            f"domain ({exc})"
        ) from None
    if baseline is not None:
        if baseline not in by_label:
            raise ConfigError(
                f"baseline {baseline!r} not among group labels {labels_in_order}"
            )
        labels_in_order.remove(baseline)
        labels_in_order.insert(0, baseline)
    return MultiSampleData.from_groups(
        [by_label[l] for l in labels_in_order], basis, labels=labels_in_order
    )


def _emit(obj, output):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def _error_report(kind, exc):
    click.echo(
        json.dumps({"error": kind, "message": str(exc)}, sort_keys=True),
        err=True,
    )


def _handled(fn):
    """Map package errors onto distinct exit codes with a JSON report."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except (ConfigError, BasisDomainError, ValueError) as exc:
            _error_report("config", exc)
            sys.exit(EXIT_CONFIG)
        except OSError as exc:
            _error_report("io", exc)
            sys.exit(EXIT_IO)
        except (FitError, EvaluationError) as exc:
            _error_report("fit", exc)
            sys.exit(EXIT_FIT)
        except BootstrapError as exc:
            _error_report("bootstrap", exc)
            sys.exit(EXIT_BOOTSTRAP)
        except DrmError as exc:
            _error_report("error", exc)
            sys.exit(1)

    return wrapper


def _load_config(path):
    if not path:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON config ({exc})") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return cfg


def _resolve(flag_value, cfg, key, default=None):
    if flag_value is not None and flag_value != ():
        return flag_value
    if key in cfg:
        v = cfg[key]
        return tuple(v) if isinstance(v, list) else v
    return default


def _data_from_options(cfg, input_, group_col, value_col, basis, baseline):
    input_ = _resolve(input_, cfg, "input")
    if not input_:
        raise ConfigError("no input file given (flag --input or config 'input')")
    group_col = _resolve(group_col, cfg, "group_col", "group")
    value_col = _resolve(value_col, cfg, "value_col", "value")
    basis = _resolve(basis, cfg, "basis")
    if basis is None:
        raise ConfigError("no basis given (flag --basis or config 'basis')")
    if isinstance(basis, str):
        spec = BasisSpec.from_json(basis)
    else:
        spec = BasisSpec.from_tokens(basis)
    baseline = _resolve(baseline, cfg, "baseline")
    return load_csv(input_, group_col, value_col, spec, baseline=baseline)


def _data_options(fn):
    fn = click.option("--config", type=click.Path(), default=None, help="JSON config file mirroring the CLI flags.")(fn)
    fn = click.option("--input", "input_", type=click.Path(), default=None, help="Input CSV file.")(fn)
    fn = click.option("--group-col", default=None, help="Group label column [default: group].")(fn)
    fn = click.option("--value-col", default=None, help="Observation column [default: value].")(fn)
    fn = click.option("--basis", default=None, help='Basis JSON, e.g. \'["const","x","log"]\'.')(fn)
    fn = click.option("--baseline", default=None, help="Group label to use as baseline (group 0).")(fn)
    fn = click.option("--output", type=click.Path(), default=None, help="Output path (stdout when omitted).")(fn)
    return fn


def _fit_payload(fit: DrmFit) -> dict:
    data = fit.data
    return {
        "basis": list(data.basis.tokens),
        "labels": list(data.labels),
        "sizes": [int(s) for s in data.sizes],
        "n": data.n,
        "theta": [[float(v) for v in row] for row in fit.theta_hat],
        "loglik": fit.loglik,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "grad_norm": fit.grad_norm,
    }


@click.group()
def main():
    """Multi-sample empirical-likelihood fitting under a density ratio
    link, with grouped-bootstrap confidence intervals."""


@main.command("fit")
@_data_options
@_handled
def fit_cmd(config, input_, group_col, value_col, basis, baseline, output):
    """Fit the model and report the parameter block with diagnostics."""
    cfg = _load_config(config)
    data = _data_from_options(cfg, input_, group_col, value_col, basis, baseline)
    fit = fit_mele(data)
    _emit(_fit_payload(fit), _resolve(output, cfg, "output"))


@main.command("bootstrap")
@_data_options
@click.option("--functional", "functionals", multiple=True, help="Functional spec, e.g. theta:1,2 cdf:0@4.0 quantile:1@0.5 dominance:0,1 (repeatable).")
@click.option("--b", "b_reps", type=int, default=None, help="Bootstrap replicates [default: 999].")
@click.option("--alpha", "alphas", multiple=True, type=float, help="CI levels (repeatable) [default: 0.05].")
@click.option("--seed", type=int, default=None, help="RNG seed [default: 0].")
@click.option("--workers", type=int, default=None, help="Parallel workers [default: DRMBOOT_WORKERS or CPU count].")
@click.option("--replicates-csv", type=click.Path(), default=None, help="Audit CSV of per-replicate functional values.")
@_handled
def bootstrap_cmd(config, input_, group_col, value_col, basis, baseline, output,
                  functionals, b_reps, alphas, seed, workers, replicates_csv):
    """Bootstrap confidence intervals for scalar functionals."""
    cfg = _load_config(config)
    data = _data_from_options(cfg, input_, group_col, value_col, basis, baseline)
    fn_texts = _resolve(functionals, cfg, "functionals")
    if not fn_texts:
        raise ConfigError("no functionals given (--functional or config)")
    fns = [FunctionalSpec.parse(t) for t in fn_texts]
    b_reps = int(_resolve(b_reps, cfg, "b", 999))
    alphas = tuple(float(a) for a in _resolve(alphas, cfg, "alphas", (0.05,)))
    for a in alphas:
        if not 0.0 < a < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {a}")
    seed = int(_resolve(seed, cfg, "seed", 0))
    workers = int(_resolve(workers, cfg, "workers", default_workers()))
    fit = fit_mele(data)
    if not fit.converged:
        raise FitError("fit did not converge; cannot bootstrap")
    summaries = bootstrap_run(data, fit, fns, b_reps, seed, alphas=alphas, workers=workers)
    payload = {
        "b": b_reps,
        "seed": seed,
        "alphas": list(alphas),
        "n_failed": summaries[0].B_failed if summaries else 0,
        "notes": list(summaries[0].notes) if summaries else [],
        "functionals": [
            {
                "label": s.functional.label,
                "estimate": s.xi_hat,
                "n_replicates": int(len(s.replicates)),
                "ci": {repr(a): [s.ci[a][0], s.ci[a][1]] for a in alphas},
            }
            for s in summaries
        ],
    }
    _emit(payload, _resolve(output, cfg, "output"))
    if replicates_csv:
        _write_replicates_csv(replicates_csv, summaries, b_reps)


def _write_replicates_csv(path, summaries, b_reps):
    ok_values = np.column_stack([s.replicates for s in summaries])
    index = summaries[0].replicate_index
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replicate"] + [s.functional.label for s in summaries])
        for i in range(ok_values.shape[0]):
            writer.writerow(
                [int(index[i])] + [repr(float(v)) for v in ok_values[i]]
            )


def _safe_name(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", label)


@main.command("cdf")
@_data_options
@click.option("--output-dir", type=click.Path(), default=".", help="Directory for per-group CDF CSV files.")
@_handled
def cdf_cmd(config, input_, group_col, value_col, basis, baseline, output, output_dir):
    """Export each group's estimated CDF as a two-column CSV."""
    cfg = _load_config(config)
    data = _data_from_options(cfg, input_, group_col, value_col, basis, baseline)
    fit = fit_mele(data)
    if not fit.converged:
        raise FitError("fit did not converge")
    os.makedirs(output_dir, exist_ok=True)
    written = []
    for r in range(data.m + 1):
        path = os.path.join(output_dir, f"cdf_{_safe_name(data.labels[r])}.csv")
        cdf_estimate(fit, r).to_csv(path)
        written.append(path)
    _emit({"files": written}, _resolve(output, cfg, "output"))


@main.command("quantile")
@_data_options
@click.option("--p", "ps", multiple=True, type=float, required=True, help="Quantile level in (0,1) (repeatable).")
@click.option("--b", "b_reps", type=int, default=None, help="Bootstrap replicates for CIs (0 disables) [default: 0].")
@click.option("--alpha", "alphas", multiple=True, type=float, help="CI levels [default: 0.05].")
@click.option("--seed", type=int, default=None, help="RNG seed [default: 0].")
@click.option("--workers", type=int, default=None, help="Parallel workers [default: DRMBOOT_WORKERS or CPU count].")
@_handled
def quantile_cmd(config, input_, group_col, value_col, basis, baseline, output,
                 ps, b_reps, alphas, seed, workers):
    """Estimated quantiles per group, optionally with bootstrap CIs."""
    cfg = _load_config(config)
    data = _data_from_options(cfg, input_, group_col, value_col, basis, baseline)
    fit = fit_mele(data)
    if not fit.converged:
        raise FitError("fit did not converge")
    b_reps = int(_resolve(b_reps, cfg, "b", 0))
    alphas = tuple(float(a) for a in _resolve(alphas, cfg, "alphas", (0.05,)))
    seed = int(_resolve(seed, cfg, "seed", 0))
    workers = int(_resolve(workers, cfg, "workers", default_workers()))
    records = []
    fns = [
        FunctionalSpec.quantile(r, p) for r in range(data.m + 1) for p in ps
    ]
    if b_reps > 0:
        summaries = bootstrap_run(data, fit, fns, b_reps, seed, alphas=alphas, workers=workers)
        for fn, s in zip(fns, summaries):
            records.append({
                "group": data.labels[fn.r],
                "p": fn.p,
                "estimate": s.xi_hat,
                "ci": {repr(a): [s.ci[a][0], s.ci[a][1]] for a in alphas},
            })
    else:
        cdfs = {r: cdf_estimate(fit, r) for r in range(data.m + 1)}
        for fn in fns:
            records.append({
                "group": data.labels[fn.r],
                "p": fn.p,
                "estimate": quantile(cdfs[fn.r], fn.p),
            })
    _emit({"quantiles": records, "b": b_reps, "seed": seed},
          _resolve(output, cfg, "output"))


@main.command("dominance")
@_data_options
@click.option("--b", "b_reps", type=int, default=None, help="Bootstrap replicates for CIs (0 disables) [default: 999].")
@click.option("--alpha", "alphas", multiple=True, type=float, help="CI levels [default: 0.05].")
@click.option("--seed", type=int, default=None, help="RNG seed [default: 0].")
@click.option("--workers", type=int, default=None, help="Parallel workers [default: DRMBOOT_WORKERS or CPU count].")
@_handled
def dominance_cmd(config, input_, group_col, value_col, basis, baseline, output,
                  b_reps, alphas, seed, workers):
    """Pairwise dominance index matrix with bootstrap CIs."""
    cfg = _load_config(config)
    data = _data_from_options(cfg, input_, group_col, value_col, basis, baseline)
    fit = fit_mele(data)
    if not fit.converged:
        raise FitError("fit did not converge")
    b_reps = int(_resolve(b_reps, cfg, "b", 999))
    alphas = tuple(float(a) for a in _resolve(alphas, cfg, "alphas", (0.05,)))
    seed = int(_resolve(seed, cfg, "seed", 0))
    workers = int(_resolve(workers, cfg, "workers", default_workers()))
    pairs = [
        (r, s) for r in range(data.m + 1) for s in range(data.m + 1) if r < s
    ]
    fns = [FunctionalSpec.dominance(r, s) for r, s in pairs]
    cells = []
    if b_reps > 0:
        summaries = bootstrap_run(data, fit, fns, b_reps, seed, alphas=alphas, workers=workers)
        for (r, s), summ in zip(pairs, summaries):
            cells.append({
                "row": data.labels[r],
                "col": data.labels[s],
                "estimate": summ.xi_hat,
                "ci": {repr(a): [summ.ci[a][0], summ.ci[a][1]] for a in alphas},
            })
    else:
        from .bootstrap import evaluate_functionals

        values = evaluate_functionals(fit, fns)
        for (r, s), v in zip(pairs, values):
            cells.append({
                "row": data.labels[r],
                "col": data.labels[s],
                "estimate": float(v),
            })
    _emit({"pairs": cells, "b": b_reps, "seed": seed},
          _resolve(output, cfg, "output"))


@main.command("simulate")
@click.option("--config", type=click.Path(), default=None, help="JSON config file mirroring the CLI flags.")
@click.option("--scenario", default=None, help="Scenario name: gamma1 or normal2 [default: gamma1].")
@click.option("--n-runs", type=int, default=None, help="Monte Carlo runs [default: 300].")
@click.option("--b", "b_reps", type=int, default=None, help="Bootstrap replicates per run [default: 399].")
@click.option("--alpha", type=float, default=None, help="CI level [default: 0.05].")
@click.option("--seed", type=int, default=None, help="RNG seed [default: 0].")
@click.option("--workers", type=int, default=None, help="Parallel workers.")
@click.option("--targets", default=None, help="Comma list from theta,quantile,cdf [default: theta].")
@click.option("--p-grid", default=None, help="Comma list of levels for quantile/cdf targets [default: 0.1,0.5,0.9].")
@click.option("--output", type=click.Path(), default=None, help="Coverage report JSON (stdout when omitted).")
@click.option("--csv", "csv_path", type=click.Path(), default=None, help="Coverage table CSV.")
@_handled
def simulate_cmd(config, scenario, n_runs, b_reps, alpha, seed, workers,
                 targets, p_grid, output, csv_path):
    """Monte Carlo coverage study of percentile bootstrap CIs."""
    cfg = _load_config(config)
    spec = scenario_by_name(_resolve(scenario, cfg, "scenario", "gamma1"))
    n_runs = int(_resolve(n_runs, cfg, "n_runs", 300))
    b_reps = int(_resolve(b_reps, cfg, "b", 399))
    alpha = float(_resolve(alpha, cfg, "alpha", 0.05))
    seed = int(_resolve(seed, cfg, "seed", 0))
    workers = int(_resolve(workers, cfg, "workers", default_workers()))
    raw_kinds = _resolve(targets, cfg, "targets", "theta")
    kinds = (
        list(raw_kinds)
        if isinstance(raw_kinds, (list, tuple))
        else str(raw_kinds).split(",")
    )
    raw_ps = _resolve(p_grid, cfg, "p_grid", "0.1,0.5,0.9")
    ps = [
        float(t)
        for t in (
            raw_ps if isinstance(raw_ps, (list, tuple)) else str(raw_ps).split(",")
        )
    ]
    fns = []
    for kind in kinds:
        kind = kind.strip().lower()
        if kind == "theta":
            fns.extend(theta_targets(spec))
        elif kind == "quantile":
            fns.extend(quantile_targets(spec, ps))
        elif kind == "cdf":
            fns.extend(cdf_targets(spec, ps))
        elif kind:
            raise ConfigError(f"unknown target kind {kind!r}")
    report = coverage_experiment(
        spec, fns, n_runs=n_runs, B=b_reps, alpha=alpha, seed=seed, workers=workers
    )
    _emit(report.to_dict(), _resolve(output, cfg, "output"))
    if csv_path:
        report.to_csv(csv_path)


if __name__ == "__main__":
    main()
