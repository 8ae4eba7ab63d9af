"""Command-line front end: ``cwm-impute {simulate|impute|evaluate|diagnose}``.

Exit codes: 0 success, 2 invalid input or configuration, 3 numerical
failure, 4 file errors.
"""

import argparse
import hashlib
import json
import os
import sys
import warnings
from dataclasses import fields, replace

import numpy as np

from . import __version__
from .baselines import PmmConfig, impute_mean, impute_norm, impute_pmm
from .diagnostics import effective_sample_size
from .distributions import make_rng
from .evaluation import (EmConfig, KlReport, UnivariateGmm, fit_gmm_em, kl_divergence,
                         kl_quantile_interval, worker_count)
from .exceptions import CwmImputeError, FileError, ValidationError
from .gibbs import MONITORS, Hyperparams, McmcConfig, run_chain
from .io import (atomic_write, chain_to_jsonl, dataset_to_csv, dumps_json, fmt_float,
                 format_rows, read_chain, read_column, read_dataset, read_json, write_json)
from .model import posterior_z_given_x
from .scenarios import (BUILTIN_SCENARIOS, MixtureSpec, builtin_scenario, load_scenario_file,
                        simulate)

METHODS = ("cwm", "norm", "mean", "pmm")
GRID_POINTS = 200
GRID_SDS = 3.0
FAITHFUL_FIT_SEED = 0


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def load_run_config(path):
    """Split a config JSON into ``Hyperparams`` and ``McmcConfig`` overrides.

    Keys are the dataclass field names; they may be given flat or under
    ``"hyper"`` / ``"mcmc"``.
    """
    if path is None:
        return {}, {}
    raw = read_json(path)
    if not isinstance(raw, dict):
        raise ValidationError(f"{path}: config must be a JSON object")
    flat = dict(raw)
    nested_h = flat.pop("hyper", {})
    nested_m = flat.pop("mcmc", {})
    hnames = {f.name for f in fields(Hyperparams)}
    mnames = {f.name for f in fields(McmcConfig)}
    hyper, mcmc = dict(nested_h), dict(nested_m)
    for k, v in flat.items():
        if k in hnames:
            hyper[k] = v
        elif k in mnames:
            mcmc[k] = v
        else:
            raise ValidationError(f"{path}: unknown config key {k!r}")
    bad = (set(hyper) - hnames) | (set(mcmc) - mnames)
    if bad:
        raise ValidationError(f"{path}: unknown config key(s) {sorted(bad)}")
    if "monitor" in mcmc:
        mcmc["monitor"] = tuple(mcmc["monitor"])
    return hyper, mcmc


def build_configs(args):
    hyper_kw, mcmc_kw = load_run_config(args.config)
    if args.components is not None:
        hyper_kw["G"] = args.components
    if args.burn_in is not None:
        mcmc_kw["burn_in"] = args.burn_in
    if args.target_ess is not None:
        mcmc_kw["target_ess"] = args.target_ess
    if args.max_iterations is not None:
        mcmc_kw["max_iterations"] = args.max_iterations
    mcmc_kw["seed"] = args.seed
    try:
        hyper = Hyperparams(**hyper_kw)
        mcmc = McmcConfig(**mcmc_kw)
    except TypeError as exc:
        raise ValidationError(f"bad configuration: {exc}") from exc
    mcmc.validate()
    return hyper, mcmc


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def faithful_marginal(y):
    """Two-component EM fit of the complete Faithful response (its reference ``f``)."""
    return fit_gmm_em(y, 2, EmConfig(), make_rng(FAITHFUL_FIT_SEED)).gmm


def cmd_simulate(args):
    if (args.scenario is None) == (args.config is None):
        raise ValidationError("give exactly one of --scenario NAME or --config SCENARIO.json")
    if args.scenario is not None:
        spec, rule = builtin_scenario(args.scenario)
        name = args.scenario
    else:
        spec, rule = load_scenario_file(args.config)
        name = os.path.basename(args.config)
    complete, incomplete, labels = simulate(spec, rule, make_rng(args.seed))
    if isinstance(spec, MixtureSpec):
        w, m, v = spec.y_marginal()
        marginal = UnivariateGmm(w, m, v)
        spec_out = spec.to_dict()
    else:
        marginal = faithful_marginal(complete.y)
        spec_out = spec
    truth = {"scenario": name, "seed": args.seed, "spec": spec_out, "rule": rule.to_dict(),
             "column_names": list(complete.column_names),
             "labels": None if labels is None else labels.tolist(),
             "mask": incomplete.mask.tolist(), "y_complete": complete.y,
             "y_marginal": marginal.to_dict(), "n_missing": incomplete.n_missing}
    atomic_write(os.path.join(args.out, "data.csv"), dataset_to_csv(incomplete))
    write_json(os.path.join(args.out, "truth.json"), truth)
    print(f"wrote {incomplete.n} rows ({incomplete.n_missing} missing) to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# impute
# ---------------------------------------------------------------------------


def _grid(model, X, names):
    d = X.shape[1]
    if d not in (1, 2):
        raise ValidationError("--emit-grid needs one or two covariates")
    axes = [np.linspace(c.mean() - GRID_SDS * c.std(), c.mean() + GRID_SDS * c.std(), GRID_POINTS)
            for c in X.T]
    pts = np.array(np.meshgrid(*axes, indexing="ij")).reshape(d, -1).T
    probs = posterior_z_given_x(pts, model)
    keep = np.nonzero(model.alpha > 0)[0]
    header = list(names) + [f"alpha_{g + 1}" for g in keep]
    rows = ([fmt_float(v) for v in pt] + [fmt_float(p) for p in pr[keep]]
            for pt, pr in zip(pts, probs))
    return format_rows(header, rows)


def chain_diagnostics(chain, sub):
    m = chain.map_state
    counts = np.bincount(m.z_mis, minlength=m.G) if m.z_mis.size else np.zeros(m.G, int)
    post = chain.occupied[chain.burn_in:]
    return {"iterations": chain.iterations, "burn_in": chain.burn_in,
            "retained": len(chain.states), "converged": chain.converged,
            "saturated": chain.saturated, "ess": chain.ess,
            "occupied_trace": chain.occupied.tolist(),
            "occupied_max_post_burn_in": int(post.max()) if post.size else None,
            "map_index": chain.map_index, "map_iteration": m.iteration,
            "map_log_posterior": m.log_posterior, "alpha_map": m.alpha,
            "mu_map": m.mu, "eta_map": m.eta,
            "occupied_map": m.occupied(),
            "assigned_per_component": np.bincount(m.z, minlength=m.G),
            "imputed_per_component": counts,
            "imputed_proportions": counts / max(1, m.z_mis.size),
            "columns_used": list(sub.column_names)}


def cmd_impute(args):
    data = read_dataset(args.data)
    if data.n_missing == data.n:
        raise ValidationError(f"{args.data}: no observed responses")
    if args.donors is not None and args.method != "pmm":
        raise ValidationError("--donors applies to --method pmm only")
    if args.emit_grid and args.method != "cwm":
        raise ValidationError("--emit-grid applies to --method cwm only")
    if args.emit_chain and args.method not in ("cwm", "mean"):
        raise ValidationError("--emit-chain applies to --method cwm or mean")
    sub = data.select(args.inputs.split(",")) if args.inputs else data
    hyper, mcmc = build_configs(args)
    labels = None
    chain = None
    diag = {"method": args.method, "seed": args.seed, "data": os.path.basename(args.data),
            "n": data.n, "n_missing": data.n_missing, "version": __version__}
    if args.method == "cwm":
        chain = run_chain(sub, hyper, mcmc)
        y = data.y.copy()
        y[data.mask] = chain.map_state.y_fill
        labels = chain.map_state.z
    elif args.method == "mean":
        y, chain = impute_mean(sub, hyper, mcmc)
        labels = chain.map_state.z
    elif args.method == "norm":
        y = impute_norm(sub, make_rng(args.seed))
    else:
        y = impute_pmm(sub, PmmConfig(donors=args.donors or 5), make_rng(args.seed))
    if chain is not None:
        # imputed rows carry the label that generated their value
        labels = labels.astype(int)
        labels[data.mask] = chain.map_state.z_mis
        diag.update(chain_diagnostics(chain, sub))
    source = np.where(data.mask, "imputed", "observed")
    comp = ["NA"] * data.n if labels is None else [str(int(g) + 1) for g in labels]
    completed = replace(data, y=y, mask=np.zeros(data.n, dtype=bool))
    out = args.out
    atomic_write(os.path.join(out, "imputed.csv"),
                 dataset_to_csv(completed, {"source": source, "component": comp}))
    write_json(os.path.join(out, "diagnostics.json"), diag)
    if args.emit_chain:
        atomic_write(os.path.join(out, "chain.jsonl"), chain_to_jsonl(chain, sub.column_names))
    if args.emit_grid:
        atomic_write(os.path.join(out, "grid.csv"),
                     _grid(chain.map_state.model(), sub.X, sub.column_names[:-1]))
    print(f"imputed {data.n_missing} of {data.n} responses with {args.method}; wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def _interval_key(truth, n, N, level, seed):
    blob = json.dumps({"truth": truth.to_dict(), "n": n, "N": N, "level": level, "seed": seed},
                      sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def cached_interval(truth, n, N, level, seed, cache_path, workers):
    key = _interval_key(truth, n, N, level, seed)
    cache = {}
    if cache_path and os.path.exists(cache_path):
        cache = read_json(cache_path)
        if key in cache:
            return tuple(cache[key])
    interval = kl_quantile_interval(truth, n, N, level, seed=seed, workers=workers)
    if cache_path:
        cache[key] = list(interval)
        write_json(cache_path, cache)
    return interval


def _labelled(spec):
    if "=" in spec:
        label, path = spec.split("=", 1)
        return label, path
    parent = os.path.basename(os.path.dirname(os.path.abspath(spec)))
    return parent or os.path.splitext(os.path.basename(spec))[0], spec


def cmd_evaluate(args):
    truth_doc = read_json(args.truth)
    try:
        f = UnivariateGmm.from_dict(truth_doc["y_marginal"])
        y_complete = np.asarray(truth_doc["y_complete"], dtype=float)
        mask = np.asarray(truth_doc["mask"], dtype=bool)
        response = truth_doc["column_names"][-1]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{args.truth}: missing field {exc}") from exc
    G = args.components or f.G
    n = y_complete.shape[0]
    cache = args.cache or (os.path.join(args.out, "interval_cache.json") if args.out else None)
    interval = cached_interval(f, n, args.N, args.level, args.seed, cache,
                               worker_count(args.workers))
    inputs = [("com", y_complete, None), ("obs", y_complete[~mask], None)]
    for spec in args.imputed:
        label, path = _labelled(spec)
        inputs.append((label, read_column(path, response), path))
    reports, failures = [], []
    for label, y, path in inputs:
        values = y[mask] if (args.imputed_only and path is not None) else y
        try:
            fit = fit_gmm_em(values, G, EmConfig(), make_rng(args.seed))
            reports.append(KlReport(label, kl_divergence(f, fit.gmm), interval))
        except CwmImputeError as exc:
            failures.append({"method": label, "error": str(exc)})
            print(f"{label}: fit failed: {exc}", file=sys.stderr)
    doc = {"interval": list(interval), "N": args.N, "level": args.level, "n": n,
           "reports": [r.to_dict() for r in reports], "failures": failures}
    text = format_rows(KlReport.CSV_HEADER, (r.csv_row() for r in reports))
    if args.out:
        write_json(os.path.join(args.out, "report.json"), doc)
        atomic_write(os.path.join(args.out, "report.csv"), text)
    sys.stdout.write(f"interval (0, {interval[1]:.4f})\n")
    for r in reports:
        rd = r.relative_distance if r.within else f"{r.relative_distance:.2f}"
        sys.stdout.write(f"{r.method:>12s}  KL={r.kl:.4f}  {rd}\n")
    return 3 if failures else 0


# ---------------------------------------------------------------------------
# diagnose
# ---------------------------------------------------------------------------


def cmd_diagnose(args):
    header, states = read_chain(args.chain)
    G = int(header["G"])
    occupied = np.array([len(np.unique(s.z)) for s in states])
    series = {"log_posterior": np.array([s.log_posterior for s in states]),
              "mean_y_fill": np.array([s.y_fill.mean() if s.y_fill.size else 0.0 for s in states]),
              "eta": np.array([s.eta for s in states])}
    ess = {}
    for name, x in series.items():
        if x.shape[0] < 10:
            ess[name] = None
            continue
        est = effective_sample_size(x)
        ess[name] = None if est.degenerate else est.ess
    hist = np.bincount(occupied, minlength=G + 1)
    saturated = bool(np.any(occupied >= G))
    doc = {"states": len(states), "G": G, "ess": ess, "target_ess_default": McmcConfig.target_ess,
           "monitors": list(MONITORS),
           "occupied_histogram": {str(k): int(c) for k, c in enumerate(hist) if c},
           "saturated": saturated}
    rows = ([str(s.iteration)] + [fmt_float(series[k][i]) for k in series] + [str(occupied[i])]
            + [fmt_float(a) for a in s.alpha] for i, s in enumerate(states))
    trace = format_rows(["iteration"] + list(series) + ["occupied"]
                        + [f"alpha_{g + 1}" for g in range(G)], rows)
    if args.out:
        atomic_write(os.path.join(args.out, "trace.csv"), trace)
        write_json(os.path.join(args.out, "ess.json"), doc)
    sys.stdout.write(dumps_json(doc))
    if saturated:
        print(f"warning: all G={G} components were occupied in some state; "
              "consider refitting with a larger G", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="cwm-impute", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a dataset with missing responses")
    s.add_argument("scenario_name", nargs="?", help="built-in scenario (same as --scenario)")
    s.add_argument("--scenario", choices=sorted(BUILTIN_SCENARIOS))
    s.add_argument("--config", help="scenario JSON file instead of a built-in name")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_simulate)

    i = sub.add_parser("impute", help="fill in missing responses")
    i.add_argument("--data", required=True)
    i.add_argument("--method", choices=METHODS, default="cwm")
    i.add_argument("--inputs", help="comma-separated covariates to use (default: all)")
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--config", help="JSON with Hyperparams / McmcConfig fields")
    i.add_argument("--burn-in", type=int)
    i.add_argument("--target-ess", type=float)
    i.add_argument("--max-iterations", type=int)
    i.add_argument("--components", type=int, help="truncation level G")
    i.add_argument("--donors", type=int, help="pmm donor pool size (default 5)")
    i.add_argument("--emit-grid", action="store_true")
    i.add_argument("--emit-chain", action="store_true")
    i.add_argument("--out", default=".")
    i.set_defaults(func=cmd_impute)

    e = sub.add_parser("evaluate", help="KL divergence of completed responses against the truth")
    e.add_argument("imputed", nargs="*", help="imputed.csv files, optionally LABEL=PATH")
    e.add_argument("--truth", required=True)
    e.add_argument("--N", type=int, default=1000, help="reference replications")
    e.add_argument("--level", type=float, default=0.95)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--components", type=int, help="components of the fitted g (default: truth)")
    e.add_argument("--imputed-only", action="store_true",
                   help="fit g on the imputed values only instead of the completed variable")
    e.add_argument("--workers", type=int)
    e.add_argument("--cache", help="interval cache file")
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    d = sub.add_parser("diagnose", help="convergence summary of a chain file")
    d.add_argument("--chain", required=True)
    d.add_argument("--out")
    d.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate" and args.scenario_name:
        if args.scenario and args.scenario != args.scenario_name:
            parser.error("conflicting scenario names")
        if args.scenario_name not in BUILTIN_SCENARIOS:
            parser.error(f"unknown scenario {args.scenario_name!r}; choose from "
                         f"{', '.join(sorted(BUILTIN_SCENARIOS))}")
        args.scenario = args.scenario_name
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except CwmImputeError as exc:
        print(f"cwm-impute: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"cwm-impute: error: {exc}", file=sys.stderr)
        return FileError.exit_code


if __name__ == "__main__":
    sys.exit(main())
