"""Command-line interface: ``dpmix fit | summarize | predict | hdp-fit | hdp-summarize``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 too few
retained samples.  Failures print one JSON object to stderr with the error
class and message.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import re
import sys
from pathlib import Path

import numpy as np

from .dp import AlphaPrior, DirichletProcess
from .errors import (
    ConfigError,
    DataDomainError,
    DPMixError,
    InsufficientSamplesError,
    ParameterError,
)
from .hdp import HierarchicalDirichletProcess
from .io import (
    FitConfig,
    ModelArtifact,
    Standardization,
    ingest_csv,
    ingest_grouped_csv,
    load_artifact,
    save_artifact,
)
from .measure import PosteriorSummaryTable, summarize_history
from .stats import RandomSource

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SAMPLES = 4

#: acceptance rate usually recommended for random-walk Metropolis-Hastings
TARGET_ACCEPTANCE = 0.234


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _floats(text, name, count=None):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{name} must be a comma-separated list of numbers, got {text!r}") \
            from None
    if count is not None and len(values) != count:
        raise ConfigError(f"{name} needs {count} values, got {len(values)}")
    return values


def _add_model_flags(p, grouped=False):
    p.add_argument("--data", required=True, help="input CSV")
    p.add_argument("--output", required=True, help="model artifact (JSON) to write")
    p.add_argument("--config", help="JSON config file; command-line flags take precedence")
    p.add_argument("--kernel")
    p.add_argument("--iterations", type=int)
    p.add_argument("--thinning", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--update-prior", action="store_true", default=None)
    p.add_argument("--no-store-samples", action="store_true", default=None)
    p.add_argument("--alpha-prior", help="a,b (Gamma shape, rate)")
    p.add_argument("--alpha", type=float, help="initial concentration instead of a prior draw")
    p.add_argument("--fix-alpha", action="store_true", default=None,
                   help="keep the concentration at its initial value")
    p.add_argument("--g0-priors", help="comma-separated base-measure parameters")
    p.add_argument("--mh-step-sizes", help="comma-separated random-walk scales")
    p.add_argument("--hyper-prior", help="comma-separated hyper-prior parameters")
    p.add_argument("--max-y", type=float, help="upper support bound of the beta kernel")
    p.add_argument("--m", type=int, help="auxiliary parameters per reassignment")
    p.add_argument("--mh-steps", type=int, help="MH steps per cluster per iteration")
    p.add_argument("--scale", action="store_true", default=None,
                   help="standardise each column before fitting")
    p.add_argument("--columns", help="comma-separated column names or 0-based indices")
    if grouped:
        p.add_argument("--group-col", help="column holding the group key")
        p.add_argument("--gamma-prior", help="a,b prior on the top-level concentration")


def _add_grid_flags(p):
    p.add_argument("--grid", help="MIN,MAX,COUNT evenly spaced points")
    p.add_argument("--grid-values", help="explicit comma-separated grid points")
    p.add_argument("--grid-file", help="CSV of grid points (one column per data dimension)")
    p.add_argument("--burnin", type=int, default=0)
    p.add_argument("--thinning", type=int, default=1)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--original-scale", action="store_true",
                   help="map grid and density back through the stored standardisation")


def build_parser():
    parser = _Parser(prog="dpmix", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit a DP mixture to a CSV file")
    _add_model_flags(p)

    p = sub.add_parser("summarize", help="pointwise posterior density summary")
    p.add_argument("--model", required=True)
    p.add_argument("--output", required=True)
    _add_grid_flags(p)

    p = sub.add_parser("predict", help="cluster labels for new observations")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--columns")

    p = sub.add_parser("hdp-fit", help="fit a hierarchical DP to grouped CSV data")
    _add_model_flags(p, grouped=True)

    p = sub.add_parser("hdp-summarize", help="per-group posterior density summaries")
    p.add_argument("--model", required=True)
    p.add_argument("--output-dir", required=True)
    _add_grid_flags(p)
    return parser


def config_from_args(args):
    """Merge the optional JSON config file with command-line flags."""
    values = {}
    if args.config:
        try:
            values = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(values, dict):
            raise ConfigError("config file must hold a JSON object")
    flags = {
        "kernel": args.kernel,
        "iterations": args.iterations,
        "thinning": args.thinning,
        "seed": args.seed,
        "update_prior": args.update_prior,
        "alpha": args.alpha,
        "fix_alpha": args.fix_alpha,
        "m": args.m,
        "mh_steps": args.mh_steps,
        "scale": args.scale,
    }
    if args.no_store_samples:
        flags["store_samples"] = False
    if args.alpha_prior:
        flags["alpha_prior"] = _floats(args.alpha_prior, "--alpha-prior", 2)
    if args.g0_priors:
        flags["g0_priors"] = _floats(args.g0_priors, "--g0-priors")
    if args.mh_step_sizes:
        flags["mh_step_sizes"] = _floats(args.mh_step_sizes, "--mh-step-sizes")
    if args.hyper_prior:
        flags["hyper_prior_parameters"] = _floats(args.hyper_prior, "--hyper-prior")
    if args.columns:
        flags["columns"] = [c.strip() for c in args.columns.split(",")]
    if getattr(args, "group_col", None):
        flags["group_col"] = args.group_col
    if getattr(args, "gamma_prior", None):
        flags["gamma_prior"] = _floats(args.gamma_prior, "--gamma-prior", 2)
    values.update({k: v for k, v in flags.items() if v is not None})
    if args.max_y is not None:
        values["kernel_options"] = {**values.get("kernel_options", {}), "max_y": args.max_y}
    return FitConfig.from_dict(values)


def _prepare(data, config):
    transform = None
    if config.scale:
        transform = Standardization.fit(data)
        data = transform.apply(data)
    return data, transform


def _mh_line(state):
    rate = state.acceptance_rate
    if math.isnan(rate):
        return None
    return (f"mh acceptance rate: {rate:.3f} (random-walk target ~{TARGET_ACCEPTANCE}; "
            "adjust --mh-step-sizes if far off)")


def cmd_fit(args, out):
    config = config_from_args(args)
    data = ingest_csv(args.data, config.columns)
    data, transform = _prepare(data, config)
    md = config.build_kernel(dim=data.shape[1])
    state = DirichletProcess.initialise(
        data, md, AlphaPrior(*config.alpha_prior), config.m, RandomSource(config.seed),
        mh_steps=config.mh_steps, alpha=config.alpha)
    state.fit(config.iterations, config.update_prior, config.store_samples, config.thinning,
              update_concentration=not config.fix_alpha)
    save_artifact(ModelArtifact(config, state, transform), args.output)
    print(f"clusters: {state.num_clusters}", file=out)
    print(f"alpha: {state.alpha:.6g}", file=out)
    print(f"retained samples: {len(state.history)}", file=out)
    line = _mh_line(state)
    if line:
        print(line, file=out)
    return EXIT_OK


def cmd_hdp_fit(args, out):
    config = config_from_args(args)
    if not config.group_col:
        raise ConfigError("hdp-fit needs --group-col")
    keys, datasets = ingest_grouped_csv(args.data, config.group_col, config.columns)
    transform = None
    if config.scale:
        transform = Standardization.fit(np.vstack(datasets))
        datasets = [transform.apply(d) for d in datasets]
    md = config.build_kernel(dim=datasets[0].shape[1])
    state = HierarchicalDirichletProcess.initialise(
        datasets, md, AlphaPrior(*config.gamma_prior), AlphaPrior(*config.alpha_prior),
        config.m, RandomSource(config.seed), mh_steps=config.mh_steps, alpha=config.alpha)
    state.fit(config.iterations, config.update_prior, config.store_samples, config.thinning,
              update_alpha=not config.fix_alpha)
    save_artifact(ModelArtifact(config, state, transform, {"groups": keys}), args.output)
    print(f"groups: {len(keys)}", file=out)
    print(f"dishes: {state.num_dishes} (shared across groups: {len(state.shared_dishes())})",
          file=out)
    print(f"gamma: {state.gamma:.6g}", file=out)
    for key, g in zip(keys, state.groups):
        print(f"group {key}: tables {g.num_tables}, alpha {g.alpha:.6g}", file=out)
    line = _mh_line(state)
    if line:
        print(line, file=out)
    return EXIT_OK


def parse_grid(args, dim):
    given = [a for a in (args.grid, args.grid_values, args.grid_file) if a]
    if len(given) != 1:
        raise ConfigError("give exactly one of --grid, --grid-values or --grid-file")
    if args.grid_file:
        grid = ingest_csv(args.grid_file)
    elif args.grid:
        lo, hi, count = _floats(args.grid, "--grid", 3)
        if count < 1 or count != int(count) or not hi >= lo:
            raise ConfigError("--grid needs MIN,MAX,COUNT with MAX >= MIN and COUNT >= 1")
        grid = np.linspace(lo, hi, int(count))
    else:
        grid = np.asarray(_floats(args.grid_values, "--grid-values"))
        if grid.size == 0:
            raise ConfigError("--grid-values is empty")
    if dim != 1 and (grid.ndim != 2 or grid.shape[1] != dim):
        raise ConfigError(f"the model has {dim} dimensions; use --grid-file with {dim} columns")
    if dim == 1 and grid.ndim == 2:
        if grid.shape[1] != 1:
            raise ConfigError("the model is univariate; the grid file needs one column")
        grid = grid[:, 0]
    return grid


def _summary(history, md, args, transform):
    grid = parse_grid(args, md.data_dim or 1)
    if args.original_scale:
        if transform is None:
            raise ConfigError("--original-scale needs a model fitted with --scale")
        model_grid = transform.apply(np.asarray(grid, float).reshape(len(grid), -1))
        if np.ndim(grid) == 1:
            model_grid = model_grid[:, 0]
    else:
        model_grid = grid
    table = summarize_history(history, md, model_grid, args.burnin, args.thinning, args.level)
    if args.original_scale:
        jac = float(np.prod(transform.scale))
        table = PosteriorSummaryTable(np.asarray(grid, float), table.mean / jac,
                                      table.median / jac, table.lower / jac,
                                      table.upper / jac, table.level)
    return table


def cmd_summarize(args, out):
    art = load_artifact(args.model)
    if art.kind != "dp":
        raise ConfigError("this is a hierarchical model; use hdp-summarize")
    table = _summary(art.state.history, art.state.md, args, art.transform)
    table.to_csv(args.output)
    print(f"rows: {len(table.mean)}", file=out)
    return EXIT_OK


def cmd_hdp_summarize(args, out):
    art = load_artifact(args.model)
    if art.kind != "hdp":
        raise ConfigError("not a hierarchical model; use summarize")
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    keys = art.extra.get("groups") or [str(j) for j in range(len(art.state.groups))]
    for j, (key, g) in enumerate(zip(keys, art.state.groups)):
        table = _summary(g.history, art.state.md, args, art.transform)
        name = f"group_{j}_{re.sub(r'[^A-Za-z0-9_.-]+', '_', str(key))}.csv"
        table.to_csv(outdir / name)
        print(f"group {key}: {outdir / name}", file=out)
    return EXIT_OK


def cmd_predict(args, out):
    art = load_artifact(args.model)
    if art.kind != "dp":
        raise ConfigError("predict works on flat DP models")
    columns = ([c.strip() for c in args.columns.split(",")] if args.columns
               else art.config.columns)
    data = ingest_csv(args.data, columns)
    if art.transform is not None:
        data = art.transform.apply(data)
    result = art.state.cluster_label_predict(data, RandomSource(args.seed))
    with open(args.output, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["row", "label"])
        for i, label in enumerate(result["component_indexes"]):
            writer.writerow([i, int(label)])
    print(f"labels: {result['num_labels']} (fitted clusters: {art.state.num_clusters})",
          file=out)
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit,
    "summarize": cmd_summarize,
    "predict": cmd_predict,
    "hdp-fit": cmd_hdp_fit,
    "hdp-summarize": cmd_hdp_summarize,
}


def exit_code_for(exc):
    if isinstance(exc, InsufficientSamplesError):
        return EXIT_SAMPLES
    if isinstance(exc, DataDomainError):
        return EXIT_DATA
    if isinstance(exc, (ConfigError, ParameterError)):
        return EXIT_CONFIG
    return 1


def main(argv=None, out=None, err=None):
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, out)
    except DPMixError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=err)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
