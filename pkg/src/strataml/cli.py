"""Command-line front end: search runs, baselines, dataset generation and the
trace analyses (correlation, rank-over-time, time-to-equivalence)."""

from __future__ import annotations

import json
import os
import time

import click

from .data import DataError, load_csv, write_csv
from .datagen import make_dataset
from .engine import (
    ConfigError,
    NoViablePipelineError,
    RunConfig,
    layer_sample_sizes,
    layered_ea,
    random_search_baseline,
    single_layer_baseline,
    summarize,
)
from .harness import (
    correlation_experiment,
    load_traces,
    rank_over_time,
    time_to_equivalence,
    write_correlation_csv,
    write_equivalence_csv,
    write_rank_csv,
)
from .rng import RngStream


@click.group()
def main():
    """Layered evolutionary search for machine-learning pipelines."""


def _fail(exc: Exception) -> None:
    raise click.ClickException(str(exc))


def _run_options(fn):
    options = [
        click.option("--data", required=True, type=click.Path(exists=True), help="CSV dataset"),
        click.option("--label", default="label", show_default=True, help="label column (name or index)"),
        click.option("--seed", default=0, show_default=True, type=int),
        click.option("--config", "config_path", type=click.Path(exists=True), help="RunConfig JSON (explicit flags override it)"),
        click.option("--out", default=".", show_default=True, type=click.Path(), help="output directory"),
        click.option("--budget-generations", type=int, default=None),
        click.option("--budget-seconds", type=float, default=None),
        click.option("--pop", default=30, show_default=True, type=int, help="population size P"),
        click.option("--k", default=None, type=int, help="transfer count [default: P/2]"),
        click.option("--folds", default=3, show_default=True, type=int),
        click.option("--timeout-secs", type=float, default=None, help="top-layer per-individual evaluation cap"),
        click.option("--workers", default=1, show_default=True, type=int),
        click.option("--method", default="", help="method label used in traces"),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _load_config(ctx, dataset, layers, g, **flags):
    """Build the RunConfig from --config plus explicitly passed flags."""
    explicit = {
        name
        for name in ctx.params
        if ctx.get_parameter_source(name) == click.core.ParameterSource.COMMANDLINE
    }
    if flags.get("config_path"):
        with open(flags["config_path"]) as fh:
            cfg = RunConfig.from_json(fh.read())
    else:
        pop = flags["pop"]
        cfg = RunConfig(
            sample_sizes=tuple(layer_sample_sizes(dataset.n, layers, dataset.n_classes)),
            g=g,
            population_size=pop,
            transfer_count=flags["k"] if flags["k"] is not None else max(1, pop // 2),
            folds=flags["folds"],
            eval_timeout=flags["timeout_secs"],
            seed=flags["seed"],
            budget_generations=flags["budget_generations"],
            budget_seconds=flags["budget_seconds"],
            workers=flags["workers"],
            method=flags["method"],
        )
    if flags.get("config_path"):
        from dataclasses import replace

        overrides = {}
        if "layers" in explicit or "g" in explicit:
            overrides["sample_sizes"] = tuple(
                layer_sample_sizes(dataset.n, layers, dataset.n_classes)
            )
            overrides["g"] = g
        mapping = {
            "pop": "population_size",
            "k": "transfer_count",
            "folds": "folds",
            "timeout_secs": "eval_timeout",
            "seed": "seed",
            "budget_generations": "budget_generations",
            "budget_seconds": "budget_seconds",
            "workers": "workers",
            "method": "method",
        }
        for flag, field in mapping.items():
            if flag in explicit:
                overrides[field] = flags[flag]
        cfg = replace(cfg, **overrides)
    if cfg.budget_generations is not None and cfg.budget_seconds is not None:
        raise click.UsageError("pass exactly one of --budget-generations / --budget-seconds")
    return cfg


def _execute(runner, cfg, dataset, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    started = time.perf_counter()
    try:
        best, trace = runner(cfg, dataset)
    except (ConfigError, DataError, NoViablePipelineError) as exc:
        _fail(exc)
    wall = time.perf_counter() - started
    tag = f"{trace.meta['method']}-{dataset.name}-s{cfg.seed}"
    trace_path = os.path.join(out_dir, f"trace-{tag}.jsonl")
    summary_path = os.path.join(out_dir, f"summary-{tag}.json")
    trace.to_jsonl(trace_path)
    summary = summarize(best, trace, wall)
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    click.echo(json.dumps(summary))
    click.echo(f"trace: {trace_path}", err=True)


@main.command()
@click.option("--layers", default=4, show_default=True, type=int, help="number of layers M")
@click.option("--g", default=2, show_default=True, type=int, help="generations between transfers")
@_run_options
@click.pass_context
def run(ctx, layers, g, data, label, **flags):
    """Layered search on a CSV dataset."""
    try:
        dataset = load_csv(data, label)
        cfg = _load_config(ctx, dataset, layers, g, **flags)
        runner = layered_ea if layers > 1 else single_layer_baseline
        _execute(runner, cfg, dataset, flags["out"])
    except (DataError, ConfigError, ValueError) as exc:
        _fail(exc)


@main.command()
@_run_options
@click.pass_context
def baseline(ctx, data, label, **flags):
    """Single-layer full-data search (no layering)."""
    try:
        dataset = load_csv(data, label)
        cfg = _load_config(ctx, dataset, 1, 2, **flags)
        _execute(single_layer_baseline, cfg, dataset, flags["out"])
    except (DataError, ConfigError, ValueError) as exc:
        _fail(exc)


@main.command()
@_run_options
@click.pass_context
def random(ctx, data, label, **flags):
    """Random pipeline search on the full dataset."""
    try:
        dataset = load_csv(data, label)
        cfg = _load_config(ctx, dataset, 1, 2, **flags)
        _execute(random_search_baseline, cfg, dataset, flags["out"])
    except (DataError, ConfigError, ValueError) as exc:
        _fail(exc)


@main.command()
@click.option("--data", "data_paths", multiple=True, required=True, type=click.Path(exists=True))
@click.option("--label", default="label", show_default=True)
@click.option("--pipelines", default=20, show_default=True, type=int)
@click.option("--repeats", default=5, show_default=True, type=int)
@click.option("--folds", default=5, show_default=True, type=int)
@click.option(
    "--fractions",
    default="0.5,0.25,0.125,0.0625,0.03125",
    show_default=True,
    help="comma-separated sample-size fractions",
)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", default="correlation.csv", show_default=True, type=click.Path())
def correlate(data_paths, label, pipelines, repeats, folds, fractions, seed, out):
    """Rank-correlation of pipeline performance across sample-size fractions."""
    try:
        datasets = [load_csv(path, label) for path in data_paths]
        fracs = [float(tok) for tok in fractions.split(",") if tok.strip()]
        results = correlation_experiment(
            datasets, pipelines, repeats, folds, fracs, RngStream(seed, "correlate")
        )
        write_correlation_csv(results, out)
    except (DataError, ValueError) as exc:
        _fail(exc)
    click.echo(f"wrote {out}")


@main.command()
@click.option("--traces", "trace_paths", multiple=True, required=True, type=click.Path(exists=True))
@click.option("--tie-threshold", default=0.1, show_default=True, type=float)
@click.option("--interval-secs", default=60.0, show_default=True, type=float)
@click.option("--out", default="rank.csv", show_default=True, type=click.Path())
def rank(trace_paths, tie_threshold, interval_secs, out):
    """Average rank of each method over time across (dataset, seed) cells."""
    try:
        series = rank_over_time(load_traces(trace_paths), tie_threshold, interval_secs)
        write_rank_csv(series, out)
    except ValueError as exc:
        _fail(exc)
    click.echo(f"wrote {out}")


@main.command()
@click.option("--traces", "trace_paths", multiple=True, required=True, type=click.Path(exists=True))
@click.option("--methods", default=None, help="comma-separated pair, e.g. layered-g2,baseline")
@click.option("--out", default="equivalence.csv", show_default=True, type=click.Path())
def equivalence(trace_paths, methods, out):
    """Per (dataset, seed): when the winner matched the loser's final best."""
    try:
        traces = load_traces(trace_paths)
        names = sorted({k[0] for k in traces})
        if methods:
            pair = [tok.strip() for tok in methods.split(",")]
        else:
            pair = names
        if len(pair) != 2:
            raise ValueError(f"need exactly two methods, found {names}; use --methods a,b")
        cells = sorted({(k[1], k[2]) for k in traces if k[0] in pair})
        results = []
        for dataset, seed in cells:
            results.append(
                time_to_equivalence(traces[(pair[0], dataset, seed)], traces[(pair[1], dataset, seed)])
            )
        write_equivalence_csv(results, out)
    except (KeyError, ValueError) as exc:
        _fail(exc)
    click.echo(f"wrote {out}")


@main.command("gen-data")
@click.option("--kind", type=click.Choice(["blobs", "xor"]), default="blobs", show_default=True)
@click.option("--n", default=1000, show_default=True, type=int)
@click.option("--features", default=8, show_default=True, type=int)
@click.option("--classes", default=2, show_default=True, type=int)
@click.option("--cluster-std", default=1.0, show_default=True, type=float)
@click.option("--center-scale", default=3.0, show_default=True, type=float)
@click.option("--informative", default=None, type=int, help="informative feature count (blobs)")
@click.option("--rotation", default=0.0, show_default=True, type=float, help="radians (xor)")
@click.option("--noise-scale", default=0.3, show_default=True, type=float, help="distractor std (xor)")
@click.option("--label-noise", default=0.0, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path())
def gen_data(kind, n, features, classes, cluster_std, center_scale, informative, rotation, noise_scale, label_noise, seed, out):
    """Generate a synthetic CSV dataset."""
    kwargs = {"label_noise": label_noise, "name": os.path.splitext(os.path.basename(out))[0]}
    if kind == "blobs":
        kwargs.update(cluster_std=cluster_std, center_scale=center_scale, informative=informative)
    else:
        kwargs.update(rotation=rotation, noise_scale=noise_scale)
    try:
        dataset = make_dataset(kind, n, features, classes, RngStream(seed, "gen-data"), **kwargs)
    except (ValueError, DataError) as exc:
        _fail(exc)
    write_csv(dataset, out)
    click.echo(f"wrote {out} ({dataset.n} rows, {dataset.n_features} features, {dataset.n_classes} classes)")


if __name__ == "__main__":
    main()
