"""Command line front end.

Every subcommand starts from a preset or a YAML config and applies flag
overrides, so the same keys drive all stages of the pipeline.
"""

from __future__ import annotations

import functools
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import click

from srips.complex import build_filtration
from srips.errors import SripsError
from srips.experiment import (
    PRESETS,
    ConfigError,
    ExperimentConfig,
    LocalizeConfig,
    build_sample,
    build_space,
    compare,
    localize_bars,
    plot_diagram,
    preset,
    run_experiment,
)
from srips.persistence import PersistenceDiagram, implicit_reduce

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _config_options(fn):
    opts = [
        click.option("--preset", "preset_name", type=click.Choice(sorted(PRESETS)), help="Start from a preset."),
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="YAML config file."),
        click.option("--sampler", type=click.Choice(["cut_sphere", "circle", "cylinder"])),
        click.option("--h", type=float, help="Cut height of the sphere."),
        click.option("--c", type=float, help="Circumference of the circle or cylinder."),
        click.option("--w", type=float, help="Cylinder width."),
        click.option("--spacing", type=click.Choice(["even", "random"])),
        click.option("--count", type=int, help="Sample size (before thinning)."),
        click.option("--seed", type=int),
        click.option("--thin-min-dist", type=float),
        click.option("--link-radius", type=float),
        click.option("--point-budget", type=int, help="Largest point count accepted (memory grows with its square)."),
        click.option("--a", "a_map", help="Scale map a, e.g. 'r'."),
        click.option("--b", "b_map", help="Scale map b, e.g. '0.3r' or 'min(r, 0.7+0.3r)'."),
        click.option("--n", type=int),
        click.option("--max-dim", type=int),
        click.option("--r-max", type=float),
        click.option("--p", type=int, help="Field characteristic."),
        click.option("--birth-floor", type=float, help="Only report top-dimension bars born at or above this."),
        click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _resolve(preset_name, config_path, **flags) -> ExperimentConfig:
    if preset_name and config_path:
        raise ConfigError("use either --preset or --config, not both")
    if config_path:
        cfg = ExperimentConfig.from_yaml(config_path)
    elif preset_name:
        cfg = preset(preset_name)
    else:
        cfg = ExperimentConfig()
    sampler = {k: flags[k] for k in ("h", "c", "w", "spacing") if flags.get(k) is not None}
    if flags.get("sampler"):
        sampler["kind"] = flags["sampler"]
    params = {k: flags[k] for k in ("n", "max_dim", "r_max", "p", "birth_floor") if flags.get(k) is not None}
    if flags.get("a_map"):
        params["a"] = flags["a_map"]
    if flags.get("b_map"):
        params["b"] = flags["b_map"]
    top = {k: flags[k] for k in ("count", "seed", "thin_min_dist", "link_radius", "point_budget") if flags.get(k) is not None}
    if flags.get("out_dir"):
        top["output"] = flags["out_dir"]
    cfg = replace(cfg, sampler=replace(cfg.sampler, **sampler), params=replace(cfg.params, **params), **top)
    return cfg.validate()


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except SripsError as exc:
            click.echo(f"{type(exc).__name__}: {exc}", err=True)
            sys.exit(EXIT_NUMERIC)
    return wrapper


def _out(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Selective Rips persistence experiments."""


@main.command()
@_config_options
@_guarded
def sample(preset_name, config_path, **flags):
    """Draw the thinned cut-sphere sample and write points.csv."""
    cfg = _resolve(preset_name, config_path, **flags)
    cloud = build_sample(cfg)
    path = _out(cfg) / "points.csv"
    cloud.to_csv(path)
    click.echo(f"{len(cloud)} points -> {path}")


@main.command()
@_config_options
@_guarded
def metric(preset_name, config_path, **flags):
    """Build the finite metric and write metric.txt."""
    cfg = _resolve(preset_name, config_path, **flags)
    space = build_space(cfg)
    path = _out(cfg) / "metric.txt"
    space.metric.save(path)
    click.echo(f"{space.metric.n} points, {space.metric.provenance} -> {path}")


@main.command()
@_config_options
@click.option("--export/--no-export", default=False, help="Also write every simplex (small inputs only).")
@_guarded
def filtrate(preset_name, config_path, export, **flags):
    """Summarize the filtration; optionally export it simplex by simplex."""
    cfg = _resolve(preset_name, config_path, **flags)
    space = build_space(cfg)
    params = cfg.filtration_params()
    out = _out(cfg)
    summary = {"points": space.metric.n, "a": params.a.describe(), "b": params.b.describe(),
               "n": params.n, "max_dim": params.max_dim, "r_max": params.r_max}
    if export:
        filt = build_filtration(space.metric, params)
        filt.export(out / "filtration.txt")
        summary["simplices"] = {str(k): v for k, v in sorted(filt.counts().items())}
    (out / "filtration.json").write_text(json.dumps(summary, indent=2))
    click.echo(json.dumps(summary))


@main.command()
@_config_options
@click.option("--plot/--no-plot", default=True)
@_guarded
def persist(preset_name, config_path, plot, **flags):
    """Reduce and write diagram.csv (and diagram.svg)."""
    cfg = _resolve(preset_name, config_path, **flags)
    space = build_space(cfg)
    stats: dict = {}
    dg = implicit_reduce(space.metric, cfg.filtration_params(), cfg.params.p, cfg.params.birth_floor, stats)
    out = _out(cfg)
    dg.to_csv(out / "diagram.csv")
    if plot:
        plot_diagram(dg, out / "diagram.svg")
    counts = {d: len(dg.in_dim(d)) for d in range(cfg.params.max_dim)}
    click.echo(f"bars per dimension {counts} -> {out / 'diagram.csv'}")


@main.command()
@_config_options
@click.option("--dim", type=click.IntRange(1, 2), help="Dimension of the bars to localize.")
@click.option("--birth-min", type=float)
@click.option("--birth-max", type=float)
@click.option("--min-lifespan", type=float)
@click.option("--limit", type=int, default=1, show_default=True)
@_guarded
def localize(preset_name, config_path, dim, birth_min, birth_max, min_lifespan, limit, **flags):
    """Reduce, then localize the longest bars in a window and write localization.json."""
    cfg = _resolve(preset_name, config_path, **flags)
    lc = cfg.localize or LocalizeConfig()
    lo, hi = lc.birth
    lc = LocalizeConfig(dim if dim is not None else lc.dim,
                        (birth_min if birth_min is not None else lo, birth_max if birth_max is not None else hi),
                        min_lifespan if min_lifespan is not None else lc.min_lifespan)
    cfg = replace(cfg, localize=lc).validate()
    space = build_space(cfg)
    params = cfg.filtration_params()
    dg = implicit_reduce(space.metric, params, cfg.params.p, cfg.params.birth_floor)
    locs = localize_bars(dg, space, params, lc.dim, lc.birth, lc.min_lifespan, limit)
    out = _out(cfg)
    for i, loc in enumerate(locs):
        loc.loop.to_csv(out / f"loop_{i}.csv", space.cloud)
    records = [loc.record() for loc in locs]
    (out / "localization.json").write_text(json.dumps(records, indent=2, default=_plain))
    for rec in records:
        click.echo(f"triple {rec['triple']} length {rec['length']:.6g} verified {rec['verified']}")
    if not records:
        click.echo("no bar in the window")


def _plain(x):
    return None if isinstance(x, float) and not math.isfinite(x) else str(x)


@main.command()
@_config_options
@_guarded
def experiment(preset_name, config_path, **flags):
    """Run the whole pipeline and write the bundle."""
    cfg = _resolve(preset_name, config_path, **flags)
    res = run_experiment(cfg)
    for name, path in res.files.items():
        click.echo(f"{name}: {path}")
    for loc in res.localizations:
        click.echo(f"localized {loc.loop.triple} length {loc.loop.length:.6g} verified {loc.verified}")
    if res.early_bars is not None:
        click.echo(f"top-dimension bars born below {cfg.early_noise_below}: {res.early_bars}")


@main.command(name="compare")
@click.argument("diagram_a", type=click.Path(exists=True, dir_okay=False))
@click.argument("diagram_b", type=click.Path(exists=True, dir_okay=False))
@click.option("--tolerance", type=float, default=0.05, show_default=True)
@_guarded
def compare_cmd(diagram_a, diagram_b, tolerance):
    """Greedy matching distance per dimension between two diagram CSVs."""
    try:
        a = PersistenceDiagram.from_csv(diagram_a)
        b = PersistenceDiagram.from_csv(diagram_b)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read diagram: {exc}") from exc
    click.echo(json.dumps(compare(a, b, tolerance).record(), indent=2))


if __name__ == "__main__":
    main()
