"""Configured experiments: sample, metric, reduction, plots and localization in one bundle."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from srips.complex import FiltrationParams, ScaleMap
from srips.errors import MemoryBudget, NoAttribution
from srips.localize import LocalizedLoop, critical_simplex, filling, verify_loop
from srips.metric import (
    FiniteMetric,
    PointCloud,
    WindingContext,
    azimuth_context,
    build_geodesic_metric,
    evenly_spaced_circle,
    exact_circle_metric,
    exact_cylinder_metric,
    poisson_thin,
    sample_cut_sphere,
)
from srips.persistence import Bar, PersistenceDiagram, bars_in_window, implicit_reduce

SAMPLERS = ("cut_sphere", "circle", "cylinder")


class ConfigError(ValueError):
    """The experiment configuration is malformed or violates a precondition."""


@dataclass(frozen=True)
class SamplerConfig:
    kind: str = "cut_sphere"
    h: float = 0.35
    c: float = 2 * math.pi
    w: float = 1.0
    # circle only: "even" spacing or uniform "random" angles
    spacing: str = "random"


@dataclass(frozen=True)
class ParamsConfig:
    a: str = "r"
    b: str = "0.3r"
    n: int = 2
    max_dim: int = 3
    r_max: float = 2.13
    p: int = 2
    birth_floor: Optional[float] = None


@dataclass(frozen=True)
class LocalizeConfig:
    dim: int = 2
    birth: tuple = (0.0, math.inf)
    min_lifespan: float = 0.0


@dataclass(frozen=True)
class ExperimentConfig:
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    count: int = 10000
    seed: int = 0
    thin_min_dist: Optional[float] = 0.1
    link_radius: float = 0.3
    params: ParamsConfig = field(default_factory=ParamsConfig)
    localize: Optional[LocalizeConfig] = None
    # extra truncated run counting top-dimension bars born below this scale
    early_noise_below: Optional[float] = None
    # dense n x n metrics cost memory quadratic in n
    point_budget: int = 4000
    output: str = "run"

    def validate(self) -> "ExperimentConfig":
        s = self.sampler
        if s.kind not in SAMPLERS:
            raise ConfigError(f"sampler must be one of {SAMPLERS}, got {s.kind!r}")
        if s.kind == "cut_sphere" and not -1 < s.h < 1:
            raise ConfigError(f"cut height h must lie in (-1, 1), got {s.h}")
        if s.kind in ("circle", "cylinder") and not s.c > 0:
            raise ConfigError(f"circumference must be positive, got {s.c}")
        if s.kind == "cylinder" and s.w < 0:
            raise ConfigError(f"cylinder width must be non-negative, got {s.w}")
        if s.spacing not in ("even", "random"):
            raise ConfigError(f"spacing must be 'even' or 'random', got {s.spacing!r}")
        if self.count < 1:
            raise ConfigError("count must be at least 1")
        if self.thin_min_dist is not None and not self.thin_min_dist > 0:
            raise ConfigError("thin_min_dist must be positive")
        if not self.link_radius > 0:
            raise ConfigError("link_radius must be positive")
        try:
            self.filtration_params()
        except ValueError as exc:
            raise ConfigError(f"params: {exc}") from exc
        p = self.params.p
        if p < 2 or any(p % q == 0 for q in range(2, int(math.isqrt(p)) + 1)):
            raise ConfigError(f"params.p must be prime, got {p}")
        if self.localize is not None:
            lo, hi = self.localize.birth
            if self.localize.dim not in (1, 2) or lo > hi:
                raise ConfigError("localize needs dim 1 or 2 and an ordered birth range")
        if self.point_budget < 1:
            raise ConfigError("point_budget must be at least 1")
        if self.early_noise_below is not None and not self.early_noise_below > 0:
            raise ConfigError("early_noise_below must be positive")
        return self

    def filtration_params(self, r_max: Optional[float] = None) -> FiltrationParams:
        pc = self.params
        return FiltrationParams(a=pc.a, b=pc.b, n=pc.n, max_dim=pc.max_dim,
                                r_max=pc.r_max if r_max is None else r_max)

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.localize is not None:
            d["localize"]["birth"] = [_num_out(x) for x in self.localize.birth]
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            if "sampler" in data:
                data["sampler"] = _sub(SamplerConfig, data["sampler"])
            if "params" in data:
                params = dict(data["params"])
                for key in ("a", "b"):
                    if key in params and not isinstance(params[key], str):
                        params[key] = str(params[key])
                data["params"] = _sub(ParamsConfig, params)
            if data.get("localize") is not None:
                loc = dict(data["localize"])
                if "birth" in loc:
                    loc["birth"] = tuple(_num_in(x) for x in loc["birth"])
                data["localize"] = _sub(LocalizeConfig, loc)
            cfg = cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        return cfg.validate()

    def to_yaml(self, path=None) -> str:
        text = yaml.safe_dump(self.to_dict(), sort_keys=False)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_yaml(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.parse_yaml(text)

    @classmethod
    def parse_yaml(cls, text: str) -> "ExperimentConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        return cls.from_dict(data)


def _sub(kind, value):
    if not isinstance(value, dict):
        raise ConfigError(f"{kind.__name__} section must be a mapping")
    names = {f.name for f in fields(kind)}
    unknown = set(value) - names
    if unknown:
        raise ConfigError(f"unknown keys in {kind.__name__}: {sorted(unknown)}")
    return kind(**value)


def _num_out(x: float):
    return "inf" if x == math.inf else ("-inf" if x == -math.inf else x)


def _num_in(x) -> float:
    return float(x)


def _cut_sphere(**over) -> ExperimentConfig:
    base = ExperimentConfig(
        sampler=SamplerConfig("cut_sphere", h=0.35),
        count=10000,
        thin_min_dist=0.1,
        link_radius=0.3,
        params=ParamsConfig(a="r", b="0.3r", n=2, max_dim=3, r_max=2.13, birth_floor=1.85),
        localize=LocalizeConfig(dim=2, birth=(1.85, 2.10), min_lifespan=0.03),
        early_noise_below=0.6,
    )
    return replace(base, **over)


PRESETS = {
    "fig6-selective": lambda: _cut_sphere(output="fig6-selective"),
    "fig6-rips": lambda: _cut_sphere(params=ParamsConfig(a="r", b="r", r_max=2.13, birth_floor=1.85),
                                     output="fig6-rips"),
    "fig8-mixed": lambda: _cut_sphere(params=ParamsConfig(a="r", b="min(r, 0.7+0.3r)", r_max=2.13,
                                                          birth_floor=1.85),
                                      output="fig8-mixed"),
    "circle": lambda: ExperimentConfig(
        sampler=SamplerConfig("circle", c=2 * math.pi, spacing="even"),
        count=120,
        thin_min_dist=None,
        params=ParamsConfig(a="r", b="r", max_dim=2, r_max=math.pi),
        localize=LocalizeConfig(dim=1, min_lifespan=2 * math.pi / 6),
        output="circle",
    ),
}


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[name]().validate()


# -- running --------------------------------------------------------------------------


@dataclass
class Space:
    metric: FiniteMetric
    cloud: Optional[PointCloud] = None
    ctx: Optional[WindingContext] = None


def build_sample(config: ExperimentConfig) -> PointCloud:
    """Thinned cut-sphere sample; the other samplers are charted models without points."""
    s = config.sampler
    if s.kind != "cut_sphere":
        raise ConfigError(f"sampler {s.kind!r} has no point cloud; it is an exact model")
    cloud = sample_cut_sphere(config.count, s.h, config.seed)
    if config.thin_min_dist is not None:
        cloud = poisson_thin(cloud, config.thin_min_dist)
    _check_budget(len(cloud), config)
    return cloud


def _check_budget(n: int, config: ExperimentConfig) -> None:
    if n > config.point_budget:
        raise MemoryBudget(f"{n} points exceed the point budget {config.point_budget}; "
                           f"the dense metric alone needs {8 * n * n / 2**20:.0f} MiB")


def build_space(config: ExperimentConfig) -> Space:
    s = config.sampler
    if s.kind == "cut_sphere":
        cloud = build_sample(config)
        metric = build_geodesic_metric(cloud, config.link_radius)
        return Space(metric, cloud, azimuth_context(cloud, s.h))
    _check_budget(config.count, config)
    rng = np.random.default_rng(config.seed)
    if s.kind == "circle":
        if s.spacing == "even":
            metric, ctx = evenly_spaced_circle(config.count, s.c)
        else:
            metric, ctx = exact_circle_metric(np.sort(rng.uniform(0, s.c, config.count)), s.c)
        return Space(metric, None, ctx)
    samples = np.column_stack([rng.uniform(0, s.c, config.count), rng.uniform(0, s.w, config.count)])
    metric, ctx = exact_cylinder_metric(samples, s.c, s.w)
    return Space(metric, None, ctx)


@dataclass
class Localization:
    bar: Bar
    loop: LocalizedLoop
    verified: Optional[bool]
    pairwise: tuple

    def record(self) -> dict:
        rec = self.loop.summary()
        rec["verified"] = self.verified
        rec["pairwise"] = list(self.pairwise)
        return rec


def localize_bars(
    diagram: PersistenceDiagram,
    space: Space,
    params: FiltrationParams,
    dim: int,
    birth: tuple = (-math.inf, math.inf),
    min_lifespan: float = 0.0,
    limit: int = 1,
) -> list[Localization]:
    """Loops for the longest bars in the window; bars without attribution are skipped."""
    out = []
    for bar in bars_in_window(diagram, dim, birth, min_lifespan)[:limit]:
        try:
            tri = critical_simplex(diagram, bar, space.metric, params)
        except NoAttribution:
            continue
        loop = filling(space.metric, tri, bar)
        verified = verify_loop(space.ctx, loop) if space.ctx is not None else None
        d = space.metric.d
        a, b, c = tri
        out.append(Localization(bar, loop, verified, (float(d[a, b]), float(d[b, c]), float(d[c, a]))))
    return out


def count_early_bars(space: Space, config: ExperimentConfig, below: float) -> int:
    """Top-dimension bars born below ``below``, from a run truncated at that scale."""
    params = config.filtration_params(r_max=below)
    dg = implicit_reduce(space.metric, params, config.params.p)
    return sum(1 for b in dg.in_dim(params.max_dim - 1) if b.birth < below)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    space: Space
    diagram: PersistenceDiagram
    stats: dict
    localizations: list
    early_bars: Optional[int] = None
    files: dict = field(default_factory=dict)


def run_experiment(config: ExperimentConfig, out_dir=None, write: bool = True) -> ExperimentResult:
    config = config.validate()
    space = build_space(config)
    params = config.filtration_params()
    stats: dict = {}
    diagram = implicit_reduce(space.metric, params, config.params.p, config.params.birth_floor, stats)
    locs = []
    if config.localize is not None:
        lc = config.localize
        locs = localize_bars(diagram, space, params, lc.dim, lc.birth, lc.min_lifespan)
    early = None
    if config.early_noise_below is not None:
        early = count_early_bars(space, config, config.early_noise_below)
    result = ExperimentResult(config, space, diagram, stats, locs, early)
    if write:
        write_bundle(result, Path(out_dir if out_dir is not None else config.output))
    return result


def filtration_summary(result: ExperimentResult) -> dict:
    m = result.space.metric
    params = result.config.filtration_params()
    a_inv = params.a.inverse(m.d[np.triu_indices(m.n, 1)])
    return {
        "points": m.n,
        "provenance": m.provenance,
        "edges_within_r_max": int(np.count_nonzero(a_inv <= params.r_max)),
        "a": params.a.describe(),
        "b": params.b.describe(),
        "n": params.n,
        "max_dim": params.max_dim,
        "r_max": params.r_max,
        "birth_floor": result.config.params.birth_floor,
        "reduction": {str(k): v for k, v in sorted(result.stats.items())},
    }


def write_bundle(result: ExperimentResult, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    files["config"] = out / "config.yaml"
    result.config.to_yaml(files["config"])
    files["metric"] = out / "metric.txt"
    result.space.metric.save(files["metric"])
    if result.space.cloud is not None:
        files["points"] = out / "points.csv"
        result.space.cloud.to_csv(files["points"])
    files["filtration"] = out / "filtration.json"
    files["filtration"].write_text(json.dumps(filtration_summary(result), indent=2))
    files["diagram"] = out / "diagram.csv"
    result.diagram.to_csv(files["diagram"])
    files["plot"] = out / "diagram.svg"
    plot_diagram(result.diagram, files["plot"], title=_title(result.config))
    report = {"localized": [], "early_bars": result.early_bars}
    for i, loc in enumerate(result.localizations):
        path = out / f"loop_{i}.csv"
        loc.loop.to_csv(path, result.space.cloud)
        files[f"loop_{i}"] = path
        report["localized"].append(loc.record())
    files["localization"] = out / "localization.json"
    files["localization"].write_text(json.dumps(report, indent=2, default=_json_default))
    result.files = {k: str(v) for k, v in files.items()}
    return result.files


def _json_default(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _title(config: ExperimentConfig) -> str:
    s = config.sampler
    where = {"cut_sphere": f"cut sphere h={s.h}", "circle": f"circle c={s.c:.4g}",
             "cylinder": f"cylinder c={s.c:.4g} w={s.w:.4g}"}[s.kind]
    b = ScaleMap.parse(config.params.b).describe()
    return f"{where}, seed {config.seed}, a={config.params.a}, b={b}"


def plot_diagram(diagram: PersistenceDiagram, path, dims=(1, 2), title: str = "") -> None:
    """Birth/death scatter with the diagonal; bars alive past ``r_max`` sit on the top line."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    finite = [b.death for b in diagram.bars if b.finite]
    top = diagram.r_max if math.isfinite(diagram.r_max) else (max(finite, default=1.0) * 1.1 or 1.0)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot([0, top], [0, top], color="0.6", lw=0.8)
    ax.axhline(top, color="0.8", lw=0.6, ls="--")
    for dim, marker in zip(dims, "o^s"):
        bars = diagram.in_dim(dim)
        xs = [b.birth for b in bars]
        ys = [b.death if b.finite else top for b in bars]
        ax.scatter(xs, ys, s=10, marker=marker, label=f"H{dim} ({len(bars)})")
    for dim, lo in diagram.birth_floor.items():
        ax.axvline(lo, color="0.8", lw=0.6, ls=":")
    ax.set_xlabel("birth")
    ax.set_ylabel("death")
    ax.set_xlim(0, top * 1.02)
    ax.set_ylim(0, top * 1.05)
    ax.legend(loc="lower right")
    if title:
        ax.set_title(title, fontsize=8)
    fig.savefig(path, format="svg")
    plt.close(fig)


# -- comparison -----------------------------------------------------------------------


def _cost(b1: Bar, b2: Bar) -> float:
    if b1.finite != b2.finite:
        return math.inf
    dd = abs(b1.death - b2.death) if b1.finite else 0.0
    return max(abs(b1.birth - b2.birth), dd)


def _diag(b: Bar) -> float:
    return b.lifespan / 2


@dataclass
class DimComparison:
    dim: int
    distance: float
    matches: list
    unmatched_a: list
    unmatched_b: list


@dataclass
class CompareReport:
    tolerance: float
    dims: dict

    @property
    def within(self) -> bool:
        return all(c.distance <= self.tolerance for c in self.dims.values())

    def record(self) -> dict:
        return {
            "tolerance": self.tolerance,
            "within": self.within,
            "dims": {str(d): {"distance": _num_out(c.distance), "matched": len(c.matches),
                              "unmatched_a": len(c.unmatched_a), "unmatched_b": len(c.unmatched_b)}
                     for d, c in sorted(self.dims.items())},
        }


def compare(a: PersistenceDiagram, b: PersistenceDiagram, tolerance: float = 0.05) -> CompareReport:
    """Greedy matching per dimension, cheapest pairs first, in the max-coordinate distance.

    A pair is taken only when it costs no more than sending either bar to the
    diagonal.  The reported distance is the largest cost used, an upper bound
    on the bottleneck distance.
    """
    dims = sorted({x.dim for x in a.bars} | {x.dim for x in b.bars})
    out = {}
    for dim in dims:
        xs, ys = a.in_dim(dim), b.in_dim(dim)
        pairs = sorted(((_cost(x, y), i, j) for i, x in enumerate(xs) for j, y in enumerate(ys)),
                       key=lambda t: t[0])
        used_x, used_y, matches = set(), set(), []
        for cost, i, j in pairs:
            if i in used_x or j in used_y:
                continue
            if cost > max(_diag(xs[i]), _diag(ys[j])):
                continue
            used_x.add(i)
            used_y.add(j)
            matches.append((xs[i], ys[j], cost))
        rest_x = [x for i, x in enumerate(xs) if i not in used_x]
        rest_y = [y for j, y in enumerate(ys) if j not in used_y]
        costs = [c for _, _, c in matches] + [_diag(x) for x in rest_x] + [_diag(y) for y in rest_y]
        out[dim] = DimComparison(dim, max(costs, default=0.0), matches, rest_x, rest_y)
    return CompareReport(tolerance, out)
