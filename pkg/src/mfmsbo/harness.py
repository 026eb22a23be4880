"""Study configuration, seed fans over methods, and comparison reports."""

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from mfmsbo.baselines import hyperband_rf, random_search
from mfmsbo.errors import ConfigError, InvalidArgumentError, ParseError
from mfmsbo.history import CostModel
from mfmsbo.optimizer import run as run_mfms
from mfmsbo.simplex import SimplexDistanceKind
from mfmsbo.simulator.mlp import MlpPredictor, PredictorSimulator
from mfmsbo.simulator.surface import METRICS, SurfaceSpec, is_accuracy
from mfmsbo.space import DEFAULT_SCALES, DEFAULT_STEPS, TARGET_SCALE, TARGET_STEP, SearchSpace

METHOD_CHOICES = ("mfms-gp", "hyperband-rf", "random-search", "all")
BASELINES = ("random-search", "hyperband-rf")
FULLSCALE = "mfms-gp-fullscale"
# budget unit tag -> cost units per budget unit; "full_scale_run" is resolved against the target
BUDGET_UNITS = ("1b_step", "1b_100steps", "full_scale_run")
GRID_POINTS = 200

_FIELDS = {
    "method",
    "metric_name",
    "budget",
    "budget_unit",
    "target_scale",
    "target_step",
    "scales",
    "steps",
    "distance_kind",
    "seeds",
    "backend",
    "output_dir",
    "n_init",
    "init_step_cap",
    "eta",
}


@dataclass
class StudyConfig:
    metric_name: str
    budget: float
    budget_unit: str
    backend: dict
    method: str = "all"
    target_scale: int = TARGET_SCALE
    target_step: int = TARGET_STEP
    scales: tuple = DEFAULT_SCALES
    steps: tuple = DEFAULT_STEPS
    distance_kind: str = "squared_l2"
    seeds: tuple = (0, 1, 2, 3, 4)
    output_dir: str = "study-out"
    n_init: int = 20
    init_step_cap: int = None
    eta: int = 3
    base_dir: str = field(default=".", repr=False, compare=False)

    def __post_init__(self):
        if self.method not in METHOD_CHOICES:
            raise ConfigError(f"method must be one of {', '.join(METHOD_CHOICES)}, got {self.method!r}")
        if self.metric_name not in METRICS:
            raise ConfigError(f"unknown metric_name {self.metric_name!r}")
        if self.budget_unit not in BUDGET_UNITS:
            raise ConfigError(f"budget_unit must be one of {', '.join(BUDGET_UNITS)}, got {self.budget_unit!r}")
        try:
            self.budget = float(self.budget)
            self.scales = tuple(int(m) for m in self.scales)
            self.steps = tuple(int(z) for z in self.steps)
            self.seeds = tuple(int(s) for s in self.seeds)
            self.target_scale = int(self.target_scale)
            self.target_step = int(self.target_step)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed numeric field: {exc}") from None
        if not self.budget > 0:
            raise ConfigError("budget must be positive")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if self.target_scale not in self.scales:
            raise ConfigError(f"target_scale {self.target_scale} is not in scales")
        if self.steps and self.target_step != max(self.steps):
            raise ConfigError("target_step must equal the largest entry of steps")
        try:
            SimplexDistanceKind.parse(self.distance_kind)
        except InvalidArgumentError as exc:
            raise ConfigError(str(exc)) from None
        if not isinstance(self.backend, dict) or self.backend.get("kind") not in ("synthetic", "predictor"):
            raise ConfigError('backend must be {"kind": "synthetic" | "predictor", "path": <file>}')
        if not isinstance(self.backend.get("path"), str):
            raise ConfigError("backend.path must be a file path")

    @property
    def cost_model(self):
        return CostModel()

    @property
    def full_run_cost(self):
        return self.cost_model(self.target_scale, self.target_step)

    @property
    def budget_cost_units(self):
        """Budget in the cost model's unit (one step of a 1e9-parameter model)."""
        if self.budget_unit == "1b_step":
            return self.budget
        if self.budget_unit == "1b_100steps":
            return self.budget * 100.0
        return self.budget * self.full_run_cost

    def space(self, n):
        try:
            return SearchSpace(n, self.scales, self.steps, self.target_scale, self.target_step)
        except InvalidArgumentError as exc:
            raise ConfigError(str(exc)) from None

    def methods(self):
        return ("mfms-gp",) + BASELINES if self.method == "all" else (self.method,)

    def resolve(self, path):
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)

    def to_dict(self):
        return {
            "method": self.method,
            "metric_name": self.metric_name,
            "budget": self.budget,
            "budget_unit": self.budget_unit,
            "target_scale": self.target_scale,
            "target_step": self.target_step,
            "scales": list(self.scales),
            "steps": list(self.steps),
            "distance_kind": self.distance_kind,
            "seeds": list(self.seeds),
            "backend": dict(self.backend),
            "output_dir": self.output_dir,
            "n_init": self.n_init,
            "init_step_cap": self.init_step_cap,
            "eta": self.eta,
        }

    @classmethod
    def from_dict(cls, d, base_dir="."):
        if not isinstance(d, dict):
            raise ConfigError("study config must be a JSON object")
        unknown = set(d) - _FIELDS
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(sorted(unknown))}")
        missing = {"metric_name", "budget", "budget_unit", "backend"} - set(d)
        if missing:
            raise ConfigError(f"missing config fields: {', '.join(sorted(missing))}")
        return cls(**d, base_dir=base_dir)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                d = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
        return cls.from_dict(d, base_dir=os.path.dirname(os.path.abspath(path)))


def load_backend(config):
    path = config.resolve(config.backend["path"])
    try:
        if config.backend["kind"] == "synthetic":
            sim = SurfaceSpec.load(path)
            if tuple(sim.scales) != tuple(sorted(config.scales)) or tuple(sim.steps) != tuple(sorted(config.steps)):
                raise ConfigError("surface scale/step sets differ from the study's scales/steps")
        else:
            sim = PredictorSimulator(MlpPredictor.load(path), config.scales, config.steps)
    except OSError as exc:
        raise ConfigError(f"cannot read backend {path}: {exc.strerror}") from None
    except ParseError as exc:
        raise ConfigError(f"backend {path}: {exc}") from None
    if config.metric_name not in sim.metrics:
        raise ConfigError(f"backend does not produce metric {config.metric_name!r}")
    return sim


# -- report ------------------------------------------------------------------


def speedup(fast, slow):
    """Cost ratio at which two best-so-far curves first reach the worse of their terminal values.

    Returns ``slow_cost / fast_cost``; above 1 means ``fast`` got there sooner.
    """
    worse = min(fast.terminal, slow.terminal) if is_accuracy(fast.metric) else max(fast.terminal, slow.terminal)
    return slow.first_crossing(worse) / fast.first_crossing(worse)


def cost_grid(curves, points=GRID_POINTS):
    """Shared log-spaced grid starting where every series has its first point."""
    lo = max(float(c.costs[0]) for c in curves)
    hi = max(float(c.costs[-1]) for c in curves)
    if hi <= lo:
        return np.array([lo])
    return np.geomspace(lo, hi, points)


def aggregate(curves, grid):
    """Pointwise median and mean +- one standard deviation over seeds (step interpolation)."""
    V = np.stack([c.at(grid) for c in curves])
    mean = V.mean(axis=0)
    std = V.std(axis=0)
    return {"median": np.median(V, axis=0), "mean": mean, "band_low": mean - std, "band_high": mean + std}


@dataclass
class ComparisonReport:
    config: StudyConfig
    curves: dict  # method -> {seed: curve}
    results: dict  # method -> {seed: result}
    grid: np.ndarray
    bands: dict
    speedups: dict
    budget_parity: bool

    def terminal(self, method):
        return {s: c.terminal for s, c in self.curves[method].items()}

    def median_speedup(self, baseline):
        return float(np.median(list(self.speedups[baseline].values())))

    def to_dict(self):
        cfg = self.config
        methods = {}
        for method, per_seed in self.results.items():
            runs = {}
            for seed, res in per_seed.items():
                runs[str(seed)] = {
                    "terminal_best": self.curves[method][seed].terminal,
                    "spent": res.ledger.spent,
                    "evaluations": res.iterations,
                    "records": len(res.history),
                    "best_mixture": [float(x) for x in res.best_mixture],
                    "best_scale": res.best_record.config.model_scale,
                    "best_step": res.best_record.config.train_step,
                }
            methods[method] = {
                "runs": runs,
                "median_terminal_best": float(np.median([r["terminal_best"] for r in runs.values()])),
            }
        if FULLSCALE in self.curves:
            methods[FULLSCALE] = {
                "runs": {str(s): {"terminal_value": c.terminal} for s, c in self.curves[FULLSCALE].items()},
                "median_terminal_best": float(np.median([c.terminal for c in self.curves[FULLSCALE].values()])),
            }
        return {
            "metric": cfg.metric_name,
            "budget": {
                "cost_units_1b_step": cfg.budget_cost_units,
                "cost_units_1b_100steps": cfg.budget_cost_units / 100.0,
                "full_scale_runs": cfg.budget_cost_units / cfg.full_run_cost,
                "as_configured": {"value": cfg.budget, "unit": cfg.budget_unit},
            },
            "budget_parity": self.budget_parity,
            "config": cfg.to_dict(),
            "methods": methods,
            "speedups": {
                b: {"per_seed": {str(s): v for s, v in sp.items()}, "median": self.median_speedup(b)}
                for b, sp in self.speedups.items()
            },
        }

    def dumps(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _run_method(method, config, space, sim, seed):
    B = config.budget_cost_units
    if method == "mfms-gp":
        return run_mfms(
            space, sim, config.metric_name, B, seed=seed, distance_kind=config.distance_kind,
            n_init=config.n_init, init_step_cap=config.init_step_cap,
        )
    if method == "random-search":
        return random_search(space, sim, config.metric_name, B, seed=seed)
    return hyperband_rf(space, sim, config.metric_name, B, eta=config.eta, seed=seed)


def run_study(config, write=True):
    """Run every (method, seed) pair, write per-run files, and assemble the report."""
    sim = load_backend(config)
    space = config.space(sim.n)
    curves, results = {}, {}
    for method in config.methods():
        curves[method], results[method] = {}, {}
        for seed in config.seeds:
            res = _run_method(method, config, space, sim, seed)
            results[method][seed] = res
            curves[method][seed] = res.curve
            if method == "mfms-gp":
                curves.setdefault(FULLSCALE, {})[seed] = res.fullscale_curve
    totals = {res.ledger.total for per_seed in results.values() for res in per_seed.values()}
    parity = len(totals) == 1
    if not parity:
        raise AssertionError("methods received different budgets")
    all_curves = [c for per_seed in curves.values() for c in per_seed.values()]
    grid = cost_grid(all_curves)
    bands = {m: aggregate(list(per_seed.values()), grid) for m, per_seed in curves.items()}
    speedups = {}
    if "mfms-gp" in curves:
        for b in BASELINES:
            if b in curves:
                speedups[b] = {s: speedup(curves["mfms-gp"][s], curves[b][s]) for s in config.seeds}
    report = ComparisonReport(config, curves, results, grid, bands, speedups, parity)
    if write:
        write_study_outputs(report)
    return report


def _fmt(x):
    return format(float(x), ".17g")


def write_study_outputs(report):
    out = report.config.resolve(report.config.output_dir)
    os.makedirs(out, exist_ok=True)
    for method, per_seed in report.results.items():
        d = os.path.join(out, method)
        os.makedirs(d, exist_ok=True)
        for seed, res in per_seed.items():
            res.history.save(os.path.join(d, f"seed{seed}.history.jsonl"))
            res.curve.save(os.path.join(d, f"seed{seed}.curve.csv"))
            if method == "mfms-gp":
                fd = os.path.join(out, FULLSCALE)
                os.makedirs(fd, exist_ok=True)
                res.fullscale_history.save(os.path.join(fd, f"seed{seed}.history.jsonl"))
                res.fullscale_curve.save(os.path.join(fd, f"seed{seed}.curve.csv"))
    with open(os.path.join(out, "report.json"), "w") as fh:
        fh.write(report.dumps())
    emit_figures_data(report, os.path.join(out, "figures"))
    return out


def emit_figures_data(report, directory):
    """One curve table per series (cost, median, mean, band) plus a summary table."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for method, band in report.bands.items():
        path = os.path.join(directory, f"curve_{method}.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cost", "median", "mean", "band_low", "band_high"])
            for i, c in enumerate(report.grid):
                w.writerow([_fmt(c)] + [_fmt(band[k][i]) for k in ("median", "mean", "band_low", "band_high")])
        paths.append(path)
    path = os.path.join(directory, "summary.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "median_terminal_best", "median_speedup_of_mfms_gp"])
        for method, per_seed in report.curves.items():
            med = float(np.median([c.terminal for c in per_seed.values()]))
            sp = report.median_speedup(method) if method in report.speedups else float("nan")
            w.writerow([method, _fmt(med), _fmt(sp)])
    paths.append(path)
    return paths
