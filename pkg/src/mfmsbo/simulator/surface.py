"""Seeded synthetic stand-in for pre-training outcomes.

Each loss metric follows::

    L(w, m, z) = c + A * exp(-<t0 + t1 * log(m / m_ref), w>)
                   + B * (m / m_ref) ** -beta + C * (z / z_ref) ** -gamma + noise

and each accuracy is a squashed, decreasing function of one designated loss.
A nonzero ``t1`` moves the best mixture as the model grows.
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from mfmsbo.errors import InvalidArgumentError, ParseError, ResourceLimitError
from mfmsbo.simplex import as_mixture, lattice_size, simplex_distance, simplex_lattice
from mfmsbo.space import DEFAULT_SCALES, DEFAULT_STEPS, TARGET_SCALE, TARGET_STEP, Configuration

DATASETS = ("wikipedia", "stackexchange", "github", "arxiv", "book")
LOSS_METRICS = (
    "train_loss",
    "val_wikipedia",
    "val_stackexchange",
    "val_github",
    "val_arxiv",
    "val_book",
    "val_commoncrawl",
    "val_c4",
)
ACCURACY_METRICS = ("acc_arceasy", "acc_hellaswag", "acc_piqa")
METRICS = LOSS_METRICS + ACCURACY_METRICS
# chance levels: ARC-Easy and HellaSwag are 4-way, PIQA is binary
ACCURACY_FLOORS = {"acc_arceasy": 0.25, "acc_hellaswag": 0.25, "acc_piqa": 0.5}

MAX_LATTICE = 10_000_000
FORMAT_TAG = "mfmsbo-surface/1"


def is_accuracy(metric):
    return metric.startswith("acc_")


@dataclass
class LossParams:
    offset: float
    amplitude: float
    t0: np.ndarray
    t1: np.ndarray
    scale_amp: float
    scale_power: float
    step_amp: float
    step_power: float

    def __post_init__(self):
        self.t0 = np.asarray(self.t0, dtype=float)
        self.t1 = np.asarray(self.t1, dtype=float)
        if not (self.offset > 0 and self.amplitude > 0):
            raise InvalidArgumentError("loss offset and amplitude must be positive")
        if self.scale_amp < 0 or self.step_amp < 0 or self.scale_power <= 0 or self.step_power <= 0:
            raise InvalidArgumentError("scale/step amplitudes must be >= 0 and powers > 0")


@dataclass
class AccuracyParams:
    source: str
    floor: float
    bias: float
    slope: float

    def __post_init__(self):
        if not self.slope > 0:
            raise InvalidArgumentError("accuracy slope must be positive")
        if not 0 <= self.floor < 1:
            raise InvalidArgumentError("accuracy floor must lie in [0, 1)")


@dataclass
class SurfaceSpec:
    losses: dict
    accuracies: dict
    n: int = 5
    scales: tuple = DEFAULT_SCALES
    steps: tuple = DEFAULT_STEPS
    noise_sigma: float = 0.01
    seed: int = 0
    scale_ref: float = TARGET_SCALE
    step_ref: float = TARGET_STEP
    metrics: tuple = field(default=METRICS)

    def __post_init__(self):
        self.scales = tuple(sorted(int(s) for s in self.scales))
        self.steps = tuple(sorted(int(s) for s in self.steps))
        if self.noise_sigma < 0:
            raise InvalidArgumentError("noise_sigma must be nonnegative")
        for name, p in self.losses.items():
            if not isinstance(p, LossParams):
                self.losses[name] = p = LossParams(**p)
            if p.t0.shape != (self.n,) or p.t1.shape != (self.n,):
                raise InvalidArgumentError(f"{name}: sensitivity vectors must have length {self.n}")
        for name, p in self.accuracies.items():
            if not isinstance(p, AccuracyParams):
                self.accuracies[name] = p = AccuracyParams(**p)
            if p.source not in self.losses:
                raise InvalidArgumentError(f"{name}: unknown source loss {p.source}")
        self.metrics = tuple(m for m in METRICS if m in self.losses or m in self.accuracies)

    # -- evaluation ---------------------------------------------------------

    def _check(self, m, z, check_step=True):
        if int(m) not in self.scales:
            raise InvalidArgumentError(f"model scale {m} is not in the declared scale set")
        if check_step and int(z) not in self.steps:
            raise InvalidArgumentError(f"train step {z} is not in the declared step grid")

    def loss_arrays(self, metric, W, m, z):
        """Noise-free loss for mixtures ``W`` (P, n) at scalar or per-row ``m`` and ``z``."""
        p = self.losses[metric]
        W = np.atleast_2d(np.asarray(W, dtype=float))
        ls = np.log(np.asarray(m, dtype=float) / self.scale_ref)
        rel_m = np.asarray(m, dtype=float) / self.scale_ref
        rel_z = np.asarray(z, dtype=float) / self.step_ref
        expo = W @ p.t0 + (W @ p.t1) * ls
        return (
            p.offset
            + p.amplitude * np.exp(-expo)
            + p.scale_amp * rel_m ** (-p.scale_power)
            + p.step_amp * rel_z ** (-p.step_power)
        )

    def accuracy_from_loss(self, metric, loss):
        p = self.accuracies[metric]
        return p.floor + (1.0 - p.floor) / (1.0 + np.exp(-(p.bias - p.slope * np.asarray(loss))))

    def metric_arrays(self, metric, W, m, z):
        """Noise-free value of any metric."""
        if metric in self.losses:
            return self.loss_arrays(metric, W, m, z)
        if metric in self.accuracies:
            src = self.accuracies[metric].source
            return self.accuracy_from_loss(metric, self.loss_arrays(src, W, m, z))
        raise InvalidArgumentError(f"unknown metric {metric!r}")

    def _noise(self, w, m, z):
        h = hashlib.blake2b(digest_size=16)
        h.update(np.int64(self.seed).tobytes())
        h.update(np.ascontiguousarray(w, dtype=np.float64).tobytes())
        h.update(np.int64(m).tobytes())
        h.update(np.int64(z).tobytes())
        rng = np.random.default_rng(np.frombuffer(h.digest(), dtype=np.uint32))
        return rng.standard_normal(len(METRICS))

    def evaluate(self, config, noise=True, check_step=True):
        """All metrics at one configuration; noise is a pure function of (seed, w, m, z).

        ``check_step=False`` admits steps off the declared grid (denser
        checkpoint logs); scales must always be declared.
        """
        self._check(config.model_scale, config.train_step, check_step)
        if config.n != self.n:
            raise InvalidArgumentError(f"mixture has {config.n} coordinates, surface expects {self.n}")
        w = config.mixture
        eps = self._noise(w, config.model_scale, config.train_step) * self.noise_sigma if noise else np.zeros(len(METRICS))
        out = {}
        clean = {}
        for name in self.losses:
            clean[name] = float(self.loss_arrays(name, w, config.model_scale, config.train_step)[0])
            out[name] = clean[name] + float(eps[METRICS.index(name)])
        for name, p in self.accuracies.items():
            noisy_src = clean[p.source] + float(eps[METRICS.index(name)])
            out[name] = float(self.accuracy_from_loss(name, noisy_src))
        return {k: out[k] for k in self.metrics}

    def curve(self, w, m, up_to_step, noise=True):
        """Metrics at every grid step up to and including ``up_to_step``."""
        self._check(m, up_to_step)
        return [(z, self.evaluate(Configuration(w, m, z), noise=noise)) for z in self.steps if z <= up_to_step]

    def optimum(self, m, z, metric, grid_resolution=0.05):
        """Exhaustive noise-free search over the simplex lattice; argmin for losses, argmax for accuracies."""
        self._check(m, z)
        if grid_resolution > 0.05 + 1e-12:
            raise InvalidArgumentError("grid resolution must be at most 0.05")
        if lattice_size(self.n, grid_resolution) > MAX_LATTICE:
            raise ResourceLimitError(f"lattice at resolution {grid_resolution} exceeds {MAX_LATTICE} points")
        grid = simplex_lattice(self.n, grid_resolution)
        best_v = None
        best_w = None
        for lo in range(0, len(grid), 200_000):
            chunk = grid[lo : lo + 200_000]
            vals = self.metric_arrays(metric, chunk, m, z)
            i = int(np.argmax(vals)) if is_accuracy(metric) else int(np.argmin(vals))
            better = best_v is None or (vals[i] > best_v if is_accuracy(metric) else vals[i] < best_v)
            if better:
                best_v, best_w = float(vals[i]), chunk[i].copy()
        return as_mixture(best_w), best_v

    # -- serialization ------------------------------------------------------

    def to_dict(self):
        return {
            "format": FORMAT_TAG,
            "n": self.n,
            "scales": list(self.scales),
            "steps": list(self.steps),
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "scale_ref": self.scale_ref,
            "step_ref": self.step_ref,
            "losses": {
                k: {
                    "offset": p.offset,
                    "amplitude": p.amplitude,
                    "t0": p.t0.tolist(),
                    "t1": p.t1.tolist(),
                    "scale_amp": p.scale_amp,
                    "scale_power": p.scale_power,
                    "step_amp": p.step_amp,
                    "step_power": p.step_power,
                }
                for k, p in self.losses.items()
            },
            "accuracies": {
                k: {"source": p.source, "floor": p.floor, "bias": p.bias, "slope": p.slope}
                for k, p in self.accuracies.items()
            },
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != FORMAT_TAG:
            raise ParseError(f"unsupported surface format {d.get('format')!r}")
        try:
            return cls(
                losses={k: LossParams(**v) for k, v in d["losses"].items()},
                accuracies={k: AccuracyParams(**v) for k, v in d["accuracies"].items()},
                n=int(d["n"]),
                scales=tuple(d["scales"]),
                steps=tuple(d["steps"]),
                noise_sigma=float(d["noise_sigma"]),
                seed=int(d["seed"]),
                scale_ref=float(d["scale_ref"]),
                step_ref=float(d["step_ref"]),
            )
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed surface document: {exc}") from None

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc.msg}", line=exc.lineno) from None
        return cls.from_dict(d)


def surface_evaluate(spec, config, noise=True):
    return spec.evaluate(config, noise=noise)


def surface_curve(spec, w, m, up_to_step, noise=True):
    return spec.curve(w, m, up_to_step, noise=noise)


def surface_optimum(spec, m, z, metric, grid_resolution=0.05):
    return spec.optimum(m, z, metric, grid_resolution)


def mint_surface(seed, n=5, noise_sigma=0.01, scales=DEFAULT_SCALES, steps=DEFAULT_STEPS, coupling=0.15):
    """Draw a random surface from the family. ``coupling`` sets the spread of ``t1``."""
    rng = np.random.default_rng(seed)
    losses = {}
    for name in LOSS_METRICS:
        losses[name] = LossParams(
            offset=float(rng.uniform(1.5, 2.5)),
            amplitude=float(rng.uniform(0.8, 1.5)),
            t0=rng.uniform(0.5, 2.5, size=n),
            t1=rng.normal(0.0, coupling, size=n),
            scale_amp=float(rng.uniform(0.3, 0.6)),
            scale_power=float(rng.uniform(0.25, 0.4)),
            step_amp=float(rng.uniform(0.2, 0.4)),
            step_power=float(rng.uniform(0.4, 0.7)),
        )
    sources = rng.choice(LOSS_METRICS[1:], size=len(ACCURACY_METRICS), replace=False)
    accuracies = {}
    for name, src in zip(ACCURACY_METRICS, sources):
        slope = float(rng.uniform(1.5, 3.0))
        accuracies[name] = AccuracyParams(source=str(src), floor=ACCURACY_FLOORS[name], bias=slope * 3.2, slope=slope)
    return SurfaceSpec(
        losses=losses, accuracies=accuracies, n=n, scales=scales, steps=steps, noise_sigma=noise_sigma, seed=int(seed)
    )


def optimum_separation(spec, metric, resolution=0.05):
    """TV distance between the best mixtures at the smallest and largest scale (final step)."""
    z = max(spec.steps)
    w_small, _ = spec.optimum(min(spec.scales), z, metric, resolution)
    w_large, _ = spec.optimum(max(spec.scales), z, metric, resolution)
    return simplex_distance(w_small, w_large, "total_variation")


def acceptance_surface(seed, n=5, noise_sigma=0.01, min_separation=0.1, max_tries=200):
    """Mint a surface whose every loss metric has scale-dependent optima separated by TV >= ``min_separation``.

    Coupling vectors of metrics that fail the check are redrawn from a
    generator derived from ``seed``.
    """
    spec = mint_surface(seed, n=n, noise_sigma=noise_sigma)
    rng = np.random.default_rng([int(seed), 7919])
    for name in LOSS_METRICS:
        for _ in range(max_tries):
            if optimum_separation(spec, name) >= min_separation:
                break
            spec.losses[name].t1 = rng.normal(0.0, 0.3, size=n)
        else:
            raise InvalidArgumentError(f"could not reach optimum separation for {name}")
    return spec
