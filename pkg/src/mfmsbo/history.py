"""Cost model, budget ledger, evaluation history and best-so-far curves."""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from mfmsbo.errors import BudgetExhaustedError, InvalidArgumentError
from mfmsbo.simulator.surface import is_accuracy
from mfmsbo.space import Configuration

METHODS = ("mfms-gp", "mfms-gp-fullscale", "hyperband-rf", "random-search")


@dataclass(frozen=True)
class CostModel:
    """``c(m, z) = (m / unit_scale) * z``: one unit trains a ``unit_scale`` model for one step."""

    unit_scale: float = 1e9

    def __call__(self, m, z):
        if m < 1 or z < 1:
            raise InvalidArgumentError(f"model scale and step must be >= 1, got ({m}, {z})")
        # multiply first so grid values (multiples of 1e6 times integer steps) stay exact
        return float(m) * float(z) / self.unit_scale


def objective(metric, value):
    """Minimization view of a metric value: accuracies are negated."""
    return -value if is_accuracy(metric) else value


class BudgetLedger:
    """Tracks spend against a fixed budget; refuses overdrafts."""

    def __init__(self, total):
        if not total > 0:
            raise InvalidArgumentError(f"budget must be positive, got {total}")
        self.total = float(total)
        self.spent = 0.0
        self.log = []

    @property
    def remaining(self):
        return self.total - self.spent

    def can_afford(self, cost):
        return self.spent + cost <= self.total

    def charge(self, cost, label=""):
        if cost < 0:
            raise InvalidArgumentError("cannot charge a negative cost")
        if not self.can_afford(cost):
            raise BudgetExhaustedError(f"charge of {cost:g} exceeds remaining budget {self.remaining:g}")
        self.spent += cost
        self.log.append((label, cost, self.spent))
        return self.spent


@dataclass
class EvaluationRecord:
    config: Configuration
    metrics: dict
    cost_charged: float
    iteration: int
    order: int
    cumulative_cost: float

    def to_json(self, method):
        return json.dumps(
            {
                "method": method,
                "iteration": self.iteration,
                "order": self.order,
                "w": [float(x) for x in self.config.mixture],
                "m": self.config.model_scale,
                "z": self.config.train_step,
                "metrics": {k: float(v) for k, v in self.metrics.items()},
                "cost_charged": self.cost_charged,
                "cumulative_cost": self.cumulative_cost,
            },
            sort_keys=True,
        )


@dataclass
class History:
    method: str = "mfms-gp"
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def append(self, config, metrics, cost_charged, iteration, cumulative_cost):
        rec = EvaluationRecord(config, dict(metrics), float(cost_charged), iteration, len(self.records), cumulative_cost)
        self.records.append(rec)
        return rec

    @property
    def total_charged(self):
        total = 0.0
        for r in self.records:
            total += r.cost_charged
        return total

    def observations(self, metric):
        """``(config, objective value)`` pairs ready for the GP."""
        return [(r.config, objective(metric, r.metrics[metric])) for r in self.records]

    def best_record(self, metric, where=None):
        best = None
        for r in self.records:
            if where is not None and not where(r):
                continue
            if best is None or objective(metric, r.metrics[metric]) < objective(metric, best.metrics[metric]):
                best = r
        return best

    def best_so_far(self, metric):
        """Best value after each record, indexed by cumulative cost."""
        return BestSoFarCurve.from_records(self.records, metric)

    def dumps(self):
        return "".join(r.to_json(self.method) + "\n" for r in self.records)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path):
        hist = None
        with open(path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                d = json.loads(line)
                if hist is None:
                    hist = cls(method=d["method"])
                cfg = Configuration(d["w"], d["m"], d["z"])
                hist.records.append(
                    EvaluationRecord(cfg, d["metrics"], d["cost_charged"], d["iteration"], d["order"], d["cumulative_cost"])
                )
        return hist if hist is not None else cls()


@dataclass
class BestSoFarCurve:
    """Step function of the best metric value against cumulative cost."""

    metric: str
    costs: np.ndarray
    values: np.ndarray

    @classmethod
    def from_points(cls, metric, costs, raw_values):
        """Running best of ``raw_values`` (in the metric's own orientation)."""
        obj = np.array([objective(metric, v) for v in raw_values], dtype=float)
        best = np.minimum.accumulate(obj) if len(obj) else obj
        vals = -best if is_accuracy(metric) else best
        return cls(metric, np.asarray(costs, dtype=float), vals)

    @classmethod
    def from_records(cls, records, metric):
        return cls.from_points(metric, [r.cumulative_cost for r in records], [r.metrics[metric] for r in records])

    def __len__(self):
        return len(self.costs)

    def at(self, cost):
        """Step interpolation: best value known at ``cost``; NaN before the first point."""
        cost = np.asarray(cost, dtype=float)
        idx = np.searchsorted(self.costs, cost, side="right")
        out = np.append(np.nan, self.values)[idx]
        return float(out) if out.ndim == 0 else out

    def first_crossing(self, target):
        """Smallest cumulative cost at which the curve reaches ``target``; ``inf`` if never."""
        hit = self.values >= target if is_accuracy(self.metric) else self.values <= target
        idx = np.flatnonzero(hit)
        return float(self.costs[idx[0]]) if idx.size else float("inf")

    @property
    def terminal(self):
        return float(self.values[-1]) if len(self.values) else float("nan")

    def save(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["cumulative_cost", "best_value"])
            for c, v in zip(self.costs, self.values):
                writer.writerow([format(float(c), ".17g"), format(float(v), ".17g")])
