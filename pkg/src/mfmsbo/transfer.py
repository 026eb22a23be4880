"""Predictor transfer experiments: does cheap data help predict expensive runs?

Designs E1-E5 vary which model scales enter the training set; E6-E8 hold
compute fixed and trade run length for run count.
"""

from dataclasses import dataclass, field

import numpy as np

from mfmsbo.errors import InvalidArgumentError
from mfmsbo.simulator.mlp import encode_inputs, r_squared_columns, train_arrays
from mfmsbo.simulator.runlog import RunLog, synthesize_runlog
from mfmsbo.simulator.surface import METRICS, SurfaceSpec

DESIGNS = ("E1", "E2", "E3", "E4", "E5", "E6", "E7", "E8")
DEFAULT_ROWS = 2000
CHECKPOINTS = 20
TEST_FRACTION = 0.3


def checkpoint_steps(final_step, count=CHECKPOINTS):
    """Evenly spaced checkpoints ending at ``final_step``."""
    return tuple(int(round(final_step * k / count)) for k in range(1, count + 1))


# design -> (target scale rank from the top, extra scale ranks to include); rank 0 is the largest scale
_SCALE_DESIGNS = {
    "E1": (0, ()),
    "E2": (0, (1,)),
    "E3": (0, "all-smaller"),
    "E4": (1, ()),
    "E5": (1, (2,)),
}
# design -> (truncated run count, truncation depth as checkpoint index out of a
# 196-checkpoint run); the three designs cost roughly the same compute
_TRUNCATION = {"E6": (16, 196), "E7": (22, 130), "E8": (32, 85)}
_FULL_LENGTH = 196


@dataclass
class Split:
    design: str
    train: np.ndarray
    test: np.ndarray
    compute: float = 0.0
    detail: dict = field(default_factory=dict)


def _runs(log):
    ids = log.run_ids()
    runs = {}
    for i, r in enumerate(ids):
        runs.setdefault(int(r), []).append(i)
    return {r: np.asarray(rows) for r, rows in runs.items()}


def _runs_by_scale(log):
    by_scale = {}
    for r, rows in _runs(log).items():
        by_scale.setdefault(int(log.model_scale[rows[0]]), []).append(r)
    return by_scale


def _final_rows(log, rows):
    return rows[np.argmax(log.train_step[rows])]


def make_split(log, design, seed):
    """Row indices for training and testing under ``design``."""
    if design not in DESIGNS:
        raise InvalidArgumentError(f"unknown design {design!r}; choose one of {', '.join(DESIGNS)}")
    if len(log) == 0:
        raise InvalidArgumentError("run log is empty")
    rng = np.random.default_rng(seed)
    runs = _runs(log)
    by_scale = _runs_by_scale(log)
    scales = sorted(by_scale, reverse=True)
    if design in _SCALE_DESIGNS:
        return _scale_split(log, design, rng, runs, by_scale, scales)
    return _truncation_split(log, design, rng, runs, by_scale, scales)


def _scale_split(log, design, rng, runs, by_scale, scales):
    target_rank, extra = _SCALE_DESIGNS[design]
    top = max(extra) if extra and extra != "all-smaller" else target_rank
    if len(scales) <= top:
        raise InvalidArgumentError(f"{design} needs runs at {top + 1} distinct scales, log has {len(scales)}")
    target = scales[target_rank]
    pool = list(by_scale[target])
    if len(pool) < 4:
        raise InvalidArgumentError(f"{design} needs at least 4 runs at scale {target}, log has {len(pool)}")
    pool = [pool[i] for i in rng.permutation(len(pool))]
    half = len(pool) // 2
    train_runs, test_runs = pool[:half], pool[half:]
    if extra == "all-smaller":
        extra_scales = [s for s in scales if s < target]
    else:
        extra_scales = [scales[k] for k in extra]
    for s in extra_scales:
        train_runs = train_runs + list(by_scale[s])
    train = np.concatenate([runs[r] for r in train_runs])
    test = np.concatenate([runs[r] for r in test_runs])
    return Split(design, train, test, detail={"target_scale": target, "extra_scales": extra_scales})


def _truncation_split(log, design, rng, runs, by_scale, scales):
    final_step = int(log.train_step.max())
    n_trunc, depth = _TRUNCATION[design]
    cut = final_step * depth / _FULL_LENGTH
    test_runs, pools = [], {}
    for s in sorted(scales):
        rs = [by_scale[s][i] for i in rng.permutation(len(by_scale[s]))]
        k = int(round(TEST_FRACTION * len(rs)))
        test_runs += rs[:k]
        pools[s] = rs[k:]
    # one complete run per scale, then truncated runs dealt round-robin over scales
    complete = {}
    for s in sorted(scales):
        if not pools[s]:
            raise InvalidArgumentError(f"{design}: no training run left at scale {s} after holding out the test set")
        complete[s] = pools[s].pop(0)
    truncated = []
    order = sorted(scales)
    i = 0
    while len(truncated) < n_trunc:
        if not any(pools.values()):
            have = len(truncated)
            raise InvalidArgumentError(f"{design} needs {n_trunc} truncated runs plus {len(scales)} complete ones, only {have} available")
        s = order[i % len(order)]
        i += 1
        if pools[s]:
            truncated.append(pools[s].pop(0))
    train = [runs[r] for r in complete.values()]
    compute = 0.0
    for r in complete.values():
        compute += float(log.model_scale[runs[r][0]]) * final_step / 1e9
    for r in truncated:
        rows = runs[r]
        keep = rows[log.train_step[rows] <= cut + 1e-9]
        train.append(keep)
        if keep.size:
            compute += float(log.model_scale[rows[0]]) * float(log.train_step[keep].max()) / 1e9
    test = np.array([_final_rows(log, runs[r]) for r in test_runs])
    detail = {"truncated_runs": n_trunc, "truncation_step": cut, "complete_runs": len(complete)}
    return Split(design, np.concatenate(train), test, compute=compute, detail=detail)


@dataclass
class TransferResult:
    design: str
    metrics: tuple
    r2: np.ndarray  # (seeds, metrics)
    splits: list

    @property
    def mean_r2(self):
        return np.nanmean(self.r2, axis=0)

    @property
    def median_per_seed(self):
        return np.nanmedian(self.r2, axis=1)

    @property
    def median(self):
        """Median over seeds of the across-metric median R^2."""
        return float(np.median(self.median_per_seed))


def transfer_log(spec, n_rows=DEFAULT_ROWS, seed=0, checkpoints=CHECKPOINTS):
    return synthesize_runlog(spec, n_rows, seed, steps=checkpoint_steps(max(spec.steps), checkpoints))


def run_transfer_experiments(source, design, seeds=(0, 1, 2, 3, 4), epochs=20, log_seed=0):
    """Train on each seed's split and score on its held-out rows; returns per-seed per-metric R^2."""
    if isinstance(source, SurfaceSpec):
        log = transfer_log(source, seed=log_seed)
    elif isinstance(source, RunLog):
        log = source
    else:
        raise InvalidArgumentError("source must be a RunLog or a SurfaceSpec")
    rows, splits = [], []
    X_all = encode_inputs(log.W, log.model_scale, log.train_step) if len(log) else None
    for seed in seeds:
        sp = make_split(log, design, seed)
        if sp.test.size < 2 or sp.train.size < 2:
            raise InvalidArgumentError(f"{design}: split too small (train {sp.train.size}, test {sp.test.size} rows)")
        res = train_arrays(X_all[sp.train], log.Y[sp.train], epochs=epochs, seed=seed)
        rows.append(r_squared_columns(log.Y[sp.test], res.predictor(X_all[sp.test])))
        splits.append(sp)
    return TransferResult(design, METRICS, np.array(rows), splits)
