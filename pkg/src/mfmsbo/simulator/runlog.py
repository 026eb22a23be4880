"""Tabular run logs: one row per (mixture, scale, step) observation of the 11 metrics."""

import csv
from dataclasses import dataclass

import numpy as np

from mfmsbo.errors import ParseError, ValidationError
from mfmsbo.simplex import RENORM_TOL, sample_dirichlet
from mfmsbo.simulator.surface import DATASETS, METRICS
from mfmsbo.space import DEFAULT_SCALES, Configuration

WEIGHT_COLUMNS = tuple(f"w_{d}" for d in DATASETS)
HEADER = WEIGHT_COLUMNS + ("model_scale", "train_step") + METRICS


@dataclass
class RunLog:
    W: np.ndarray
    model_scale: np.ndarray
    train_step: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float).reshape(-1, len(WEIGHT_COLUMNS))
        self.model_scale = np.asarray(self.model_scale, dtype=np.int64).reshape(-1)
        self.train_step = np.asarray(self.train_step, dtype=np.int64).reshape(-1)
        self.Y = np.asarray(self.Y, dtype=float).reshape(-1, len(METRICS))
        n = len(self.W)
        if not (len(self.model_scale) == len(self.train_step) == len(self.Y) == n):
            raise ValidationError("run log columns have inconsistent lengths")

    def __len__(self):
        return len(self.W)

    def __eq__(self, other):
        return (
            isinstance(other, RunLog)
            and np.array_equal(self.W, other.W)
            and np.array_equal(self.model_scale, other.model_scale)
            and np.array_equal(self.train_step, other.train_step)
            and np.array_equal(self.Y, other.Y)
        )

    def subset(self, idx):
        idx = np.asarray(idx, dtype=int)
        return RunLog(self.W[idx], self.model_scale[idx], self.train_step[idx], self.Y[idx])

    def metric(self, name):
        return self.Y[:, METRICS.index(name)]

    def run_ids(self):
        """Group rows into runs: rows sharing a mixture and a scale belong to one run."""
        keys = {}
        ids = np.empty(len(self), dtype=int)
        for i in range(len(self)):
            k = (self.W[i].tobytes(), int(self.model_scale[i]))
            ids[i] = keys.setdefault(k, len(keys))
        return ids

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, len(WEIGHT_COLUMNS))), [], [], np.zeros((0, len(METRICS))))


def _fmt(x):
    return format(float(x), ".17g")


def emit_runlog(log, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HEADER)
        for i in range(len(log)):
            writer.writerow(
                [_fmt(x) for x in log.W[i]]
                + [str(int(log.model_scale[i])), str(int(log.train_step[i]))]
                + [_fmt(x) for x in log.Y[i]]
            )


def ingest_runlog(path, scales=DEFAULT_SCALES):
    """Parse and validate a run log file.

    ``scales`` is the declared scale set every row must use; pass ``None`` to
    accept any positive scale.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file, expected a header row", line=1) from None
        if tuple(h.strip() for h in header) != HEADER:
            raise ParseError("header does not match the run log schema", line=1)
        W, ms, zs, Y = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(HEADER):
                raise ParseError(f"expected {len(HEADER)} fields, got {len(row)}", line=lineno)
            try:
                w = [float(c) for c in row[: len(WEIGHT_COLUMNS)]]
                m = int(row[len(WEIGHT_COLUMNS)])
                z = int(row[len(WEIGHT_COLUMNS) + 1])
                y = [float(c) for c in row[len(WEIGHT_COLUMNS) + 2 :]]
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            row_index = len(W)
            w_arr = np.asarray(w)
            if not np.all(np.isfinite(w_arr)) or w_arr.min() < 0 or abs(w_arr.sum() - 1.0) > RENORM_TOL:
                raise ValidationError(f"mixture weights sum to {w_arr.sum():.9g} or are negative", row=row_index)
            if m < 1 or z < 1:
                raise ValidationError("model_scale and train_step must be positive", row=row_index)
            if scales is not None and m not in scales:
                raise ValidationError(f"model_scale {m} is not in the declared scale set", row=row_index)
            W.append(w)
            ms.append(m)
            zs.append(z)
            Y.append(y)
    if not W:
        return RunLog.empty()
    return RunLog(np.array(W), ms, zs, np.array(Y))


def synthesize_runlog(spec, n_rows, seed, steps=None):
    """Sample runs from a surface until ``n_rows`` rows exist.

    Runs cycle through the scale set so every scale gets the same number of
    runs; each run contributes one row per grid step (its training curve).
    """
    steps = tuple(sorted(steps or spec.steps))
    rng = np.random.default_rng(seed)
    W, ms, zs, Y = [], [], [], []
    run = 0
    while len(W) < n_rows:
        w = sample_dirichlet(spec.n, 1.0, rng)
        m = spec.scales[run % len(spec.scales)]
        run += 1
        for z in steps:
            if len(W) >= n_rows:
                break
            vals = spec.evaluate(Configuration(w, m, z), check_step=False)
            W.append(w)
            ms.append(m)
            zs.append(z)
            Y.append([vals[k] for k in METRICS])
    return RunLog(np.array(W), ms, zs, np.array(Y))

