"""MLP performance predictor (numpy, trained with Adam) and the R^2 score."""

import json
import warnings
from dataclasses import dataclass

import numpy as np

from mfmsbo.errors import InvalidArgumentError, ParseError
from mfmsbo.simulator.surface import METRICS
from mfmsbo.space import Configuration

HIDDEN = (64, 64, 64)
FORMAT_TAG = "mfmsbo-mlp/1"

# Architecture per model scale; gives the predictor two extra inputs beyond the
# mixture, log model size and log step.
ARCHITECTURES = {
    20_000_000: (256, 8, 8),
    60_000_000: (512, 8, 8),
    150_000_000: (768, 12, 12),
    300_000_000: (1024, 16, 16),
    500_000_000: (1280, 16, 16),
    700_000_000: (1536, 16, 16),
    1_000_000_000: (2048, 16, 16),
}


def encode_inputs(W, model_scale, train_step):
    """Predictor features: mixture, log m, log z, log d_model, log n_layers."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    m = np.broadcast_to(np.asarray(model_scale, dtype=np.int64), (W.shape[0],))
    z = np.broadcast_to(np.asarray(train_step, dtype=float), (W.shape[0],))
    try:
        arch = np.array([ARCHITECTURES[int(s)] for s in m], dtype=float).reshape(-1, 3)
    except KeyError as exc:
        raise InvalidArgumentError(f"no architecture known for model scale {exc.args[0]}") from None
    return np.column_stack([W, np.log(m.astype(float)), np.log(z), np.log(arch[:, 0]), np.log(arch[:, 2])])


@dataclass
class MlpPredictor:
    weights: list
    biases: list
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: np.ndarray
    y_scale: np.ndarray
    dropout: float = 0.1
    metrics: tuple = METRICS

    @property
    def dims(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def forward_standardized(self, Xs):
        h = Xs
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ W + b, 0.0)
        return h @ self.weights[-1] + self.biases[-1]

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = self.forward_standardized((X - self.x_mean) / self.x_scale)
        return out * self.y_scale + self.y_mean

    def predict(self, W, model_scale, train_step):
        return self(encode_inputs(W, model_scale, train_step))

    # -- serialization ------------------------------------------------------

    def to_dict(self):
        return {
            "format": FORMAT_TAG,
            "dims": self.dims,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "x_mean": self.x_mean.tolist(),
            "x_scale": self.x_scale.tolist(),
            "y_mean": self.y_mean.tolist(),
            "y_scale": self.y_scale.tolist(),
            "dropout": self.dropout,
            "metrics": list(self.metrics),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != FORMAT_TAG:
            raise ParseError(f"unsupported predictor format {d.get('format')!r}")
        try:
            p = cls(
                weights=[np.array(w, dtype=float) for w in d["weights"]],
                biases=[np.array(b, dtype=float) for b in d["biases"]],
                x_mean=np.array(d["x_mean"], dtype=float),
                x_scale=np.array(d["x_scale"], dtype=float),
                y_mean=np.array(d["y_mean"], dtype=float),
                y_scale=np.array(d["y_scale"], dtype=float),
                dropout=float(d["dropout"]),
                metrics=tuple(d["metrics"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed predictor document: {exc}") from None
        if p.dims != list(d["dims"]):
            raise ParseError("layer dimensions disagree with the weight matrices")
        return p

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc.msg}", line=exc.lineno) from None
        return cls.from_dict(d)


def mlp_forward(p, inputs):
    """Deterministic forward pass (dropout off). Accepts one input vector or a batch."""
    x = np.asarray(inputs, dtype=float)
    out = p(x)
    return out[0] if x.ndim == 1 else out


def init_predictor(n_in, n_out=len(METRICS), hidden=HIDDEN, rng=None, dropout=0.1):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init for weights and biases."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    dims = [n_in, *hidden, n_out]
    weights, biases = [], []
    for a, b in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(a)
        weights.append(rng.uniform(-bound, bound, size=(a, b)))
        biases.append(rng.uniform(-bound, bound, size=b))
    return MlpPredictor(
        weights, biases, np.zeros(n_in), np.ones(n_in), np.zeros(n_out), np.ones(n_out), dropout=dropout
    )


def r_squared(truth, pred):
    """Coefficient of determination ``1 - SS_res / SS_tot``."""
    truth = np.asarray(truth, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if truth.shape != pred.shape or truth.ndim != 1 or truth.size < 2:
        raise InvalidArgumentError("r_squared needs two equal-length vectors with at least 2 entries")
    ss_tot = np.sum((truth - truth.mean()) ** 2)
    if not ss_tot > 0:
        raise InvalidArgumentError("R^2 is undefined for a constant truth vector")
    return float(1.0 - np.sum((truth - pred) ** 2) / ss_tot)


def r_squared_columns(Y, P):
    """Per-column R^2; constant columns give NaN with a warning."""
    out = np.full(Y.shape[1], np.nan)
    for j in range(Y.shape[1]):
        try:
            out[j] = r_squared(Y[:, j], P[:, j])
        except InvalidArgumentError:
            warnings.warn(f"column {j} has zero variance; R^2 reported as NaN", RuntimeWarning, stacklevel=2)
    return out


def _standardizer(A):
    mean = A.mean(axis=0)
    scale = A.std(axis=0)
    scale = np.where(scale > 1e-12, scale, 1.0)
    return mean, scale


@dataclass
class TrainResult:
    predictor: MlpPredictor
    r2: np.ndarray
    epoch_losses: list


def train_arrays(X, Y, epochs=20, batch=64, lr=1e-3, weight_decay=0.01, dropout=0.1, seed=0):
    """Minibatch Adam on mean squared error of standardized targets.

    Weight decay is an L2 term added to the gradient of every parameter.
    Dropout is inverted and applied to hidden activations only. The recorded
    loss of an epoch is the mean squared error over its minibatches, as seen
    during training (dropout active).
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if len(X) < 2:
        raise InvalidArgumentError("need at least 2 rows to train a predictor")
    rng = np.random.default_rng(seed)
    net = init_predictor(X.shape[1], Y.shape[1], rng=rng, dropout=dropout)
    net.x_mean, net.x_scale = _standardizer(X)
    net.y_mean, net.y_scale = _standardizer(Y)
    Xs = (X - net.x_mean) / net.x_scale
    Ys = (Y - net.y_mean) / net.y_scale
    params = [p for pair in zip(net.weights, net.biases) for p in pair]
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    keep = 1.0 - dropout
    t = 0
    losses = []
    n_layers = len(net.weights)
    for _ in range(epochs):
        order = rng.permutation(len(Xs))
        sse = 0.0
        for lo in range(0, len(order), batch):
            idx = order[lo : lo + batch]
            xb, yb = Xs[idx], Ys[idx]
            acts = [xb]
            masks = []
            h = xb
            for li in range(n_layers - 1):
                pre = h @ net.weights[li] + net.biases[li]
                h = np.maximum(pre, 0.0)
                if dropout > 0:
                    mask = (rng.random(h.shape) < keep) / keep
                    h = h * mask
                else:
                    mask = None
                masks.append(mask)
                acts.append(h)
            out = h @ net.weights[-1] + net.biases[-1]
            resid = out - yb
            sse += float(np.sum(resid * resid))
            delta = 2.0 * resid / yb.size
            grads = [None] * (2 * n_layers)
            for li in range(n_layers - 1, -1, -1):
                grads[2 * li] = acts[li].T @ delta
                grads[2 * li + 1] = delta.sum(axis=0)
                if li > 0:
                    delta = delta @ net.weights[li].T
                    if masks[li - 1] is not None:
                        delta = delta * masks[li - 1]
                    delta = delta * (acts[li] > 0)
            t += 1
            for k, p in enumerate(params):
                g = grads[k] + weight_decay * p
                m1[k] = beta1 * m1[k] + (1 - beta1) * g
                m2[k] = beta2 * m2[k] + (1 - beta2) * g * g
                p -= lr * (m1[k] / (1 - beta1**t)) / (np.sqrt(m2[k] / (1 - beta2**t)) + eps)
        losses.append(sse / Ys.size)
    r2 = r_squared_columns(Y, net(X))
    return TrainResult(net, r2, losses)


def mlp_train(log, epochs=20, batch=64, lr=1e-3, weight_decay=0.01, dropout=0.1, seed=0):
    """Fit a predictor to a run log; returns the predictor, per-metric training R^2 and epoch losses."""
    if len(log) < 2:
        raise InvalidArgumentError("run log needs at least 2 rows")
    X = encode_inputs(log.W, log.model_scale, log.train_step)
    return train_arrays(X, log.Y, epochs, batch, lr, weight_decay, dropout, seed)


class PredictorSimulator:
    """Simulator backend that answers queries with a trained predictor (noise-free)."""

    def __init__(self, predictor, scales, steps):
        self.predictor = predictor
        self.scales = tuple(sorted(int(s) for s in scales))
        self.steps = tuple(sorted(int(s) for s in steps))
        self.n = predictor.dims[0] - 4
        self.metrics = tuple(predictor.metrics)

    def evaluate(self, config, noise=True):
        if config.model_scale not in self.scales or config.train_step not in self.steps:
            raise InvalidArgumentError(f"{config} lies outside the declared scale/step sets")
        out = self.predictor.predict(config.mixture, config.model_scale, config.train_step)[0]
        return dict(zip(self.metrics, (float(v) for v in out)))

    def curve(self, w, m, up_to_step, noise=True):
        return [(z, self.evaluate(Configuration(w, m, z))) for z in self.steps if z <= up_to_step]
