"""Exact GP regression over (mixture, scale, step) with a product of RBF kernels.

The kernel multiplies one RBF factor per input block::

    k(a, b) = s2 * exp(-d(w, w') / (2 l_w^2))
                 * exp(-(u - u')^2 / (2 l_m^2))
                 * exp(-(v - v')^2 / (2 l_z^2))

where ``d`` is a simplex distance and ``u = log(m / m_ref)``, ``v = log(z / z_ref)``.
The prior mean is linear in ``[1, u, v]``. Targets are standardized before
fitting and every quantity below is in standardized units unless a function
says otherwise.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from mfmsbo import _kernels
from mfmsbo.errors import InvalidArgumentError, NumericFailureError, ParseError
from mfmsbo.simplex import SimplexDistanceKind
from mfmsbo.space import CoordinateTransform, stack_configs

JITTER = 1e-6
MAX_JITTER = 1e-2
NOISE_FLOOR = 1e-8
_LOG2PI = np.log(2.0 * np.pi)

# Order of the optimization vector used by the marginal-likelihood routines.
PARAM_NAMES = (
    "log_length_scale_w",
    "log_length_scale_m",
    "log_length_scale_z",
    "log_signal_variance",
    "log_noise_variance",
    "mean_intercept",
    "mean_scale",
    "mean_step",
)


@dataclass
class GpHyperparams:
    length_scale_w: float = 1.0
    length_scale_m: float = 1.0
    length_scale_z: float = 1.0
    signal_variance: float = 1.0
    noise_variance: float = 1e-2
    mean_coeffs: np.ndarray = field(default_factory=lambda: np.zeros(3))
    distance_kind: SimplexDistanceKind = SimplexDistanceKind.SQUARED_L2

    def __post_init__(self):
        self.mean_coeffs = np.asarray(self.mean_coeffs, dtype=float).reshape(3)
        self.distance_kind = SimplexDistanceKind.parse(self.distance_kind)
        for name in ("length_scale_w", "length_scale_m", "length_scale_z", "signal_variance"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be positive")
        if not self.noise_variance >= 0:
            raise InvalidArgumentError("noise_variance must be nonnegative")

    def to_vector(self):
        return np.array(
            [
                np.log(self.length_scale_w),
                np.log(self.length_scale_m),
                np.log(self.length_scale_z),
                np.log(self.signal_variance),
                np.log(max(self.noise_variance, NOISE_FLOOR)),
                *self.mean_coeffs,
            ]
        )

    @classmethod
    def from_vector(cls, theta, distance_kind):
        theta = np.asarray(theta, dtype=float)
        return cls(
            length_scale_w=float(np.exp(theta[0])),
            length_scale_m=float(np.exp(theta[1])),
            length_scale_z=float(np.exp(theta[2])),
            signal_variance=float(np.exp(theta[3])),
            noise_variance=float(np.exp(theta[4])),
            mean_coeffs=theta[5:8].copy(),
            distance_kind=distance_kind,
        )

    def copy(self):
        return replace(self, mean_coeffs=self.mean_coeffs.copy())

    def shrink_length_scales(self, factor):
        self.length_scale_w *= factor
        self.length_scale_m *= factor
        self.length_scale_z *= factor

    # Plain "key = value" text, one field per line.
    def dumps(self):
        lines = [
            f"length_scale_w = {self.length_scale_w!r}",
            f"length_scale_m = {self.length_scale_m!r}",
            f"length_scale_z = {self.length_scale_z!r}",
            f"signal_variance = {self.signal_variance!r}",
            f"noise_variance = {self.noise_variance!r}",
            "mean_coeffs = " + ", ".join(repr(float(c)) for c in self.mean_coeffs),
            f"distance_kind = {self.distance_kind.value}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text):
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"expected 'key = value', got {raw!r}", line=lineno)
            key, value = (part.strip() for part in line.split("=", 1))
            values[key] = (lineno, value)
        required = ("length_scale_w", "length_scale_m", "length_scale_z", "signal_variance", "noise_variance",
                    "mean_coeffs", "distance_kind")
        missing = [k for k in required if k not in values]
        if missing:
            raise ParseError(f"missing fields: {', '.join(missing)}")
        unknown = sorted(set(values) - set(required))
        if unknown:
            raise ParseError(f"unknown fields: {', '.join(unknown)}", line=values[unknown[0]][0])
        try:
            kwargs = {k: float(values[k][1]) for k in required[:5]}
            kwargs["mean_coeffs"] = [float(x) for x in values["mean_coeffs"][1].split(",")]
        except ValueError as exc:
            raise ParseError(str(exc)) from None
        kwargs["distance_kind"] = values["distance_kind"][1]
        return cls(**kwargs)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.loads(fh.read())


@dataclass(frozen=True)
class _Inputs:
    W: np.ndarray
    u: np.ndarray
    v: np.ndarray

    @property
    def design(self):
        return np.column_stack([np.ones_like(self.u), self.u, self.v])


def _as_inputs(configs, transform):
    W, m, z = stack_configs(configs)
    return _Inputs(W, transform.scale(m), transform.step(z))


def _sq_diff(a, b):
    return (a[:, None] - b[None, :]) ** 2


def _cross_kernel(A, B, hp):
    Dw = _kernels.pairwise_distances(A.W, B.W, hp.distance_kind.code)
    expo = (
        Dw / (2.0 * hp.length_scale_w**2)
        + _sq_diff(A.u, B.u) / (2.0 * hp.length_scale_m**2)
        + _sq_diff(A.v, B.v) / (2.0 * hp.length_scale_z**2)
    )
    return hp.signal_variance * np.exp(-expo)


def kernel(a, b, hp, transform=None):
    """Covariance between two configurations."""
    if a.n != b.n:
        raise InvalidArgumentError(f"mixture dimension mismatch: {a.n} vs {b.n}")
    transform = transform or CoordinateTransform()
    return float(_cross_kernel(_as_inputs([a], transform), _as_inputs([b], transform), hp)[0, 0])


def kernel_matrix(configs_a, configs_b, hp, transform=None):
    transform = transform or CoordinateTransform()
    return _cross_kernel(_as_inputs(configs_a, transform), _as_inputs(configs_b, transform), hp)


def mean_function(c, hp, transform=None):
    """Linear prior mean ``b0 + b1 * log(m/m_ref) + b2 * log(z/z_ref)``."""
    transform = transform or CoordinateTransform()
    feats = np.array([1.0, float(transform.scale(c.model_scale)), float(transform.step(c.train_step))])
    return float(feats @ hp.mean_coeffs)


def standardize(y):
    """Return ``(standardized, mean, scale)``; a zero spread maps to scale 1."""
    y = np.asarray(y, dtype=float)
    mean = float(y.mean())
    scale = float(y.std()) if y.size > 1 else 0.0
    if not scale > 1e-12:
        scale = 1.0
    return (y - mean) / scale, mean, scale


def destandardize(ys, mean, scale):
    return np.asarray(ys) * scale + mean


def _cholesky(K, base_noise, jitter):
    """Factorize ``K + (base_noise + jitter) I``, escalating jitter x10 up to 1e-2."""
    tried = []
    j = jitter
    N = K.shape[0]
    while True:
        tried.append(j)
        try:
            L = np.linalg.cholesky(K + (base_noise + j) * np.eye(N))
            if np.all(np.isfinite(L)):
                return L, j
        except np.linalg.LinAlgError:
            pass
        if j <= 0.0 or j * 10 > MAX_JITTER * (1 + 1e-12):
            raise NumericFailureError("Cholesky factorization failed", jitters=tried)
        j *= 10.0


class GpPosterior:
    """Fitted posterior; immutable after construction."""

    def __init__(self, configs, y, hp, transform=None, jitter=JITTER):
        configs = list(configs)
        if not configs:
            raise InvalidArgumentError("cannot fit a posterior to an empty history")
        n = configs[0].n
        if any(c.n != n for c in configs):
            raise InvalidArgumentError("configurations have inconsistent mixture dimension")
        self.hp = hp.copy()
        self.transform = transform or CoordinateTransform()
        self.configs = configs
        self.y = np.asarray(y, dtype=float).copy()
        if self.y.shape != (len(configs),):
            raise InvalidArgumentError("targets must be a vector with one entry per configuration")
        self.ys, self.y_mean, self.y_scale = standardize(self.y)
        self.inputs = _as_inputs(configs, self.transform)
        self.K = _cross_kernel(self.inputs, self.inputs, self.hp)
        self.L, self.jitter = _cholesky(self.K, self.hp.noise_variance, jitter)
        self.prior_mean = self.inputs.design @ self.hp.mean_coeffs
        self.alpha = cho_solve((self.L, True), self.ys - self.prior_mean)
        Linv = solve_triangular(self.L, np.eye(len(configs)), lower=True)
        self.Kinv = Linv.T @ Linv
        for arr in (self.y, self.ys, self.K, self.L, self.alpha, self.Kinv):
            arr.setflags(write=False)

    @property
    def n_train(self):
        return len(self.configs)

    def _moments(self, W, u, v, grad=False):
        hp = self.hp
        X = self.inputs
        W = np.atleast_2d(W)
        u = np.broadcast_to(np.asarray(u, dtype=float), (W.shape[0],))
        v = np.broadcast_to(np.asarray(v, dtype=float), (W.shape[0],))
        Dw = _kernels.pairwise_distances(W, X.W, hp.distance_kind.code)
        k = hp.signal_variance * np.exp(
            -Dw / (2.0 * hp.length_scale_w**2)
            - _sq_diff(u, X.u) / (2.0 * hp.length_scale_m**2)
            - _sq_diff(v, X.v) / (2.0 * hp.length_scale_z**2)
        )
        h = np.column_stack([np.ones_like(u), u, v])
        mean = h @ hp.mean_coeffs + k @ self.alpha
        kv = k @ self.Kinv
        var = np.maximum(hp.signal_variance - np.einsum("pn,pn->p", k, kv), 0.0)
        if not grad:
            return mean, var
        inv2l2 = 1.0 / (2.0 * hp.length_scale_w**2)
        dmean = _kernels.weighted_distance_grad(W, X.W, -inv2l2 * k * self.alpha[None, :], hp.distance_kind.code)
        dvar = _kernels.weighted_distance_grad(W, X.W, 2.0 * inv2l2 * k * kv, hp.distance_kind.code)
        return mean, var, dmean, dvar

    def predict_standardized(self, W, u, v):
        return self._moments(W, u, v)

    def predict_arrays(self, W, m, z, grad=False):
        """Moments at mixtures ``W`` (P, n) for scale ``m`` and step ``z`` (scalars or length-P).

        With ``grad=True`` also returns the gradients of mean and variance with
        respect to the mixture coordinates. All outputs are de-standardized.
        """
        u = self.transform.scale(m)
        v = self.transform.step(z)
        out = self._moments(W, u, v, grad=grad)
        s = self.y_scale
        mean = self.y_mean + s * out[0]
        var = s * s * out[1]
        if not grad:
            return mean, var
        return mean, var, s * out[2], s * s * out[3]

    def predict(self, c):
        """Return ``(mean, variance)`` of the latent function at one configuration."""
        mean, var = self.predict_arrays(c.mixture[None, :], c.model_scale, c.train_step)
        return float(mean[0]), float(var[0])


def fit_posterior(history, hp, transform=None, jitter=JITTER):
    """Build a posterior from ``(Configuration, value)`` pairs."""
    history = list(history)
    if not history:
        raise InvalidArgumentError("history must be non-empty")
    configs, y = zip(*history)
    return GpPosterior(configs, np.asarray(y, dtype=float), hp, transform=transform, jitter=jitter)


def predict(post, c):
    return post.predict(c)


class _LmlProblem:
    """Precomputed distance blocks so LML and gradient reuse them across iterations."""

    def __init__(self, history, distance_kind, transform):
        configs, y = zip(*history)
        self.inputs = _as_inputs(configs, transform)
        self.ys, _, _ = standardize(np.asarray(y, dtype=float))
        self.H = self.inputs.design
        self.Dw = _kernels.pairwise_distances(self.inputs.W, self.inputs.W, SimplexDistanceKind.parse(distance_kind).code)
        self.Dm = _sq_diff(self.inputs.u, self.inputs.u)
        self.Dz = _sq_diff(self.inputs.v, self.inputs.v)
        self.N = len(self.ys)

    def evaluate(self, theta, jitter=JITTER, grad=True, noise=None):
        lw2, lm2, lz2 = np.exp(2.0 * theta[:3])
        sv = np.exp(theta[3])
        noise = np.exp(theta[4]) if noise is None else noise
        b = theta[5:8]
        Kf = sv * np.exp(-self.Dw / (2 * lw2) - self.Dm / (2 * lm2) - self.Dz / (2 * lz2))
        L, _ = _cholesky(Kf, noise, jitter)
        r = self.ys - self.H @ b
        alpha = cho_solve((L, True), r)
        lml = -0.5 * r @ alpha - np.log(np.diag(L)).sum() - 0.5 * self.N * _LOG2PI
        if not grad:
            return lml
        Linv = solve_triangular(L, np.eye(self.N), lower=True)
        A = np.outer(alpha, alpha) - Linv.T @ Linv
        g = np.empty(8)
        g[0] = 0.5 * np.sum(A * Kf * (self.Dw / lw2))
        g[1] = 0.5 * np.sum(A * Kf * (self.Dm / lm2))
        g[2] = 0.5 * np.sum(A * Kf * (self.Dz / lz2))
        g[3] = 0.5 * np.sum(A * Kf)
        g[4] = 0.5 * noise * np.trace(A)
        g[5:8] = self.H.T @ alpha
        return lml, g


def _check_history(history, minimum):
    history = list(history)
    if len(history) < minimum:
        raise InvalidArgumentError(f"need at least {minimum} observations, got {len(history)}")
    return history


def log_marginal_likelihood(history, hp, transform=None, jitter=JITTER):
    """Gaussian log evidence of standardized targets under the prior ``hp``."""
    history = _check_history(history, 2)
    prob = _LmlProblem(history, hp.distance_kind, transform or CoordinateTransform())
    return float(prob.evaluate(hp.to_vector(), jitter=jitter, grad=False, noise=hp.noise_variance))


def lml_gradient(history, hp, transform=None, jitter=JITTER):
    """Gradient of the log evidence with respect to the vector in :data:`PARAM_NAMES`."""
    history = _check_history(history, 2)
    prob = _LmlProblem(history, hp.distance_kind, transform or CoordinateTransform())
    return prob.evaluate(hp.to_vector(), jitter=jitter, grad=True, noise=hp.noise_variance)[1]


def fit_hyperparams(history, init, lr=0.1, iters=50, transform=None, jitter=JITTER):
    """Adam ascent on the log evidence in log-parameter space; returns the best iterate.

    An iterate whose factorization fails is discarded: the search steps back
    to the previous point and halves its learning rate.
    """
    history = _check_history(history, 2)
    if iters <= 0:
        return init.copy()
    prob = _LmlProblem(history, init.distance_kind, transform or CoordinateTransform())
    theta = init.to_vector()
    log_floor = np.log(NOISE_FLOOR)
    theta[4] = max(theta[4], log_floor)
    lml, g = prob.evaluate(theta, jitter=jitter)
    best_theta, best_lml = theta.copy(), lml
    m1 = np.zeros_like(theta)
    m2 = np.zeros_like(theta)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step_lr = lr
    for t in range(1, iters + 1):
        m1 = beta1 * m1 + (1 - beta1) * g
        m2 = beta2 * m2 + (1 - beta2) * g * g
        mhat = m1 / (1 - beta1**t)
        vhat = m2 / (1 - beta2**t)
        cand = theta + step_lr * mhat / (np.sqrt(vhat) + eps)
        cand[4] = max(cand[4], log_floor)
        cand[:4] = np.clip(cand[:4], -12.0, 12.0)
        try:
            lml_c, g_c = prob.evaluate(cand, jitter=jitter)
            if not np.isfinite(lml_c):
                raise NumericFailureError("non-finite evidence")
        except NumericFailureError:
            step_lr *= 0.5
            continue
        theta, lml, g = cand, lml_c, g_c
        if lml > best_lml:
            best_theta, best_lml = theta.copy(), lml
    return GpHyperparams.from_vector(best_theta, init.distance_kind)
