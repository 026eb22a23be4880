"""Expected improvement, cost-normalized selection, and the low-EI exploration trigger.

Everything here minimizes: losses go in as-is, accuracies must be negated by
the caller.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from mfmsbo.errors import InvalidArgumentError
from mfmsbo.simplex import as_mixture, project_rows, sample_dirichlet
from mfmsbo.space import Configuration

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

STEP_SIZE = 0.1
MAX_HALVINGS = 20
MAX_ITERS = 100
CONVERGENCE_TOL = 1e-10


@dataclass
class AcquisitionState:
    alpha: float = 1.0
    alpha_decay: float = 0.99
    ei_threshold: float = 1e-4
    lengthscale_shrink: float = 0.95
    incumbent: float = None
    steps: int = 0
    shrink_events: int = 0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise InvalidArgumentError("alpha must lie in (0, 1]")
        if not 0 < self.alpha_decay < 1 or not 0 < self.lengthscale_shrink < 1:
            raise InvalidArgumentError("alpha_decay and lengthscale_shrink must lie in (0, 1)")
        if not self.ei_threshold > 0:
            raise InvalidArgumentError("ei_threshold must be positive")
        self._alpha0 = self.alpha


def decay_alpha(state):
    """Advance one optimization step; ``alpha = alpha0 * decay**t`` (no accumulated drift)."""
    state.steps += 1
    state.alpha = state._alpha0 * state.alpha_decay**state.steps
    return state


def _normal_pdf(u):
    with np.errstate(over="ignore"):  # u * u -> inf just gives pdf 0
        return _INV_SQRT_2PI * np.exp(-0.5 * u * u)


def _ei_terms(mean, variance, incumbent):
    mean = np.asarray(mean, dtype=float)
    variance = np.asarray(variance, dtype=float)
    if np.any(variance < -1e-12):
        raise InvalidArgumentError("variance must be nonnegative")
    sigma = np.sqrt(np.maximum(variance, 0.0))
    gap = incumbent - mean
    pos = sigma > 0
    u = np.where(pos, gap / np.where(pos, sigma, 1.0), 0.0)
    cdf = ndtr(u)
    pdf = _normal_pdf(u)
    ei = np.where(pos, gap * cdf + sigma * pdf, np.maximum(gap, 0.0))
    return np.maximum(ei, 0.0), sigma, cdf, pdf, pos


def expected_improvement(mean, variance, incumbent):
    """``E[max(y* - f, 0)]`` for ``f ~ N(mean, variance)``; works elementwise on arrays."""
    ei = _ei_terms(mean, variance, incumbent)[0]
    return float(ei) if ei.ndim == 0 else ei


def eipu(ei, cost, alpha):
    """EI per unit cost: ``ei / cost**alpha``."""
    if not cost > 0:
        raise InvalidArgumentError(f"cost must be positive, got {cost}")
    return ei / cost**alpha


def _ei_and_grad(post, W, m, z, incumbent):
    mean, var, dmean, dvar = post.predict_arrays(W, m, z, grad=True)
    ei, sigma, cdf, pdf, pos = _ei_terms(mean, var, incumbent)
    dsigma = np.where(pos[:, None], dvar / (2.0 * np.where(pos, sigma, 1.0))[:, None], 0.0)
    grad = -cdf[:, None] * dmean + pdf[:, None] * dsigma
    grad = np.where(pos[:, None], grad, np.where((incumbent - mean > 0)[:, None], -dmean, 0.0))
    return ei, grad


def _ei_only(post, W, m, z, incumbent):
    mean, var = post.predict_arrays(W, m, z)
    return _ei_terms(mean, var, incumbent)[0]


def projected_ei_ascent(post, starts, m, z, incumbent):
    """Batched projected-gradient ascent on EI over the simplex.

    Each row of ``starts`` is an independent run with its own scale ``m[i]``
    and step ``z[i]``. Steps move a fixed distance ``STEP_SIZE`` along the
    tangent-projected gradient and halve on non-improvement. Returns the final
    points and their EI values; a row's EI never drops below its start value.
    """
    X = project_rows(starts)
    P = X.shape[0]
    m = np.broadcast_to(np.asarray(m, dtype=float), (P,)).copy()
    z = np.broadcast_to(np.asarray(z, dtype=float), (P,)).copy()
    f, g = _ei_and_grad(post, X, m, z, incumbent)
    active = np.ones(P, dtype=bool)
    for _ in range(MAX_ITERS):
        d = g - g.mean(axis=1, keepdims=True)
        norm = np.linalg.norm(d, axis=1)
        active &= np.isfinite(norm) & (norm > 0)
        if not active.any():
            break
        d[active] /= norm[active, None]
        step = np.full(P, STEP_SIZE)
        pending = active.copy()
        moved = np.zeros(P, dtype=bool)
        gain = np.zeros(P)
        for _ in range(MAX_HALVINGS + 1):
            idx = np.flatnonzero(pending)
            if idx.size == 0:
                break
            cand = project_rows(X[idx] + step[idx, None] * d[idx])
            fc = _ei_only(post, cand, m[idx], z[idx], incumbent)
            better = fc > f[idx]
            acc = idx[better]
            gain[acc] = fc[better] - f[acc]
            X[acc] = cand[better]
            f[acc] = fc[better]
            moved[acc] = True
            pending[acc] = False
            step[idx[~better]] *= 0.5
        active &= moved & (gain >= CONVERGENCE_TOL)
        if not active.any():
            break
        idx = np.flatnonzero(active)
        _, g_new = _ei_and_grad(post, X[idx], m[idx], z[idx], incumbent)
        g[idx] = g_new
    return X, f


def maximize_ei_over_simplex(post, m, z, incumbent, restarts=5, rng_seed=None):
    """Best mixture for a fixed ``(m, z)`` from ``restarts`` Dirichlet(1) starts."""
    n = post.inputs.W.shape[1]
    starts = np.atleast_2d(sample_dirichlet(n, 1.0, rng_seed, size=restarts))
    X, f = projected_ei_ascent(post, starts, m, z, incumbent)
    best = int(np.argmax(f))
    return as_mixture(X[best]), float(f[best])


@dataclass
class Selection:
    config: Configuration
    ei: float
    score: float
    cost: float
    max_ei: float
    shrunk: bool
    hyperparams: object
    candidates: list = field(default_factory=list)


def select_next(post, state, scales, steps, cost_model, rng_seed=None, restarts=5, max_cost=None):
    """Pick the ``(w, m, z)`` with the largest ``EI / cost**alpha``.

    Pairs costing more than ``max_cost`` are skipped; returns ``None`` when no
    pair is affordable. If the largest raw EI over all evaluated pairs falls
    below ``state.ei_threshold`` the returned ``hyperparams`` carry length
    scales multiplied by ``state.lengthscale_shrink``; the proposal itself is
    still made with the current posterior.
    """
    if state.incumbent is None:
        raise InvalidArgumentError("acquisition state has no incumbent")
    pairs = sorted((int(m), int(z)) for m in scales for z in steps)
    if not pairs:
        raise InvalidArgumentError("scale and step sets must be non-empty")
    costs = {p: float(cost_model(*p)) for p in pairs}
    if max_cost is not None:
        pairs = [p for p in pairs if costs[p] <= max_cost]
    if not pairs:
        return None
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    n = post.inputs.W.shape[1]
    starts = np.atleast_2d(sample_dirichlet(n, 1.0, rng, size=restarts * len(pairs)))
    m_rep = np.repeat([p[0] for p in pairs], restarts)
    z_rep = np.repeat([p[1] for p in pairs], restarts)
    X, f = projected_ei_ascent(post, starts, m_rep, z_rep, state.incumbent)
    X = X.reshape(len(pairs), restarts, n)
    f = f.reshape(len(pairs), restarts)
    candidates = []
    for i, p in enumerate(pairs):
        j = int(np.argmax(f[i]))
        ei = float(f[i, j])
        candidates.append((p, X[i, j], ei, eipu(ei, costs[p], state.alpha), costs[p]))
    best_score = max(c[3] for c in candidates)
    tied = [c for c in candidates if c[3] >= best_score - 1e-12 * abs(best_score)]
    tied.sort(key=lambda c: (c[4], c[0][0], c[0][1]))
    (m, z), w, ei, score, cost = tied[0]
    max_ei = max(c[2] for c in candidates)
    hp = post.hp.copy()
    shrunk = max_ei < state.ei_threshold
    if shrunk:
        hp.shrink_length_scales(state.lengthscale_shrink)
        state.shrink_events += 1
    return Selection(
        config=Configuration(w, m, z),
        ei=ei,
        score=score,
        cost=cost,
        max_ei=max_ei,
        shrunk=shrunk,
        hyperparams=hp,
        candidates=candidates,
    )
