"""Geometry of the probability simplex: validation, sampling, projection, distances."""

from enum import Enum
from itertools import combinations
from math import comb

import numpy as np

from mfmsbo import _kernels
from mfmsbo.errors import InvalidArgumentError

SUM_TOL = 1e-9
RENORM_TOL = 1e-6


class SimplexDistanceKind(str, Enum):
    """Distance between two mixtures used inside the mixture kernel."""

    SQUARED_L2 = "squared_l2"
    TOTAL_VARIATION = "total_variation"
    JENSEN_SHANNON = "jensen_shannon"

    @property
    def code(self):
        return _CODES[self]

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"l2": cls.SQUARED_L2, "rbf": cls.SQUARED_L2, "tv": cls.TOTAL_VARIATION, "jsd": cls.JENSEN_SHANNON}
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise InvalidArgumentError(f"unknown simplex distance kind {value!r}") from None


_CODES = {
    SimplexDistanceKind.SQUARED_L2: _kernels.SQUARED_L2,
    SimplexDistanceKind.TOTAL_VARIATION: _kernels.TOTAL_VARIATION,
    SimplexDistanceKind.JENSEN_SHANNON: _kernels.JENSEN_SHANNON,
}


def as_mixture(weights):
    """Validate ``weights`` as a point on the simplex and return it as a float array.

    Sums off by less than 1e-6 are renormalized; anything further off, any
    negative coordinate, or fewer than two coordinates is rejected.
    """
    w = np.array(weights, dtype=float).reshape(-1)
    if w.size < 2:
        raise InvalidArgumentError(f"mixture needs at least 2 coordinates, got {w.size}")
    if not np.all(np.isfinite(w)):
        raise InvalidArgumentError("mixture has non-finite coordinates")
    if np.any(w < 0.0):
        if w.min() < -SUM_TOL:
            raise InvalidArgumentError(f"mixture has a negative coordinate {w.min():.3g}")
        w = np.maximum(w, 0.0)
    total = w.sum()
    if abs(total - 1.0) > RENORM_TOL:
        raise InvalidArgumentError(f"mixture sums to {total:.9g}, not 1")
    if abs(total - 1.0) > 0.0:
        w = w / total
    return w


def is_mixture(weights, tol=SUM_TOL):
    w = np.asarray(weights, dtype=float)
    return w.ndim == 1 and w.size >= 2 and bool(np.all(w >= 0.0)) and abs(w.sum() - 1.0) <= tol


def sample_dirichlet(n, alpha=1.0, rng_seed=None, size=None):
    """Draw simplex points from a symmetric Dirichlet(alpha) distribution.

    ``rng_seed`` may be an int or a ``numpy.random.Generator``. With ``size``
    given, returns an array of shape ``(size, n)``.
    """
    if int(n) != n or n < 2:
        raise InvalidArgumentError(f"dimension must be an integer >= 2, got {n}")
    if not alpha > 0:
        raise InvalidArgumentError(f"alpha must be positive, got {alpha}")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    draws = rng.dirichlet(np.full(int(n), float(alpha)), size=size)
    return draws


def project_to_simplex(v):
    """Euclidean projection of ``v`` onto the simplex (sort-based, O(n log n))."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise InvalidArgumentError("projection needs a vector with at least 2 entries")
    if not np.all(np.isfinite(v)):
        raise InvalidArgumentError("cannot project a vector with non-finite entries")
    out = _kernels.project_rows(v[None, :])[0]
    return out / out.sum()


def project_rows(V):
    """Row-wise projection of a 2-D array onto the simplex."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if not np.all(np.isfinite(V)):
        raise InvalidArgumentError("cannot project non-finite entries")
    out = _kernels.project_rows(V)
    return out / out.sum(axis=1, keepdims=True)


def simplex_distance(a, b, kind=SimplexDistanceKind.SQUARED_L2):
    """Distance between two mixtures.

    Total variation is the plain L1 norm (no 1/2 factor), so it is bounded by 2;
    Jensen-Shannon uses natural logs and is bounded by ln 2.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidArgumentError(f"dimension mismatch: {a.shape} vs {b.shape}")
    kind = SimplexDistanceKind.parse(kind)
    return float(_kernels.pairwise_distances(a[None, :], b[None, :], kind.code)[0, 0])


def pairwise_distances(A, B, kind=SimplexDistanceKind.SQUARED_L2):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise InvalidArgumentError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    return _kernels.pairwise_distances(A, B, SimplexDistanceKind.parse(kind).code)


def simplex_lattice(n, resolution):
    """All simplex points whose coordinates are multiples of ``resolution``."""
    steps = int(round(1.0 / resolution))
    if steps < 1 or abs(steps * resolution - 1.0) > 1e-9:
        raise InvalidArgumentError(f"resolution {resolution} does not divide 1 evenly")
    # stars and bars: bar positions among steps + n - 1 slots
    bars = np.array(list(combinations(range(steps + n - 1), n - 1)), dtype=int).reshape(-1, n - 1)
    edges = np.hstack([np.full((len(bars), 1), -1), bars, np.full((len(bars), 1), steps + n - 1)])
    return (np.diff(edges, axis=1) - 1) / steps


def lattice_size(n, resolution):
    steps = int(round(1.0 / resolution))
    return comb(steps + n - 1, n - 1)
