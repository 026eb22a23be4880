"""Independent reference implementations used by the tests.

Each one is written from the defining formula with plain loops or dense
linear algebra and shares no code with the package.
"""

import itertools
import math

import numpy as np


def tv(a, b):
    return sum(abs(x - y) for x, y in zip(a, b))


def sq_l2(a, b):
    return sum((x - y) ** 2 for x, y in zip(a, b))


def jsd(a, b):
    total = 0.0
    for x, y in zip(a, b):
        mid = 0.5 * (x + y)
        if x > 0:
            total += 0.5 * x * math.log(x / mid)
        if y > 0:
            total += 0.5 * y * math.log(y / mid)
    return total


DIST = {"squared_l2": sq_l2, "total_variation": tv, "jensen_shannon": jsd}


def lattice(n, resolution):
    steps = int(round(1 / resolution))
    pts = []
    for combo in itertools.product(range(steps + 1), repeat=n - 1):
        s = sum(combo)
        if s <= steps:
            pts.append([c / steps for c in combo] + [(steps - s) / steps])
    return np.array(pts)


def project_bisection(v, tol=1e-14):
    """Euclidean projection onto the simplex by bisection on the threshold."""
    v = np.asarray(v, dtype=float)
    lo, hi = v.min() - 1.0, v.max()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.maximum(v - mid, 0).sum() > 1:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return np.maximum(v - 0.5 * (lo + hi), 0)


def project_grid(v, resolution=0.02):
    grid = lattice(len(v), resolution)
    return grid[np.argmin(((grid - v) ** 2).sum(axis=1))]


def kernel_value(a, b, hp, m_ref=1e9, z_ref=19700):
    """Product-of-RBF covariance from the formula, one configuration pair at a time."""
    wa, ma, za = a
    wb, mb, zb = b
    d = DIST[hp.distance_kind.value](wa, wb)
    du = math.log(ma / m_ref) - math.log(mb / m_ref)
    dv = math.log(za / z_ref) - math.log(zb / z_ref)
    return hp.signal_variance * math.exp(
        -d / (2 * hp.length_scale_w**2) - du**2 / (2 * hp.length_scale_m**2) - dv**2 / (2 * hp.length_scale_z**2)
    )


def dense_posterior(train, y, test, hp, jitter=1e-6, m_ref=1e9, z_ref=19700):
    """Posterior moments with an explicit inverse; returns de-standardized mean and variance."""
    y = np.asarray(y, dtype=float)
    mu, sd = y.mean(), y.std()
    if sd < 1e-12:
        sd = 1.0
    ys = (y - mu) / sd

    def h(c):
        return np.array([1.0, math.log(c[1] / m_ref), math.log(c[2] / z_ref)])

    N = len(train)
    K = np.array([[kernel_value(a, b, hp) for b in train] for a in train])
    Kinv = np.linalg.inv(K + (hp.noise_variance + jitter) * np.eye(N))
    prior = np.array([h(c) @ hp.mean_coeffs for c in train])
    means, vars_ = [], []
    for t in test:
        k = np.array([kernel_value(t, b, hp) for b in train])
        means.append(h(t) @ hp.mean_coeffs + k @ Kinv @ (ys - prior))
        vars_.append(max(hp.signal_variance - k @ Kinv @ k, 0.0))
    return mu + sd * np.array(means), sd * sd * np.array(vars_)


def dense_lml(train, y, hp, jitter=1e-6, m_ref=1e9, z_ref=19700):
    y = np.asarray(y, dtype=float)
    sd = y.std() if y.std() > 1e-12 else 1.0
    ys = (y - y.mean()) / sd
    N = len(train)
    K = np.array([[kernel_value(a, b, hp) for b in train] for a in train]) + (hp.noise_variance + jitter) * np.eye(N)
    H = np.array([[1.0, math.log(c[1] / m_ref), math.log(c[2] / z_ref)] for c in train])
    r = ys - H @ hp.mean_coeffs
    sign, logdet = np.linalg.slogdet(K)
    return -0.5 * r @ np.linalg.solve(K, r) - 0.5 * logdet - 0.5 * N * math.log(2 * math.pi)


def ei_closed(mu, sigma, best):
    if sigma == 0:
        return max(best - mu, 0.0)
    u = (best - mu) / sigma
    cdf = 0.5 * (1 + math.erf(u / math.sqrt(2)))
    pdf = math.exp(-0.5 * u * u) / math.sqrt(2 * math.pi)
    return (best - mu) * cdf + sigma * pdf


def tree_predict(tree, x):
    """Walk one fitted sklearn tree from its serialized arrays."""
    node = 0
    left, right = tree.children_left, tree.children_right
    while left[node] != -1:
        if x[tree.feature[node]] <= tree.threshold[node]:
            node = left[node]
        else:
            node = right[node]
    return float(tree.value[node].ravel()[0])


def mlp_forward(weights, biases, x_mean, x_scale, y_mean, y_scale, x):
    h = [(xi - m) / s for xi, m, s in zip(x, x_mean, x_scale)]
    for li, (W, b) in enumerate(zip(weights, biases)):
        out = []
        for j in range(W.shape[1]):
            acc = b[j]
            for i in range(W.shape[0]):
                acc += h[i] * W[i, j]
            out.append(acc if li == len(weights) - 1 else max(acc, 0.0))
        h = out
    return np.array([v * s + m for v, s, m in zip(h, y_scale, y_mean)])


def surface_loss(p, w, m, z, m_ref=1e9, z_ref=19700):
    t = [a + b * math.log(m / m_ref) for a, b in zip(p.t0, p.t1)]
    dot = sum(ti * wi for ti, wi in zip(t, w))
    return (
        p.offset
        + p.amplitude * math.exp(-dot)
        + p.scale_amp * (m / m_ref) ** (-p.scale_power)
        + p.step_amp * (z / z_ref) ** (-p.step_power)
    )


def r2(truth, pred):
    truth = np.asarray(truth, dtype=float)
    pred = np.asarray(pred, dtype=float)
    mean = sum(truth) / len(truth)
    return 1 - sum((t - p) ** 2 for t, p in zip(truth, pred)) / sum((t - mean) ** 2 for t in truth)


def hyperband_brackets(n_rungs, eta):
    """Textbook successive-halving bracket sizes over a grid of ``n_rungs`` resources."""
    s_max = n_rungs - 1
    out = []
    for s in range(s_max, -1, -1):
        n = math.ceil((s_max + 1) * eta**s / (s + 1))
        sizes = [n]
        for _ in range(s):
            sizes.append(-(-sizes[-1] // eta))
        out.append((s, sizes))
    return out
