"""Comparison methods: full-scale random search and Hyperband with a random-forest surrogate."""

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.ensemble import RandomForestRegressor

from mfmsbo.acquisition import expected_improvement
from mfmsbo.errors import BudgetExhaustedError, InvalidArgumentError
from mfmsbo.history import BestSoFarCurve, BudgetLedger, CostModel, History, objective
from mfmsbo.optimizer import observe
from mfmsbo.simplex import sample_dirichlet
from mfmsbo.space import Configuration


@dataclass
class BaselineResult:
    best_mixture: np.ndarray
    best_record: object
    history: History
    curve: BestSoFarCurve
    ledger: BudgetLedger
    iterations: int
    brackets: list = field(default_factory=list)


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_search(space, simulator, metric, budget, seed=0, cost_model=None):
    """Dirichlet(1) mixtures trained at the target scale and step until the budget runs out."""
    cost_model = cost_model or CostModel()
    full = cost_model(space.target_scale, space.target_step)
    if budget < full:
        raise BudgetExhaustedError(f"budget {budget:g} is below one full-scale run ({full:g})")
    ledger = BudgetLedger(budget)
    history = History(method="random-search")
    rng = _rng(seed)
    it = 0
    while ledger.can_afford(full):
        it += 1
        cfg = Configuration(sample_dirichlet(space.n, 1.0, rng), space.target_scale, space.target_step)
        observe(history, cfg, simulator, ledger, cost_model, iteration=it)
    best = history.best_record(metric)
    return BaselineResult(best.config.mixture.copy(), best, history, history.best_so_far(metric), ledger, it)


# -- random forest -----------------------------------------------------------

N_TREES = 30
MAX_DEPTH = 12
MIN_SAMPLES_LEAF = 2


class RandomForestSurrogate:
    """Bagged regression trees on features ``[w_1..w_n, z]``; spread across trees is the uncertainty."""

    def __init__(self, forest):
        self.forest = forest

    @property
    def trees(self):
        return [est.tree_ for est in self.forest.estimators_]

    def _features(self, W, z):
        W = np.atleast_2d(np.asarray(W, dtype=float))
        z = np.broadcast_to(np.asarray(z, dtype=float), (W.shape[0],))
        return np.column_stack([W, z])

    def tree_predictions(self, W, z):
        X = self._features(W, z)
        return np.stack([est.predict(X) for est in self.forest.estimators_])

    def predict(self, W, z):
        P = self.tree_predictions(W, z)
        return P.mean(axis=0), P.std(axis=0)


def rf_fit(W, z, y, n_trees=N_TREES, max_depth=MAX_DEPTH, min_samples_leaf=MIN_SAMPLES_LEAF, seed=0):
    W = np.atleast_2d(np.asarray(W, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size == 0 or W.shape[0] != y.size:
        raise InvalidArgumentError("random forest needs a non-empty training set with matching lengths")
    X = np.column_stack([W, np.broadcast_to(np.asarray(z, dtype=float), (y.size,))])
    seed = int(seed) if not isinstance(seed, np.random.Generator) else int(seed.integers(2**31 - 1))
    forest = RandomForestRegressor(
        n_estimators=n_trees,
        max_depth=max_depth,
        min_samples_leaf=min_samples_leaf,
        max_features=1.0,
        bootstrap=True,
        random_state=seed,
        n_jobs=1,
    )
    forest.fit(X, y)
    return RandomForestSurrogate(forest)


def rf_predict(surrogate, W, z):
    """``(mean, stddev)`` across trees."""
    return surrogate.predict(W, z)


# -- hyperband ---------------------------------------------------------------


@dataclass(frozen=True)
class Bracket:
    s: int
    n: int
    resources: tuple
    eta: int = 3

    @property
    def rung_sizes(self):
        return rung_sizes(self.n, len(self.resources), self.eta)


def rung_sizes(n, n_rungs, eta):
    """Configurations per rung: each rung keeps the top ``ceil(k / eta)`` of the previous one."""
    sizes = [int(n)]
    for _ in range(n_rungs - 1):
        sizes.append(math.ceil(sizes[-1] / eta))
    return sizes


class HyperbandSchedule:
    """Brackets over a discrete step grid; the largest step is the maximum resource."""

    def __init__(self, steps, eta=3):
        if eta < 2:
            raise InvalidArgumentError("eta must be an integer >= 2")
        self.eta = int(eta)
        self.steps = tuple(sorted(int(z) for z in steps))
        if not self.steps:
            raise InvalidArgumentError("step grid is empty")
        self.max_resource = self.steps[-1]
        self.s_max = len(self.steps) - 1
        self.brackets = []
        for s in range(self.s_max, -1, -1):
            n = math.ceil((self.s_max + 1) / (s + 1) * self.eta**s)
            self.brackets.append(Bracket(s, n, self.steps[self.s_max - s :], self.eta))

    def __iter__(self):
        return iter(self.brackets)

    def cycle(self):
        while True:
            yield from self.brackets


def _propose(history, metric, n_new, space, rng, n_candidates=500, seed=0):
    """Top ``n_new`` of ``n_candidates`` Dirichlet draws by random-forest EI at the full step."""
    cands = np.atleast_2d(sample_dirichlet(space.n, 1.0, rng, size=max(n_candidates, n_new)))
    if not len(history):
        return cands[:n_new]
    recs = history.records
    W = np.array([r.config.mixture for r in recs])
    z = np.array([r.config.train_step for r in recs], dtype=float)
    y = np.array([objective(metric, r.metrics[metric]) for r in recs])
    rf = rf_fit(W, z, y, seed=seed)
    full = space.target_step
    at_full = z == full
    best = y[at_full].min() if at_full.any() else y.min()
    mu, sd = rf.predict(cands, full)
    ei = expected_improvement(mu, sd**2, best)
    order = np.argsort(-ei, kind="stable")
    return cands[order[:n_new]]


def hyperband_rf(space, simulator, metric, budget, eta=3, seed=0, cost_model=None, n_candidates=500):
    """Hyperband at the target scale with RF-EI proposals at bracket starts.

    Promotions are charged only the extra steps beyond the previous rung.
    Stops at the first evaluation the remaining budget cannot cover.
    """
    cost_model = cost_model or CostModel()
    schedule = HyperbandSchedule(space.steps, eta)
    m = space.target_scale
    cheapest = cost_model(m, schedule.steps[0])
    if budget < cheapest:
        raise BudgetExhaustedError(f"budget {budget:g} is below the cheapest rung ({cheapest:g})")
    ledger = BudgetLedger(budget)
    history = History(method="hyperband-rf")
    rng = _rng(seed)
    log = []
    it = 0
    out_of_budget = False
    for br in schedule.cycle():
        mixtures = _propose(history, metric, br.n, space, rng, n_candidates, seed=int(rng.integers(2**31 - 1)))
        alive = list(range(len(mixtures)))
        reached = {i: 0 for i in alive}
        rungs = []
        for k, r in enumerate(br.resources):
            scores = []
            for i in alive:
                inc = cost_model(m, r) - (cost_model(m, reached[i]) if reached[i] else 0.0)
                if not ledger.can_afford(inc):
                    out_of_budget = True
                    break
                it += 1
                observe(
                    history, Configuration(mixtures[i], m, r), simulator, ledger, cost_model, it,
                    start_step=reached[i], cost=inc,
                )
                reached[i] = r
                scores.append((objective(metric, history.records[-1].metrics[metric]), i))
            rungs.append((r, len(scores)))
            if out_of_budget:
                break
            if k + 1 < len(br.resources):
                keep = math.ceil(len(alive) / schedule.eta)
                # stable sort keeps insertion order among ties
                alive = [i for _, i in sorted(scores, key=lambda t: t[0])[:keep]]
        log.append((br.s, rungs))
        if out_of_budget:
            break
    full = [r for r in history.records if r.config.train_step == space.target_step]
    best = history.best_record(metric, where=lambda r: r.config.train_step == space.target_step) if full else None
    best = best or history.best_record(metric)
    return BaselineResult(best.config.mixture.copy(), best, history, history.best_so_far(metric), ledger, it, log)

