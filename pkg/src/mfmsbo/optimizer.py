"""Multi-fidelity multi-scale Bayesian optimization over data mixtures."""

from dataclasses import dataclass, field

import numpy as np

from mfmsbo.acquisition import AcquisitionState, decay_alpha, select_next
from mfmsbo.errors import BudgetExhaustedError, InvalidArgumentError, MfmsError, SimulatorError
from mfmsbo.gp import GpHyperparams, GpPosterior, fit_hyperparams
from mfmsbo.history import BestSoFarCurve, BudgetLedger, CostModel, History, objective
from mfmsbo.simplex import SimplexDistanceKind, sample_dirichlet
from mfmsbo.space import Configuration, SearchSpace


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def observe(history, config, simulator, ledger=None, cost_model=None, iteration=0, start_step=0, cost=None):
    """Train ``config`` to its step and record the whole curve.

    One record per grid step in ``(start_step, config.train_step]``; only the
    terminal record carries the cost, and every record of the run shares the
    cumulative cost at which the run finished. A run resumed from
    ``start_step`` should pass the incremental ``cost``.
    """
    cost_model = cost_model or CostModel()
    if cost is None:
        cost = cost_model(config.model_scale, config.train_step)
    if ledger is not None and not ledger.can_afford(cost):
        raise BudgetExhaustedError(f"{config} costs {cost:g}, only {ledger.remaining:g} left")
    try:
        curve = simulator.curve(config.mixture, config.model_scale, config.train_step)
    except SimulatorError:
        raise
    except Exception as exc:
        raise SimulatorError(f"simulator failed on {config}: {exc}", config=config) from exc
    curve = [(z, mets) for z, mets in curve if z > start_step]
    if not curve or curve[-1][0] != config.train_step:
        raise SimulatorError(f"simulator returned no value at step {config.train_step}", config=config)
    spent = ledger.charge(cost, label=repr(config)) if ledger is not None else history.total_charged + cost
    for z, metrics in curve[:-1]:
        history.append(config.with_step(z), metrics, 0.0, iteration, spent)
    history.append(config, curve[-1][1], cost, iteration, spent)
    return history


@dataclass
class MfmsResult:
    best_mixture: np.ndarray
    best_record: object
    history: History
    curve: BestSoFarCurve
    fullscale_history: History
    fullscale_curve: BestSoFarCurve
    ledger: BudgetLedger
    hyperparams: GpHyperparams
    iterations: int
    shrink_events: int = 0
    refits: int = 0
    selections: list = field(default_factory=list)


class MfmsOptimizer:
    """Stateful driver: ``initialize()`` once, then ``step()`` until it returns ``False``."""

    def __init__(
        self,
        space,
        simulator,
        metric,
        budget,
        seed=0,
        distance_kind=SimplexDistanceKind.SQUARED_L2,
        n_init=20,
        init_step_cap=None,
        cost_model=None,
        refit_every=5,
        refit_after_shrinks=3,
        restarts=5,
        hp_init=None,
        max_iterations=None,
    ):
        if not isinstance(space, SearchSpace):
            raise InvalidArgumentError("space must be a SearchSpace")
        if n_init < 2:
            raise InvalidArgumentError("n_init must be at least 2 to fit hyperparameters")
        self.space = space
        self.simulator = simulator
        self.metric = metric
        self.cost_model = cost_model or CostModel()
        self.ledger = BudgetLedger(budget)
        self.rng = _rng(seed)
        self.n_init = int(n_init)
        self.init_step_cap = min(space.steps) if init_step_cap is None else int(init_step_cap)
        if self.init_step_cap < min(space.steps):
            raise InvalidArgumentError(f"init_step_cap {self.init_step_cap} is below every grid step")
        self.refit_every = refit_every
        self.refit_after_shrinks = refit_after_shrinks
        self.restarts = restarts
        self.max_iterations = max_iterations
        self.hp = hp_init.copy() if hp_init is not None else GpHyperparams(distance_kind=distance_kind)
        self.state = AcquisitionState()
        self.history = History(method="mfms-gp")
        self.fullscale_history = History(method="mfms-gp-fullscale")
        self.iterations = 0
        self.refits = 0
        self.selections = []
        self._since_refit = 0
        self._shrinks_since_refit = 0
        self._initialized = False
        self._done = False

    def _refit(self):
        self.hp = fit_hyperparams(self.history.observations(self.metric), self.hp, transform=self.space.transform)
        self.refits += 1
        self._since_refit = 0
        self._shrinks_since_refit = 0

    def _record_fullscale(self):
        """Current recommendation re-run at the target scale and step, its cost added on top."""
        best = self.history.best_record(self.metric)
        target = Configuration(best.config.mixture, self.space.target_scale, self.space.target_step)
        if best.config.model_scale == target.model_scale and best.config.train_step == target.train_step:
            metrics = best.metrics
        else:
            metrics = self.simulator.evaluate(target)
        extra = self.cost_model(target.model_scale, target.train_step)
        self.fullscale_history.append(target, metrics, extra, self.iterations, self.ledger.spent + extra)

    def initial_configs(self):
        steps = [z for z in self.space.steps if z <= self.init_step_cap]
        configs = []
        for _ in range(self.n_init):
            w = sample_dirichlet(self.space.n, 1.0, self.rng)
            m = self.space.scales[int(self.rng.integers(len(self.space.scales)))]
            z = steps[int(self.rng.integers(len(steps)))] if len(steps) > 1 else steps[0]
            configs.append(Configuration(w, m, z))
        return configs

    def initialize(self):
        if self._initialized:
            raise InvalidArgumentError("optimizer already initialized")
        configs = self.initial_configs()
        need = sum(self.cost_model(c.model_scale, c.train_step) for c in configs)
        if need > self.ledger.total:
            raise BudgetExhaustedError(f"initialization needs {need:g} cost units, budget is {self.ledger.total:g}")
        for c in configs:
            observe(self.history, c, self.simulator, self.ledger, self.cost_model, iteration=0)
        self._refit()
        self._initialized = True
        self._record_fullscale()
        return self.history

    def step(self):
        """One proposal and evaluation; ``False`` once nothing affordable remains."""
        if not self._initialized:
            self.initialize()
        if self._done:
            return False
        if self.max_iterations is not None and self.iterations >= self.max_iterations:
            self._done = True
            return False
        obs = self.history.observations(self.metric)
        configs, y = zip(*obs)
        post = GpPosterior(configs, np.asarray(y), self.hp, self.space.transform)
        self.state.incumbent = float(np.min(y))
        sel = select_next(
            post,
            self.state,
            self.space.scales,
            self.space.steps,
            self.cost_model,
            rng_seed=self.rng,
            restarts=self.restarts,
            max_cost=self.ledger.remaining,
        )
        if sel is None:
            self._done = True
            return False
        self.iterations += 1
        observe(self.history, sel.config, self.simulator, self.ledger, self.cost_model, iteration=self.iterations)
        self.selections.append((sel.config, sel.ei, sel.score, sel.cost, sel.shrunk))
        decay_alpha(self.state)
        # a shrink persists in the live hyperparameters until the next refit
        self.hp = sel.hyperparams
        self._since_refit += 1
        self._shrinks_since_refit += int(sel.shrunk)
        if self._since_refit >= self.refit_every or self._shrinks_since_refit >= self.refit_after_shrinks:
            self._refit()
        self._record_fullscale()
        return True

    def result(self):
        best = self.history.best_record(self.metric)
        return MfmsResult(
            best_mixture=best.config.mixture.copy(),
            best_record=best,
            history=self.history,
            curve=self.history.best_so_far(self.metric),
            fullscale_history=self.fullscale_history,
            fullscale_curve=_series(self.fullscale_history, self.metric),
            ledger=self.ledger,
            hyperparams=self.hp,
            iterations=self.iterations,
            shrink_events=self.state.shrink_events,
            refits=self.refits,
            selections=self.selections,
        )


def _series(history, metric):
    """Raw (not running-best) value per record, for the full-scale completion series."""
    return BestSoFarCurve(
        metric,
        np.array([r.cumulative_cost for r in history.records], dtype=float),
        np.array([r.metrics[metric] for r in history.records], dtype=float),
    )


def initialize(
    space, simulator, metric, budget, n_init=20, init_step_cap=None, seed=0, distance_kind="squared_l2", **kwargs
):
    """Draw and evaluate the initial design; returns the optimizer holding the history and fitted hyperparameters."""
    opt = MfmsOptimizer(
        space, simulator, metric, budget, seed=seed, distance_kind=distance_kind, n_init=n_init,
        init_step_cap=init_step_cap, **kwargs,
    )
    opt.initialize()
    return opt


def run(space, simulator, metric, budget, seed=0, distance_kind="squared_l2", **kwargs):
    """Full optimization loop until the next proposal is unaffordable."""
    opt = MfmsOptimizer(space, simulator, metric, budget, seed=seed, distance_kind=distance_kind, **kwargs)
    opt.initialize()
    while opt.step():
        pass
    return opt.result()


def incumbent(history, metric):
    """Best objective value (minimization view) across all fidelities."""
    if not len(history):
        raise MfmsError("empty history has no incumbent")
    return min(objective(metric, r.metrics[metric]) for r in history)
