import numpy as np
import pytest

from mfmsbo.errors import BudgetExhaustedError, InvalidArgumentError, MfmsError, SimulatorError
from mfmsbo.history import BudgetLedger, CostModel, History
from mfmsbo.optimizer import MfmsOptimizer, incumbent, initialize, observe, run
from mfmsbo.simplex import is_mixture
from mfmsbo.simulator.surface import acceptance_surface
from mfmsbo.space import Configuration, SearchSpace

METRIC = "val_wikipedia"
FULL = 10**9 * 19700 / 1e9


@pytest.fixture(scope="module")
def spec():
    return acceptance_surface(0)


@pytest.fixture(scope="module")
def short_run(spec):
    return run(SearchSpace(), spec, METRIC, 8 * FULL, seed=1)


# -- observe ----------------------------------------------------------------


@pytest.mark.parametrize("z, n_records", [(19700, 3), (6000, 1), (12000, 2)])
def test_observe_expands_the_curve_and_charges_once(spec, z, n_records):
    hist, ledger = History(), BudgetLedger(1e6)
    c = Configuration([0.2] * 5, 300_000_000, z)
    observe(hist, c, spec, ledger)
    assert len(hist) == n_records
    assert [r.config.train_step for r in hist] == [s for s in (6000, 12000, 19700) if s <= z]
    assert [r.cost_charged for r in hist][:-1] == [0.0] * (n_records - 1)
    assert hist.records[-1].cost_charged == 0.3 * z
    assert ledger.spent == 0.3 * z
    assert all(r.cumulative_cost == ledger.spent for r in hist)


def test_expanded_records_keep_the_exact_mixture(spec):
    rng = np.random.default_rng(0)
    for _ in range(50):
        c = Configuration(rng.dirichlet(np.ones(5)), 10**9, 19700)
        hist = observe(History(), c, spec)
        assert all(np.array_equal(r.config.mixture, c.mixture) for r in hist)


def test_observe_refuses_unaffordable_run(spec):
    hist, ledger = History(), BudgetLedger(100.0)
    with pytest.raises(BudgetExhaustedError):
        observe(hist, Configuration([0.2] * 5, 10**9, 19700), spec, ledger)
    assert len(hist) == 0 and ledger.spent == 0


def test_observe_resumes_with_incremental_cost(spec):
    hist, ledger = History(), BudgetLedger(1e6)
    c = Configuration([0.2] * 5, 10**9, 19700)
    observe(hist, c, spec, ledger, start_step=6000, cost=13700.0)
    assert [r.config.train_step for r in hist] == [12000, 19700]
    assert ledger.spent == 13700.0


class Broken:
    def curve(self, w, m, z):
        raise RuntimeError("disk on fire")


def test_simulator_failure_carries_the_configuration():
    c = Configuration([0.5, 0.5], 10**9, 6000)
    with pytest.raises(SimulatorError) as info:
        observe(History(), c, Broken(), BudgetLedger(1e6))
    assert info.value.config == c


# -- initialization ---------------------------------------------------------


def test_initialization_spends_twenty_lowest_rung_runs(spec):
    opt = initialize(SearchSpace(), spec, METRIC, 10 * FULL, seed=0)
    assert len(opt.history) == 20
    assert all(r.config.train_step == 6000 for r in opt.history)
    expected = sum(CostModel()(r.config.model_scale, 6000) for r in opt.history)
    assert opt.ledger.spent == expected
    assert opt.refits == 1


def test_initialization_argument_and_budget_errors(spec):
    with pytest.raises(InvalidArgumentError):
        MfmsOptimizer(SearchSpace(), spec, METRIC, 1e6, n_init=0)
    with pytest.raises(InvalidArgumentError):
        MfmsOptimizer(SearchSpace(), spec, METRIC, 1e6, init_step_cap=100)
    opt = MfmsOptimizer(SearchSpace(), spec, METRIC, 10.0)
    with pytest.raises(BudgetExhaustedError):
        opt.initialize()
    assert len(opt.history) == 0 and opt.ledger.spent == 0


def test_initial_history_is_seeded(spec):
    a = initialize(SearchSpace(), spec, METRIC, 10 * FULL, seed=5).history.dumps()
    b = initialize(SearchSpace(), spec, METRIC, 10 * FULL, seed=5).history.dumps()
    c = initialize(SearchSpace(), spec, METRIC, 10 * FULL, seed=6).history.dumps()
    assert a == b and a != c


def test_budget_equal_to_initialization_cost_runs_no_iterations(spec):
    probe = MfmsOptimizer(SearchSpace(), spec, METRIC, 1e9, seed=2)
    need = sum(CostModel()(c.model_scale, c.train_step) for c in probe.initial_configs())
    res = run(SearchSpace(), spec, METRIC, need, seed=2)
    assert res.iterations == 0
    assert len(res.history) == 20
    assert res.ledger.spent == need
    assert res.best_record is res.history.best_record(METRIC)


# -- full loop --------------------------------------------------------------


def test_run_respects_budget_and_accounting(short_run):
    res = short_run
    assert res.iterations > 0
    assert res.ledger.spent <= res.ledger.total
    assert res.history.total_charged == res.ledger.spent
    # nothing on the grid was still affordable when the loop stopped
    assert res.ledger.remaining < CostModel()(20_000_000, 6000)


def test_records_lie_in_the_space(short_run):
    space = SearchSpace()
    for r in short_run.history:
        assert space.contains(r.config)
        assert is_mixture(r.config.mixture)


def test_best_so_far_is_monotone(short_run):
    curve = short_run.curve
    assert np.all(np.diff(curve.values) <= 0)
    assert np.all(np.diff(curve.costs) >= 0)


def test_fullscale_series_sits_at_target_and_adds_its_cost(short_run):
    fs = short_run.fullscale_history
    assert len(fs) == short_run.iterations + 1
    for r, spent_after in zip(fs, _spent_after_each_iteration(short_run)):
        assert (r.config.model_scale, r.config.train_step) == (10**9, 19700)
        assert r.cumulative_cost == spent_after + FULL


def _spent_after_each_iteration(res):
    by_iter = {}
    for r in res.history:
        by_iter[r.iteration] = r.cumulative_cost
    return [by_iter[i] for i in range(res.iterations + 1)]


def test_run_is_deterministic(spec, short_run):
    again = run(SearchSpace(), spec, METRIC, 8 * FULL, seed=1)
    assert again.history.dumps() == short_run.history.dumps()
    assert np.array_equal(again.best_mixture, short_run.best_mixture)


def test_accuracy_metric_is_maximized(spec):
    res = run(SearchSpace(), spec, "acc_arceasy", 6 * FULL, seed=0)
    vals = [r.metrics["acc_arceasy"] for r in res.history]
    assert res.best_record.metrics["acc_arceasy"] == max(vals)
    assert np.all(np.diff(res.curve.values) >= 0)


def test_max_iterations_stops_early(spec):
    res = run(SearchSpace(), spec, METRIC, 40 * FULL, seed=0, max_iterations=3)
    assert res.iterations == 3


def test_incumbent_uses_every_fidelity(short_run):
    hist = short_run.history
    assert incumbent(hist, METRIC) == min(r.metrics[METRIC] for r in hist)
    with pytest.raises(MfmsError):
        incumbent(History(), METRIC)
