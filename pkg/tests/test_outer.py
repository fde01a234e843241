"""Outer loop: Adam, plateau scheduling, and the shared generation driver."""

import numpy as np
import pytest

from gradevo.diffevo import DiffCmaes, DiffPso
from gradevo.classic import ClassicPso
from gradevo.outer import Adam, PlateauScheduler, run_loop
from gradevo.problems import make_problem
from gradevo.relax import Rng
from gradevo.tape import Tape


def scalar_param(tape, v):
    return tape.param("p", np.array([[v]]))


def test_adam_leaves_value_alone_without_gradient():
    tape = Tape()
    p = scalar_param(tape, 3.0)
    opt = Adam([p], lr=0.5)
    opt.step()
    assert p.raw.value[0, 0] == 3.0
    np.testing.assert_array_equal(opt.delta("p"), np.zeros((1, 1)))


def test_adam_first_step_is_signed_lr():
    # bias correction makes the first update -lr * g / (|g| + eps)
    tape = Tape()
    p = scalar_param(tape, 1.0)
    p.raw.grad = np.array([[4.2]])
    opt = Adam([p], lr=0.01)
    opt.step()
    assert abs(p.raw.value[0, 0] - (1.0 - 0.01)) < 1e-8
    q = scalar_param(Tape(), 1.0)
    q.raw.grad = np.array([[-0.003]])
    Adam([q], lr=0.01).step()
    want = 1.0 + 0.01 * 0.003 / (0.003 + 1e-8)
    assert abs(q.raw.value[0, 0] - want) < 1e-12


def test_adam_rejects_non_finite_gradient():
    tape = Tape()
    p = tape.param("omega", np.ones((2, 1)))
    p.raw.grad = np.array([[1.0], [np.nan]])
    opt = Adam([p])
    with pytest.raises(RuntimeError, match="omega"):
        opt.step()


def test_adam_validates_learning_rate_and_delta_lookup():
    with pytest.raises(ValueError):
        Adam([], lr=-0.1)
    opt = Adam([], lr=0.1)
    with pytest.raises(KeyError):
        opt.delta("ghost")
    np.testing.assert_array_equal(opt.delta("ghost", (2, 2)), np.zeros((2, 2)))


def test_scheduler_halves_on_plateau_and_respects_floor():
    opt = Adam([], lr=0.8)
    sched = PlateauScheduler(opt, patience=3, factor=0.5, min_lr=0.15)
    sched.step(10.0)         # baseline: first metric always improves on inf
    for _ in range(3):
        sched.step(10.0)
    assert opt.lr == 0.4
    sched.step(5.0)          # improvement resets the counter
    assert opt.lr == 0.4
    for _ in range(6):
        sched.step(5.0)
    assert opt.lr == 0.15    # 0.4 -> 0.2 -> floor, not 0.1
    with pytest.raises(ValueError):
        PlateauScheduler(opt, factor=1.5)
    with pytest.raises(ValueError):
        PlateauScheduler(opt, patience=0)


def test_run_loop_generation_count_and_eval_bookkeeping():
    prob = make_problem("sphere", 3)
    algo = ClassicPso(prob, pop_size=10, rng=Rng(0))
    records, err = run_loop(algo, prob, max_evals=95)
    assert err is None
    assert len(records) == 10          # ceil(95 / 10)
    for g, rec in enumerate(records):
        assert rec.generation == g
        assert rec.n_evals == (g + 1) * 10
        assert rec.lr == 0.0
        assert isinstance(rec.hyper, dict)


def test_run_loop_single_generation_when_budget_equals_pop():
    prob = make_problem("sphere", 3)
    algo = ClassicPso(prob, pop_size=10, rng=Rng(0))
    records, err = run_loop(algo, prob, max_evals=10)
    assert err is None and len(records) == 1


def test_run_loop_rejects_empty_budget():
    prob = make_problem("sphere", 3)
    algo = ClassicPso(prob, pop_size=10, rng=Rng(0))
    with pytest.raises(ValueError):
        run_loop(algo, prob, max_evals=0)


def test_run_loop_returns_partial_records_on_failure():
    prob = make_problem("sphere", 3)
    algo = ClassicPso(prob, pop_size=5, rng=Rng(0))
    real = prob.eval_array
    calls = {"n": 0}

    def bomb(X):
        calls["n"] += 1
        if calls["n"] > 3:          # init + two generations, then blow up
            raise FloatingPointError("kaboom")
        return real(X)

    prob.eval_array = bomb
    records, err = run_loop(algo, prob, max_evals=50)
    assert err == "FloatingPointError: kaboom"
    assert len(records) == 2


def test_run_loop_monotone_best_for_diff_algorithm():
    prob = make_problem("ackley", 5)
    algo = DiffPso(prob, pop_size=10, rng=Rng(1))
    opt = Adam(algo.parameters(), lr=0.01)
    records, err = run_loop(algo, prob, max_evals=300, optimizer=opt)
    assert err is None
    bests = [r.best_fitness for r in records]
    assert all(b <= a + 1e-15 for a, b in zip(bests, bests[1:]))
    assert bests[-1] < bests[0]


def test_run_loop_scheduler_decays_lr_on_stall():
    prob = make_problem("sphere", 2)
    algo = DiffPso(prob, pop_size=5, rng=Rng(2))
    opt = Adam(algo.parameters(), lr=0.02)
    sched = PlateauScheduler(opt, patience=5, factor=0.5, min_lr=1e-6)
    records, err = run_loop(algo, prob, max_evals=1500,
                            optimizer=opt, scheduler=sched)
    assert err is None
    assert records[-1].lr < 0.02    # a 2-D sphere stalls well inside 300 gens


def test_diff_cmaes_descends_sphere():
    prob = make_problem("sphere", 10)
    algo = DiffCmaes(prob, pop_size=20, rng=Rng(3))
    opt = Adam(algo.parameters(), lr=0.01)
    sched = PlateauScheduler(opt, patience=100)
    records, err = run_loop(algo, prob, max_evals=8000,
                            optimizer=opt, scheduler=sched)
    assert err is None
    assert records[-1].best_fitness < 1e-6


def test_hyper_record_tracks_learned_values():
    prob = make_problem("sphere", 4)
    algo = DiffCmaes(prob, pop_size=8, rng=Rng(4))
    opt = Adam(algo.parameters(), lr=0.05)
    records, err = run_loop(algo, prob, max_evals=400, optimizer=opt)
    assert err is None
    sigmas = [r.hyper["sigma"] for r in records]
    assert all(s > 0 for s in sigmas)
    assert sigmas[0] != sigmas[-1]
