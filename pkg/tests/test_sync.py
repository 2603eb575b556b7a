from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delayfrost import GlobalProblem, build_graph, build_weights
from delayfrost.analysis import frost_tracking_identity_check, gradient_tracking_conservation_check
from delayfrost.graph import COLUMN, DOUBLY, WeightMatrix
from delayfrost.objectives import Quadratic, local_gradients
from delayfrost.sync import (ConfigurationWarning, NumericalFailure, addopt_step, dgd_step, diminishing,
                             frost_step, gradient_tracking_step, init_addopt, init_dgd, init_frost,
                             init_gradient_tracking, run_sync)

ONE = WeightMatrix(np.ones((1, 1)), DOUBLY)


def random_problem(seed, n, dim):
    rng = np.random.default_rng(seed)
    objs = [Quadratic(rng.uniform(-5, 5, dim), float(rng.uniform(0.5, 2.0))) for _ in range(n)]
    x0 = rng.uniform(-3, 3, (n, dim))
    return objs, x0


def test_dgd_single_agent_is_gradient_descent():
    st_ = init_dgd([Quadratic([0.0])], [[1.0]], alpha=0.25)
    st_ = dgd_step(st_, ONE, [Quadratic([0.0])])
    assert st_.x[0, 0] == pytest.approx(0.5)


def test_dgd_zero_step_is_consensus(cycle3_doubly):
    objs = [Quadratic([float(i)]) for i in range(3)]
    x0 = np.array([[0.0], [3.0], [6.0]])
    st_ = dgd_step(init_dgd(objs, x0, alpha=0.0), cycle3_doubly, objs)
    np.testing.assert_allclose(st_.x, cycle3_doubly.entries @ x0)


def test_dgd_two_agent_hand_step():
    a = WeightMatrix(np.full((2, 2), 0.5), DOUBLY)
    objs = [Quadratic([0.0]), Quadratic([-2.0])]
    st_ = dgd_step(init_dgd(objs, [[0.0], [2.0]], alpha=0.1), a, objs)
    # averaging gives (1, 1); both local gradients vanish at (0, 2)
    np.testing.assert_allclose(st_.x[:, 0], [1.0, 1.0])


def test_dgd_diminishing_converges(cycle3_doubly):
    objs = [Quadratic([float(i)]) for i in range(3)]
    states = run_sync("dgd", cycle3_doubly, objs, np.zeros((3, 1)), 20000, diminishing(0.5))
    assert np.max(np.abs(states[-1].x + 1.0)) < 5e-3


def test_row_weights_warn_for_dgd(cycle3):
    w = build_weights(build_graph(3, "from_edge_list", edges=[(0, 1), (1, 2), (2, 0), (0, 2)]))
    objs = [Quadratic([0.0])] * 3
    with pytest.warns(ConfigurationWarning):
        dgd_step(init_dgd(objs, np.zeros((3, 1)), 0.1), w, objs)


def test_gradient_tracking_fixed_point(cycle3_doubly):
    objs = [Quadratic([float(i)]) for i in range(3)]
    x_star = GlobalProblem(objs).optimum
    st_ = init_gradient_tracking(objs, np.tile(x_star, (3, 1)), 0.1)
    st_ = replace(st_, y=np.zeros((3, 1)))
    nxt = gradient_tracking_step(st_, cycle3_doubly, objs)
    np.testing.assert_allclose(nxt.x, st_.x, atol=1e-15)
    np.testing.assert_allclose(nxt.y, 0.0, atol=1e-15)


def test_gradient_tracking_single_agent():
    objs = [Quadratic([2.0])]
    st_ = init_gradient_tracking(objs, [[5.0]], 0.1)
    for _ in range(10):
        st_ = gradient_tracking_step(st_, ONE, objs)
        np.testing.assert_allclose(st_.y, local_gradients(objs, st_.x))


@given(seed=st.integers(0, 10_000), n=st.integers(2, 5))
@settings(max_examples=20, deadline=None)
def test_gradient_tracking_conservation(seed, n):
    objs, x0 = random_problem(seed, n, 2)
    w = build_weights(build_graph(n, "random_strongly_connected", seed=seed), DOUBLY)
    rep = gradient_tracking_conservation_check(w, objs, x0, 200, alpha=0.05)
    assert rep.passed, rep.to_text()


def test_addopt_single_agent():
    objs = [Quadratic([1.0])]
    a = WeightMatrix(np.ones((1, 1)), COLUMN)
    st_ = init_addopt(objs, [[3.0]], 0.1)
    for _ in range(5):
        prev = st_.z.copy()
        st_ = addopt_step(st_, a, objs)
        assert st_.y[0] == 1.0
        np.testing.assert_allclose(st_.z, prev - 0.1 * local_gradients(objs, prev))


def test_addopt_preserves_y_sum_and_converges():
    w = build_weights(build_graph(3, "cycle"), COLUMN, "uniform_out_degree")
    objs = [Quadratic([1.0]), Quadratic([2.0]), Quadratic([6.0])]
    states = run_sync("addopt", w, objs, np.zeros((3, 1)), 2000, 0.05)
    for s in states[::100]:
        assert s.y.sum() == pytest.approx(3.0, abs=1e-12)
    np.testing.assert_allclose(states[-1].x[:, 0], -3.0, atol=1e-6)


def test_addopt_on_irregular_digraph():
    w = build_weights(build_graph(5, "random_strongly_connected", seed=3), COLUMN, "uniform_out_degree")
    objs, x0 = random_problem(3, 5, 1)
    states = run_sync("addopt", w, objs, x0, 4000, 0.02)
    np.testing.assert_allclose(states[-1].z, np.tile(GlobalProblem(objs).optimum, (5, 1)), atol=1e-6)


def test_addopt_collapsing_y_fails():
    a = WeightMatrix(np.array([[1.0, 1.0], [0.0, 0.0]]), COLUMN)
    objs = [Quadratic([0.0])] * 2
    with pytest.raises(NumericalFailure):
        addopt_step(init_addopt(objs, np.zeros((2, 1)), 0.1), a, objs)


def test_frost_eigenvector_limit(cycle3):
    objs = [Quadratic([0.0])] * 3
    states = run_sync("frost", cycle3, objs, np.zeros((3, 1)), 500, 0.0)
    np.testing.assert_allclose(states[-1].y, np.tile(cycle3.fle, (3, 1)), atol=1e-8)


def test_frost_single_agent():
    objs = [Quadratic([4.0])]
    a = WeightMatrix(np.ones((1, 1)), "row_stochastic")
    st_ = init_frost(objs, [[0.0]], 0.1)
    x_prev = st_.x.copy()
    st_ = frost_step(st_, a, objs)
    np.testing.assert_allclose(st_.x, x_prev - 0.1 * local_gradients(objs, x_prev))


@pytest.mark.parametrize("seed", range(20))
def test_frost_tracking_identity(seed):
    rng = np.random.default_rng(seed)
    n, dim = int(rng.integers(2, 6)), int(rng.integers(1, 3))
    objs, x0 = random_problem(seed, n, dim)
    w = build_weights(build_graph(n, "random_strongly_connected", seed=seed))
    rep = frost_tracking_identity_check(w, objs, x0, 300, alpha=0.005)
    assert rep.passed, rep.to_text()


def test_frost_linear_convergence():
    w = build_weights(build_graph(5, "random_strongly_connected", seed=1))
    objs, x0 = random_problem(1, 5, 2)
    x_star = GlobalProblem(objs).optimum
    states = run_sync("frost", w, objs, x0, 600, 0.02)
    err = np.array([np.linalg.norm(s.x - x_star) for s in states])
    # post-transient window, stopping before the rounding floor
    end = int(np.argmax(err < 1e-11))
    k = np.arange(20, end)
    y = np.log(err[k])
    slope, icpt = np.polyfit(k, y, 1)
    r2 = 1 - np.sum((y - (icpt + slope * k)) ** 2) / np.sum((y - y.mean()) ** 2)
    assert slope < 0 and r2 > 0.99


def test_frost_uncoordinated_steps():
    w = build_weights(build_graph(4, "random_strongly_connected", seed=0))
    objs, x0 = random_problem(0, 4, 1)
    alpha = np.array([0.01, 0.02, 0.015, 0.005])
    states = run_sync("frost", w, objs, x0, 4000, alpha)
    np.testing.assert_allclose(states[-1].x, np.tile(GlobalProblem(objs).optimum, (4, 1)), atol=1e-6)
