import math

import numpy as np
import pytest

from enet_select.loss import (LossSurface, analytic_minimizer_identity, bernoulli_that,
                              bernoulli_tstar, grid_minimize, identity_loss, oracle_grid)
from enet_select.model import InvalidInputError, InverseProblem, spectral_data
from enet_select.opten import OptENConfig, opten_select
from enet_select.synthetic import gen_bernoulli_instance


def identity_problem(y, alpha=1.0):
    A = np.eye(y.size)
    return InverseProblem(A, y, alpha), spectral_data(A)


class Quadratic:
    t_floor = 0.0

    def __call__(self, t):
        return (t - 0.8) ** 2


# --- surfaces -----------------------------------------------------------------------

def test_true_loss_zero_when_solution_hits_reference():
    y = np.array([2.0, -1.0])
    prob, spec = identity_problem(y)
    # at t = 1 with alpha = 1 the identity solution is y itself
    s = LossSurface("true_loss", prob, spec, reference=y)
    assert s(1.0) == 0.0


def test_modified_equals_empirical_for_identity():
    rng = np.random.default_rng(0)
    y = rng.standard_normal(6)
    prob, spec = identity_problem(y, 0.5)
    xhat = y * (np.arange(6) < 3)
    emp = LossSurface("empirical", prob, spec, reference=xhat)
    mod = LossSurface("modified", prob, spec, pi_y=xhat)
    ts = np.linspace(0, 1, 21)
    np.testing.assert_allclose(emp.values(ts), mod.values(ts), atol=1e-12)


def test_projected_equals_empirical_when_injective():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((8, 4))
    y = rng.standard_normal(8)
    prob, spec = InverseProblem(A, y, 1.0), spectral_data(A)
    ref = rng.standard_normal(4)
    ts = np.linspace(0.2, 1, 9)
    np.testing.assert_allclose(LossSurface("projected", prob, spec, ref).values(ts),
                               LossSurface("empirical", prob, spec, ref).values(ts),
                               rtol=1e-10)


def test_surface_argument_checks():
    prob, spec = identity_problem(np.ones(3))
    with pytest.raises(InvalidInputError):
        LossSurface("bogus", prob, spec, np.ones(3))
    with pytest.raises(InvalidInputError):
        LossSurface("modified", prob, spec)
    with pytest.raises(InvalidInputError):
        LossSurface("empirical", prob, spec, np.ones(2))


def test_surface_matches_closed_form_on_identity():
    rng = np.random.default_rng(2)
    y = rng.standard_normal(10) * 2
    x = rng.standard_normal(10)
    prob, spec = identity_problem(y, 0.3)
    s = LossSurface("true_loss", prob, spec, x)
    for t in (0.1, 0.4, 0.77, 0.95):
        assert s(t) == pytest.approx(identity_loss(t, y, x, 0.3), rel=1e-10)


# --- grid and analytic minimizers ------------------------------------------------------

def test_oracle_grid():
    g = oracle_grid(1e-3)
    assert g.size == 1001 and g[0] == 0.0 and g[-1] == 1.0
    with pytest.raises(InvalidInputError):
        oracle_grid(0.0)


def test_grid_minimize_mock():
    t, v = grid_minimize(Quadratic(), 1e-3)
    assert abs(t - 0.8) <= 1e-3


def test_grid_minimize_plateau_picks_smallest():
    t, _ = grid_minimize(lambda t: 1.0 if t <= 0.3 else 2.0, 1e-2)
    assert t == 0.0


def test_analytic_minimizer_matches_dense_grid():
    rng = np.random.default_rng(3)
    for _ in range(10):
        y = rng.standard_normal(8) * 2
        x = y + 0.3 * rng.standard_normal(8)
        alpha = float(rng.choice([0.1, 1.0, 10.0]))
        ta = analytic_minimizer_identity(y, x, alpha)
        ts = np.linspace(0, 1, 20001)
        vals = np.array([identity_loss(t, y, x, alpha) for t in ts])
        assert identity_loss(ta, y, x, alpha) <= vals.min() + 1e-10


def test_analytic_minimizer_zero_data():
    assert analytic_minimizer_identity(np.zeros(3), np.zeros(3), 1.0) == 0.0


def test_bernoulli_noiseless_clamps_to_one():
    x = np.array([1.0, -2.0, 3.0])
    assert bernoulli_tstar(x, x.copy(), 0.0, 3) == 1.0


def test_bernoulli_that_zero_correction():
    x, y, _ = gen_bernoulli_instance(50, 5, 0.2, seed=4)
    ts = bernoulli_tstar(x, y, 0.2, 5)
    assert bernoulli_that(ts, x, x, y, 5) == ts


def test_bernoulli_rejects_non_rademacher_noise():
    x, y, _ = gen_bernoulli_instance(20, 4, 0.2, seed=5)
    with pytest.raises(InvalidInputError):
        bernoulli_tstar(x, y + 0.05, 0.2, 4)


# --- OptEN --------------------------------------------------------------------------

def test_opten_quadratic():
    t, trace = opten_select(Quadratic())
    assert abs(t - 0.8) <= 1e-3
    assert trace.status in ("gradient_converged", "max_iter")


def test_opten_decreasing_surface_hits_boundary():
    t, trace = opten_select(lambda t: (1.0 - t) ** 2 + 1.0, t_floor=0.0)
    assert t == 1.0
    assert trace.status == "boundary"


def test_opten_noiseless_identity_instance():
    x, y, _ = gen_bernoulli_instance(30, 30, 0.0, seed=6)
    prob, spec = identity_problem(y)
    t, trace = opten_select(LossSurface("true_loss", prob, spec, x))
    assert t == 1.0


def test_opten_single_interpolation_mode_still_converges():
    t, _ = opten_select(Quadratic(), OptENConfig(max_backtracks=0))
    assert abs(t - 0.8) <= 1e-3


def test_opten_trace_rows():
    _, trace = opten_select(Quadratic())
    rows = trace.rows()
    assert rows[0][0] == 0 and math.isnan(rows[0][4])
    assert trace.evaluations >= len(rows)


def test_opten_config_validation():
    with pytest.raises(InvalidInputError):
        OptENConfig(beta=1.5)
    with pytest.raises(InvalidInputError):
        OptENConfig(max_backtracks=-1)
    with pytest.raises(InvalidInputError):
        OptENConfig(tol=0.0)


def test_opten_evaluation_failure_status():
    def bad(t):
        raise FloatingPointError("boom")

    t, trace = opten_select(bad, t_floor=0.1)
    assert trace.status == "evaluation_failed"


def test_opten_on_bernoulli_matches_closed_form():
    x, y, _ = gen_bernoulli_instance(200, 10, 0.2, seed=7)
    prob, spec = identity_problem(y)
    t, _ = opten_select(LossSurface("true_loss", prob, spec, x))
    assert t == pytest.approx(bernoulli_tstar(x, y, 0.2, 10), abs=5e-3)
