import math

import numpy as np
import pytest

from chainmotion.errors import NonFiniteState, OutOfRange, StepLimitExceeded
from chainmotion.integrator import (OdeProblem, SolverConfig, Trajectory,
                                    dense_sample, integrate)

A_SIN = 1 / (2 * math.pi)
W_SIN = 2 * math.pi


def decay(t, x):
    return -x


def const_input(t, x):
    return np.array([x[1], 1.0])


def sine_forced(t, x):
    return np.array([x[1], A_SIN * W_SIN ** 2 * math.sin(W_SIN * t)])


def sine_exact(t):
    # from rest: x = a*w*t - a*sin(w t), v = a*w*(1 - cos(w t))
    return np.array([A_SIN * W_SIN * t - A_SIN * math.sin(W_SIN * t),
                     A_SIN * W_SIN * (1 - math.cos(W_SIN * t))])


PROBLEMS = {
    "decay": (OdeProblem(decay, 0.0, 1.0, [1.0]), np.array([math.exp(-1.0)])),
    "const": (OdeProblem(const_input, 0.0, 1.0, [0.0, 0.0]), np.array([0.5, 1.0])),
    "sine": (OdeProblem(sine_forced, 0.0, 1.0, [0.0, 0.0]), sine_exact(1.0)),
}


def test_exponential_decay():
    tr = integrate(PROBLEMS["decay"][0])
    assert tr.final_state[0] == pytest.approx(0.36788, abs=1e-4)
    assert abs(tr.final_state[0] - math.exp(-1)) < 1e-4


def test_constant_input_double_integrator():
    tr = integrate(PROBLEMS["const"][0])
    np.testing.assert_allclose(tr.final_state, [0.5, 1.0], atol=1e-6)


def test_sine_forced_double_integrator_displacement():
    tr = integrate(PROBLEMS["sine"][0])
    # analytic oracle: displacement 2*pi*a = 1, velocity back to 0
    np.testing.assert_allclose(sine_exact(1.0), [1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(tr.final_state, [1.0, 0.0], atol=1e-6)


@pytest.mark.parametrize("name", sorted(PROBLEMS))
def test_grid_is_monotone_and_hits_endpoints(name):
    prob, _ = PROBLEMS[name]
    tr = integrate(prob)
    assert tr.times[0] == prob.t0
    assert tr.times[-1] == prob.tf
    assert np.all(np.diff(tr.times) > 0)
    assert tr.states.shape == (len(tr.times), prob.dimension)
    assert tr.derivs.shape == tr.states.shape


@pytest.mark.parametrize("name", sorted(PROBLEMS))
def test_tightening_tolerance_never_increases_error(name):
    # below ~1e-6 the tolerance, not the h_max cap, sets the step size
    prob, exact = PROBLEMS[name]
    rtol, atol = 1e-6, 1e-9
    prev = None
    for _ in range(12):
        tr = integrate(prob, SolverConfig(rel_tol=rtol, abs_tol=atol))
        err = float(np.max(np.abs(tr.final_state - exact)))
        if prev is not None:
            assert err <= prev, (rtol, err, prev)
        prev = err
        rtol, atol = rtol / 2, atol / 2


@pytest.mark.parametrize("name", sorted(PROBLEMS))
def test_capped_regime_error_is_stable(name):
    # with every step at h_max the error depends on the grid, not the tolerance
    prob, exact = PROBLEMS[name]
    errs = []
    for rtol in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5):
        tr = integrate(prob, SolverConfig(rel_tol=rtol))
        errs.append(float(np.max(np.abs(tr.final_state - exact))))
    assert max(errs) <= 3 * min(errs) + 1e-15


def test_one_step_local_error_within_tolerance():
    # restart each accepted step from the exact solution and take it again
    cfg = SolverConfig(rel_tol=1e-6, abs_tol=1e-9)
    tr = integrate(PROBLEMS["sine"][0], cfg)
    for t0, t1 in zip(tr.times[:-1], tr.times[1:]):
        h = t1 - t0
        one = integrate(OdeProblem(sine_forced, t0, t1, sine_exact(t0)),
                        SolverConfig(rel_tol=1e-6, abs_tol=1e-9, h_init=h, h_max=h))
        x_exact = sine_exact(t1)
        scale = np.maximum(np.abs(sine_exact(t0)), np.abs(x_exact))
        bound = np.maximum(1e-6 * scale, 1e-9)
        assert np.all(np.abs(one.states[1] - x_exact) <= bound)


def test_deterministic():
    a = integrate(PROBLEMS["sine"][0])
    b = integrate(PROBLEMS["sine"][0])
    assert np.array_equal(a.times, b.times)
    assert np.array_equal(a.states, b.states)


def test_nonzero_start_time():
    prob = OdeProblem(sine_forced, 1.0, 2.0, [1.0, 0.0])
    tr = integrate(prob)
    assert tr.times[0] == 1.0 and tr.times[-1] == 2.0
    np.testing.assert_allclose(tr.final_state, [2.0, 0.0], atol=1e-6)


def test_step_limit():
    with pytest.raises(StepLimitExceeded):
        integrate(PROBLEMS["sine"][0], SolverConfig(max_steps=3))


def test_non_finite_rhs():
    prob = OdeProblem(lambda t, x: np.array([np.nan if t > 0.5 else 1.0]), 0.0, 1.0, [0.0])
    with pytest.raises(NonFiniteState):
        integrate(prob)


def test_rhs_dimension_mismatch():
    prob = OdeProblem(lambda t, x: np.zeros(3), 0.0, 1.0, [0.0, 0.0])
    with pytest.raises(ValueError):
        integrate(prob)


@pytest.mark.parametrize("kwargs", [
    {"rel_tol": 0.0}, {"abs_tol": -1.0}, {"h_init": 0.0},
    {"h_init": 0.5, "h_max": 0.1}, {"max_steps": 0},
])
def test_solver_config_invariants(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)


def test_problem_requires_forward_span():
    with pytest.raises(ValueError):
        OdeProblem(decay, 1.0, 1.0, [1.0])


def test_default_step_bounds():
    h_init, h_max = SolverConfig().step_bounds(2.0)
    assert h_init == pytest.approx(0.02)
    assert h_max == pytest.approx(0.2)


# ---- dense output

def test_dense_sample_exact_at_nodes():
    tr = integrate(PROBLEMS["sine"][0])
    for k in range(len(tr.times)):
        assert np.array_equal(dense_sample(tr, tr.times[k]), tr.states[k])


def test_dense_sample_linear_midpoint():
    times = np.array([0.0, 1.0, 3.0])
    states = np.array([[0.0, 1.0], [2.0, 0.0], [6.0, -2.0]])
    derivs = np.array([[2.0, -1.0]] * 3)
    for tr in (Trajectory(times, states, derivs), Trajectory(times, states, None)):
        np.testing.assert_allclose(dense_sample(tr, 0.5), (states[0] + states[1]) / 2,
                                   atol=1e-12)
        np.testing.assert_allclose(dense_sample(tr, 2.0), (states[1] + states[2]) / 2,
                                   atol=1e-12)


def test_dense_sample_matches_quadratic_solution():
    tr = integrate(PROBLEMS["const"][0])
    mids = (tr.times[:-1] + tr.times[1:]) / 2
    for t in mids:
        assert dense_sample(tr, t)[0] == pytest.approx(t * t / 2, abs=1e-4)


def test_dense_sample_out_of_range():
    tr = integrate(PROBLEMS["decay"][0])
    with pytest.raises(OutOfRange):
        dense_sample(tr, 1.0 + 1e-9)
    with pytest.raises(OutOfRange):
        dense_sample(tr, -0.1)
