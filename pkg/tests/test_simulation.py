import csv
import io
import math
from dataclasses import replace

import numpy as np
import pytest

from chainmotion.errors import NearSingularity, UnknownComponent
from chainmotion.experiments import (CHAINED, MANIPULATOR, MANIPULATOR_TABLE, TABLE_LEVELS)
from chainmotion.integrator import SolverConfig
from chainmotion.simulation import (SAMPLES_PER_STEP, Scenario, csv_text, perturb, run,
                                    sweep, terminal_error)
from chainmotion.tracker import PdGains

TIGHT = SolverConfig(rel_tol=1e-9, abs_tol=1e-12)


@pytest.fixture(scope="module")
def chained_result():
    return run(CHAINED)


@pytest.fixture(scope="module")
def manip_result():
    return run(MANIPULATOR)


@pytest.fixture(scope="module")
def table_sweep():
    return {row.fraction: row for row in sweep(MANIPULATOR_TABLE, "theta", TABLE_LEVELS)}


def test_chained_reaches_target(chained_result):
    r = chained_result
    assert np.all(np.abs(r.terminal_error_pos) <= 1e-6)
    assert np.all(np.abs(r.terminal_error_vel) <= 1e-6)
    assert r.chi is None and r.native_terminal_error is None


def test_degenerate_scenario_only_cycles_xi2():
    # 1e-8 is below the default absolute tolerance, so tighten the solver
    sc = Scenario("chained", (0, 1, 0), (0, 0, 0),
                  solver=SolverConfig(rel_tol=1e-8, abs_tol=1e-11))
    r = run(sc)
    np.testing.assert_allclose(r.plan.amplitudes, [0, 0, -1 / (2 * math.pi), 0, 0],
                               atol=1e-15)
    assert np.all(np.abs(r.terminal_error_pos) <= 1e-8)
    assert np.all(np.abs(r.terminal_error_vel) <= 1e-8)
    # xi1 and xi3 never move
    assert np.all(r.xi[:, [0, 2, 3, 5]] == 0.0)


def test_manipulator_reaches_target(manip_result):
    r = manip_result
    assert np.all(np.abs(r.native_terminal_error) <= 1e-4)
    assert r.chi.shape == (len(r.times), 6)
    assert r.alpha.shape == (len(r.times), 2)


def test_manipulator_coordinates_are_consistent(manip_result):
    r = manip_result
    L = r.scenario.params.L_cop
    np.testing.assert_allclose(r.xi[:, 0], r.chi[:, 0] - L, atol=1e-15)
    np.testing.assert_allclose(r.xi[:, 1], np.tan(r.chi[:, 2]), rtol=1e-15)
    np.testing.assert_array_equal(r.xi[:, 2], r.chi[:, 1])


def test_perturb_examples():
    up = perturb(MANIPULATOR, "theta", 0.10)
    assert up.initial_state()[2] == pytest.approx(0.506, abs=1e-12)
    assert round(up.initial_state()[2], 2) == 0.51
    down = perturb(MANIPULATOR, "theta", -0.10)
    assert down.initial_state()[2] == pytest.approx(0.414, abs=1e-12)
    assert perturb(MANIPULATOR, "theta", 0.0) is MANIPULATOR
    # nominal plan is untouched
    assert up.make_plan() == MANIPULATOR.make_plan()
    with pytest.raises(UnknownComponent):
        perturb(MANIPULATOR, "xi1", 0.1)
    with pytest.raises(UnknownComponent):
        perturb(CHAINED, "theta", 0.1)


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario("chained", (0, 0, 0), (1, 1, 1), gains=PdGains(-1, 1))
    with pytest.raises(ValueError):
        Scenario("boat", (0, 0, 0), (1, 1, 1))
    with pytest.raises(ValueError):
        Scenario("chained", (0, 0, 0), (1, 1, 1), T=0.0)
    with pytest.raises(NearSingularity):
        run(Scenario("manipulator", (0, 0, 1.5705), (1, 0, 0)))


def test_terminal_error_against_last_sample(chained_result):
    r = chained_result
    last = r.xi[-1]
    err = terminal_error(r, target=last)
    np.testing.assert_array_equal(err.chained_pos, 0.0)
    np.testing.assert_array_equal(err.chained_vel, 0.0)
    default = terminal_error(r)
    np.testing.assert_array_equal(default.chained_pos, r.terminal_error_pos)


def test_native_terminal_error(manip_result):
    err = terminal_error(manip_result)
    np.testing.assert_array_equal(err.native_pos, manip_result.native_terminal_error[:3])
    zero = terminal_error(manip_result, target=manip_result.chi[-1])
    np.testing.assert_array_equal(zero.native_pos, 0.0)
    assert np.all(np.abs(zero.chained_pos) < 1e-15)


def test_feedback_matches_feedforward_on_nominal_run():
    # at a tight tolerance so the comparison is not dominated by interpolation
    sc = replace(CHAINED, solver=TIGHT)
    closed, open_ = run(sc), run(sc, open_loop=True)
    common, i, j = np.intersect1d(closed.times, open_.times, return_indices=True)
    assert len(common) >= 5 * SAMPLES_PER_STEP + 1
    assert np.max(np.abs(closed.xi[i] - open_.xi[j])) <= 1e-5


def test_feedback_matches_feedforward_at_boundaries(chained_result):
    open_ = run(CHAINED, open_loop=True)
    np.testing.assert_allclose(chained_result.boundary_states, open_.boundary_states,
                               atol=1e-5)


def test_sample_grid(chained_result):
    t = chained_result.times
    assert t[0] == 0.0 and t[-1] == 5.0
    assert np.all(np.diff(t) > 0)
    grid = np.linspace(0, 5, 5 * SAMPLES_PER_STEP + 1)
    assert all(np.min(np.abs(t - g)) < 1e-12 for g in grid)


def test_boundary_continuity(manip_result):
    r = manip_result
    for k in range(1, 5):
        i = int(np.searchsorted(r.times, float(k)))
        assert r.times[i] == k
        np.testing.assert_array_equal(r.chi[i], r.boundary_states[k])
        # neighbours on either side are close
        assert np.max(np.abs(r.chi[i] - r.chi[i - 1])) < 0.1


def test_error_grows_with_perturbation(table_sweep):
    x_err = {f: abs(row.result.native_terminal_error[0]) for f, row in table_sweep.items()}
    for sign in (1, -1):
        levels = [0.0, sign * 0.01, sign * 0.10, sign * 0.30]
        seq = [x_err[f] for f in levels]
        assert seq == sorted(seq), (sign, seq)


def test_theta_error_smaller_than_x_error(table_sweep):
    for f, row in table_sweep.items():
        if f == 0.0:
            continue
        e = row.result.native_terminal_error
        assert abs(e[2]) < abs(e[0])


def test_sweep_order_and_baseline(table_sweep):
    assert list(table_sweep) == [0.0, *TABLE_LEVELS]
    base = table_sweep[0.0].result
    assert base.scenario.perturbation is None
    assert np.all(np.abs(base.native_terminal_error[:3]) <= 1e-5)


def test_sweep_parallel_is_identical():
    levels = (0.01, -0.3)
    serial = sweep(MANIPULATOR_TABLE, "theta", levels)
    parallel = sweep(MANIPULATOR_TABLE, "theta", levels, jobs=2)
    assert [r.fraction for r in parallel] == [0.0, *levels]
    for a, b in zip(serial, parallel):
        np.testing.assert_array_equal(a.result.chi, b.result.chi)


def test_sweep_reports_failures_per_row():
    rows = sweep(MANIPULATOR, "theta", [2.5])
    assert rows[0].ok and not rows[1].ok
    assert "NearSingularity" in rows[1].error


def test_csv_columns_and_round_trip(manip_result):
    text = csv_text(manip_result)
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["t", "xi1", "xi2", "xi3", "dxi1", "dxi2", "dxi3",
                       "xi1_ref", "xi2_ref", "xi3_ref", "u1", "u2",
                       "x", "y", "theta", "alpha1", "alpha2"]
    body = np.array(rows[1:], dtype=float)
    assert body.shape == (len(manip_result.times), 17)
    np.testing.assert_array_equal(body[:, 0], manip_result.times)
    np.testing.assert_array_equal(body[:, 1:7], manip_result.xi)
    np.testing.assert_array_equal(body[:, 12:15], manip_result.chi[:, :3])


def test_csv_chained_has_no_native_columns(chained_result):
    header = csv_text(chained_result).splitlines()[0].split(",")
    assert len(header) == 12 and "theta" not in header


def test_run_is_deterministic():
    assert csv_text(run(CHAINED)) == csv_text(run(CHAINED))
