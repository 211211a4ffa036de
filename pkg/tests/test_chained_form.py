import numpy as np
import pytest
from hypothesis import given, strategies as st

from chainmotion.chained_form import (ChainedInput, ChainedState, decompose, dynamics,
                                      reassemble, view_derivatives)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
states = st.builds(ChainedState, finite, finite, finite, finite, finite, finite)
inputs = st.builds(ChainedInput, finite, finite)


def test_unit_xi2_copies_u1_into_xi3():
    d = dynamics(ChainedState(0, 1, 0), ChainedInput(2, 0))
    np.testing.assert_array_equal(d, [0, 0, 0, 2, 0, 2])


def test_zero_xi2_freezes_xi3_acceleration():
    assert dynamics(ChainedState(0, 0, 0), ChainedInput(5, 0))[5] == 0.0


def test_direct_substitution():
    d = dynamics(ChainedState(0, 0.5, 0), ChainedInput(1, 1))
    np.testing.assert_array_equal(d[3:], [1, 1, 0.5])


def test_velocities_feed_position_rates():
    d = dynamics(ChainedState(1, 2, 3, 4, 5, 6), ChainedInput(0, 0))
    np.testing.assert_array_equal(d, [4, 5, 6, 0, 0, 0])


@pytest.mark.parametrize("xi2, gain", [(1.0, 1.0), (0.0, 0.0), (0.3, 0.3)])
def test_xi3_view_gain_is_xi2(xi2, gain):
    v1, v2, v3 = decompose(ChainedState(0, xi2, 0))
    assert v1.input_gain == 1.0 and v2.input_gain == 1.0
    assert v3.input_gain == gain
    assert (v1.channel, v2.channel, v3.channel) == ("u1", "u2", "u1")


def test_state_validation():
    with pytest.raises(ValueError):
        ChainedState(np.nan, 0, 0)
    with pytest.raises(ValueError):
        ChainedInput(0, np.inf)
    with pytest.raises(ValueError):
        ChainedState.from_array([1, 2, 3])


@given(states)
def test_reassembly_is_identity(s):
    assert reassemble(decompose(s)) == s


@given(states)
def test_array_round_trip(s):
    assert ChainedState.from_array(s.to_array()) == s


@given(states, inputs)
def test_decomposition_equivalence(s, u):
    np.testing.assert_array_equal(view_derivatives(decompose(s), u), dynamics(s, u))


@given(states, states, inputs, inputs)
def test_input_increment_ignores_velocities(s, other, u, v):
    # same positions, different velocities
    s2 = ChainedState(s.xi1, s.xi2, s.xi3, other.dxi1, other.dxi2, other.dxi3)
    uv = ChainedInput(u.u1 + v.u1, u.u2 + v.u2)
    d1 = dynamics(s, uv) - dynamics(s, u)
    d2 = dynamics(s2, uv) - dynamics(s2, u)
    np.testing.assert_allclose(d1, d2, rtol=1e-12, atol=1e-9)


@given(finite, finite, finite)
def test_rest_states_are_equilibria(a, b, c):
    np.testing.assert_array_equal(dynamics(ChainedState(a, b, c), ChainedInput()), 0.0)
