import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nrlz.classical import (
    classical_energy,
    divergence_check,
    find_fixed_points,
    homoclinic_action,
    jacobian,
    reduced_rhs,
    trace_frozen_orbit,
)
from nrlz.exceptions import PhaseSpaceBoundaryError, ValidationError
from nrlz.model import ModelParams, ReducedState
from nrlz.spectrum import reconstruct_eigenstates


def _closed_form_energy(s, theta, gamma, params):
    """Reciprocal-limit conserved energy written out by hand."""
    v, c = params.v, params.c
    return gamma * s + 0.5 * c * s * s - v * math.sqrt(1 - s * s) * math.cos(theta)


# -- vector field ------------------------------------------------------------


def test_rhs_substitution():
    # at s = 0 the two hopping terms in the theta equation cancel when delta = 0
    assert reduced_rhs(ReducedState(0.0, 0.0), 0.0, ModelParams()) == pytest.approx((0.0, 0.0))
    # s = 0.6, theta = pi/3, gamma = 0.5, c = 2, delta = 0.5, v = 1 by hand:
    # ds/dt = 0.5 * (-1.5) * 0.8 * sin(pi/3); dtheta/dt = 0.5 + 1.2 + (1.6 - 0.2) * 0.5 / 1.6
    got = reduced_rhs(ReducedState(0.6, math.pi / 3), 0.5, ModelParams(c=2.0, delta=0.5))
    assert got == pytest.approx((-0.6 * math.sqrt(3) / 2, 1.7 + 0.4375), abs=1e-14)


@given(st.floats(-5, 5), st.floats(-3, 3), st.floats(0.1, 3))
def test_delta_two_freezes_s(gamma, c, v):
    ds, _ = reduced_rhs(ReducedState(0.0, math.pi / 2), gamma, ModelParams(v=v, c=c, delta=2.0))
    assert ds == 0.0


def test_boundary_rejected():
    with pytest.raises(PhaseSpaceBoundaryError, match="phase-space boundary"):
        reduced_rhs(ReducedState(1.0, 0.0), 0.0, ModelParams())


@pytest.mark.parametrize("gamma, c, delta", [(0.1, 2.0, 0.5), (-0.1, 2.0, 1.5), (0.4, 1.0, 0.0)])
def test_fixed_points_are_stationary(gamma, c, delta):
    p = ModelParams(c=c, delta=delta)
    for st_ in reconstruct_eigenstates(gamma, p).validated:
        ds, dth = reduced_rhs(ReducedState(st_.s, st_.theta), gamma, p)
        assert math.hypot(ds, dth) <= 1e-10


# -- divergence --------------------------------------------------------------


@settings(max_examples=100)
@given(st.floats(-0.99, 0.99), st.floats(0, 2 * math.pi), st.floats(-5, 5), st.floats(-3, 3))
def test_divergence_vanishes_when_reciprocal(s, theta, gamma, c):
    assert abs(divergence_check(ReducedState(s, theta), gamma, ModelParams(c=c))) <= 1e-12


def test_divergence_nonzero_when_nonreciprocal():
    val = divergence_check(ReducedState(0.0, math.pi / 4), 0.0, ModelParams(delta=0.5))
    assert abs(val) > 0.1


@settings(max_examples=100)
@given(st.floats(-0.95, 0.95), st.floats(0, 2 * math.pi), st.floats(-3, 3),
       st.floats(-3, 3), st.floats(0, 3))
def test_jacobian_finite_differences(s, theta, gamma, c, delta):
    p = ModelParams(c=c, delta=delta)
    h = 1e-5
    fd = np.empty((2, 2))
    for k, (ds, dth) in enumerate(((h, 0.0), (0.0, h))):
        plus = reduced_rhs(ReducedState(s + ds, theta + dth), gamma, p)
        minus = reduced_rhs(ReducedState(s - ds, theta - dth), gamma, p)
        fd[:, k] = (np.array(plus) - np.array(minus)) / (2 * h)
    np.testing.assert_allclose(jacobian(s, theta, gamma, p), fd, atol=1e-6)
    div = divergence_check(ReducedState(s, theta), gamma, p)
    assert div == pytest.approx(fd[0, 0] + fd[1, 1], abs=1e-6)


# -- fixed points ------------------------------------------------------------


def test_fixed_points_before_second_pair():
    fps = find_fixed_points(-1.0, ModelParams(c=2.0, delta=1.5))
    assert len(fps) == 2 and all(fp.theta == 0.0 for fp in fps)


def test_fixed_points_after_second_pair():
    fps = find_fixed_points(-0.1, ModelParams(c=2.0, delta=1.5))
    assert len(fps) == 4
    assert sum(fp.theta == 0.0 for fp in fps) == 2
    assert sum(fp.theta == math.pi for fp in fps) == 2


def test_four_fixed_points_inside_loop():
    fps = find_fixed_points(0.1, ModelParams(c=2.0, delta=0.5))
    assert len(fps) == 4
    assert {fp.stability for fp in fps} <= {"center", "saddle"}


@pytest.mark.parametrize("gamma, c, delta", [(0.1, 2.0, 0.5), (-0.1, 2.0, 1.5), (0.3, 0.7, 0.2)])
def test_fixed_points_match_eigenstates(gamma, c, delta):
    p = ModelParams(c=c, delta=delta)
    fps = sorted((fp.eta, fp.s) for fp in find_fixed_points(gamma, p))
    states = sorted((st_.eta, st_.s) for st_ in reconstruct_eigenstates(gamma, p).validated)
    assert len(fps) == len(states)
    for (e1, s1), (e2, s2) in zip(fps, states):
        assert e1 == e2 and abs(s1 - s2) <= 1e-8


def test_fixed_point_residual():
    p = ModelParams(c=2.0, delta=0.5)
    for fp in find_fixed_points(0.1, p):
        assert math.hypot(*reduced_rhs(ReducedState(fp.s, fp.theta), 0.1, p)) <= 1e-10


def test_delta_two_flagged():
    fps = find_fixed_points(0.2, ModelParams(c=3.0, delta=2.0))
    assert fps and all(fp.stability == "degenerate" for fp in fps)


# -- orbits ------------------------------------------------------------------


def test_conservative_center_orbit_closes():
    orbit = trace_frozen_orbit(ReducedState(0.5, 0.0), 0.0, ModelParams())
    assert orbit.closed and orbit.termination == "returned"
    first, last = orbit.points[0], orbit.points[-1]
    gap = math.hypot(first[0] - last[0], (first[1] - last[1]) % (2 * math.pi))
    assert gap <= 1e-4 + 1e-12
    assert abs(orbit.action) <= 1.0


@pytest.mark.parametrize("start, gamma, c", [((0.3, 0.2), 0.4, 1.3), ((0.8, 0.0), 0.0, 0.0),
                                              ((-0.2, 2.0), -0.5, 2.0)])
def test_reciprocal_orbit_conserves_energy(start, gamma, c):
    p = ModelParams(c=c)
    orbit = trace_frozen_orbit(ReducedState(*start), gamma, p)
    e = [_closed_form_energy(s, th, gamma, p) for s, th in orbit.points]
    assert max(e) - min(e) <= 1e-8


@pytest.mark.parametrize("s, theta", [(0.3, 0.2), (-0.7, 2.5), (0.95, 4.0), (0.0, 1.0)])
def test_quadrature_energy_matches_closed_form(s, theta):
    p = ModelParams(c=1.3)
    got = classical_energy(ReducedState(s, theta), 0.4, p)
    want = _closed_form_energy(s, theta, 0.4, p) - _closed_form_energy(0.0, 0.0, 0.4, p)
    assert got == pytest.approx(want, abs=1e-10)


def test_quadrature_energy_reciprocal_only():
    with pytest.raises(ValidationError):
        classical_energy(ReducedState(0.1, 0.1), 0.0, ModelParams(delta=0.5))


def test_nonreciprocal_periodic_orbit_near_center():
    p = ModelParams(c=2.0, delta=0.5)
    center = next(fp for fp in find_fixed_points(0.1, p) if fp.stability == "center")
    orbit = trace_frozen_orbit(ReducedState(center.s + 0.05, center.theta), 0.1, p)
    assert orbit.closed and orbit.winding == 0
    divs = [divergence_check(ReducedState(s, th), 0.1, p) for s, th in orbit.points[::10]]
    assert max(abs(d) for d in divs) > 1e-3


def test_orbit_escape_reported():
    p = ModelParams(c=0.0, delta=3.0)
    orbit = trace_frozen_orbit(ReducedState(0.9, math.pi / 2), 0.0, p, max_time=50.0)
    assert orbit.termination == "escape" and not orbit.closed
    orbit = trace_frozen_orbit(ReducedState(0.99, math.pi / 2), 0.0, p, max_time=50.0)
    assert orbit.termination == "escape"
    assert np.all(np.abs(orbit.points[:, 0]) < 1.0)


def test_orbit_start_validation():
    with pytest.raises(ValidationError):
        trace_frozen_orbit(ReducedState(1.0, 0.0), 0.0, ModelParams())


# -- homoclinic action -------------------------------------------------------


def test_homoclinic_terminal_gamma():
    res = homoclinic_action(ModelParams(c=2.0, delta=0.5))
    assert res.gamma_star == pytest.approx(1.03, abs=0.02)
    assert 0 < res.p_c_ad < 1
    assert res.p_c_ad == pytest.approx(res.I_c / 2)
    assert res.closure_error <= 2e-4


def test_homoclinic_refuses_without_loop():
    with pytest.raises(ValidationError, match="no loop"):
        homoclinic_action(ModelParams(c=0.5, delta=0.5))


@pytest.mark.parametrize("delta", [0.0, 0.5])
def test_action_quadrature_converges(delta):
    p = ModelParams(c=2.0, delta=delta)
    a = homoclinic_action(p, samples_per_step=16).I_c
    b = homoclinic_action(p, samples_per_step=32).I_c
    assert abs(a - b) < 1e-3


def _level_set_action(params):
    """Independent reciprocal-limit oracle: the homoclinic orbit is the
    energy level through the merged fixed point, with one s per theta."""
    from scipy.integrate import quad
    from scipy.optimize import brentq

    from nrlz.spectrum import loop_window

    fold = loop_window(params).upper_fold()
    th0 = 0.0 if fold.eta > 0 else math.pi
    e0 = _closed_form_energy(fold.s, th0, fold.gamma, params)

    def s_of(theta):
        f = lambda x: _closed_form_energy(x, theta, fold.gamma, params) - e0  # noqa: E731
        xs = np.linspace(-1 + 1e-13, 1 - 1e-13, 401)
        fv = np.array([f(x) for x in xs])
        i = np.nonzero(fv[:-1] * fv[1:] <= 0)[0][-1]
        return brentq(f, xs[i], xs[i + 1], xtol=1e-15)

    mean_s = quad(s_of, th0 + 1e-9, th0 + 2 * math.pi - 1e-9, limit=400)[0] / (2 * math.pi)
    return 1.0 - mean_s


def test_reciprocal_homoclinic_matches_level_set():
    p = ModelParams(c=2.0)
    want = _level_set_action(p)
    assert want == pytest.approx(0.450196, abs=1e-6)  # frozen oracle value
    res = homoclinic_action(p)
    assert res.I_c == pytest.approx(want, abs=1e-4)
