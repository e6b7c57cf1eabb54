import math

import numpy as np
import pytest

from nrlz.dynamics import (
    DEFAULT_TOL,
    SweepProtocol,
    check_window,
    integrate,
    schrodinger_rhs,
    tunneling_probabilities,
)
from nrlz.exceptions import StiffnessError, ValidationError
from nrlz.model import ModelParams, QuantumState, hamiltonian, lz_closed_form
from nrlz.spectrum import adiabatic_states


def _lower(params, gamma):
    return adiabatic_states(gamma, params)[0].state


# -- right-hand side ---------------------------------------------------------


def test_rhs_single_row():
    da, db = schrodinger_rhs(QuantumState(1, 0), 0.0, ModelParams())
    assert da == 0 and db == pytest.approx(-0.5j)


def test_rhs_one_way_hopping():
    da, db = schrodinger_rhs(QuantumState(0, 1), 0.0, ModelParams(delta=1.0))
    assert da == pytest.approx(-0.5j) and db == 0


@pytest.mark.parametrize("c, delta", [(0.0, 0.0), (1.5, 0.7), (-2.0, 3.0)])
def test_rhs_matches_matrix_product(c, delta):
    st = QuantumState(1 / math.sqrt(2), (1 + 0.3j) / math.sqrt(2))
    p = ModelParams(c=c, delta=delta)
    want = -1j * hamiltonian(4.0, st, p) @ np.array([st.a, st.b])
    np.testing.assert_allclose(schrodinger_rhs(st, 4.0, p), want, rtol=1e-15, atol=1e-15)


# -- protocol ---------------------------------------------------------------


def test_protocol_validation():
    with pytest.raises(ValidationError, match="alpha must be positive"):
        SweepProtocol(alpha=0.0)
    with pytest.raises(ValidationError):
        SweepProtocol(sample_count=1)
    with pytest.raises(ValidationError):
        SweepProtocol(kind="frozen")
    with pytest.raises(ValidationError):
        SweepProtocol(kind="spiral")


def test_tol_range():
    with pytest.raises(ValidationError):
        integrate(QuantumState(1, 0), SweepProtocol(), ModelParams(), tol=1e-2)


# -- trajectories ------------------------------------------------------------


def test_sample_count_and_monotone_gamma():
    p = ModelParams(alpha=1.0)
    traj = integrate(QuantumState(1, 0), SweepProtocol.from_params(p, 37), p)
    assert len(traj) == 37
    assert np.all(np.diff(traj.gamma) > 0)
    assert traj.gamma[0] == p.gamma_start and traj.gamma[-1] == p.gamma_end
    assert len(list(traj)) == 37


def test_frozen_protocol_rabi():
    # gamma = 0, c = 0, delta = 0: |b|^2 = sin^2(t/2)
    proto = SweepProtocol("frozen", 0.0, 0.0, sample_count=11, duration=math.pi)
    traj = integrate(QuantumState(1, 0), proto, ModelParams())
    np.testing.assert_allclose(traj.pop_b, np.sin(traj.t / 2) ** 2, atol=1e-9)


@pytest.mark.parametrize("c", [0.0, 1.0])
def test_norm_conserved_hermitian(c):
    p = ModelParams(c=c, alpha=10.0)
    tol = 1e-10
    traj = integrate(_lower(p, p.gamma_start), SweepProtocol.from_params(p, 51), p, tol)
    logn = traj.log_population
    assert np.max(np.abs(np.expm1(logn - logn[0]))) <= 10 * tol


@pytest.mark.xfail(strict=True, reason="local error control: drift grows with step count")
@pytest.mark.parametrize("c, alpha", [(0.0, 0.5), (-2.5, 10.0)])
def test_norm_conserved_hermitian_long_sweep(c, alpha):
    # the c = -2.5 window is 2.5x wider, so even a fast sweep takes many steps
    p = ModelParams(c=c, alpha=alpha)
    tol = 1e-10
    traj = integrate(_lower(p, p.gamma_start), SweepProtocol.from_params(p, 51), p, tol)
    logn = traj.log_population
    assert np.max(np.abs(np.expm1(logn - logn[0]))) <= 10 * tol


@pytest.mark.parametrize("c, delta", [(0.0, 0.5), (2.0, 0.5), (1.0, 3.0), (2.0, 1.5), (0.0, 0.25)])
def test_zeta_conserved(c, delta):
    p = ModelParams(c=c, delta=delta, alpha=0.5)
    traj = integrate(_lower(p, p.gamma_start), SweepProtocol.from_params(p, 101), p)
    assert traj.zeta_drift() <= 1e-6


def test_rescaling_band():
    p = ModelParams(delta=3.0, alpha=0.05)
    traj = integrate(_lower(p, p.gamma_start), SweepProtocol.from_params(p, 201), p)
    assert np.all((traj.raw_norm2 >= 1e-6) & (traj.raw_norm2 <= 1e6))
    assert traj.log_scale.max() > 1.0  # growth between the EPs was absorbed


def test_stiffness_failure_reports_gamma():
    p = ModelParams(alpha=1.0)
    proto = SweepProtocol("frozen", 1e16, 1e16, duration=1.0)
    with pytest.raises(StiffnessError) as info:
        integrate(QuantumState(1, 1), proto, p)
    assert info.value.gamma == pytest.approx(1e16)


# -- tunneling probabilities -------------------------------------------------


def test_lz_alpha_two():
    r = tunneling_probabilities(ModelParams(alpha=2.0))
    assert r.p_lu == pytest.approx(lz_closed_form(2.0), rel=0.01)
    assert r.p_lu == pytest.approx(0.4559, abs=5e-4)


def test_window_precondition():
    p = ModelParams(c=2.0, gamma_start=-30.0, gamma_end=30.0)
    with pytest.raises(ValidationError, match="sweep window"):
        check_window(p, SweepProtocol.from_params(p))


def test_hermitian_adiabatic_limit():
    r = tunneling_probabilities(ModelParams(alpha=0.01))
    assert r.p_lu < 1e-3 and r.p_ul < 1e-3


def test_probabilities_bounded():
    r = tunneling_probabilities(ModelParams(c=1.0, delta=3.0, alpha=0.5))
    for x in (r.p_lu, r.p_ul, r.p_lu_basis, r.p_ul_basis):
        assert 0.0 <= x <= 1.0


def test_critical_point_saturation():
    r = tunneling_probabilities(ModelParams(delta=1.0, alpha=2.0))
    assert r.p_lu == pytest.approx(1.0, abs=0.01)
    assert math.isnan(r.zeta_drift)


def test_tolerance_halving_converges():
    p = ModelParams(alpha=1.0)
    tol = 1e-9
    a = tunneling_probabilities(p, tol=tol).p_lu
    b = tunneling_probabilities(p, tol=tol / 2).p_lu
    assert abs(a - b) <= 10 * tol


def _widening_gap(alpha, c, delta):
    w = 20.0 * max(1.0, abs(c))
    narrow = ModelParams(alpha=alpha, c=c, delta=delta, gamma_start=-w, gamma_end=w)
    wide = ModelParams(alpha=alpha, c=c, delta=delta)
    return abs(tunneling_probabilities(narrow).p_lu - tunneling_probabilities(wide).p_lu)


@pytest.mark.parametrize("delta", [0.0, 0.5])
def test_window_widening_adiabatic(delta):
    assert _widening_gap(0.01, 0.0, delta) <= 2 * DEFAULT_TOL


@pytest.mark.xfail(strict=True, reason="finite-window tail exceeds the integrator tolerance")
@pytest.mark.parametrize("alpha, delta", [(1.0, 0.0), (0.01, 3.0)])
def test_window_widening_nonadiabatic(alpha, delta):
    assert _widening_gap(alpha, 0.0, delta) <= 2 * DEFAULT_TOL


def test_window_widening_physical_scale():
    # what the finite window actually costs: well below the 1% LZ tolerance
    assert _widening_gap(1.0, 0.0, 0.0) <= 1e-3
