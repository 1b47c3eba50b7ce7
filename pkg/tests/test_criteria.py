import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqslab.criteria import (
    cj_asymptote,
    delta_phi_curve,
    e_hz,
    e_ph,
    eta_ph,
    report,
    xi_s,
    xi_s_ph,
)
from pqslab.ensemble import (
    Ensemble,
    attach,
    coherent_product_ensemble,
    delta_distribution,
    moments,
    poisson_distribution,
    product_state_ensemble,
)
from pqslab.errors import FixedNumberRequiredError, UndefinedCriterionError
from pqslab.sectors import HamiltonianParams
from pqslab.states import SectorState, ground_state, optimal_pqs_state, phase_eigenstate, su2_coherent, su2_coherent_x

from oracles import coherent_amplitudes, fock_moments


def fixed(state):
    return moments(attach(lambda _: state, delta_distribution(state.n)))


@pytest.mark.parametrize("state", [su2_coherent_x(30), phase_eigenstate(12, 0.3),
                                   ground_state(40, HamiltonianParams.from_ratio(0.5))])
def test_fixed_number_reductions(state):
    m = fixed(state)
    assert e_ph(m) == pytest.approx(e_hz(m), rel=1e-12)
    np.testing.assert_allclose(xi_s_ph(m), xi_s(m), rtol=1e-12)


def test_coherent_x_values():
    m = fixed(su2_coherent_x(100))
    assert e_hz(m) == pytest.approx(0.5, abs=1e-12)
    assert xi_s(m)[0] == pytest.approx(1, abs=1e-12)
    assert xi_s(m)[1] == pytest.approx(1, abs=1e-12)
    assert eta_ph(m) == pytest.approx(1, abs=1e-12)


def test_xi_s_refuses_fluctuating_number():
    m = moments(coherent_product_ensemble(20, 20))
    with pytest.raises(FixedNumberRequiredError):
        xi_s(m)
    assert report(m).xi_s_y is None


def test_undefined_criteria():
    vac = moments(Ensemble(((1.0, SectorState(0, [1.0])),)))
    with pytest.raises(UndefinedCriterionError):
        e_hz(vac)
    with pytest.raises(UndefinedCriterionError):
        e_ph(vac)
    m = fixed(su2_coherent(10, 0.0))  # all along +z, no x mean
    with pytest.raises(UndefinedCriterionError):
        xi_s_ph(m)
    with pytest.raises(UndefinedCriterionError):
        delta_phi_curve(m, [1.0])


def test_delta_phi_coherent_x_is_shot_noise():
    m = fixed(su2_coherent_x(64))
    curve = delta_phi_curve(m, np.linspace(0.1, 3.0, 9))
    np.testing.assert_allclose(curve.delta_phi, 1 / 8, rtol=1e-12)


def test_delta_phi_at_half_pi_is_xi_y():
    m = moments(attach(lambda n: ground_state(n, HamiltonianParams.from_ratio(0.3)), poisson_distribution(40)))
    curve = delta_phi_curve(m, [math.pi / 2])
    assert curve.delta_phi[0] == pytest.approx(xi_s_ph(m)[0] / math.sqrt(m.mean_n), rel=1e-12)


def test_eta_is_worst_case_times_root_n():
    m = moments(attach(lambda n: ground_state(n, HamiltonianParams.from_ratio(2.0)), poisson_distribution(60)))
    curve = delta_phi_curve(m, [math.pi / 4])
    assert eta_ph(m) ** 2 == pytest.approx(m.mean_n * curve.worst_case ** 2, rel=1e-12)


def test_exact_covariance_agrees_on_symmetric_states():
    m = fixed(ground_state(50, HamiltonianParams.from_ratio(1.0)))
    offs = np.linspace(0.2, 2.9, 11)
    a = delta_phi_curve(m, offs).delta_phi
    b = delta_phi_curve(m, offs, exact_covariance=True).delta_phi
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_exact_covariance_differs_when_tilted():
    m = fixed(su2_coherent_x(20).rotated_z(0.2))
    a = delta_phi_curve(m, [math.pi / 4]).delta_phi[0]
    b = delta_phi_curve(m, [math.pi / 4], exact_covariance=True).delta_phi[0]
    assert abs(a - b) > 1e-4


def test_divergence_markers():
    m = fixed(su2_coherent_x(10))
    curve = delta_phi_curve(m, [0.0, math.pi / 2, math.pi, 2 * math.pi])
    assert curve.divergent.tolist() == [True, False, True, True]
    assert np.isnan(curve.delta_phi[[0, 2, 3]]).all()
    assert curve.rows()[1][1] == pytest.approx(1 / math.sqrt(10))


def test_cj_asymptote():
    assert cj_asymptote(4) == pytest.approx(1.5)
    assert cj_asymptote(13.5) == pytest.approx(27 / 8)
    with pytest.raises(ValueError):
        cj_asymptote(0)


def test_coherent_product_e_ph_matches_fock_oracle():
    cutoff = 60
    psi = np.kron(coherent_amplitudes(math.sqrt(8), cutoff), coherent_amplitudes(math.sqrt(8), cutoff))
    ref = fock_moments(psi, cutoff)
    ref_eph = (ref["var_jx_t"] + ref["var_jy_t"]) / (ref["mean_n_plus"] / 2)
    m = moments(coherent_product_ensemble(8, 8))
    assert e_ph(m) == pytest.approx(ref_eph, abs=1e-9)
    assert e_hz(m) == pytest.approx(1, abs=1e-9)


def test_repulsive_ground_state_is_number_squeezed():
    r = report(fixed(ground_state(100, HamiltonianParams.from_ratio(0.5))))
    assert r.xi_s_z < 1 and r.entangled_particles
    assert not r.entangled_modes


def test_optimal_pqs_beats_shot_noise_at_all_angles():
    r = report(fixed(optimal_pqs_state(400).state))
    assert r.eta_ph < 1 and r.subshot_all_angles and r.entangled_modes


def test_phase_state_is_not_subshot():
    assert eta_ph(fixed(phase_eigenstate(100, 0))) > 2


def test_flags_do_not_fire_on_boundary():
    r = report(fixed(su2_coherent_x(37)))
    assert not r.entangled_particles and not r.subshot_all_angles


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 120), st.floats(0.05, math.pi - 0.05), st.floats(-1.4, 1.4))
def test_symmetric_product_states_are_not_squeezed(n, polar, azimuth):
    m = fixed(su2_coherent(n, polar, azimuth))
    assert min(xi_s_ph(m)) >= 1 - 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mode_separable_products_satisfy_hz(seed):
    rng = np.random.default_rng(seed)
    ka, kb = rng.integers(1, 7, size=2)
    a = rng.normal(size=ka) + 1j * rng.normal(size=ka)
    b = rng.normal(size=kb) + 1j * rng.normal(size=kb)
    if ka == kb == 1:
        a = np.array([0.6, 0.8])
    m = moments(product_state_ensemble(a, b))
    assert e_hz(m) >= 1 - 1e-9
