import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from multiphase.hilbert import (
    DimensionError,
    FockState,
    NormalizationError,
    OccupationVector,
    apply_phases,
    covariance_matrix,
    inner_product,
    number_covariance,
    number_expectation,
    phase_vector,
    wrap_phase,
)
from multiphase.probes import GeneralizedNoonSpec, make_generalized_noon, make_noon

from conftest import fock_states, phases


def test_occupation_vector_total():
    occ = OccupationVector((2, 0, 1))
    assert occ.total == 3 == sum(occ)
    with pytest.raises(ValueError):
        OccupationVector((1, -1))


def test_construction_renormalizes_small_drift():
    s = FockState({(1, 0): math.sqrt(0.5) * (1 + 1e-11), (0, 1): math.sqrt(0.5)})
    assert abs(s.norm() - 1.0) < 1e-14


def test_construction_rejects_large_drift():
    with pytest.raises(NormalizationError):
        FockState({(1, 0): 1.0, (0, 1): 0.1})


def test_construction_rejects_mixed_mode_counts():
    with pytest.raises(DimensionError):
        FockState({(1, 0): 0.6, (0, 0, 1): 0.8})


def test_tiny_amplitudes_are_pruned():
    s = FockState({(1, 0): 1.0, (0, 1): 1e-15})
    assert s.support() == [(1, 0)]


def test_wrap_phase_range():
    assert wrap_phase(math.pi) == pytest.approx(-math.pi)
    assert wrap_phase(-math.pi) == pytest.approx(-math.pi)
    np.testing.assert_allclose(phase_vector([3 * math.pi, 0.5]), [-math.pi, 0.5])


def test_apply_zero_phases_is_identity():
    s = make_noon(3)
    assert apply_phases(s, [0.0]).allclose(s)


def test_eigenstate_phase():
    s = FockState.fock((0, 2))
    assert apply_phases(s, [math.pi / 2]).amplitude((0, 2)) == pytest.approx(-1.0)


def test_noon_phase():
    theta = 0.37
    out = apply_phases(make_noon(2), [theta])
    assert out.amplitude((2, 0)) == pytest.approx(1 / math.sqrt(2))
    assert out.amplitude((0, 2)) == pytest.approx(cmath.exp(2j * theta) / math.sqrt(2))


def test_apply_phases_dimension_error():
    with pytest.raises(DimensionError):
        apply_phases(make_noon(2), [0.1, 0.2])


def test_number_expectation_examples():
    assert number_expectation(FockState.fock((2, 0)), 0) == 2
    assert number_expectation(make_noon(2), 0) == pytest.approx(1.0)
    s = make_generalized_noon(GeneralizedNoonSpec(3, 2, 0.75))
    assert number_expectation(s, 2) == pytest.approx(0.75 * 2 / 3)


def test_number_covariance_examples():
    assert number_covariance(FockState.fock((1, 3)), 0, 1) == 0
    assert number_covariance(FockState.fock((1, 3)), 1, 1) == 0
    for N in (1, 2, 3):
        assert 4 * number_covariance(make_noon(N), 1, 1) == pytest.approx(N**2)
    d, N, a = 3, 2, 0.75
    s = make_generalized_noon(GeneralizedNoonSpec(d, N, a))
    assert number_covariance(s, 1, 2) == pytest.approx(-(4 * N**2 * a**2 / d**2) / 4)


def test_inner_product_examples():
    assert inner_product(FockState.fock((2, 0)), FockState.fock((0, 2))) == 0
    noon = make_noon(2)
    theta = 0.9
    assert inner_product(noon, apply_phases(noon, [theta])) == pytest.approx((1 + cmath.exp(2j * theta)) / 2)
    with pytest.raises(DimensionError):
        inner_product(noon, FockState.fock((1, 0, 0)))


@given(fock_states())
def test_inner_product_self_is_one(state):
    assert inner_product(state, state) == pytest.approx(1.0, abs=1e-12)


@given(fock_states(), st.data())
def test_apply_phases_is_unitary(a, data):
    b = data.draw(fock_states(min_modes=a.mode_count, max_modes=a.mode_count))
    phi = np.array([data.draw(phases) for _ in range(a.mode_count - 1)])
    ua, ub = apply_phases(a, phi), apply_phases(b, phi)
    assert abs(ua.norm() - 1.0) < 1e-12
    assert abs(inner_product(ua, ub) - inner_product(a, b)) < 1e-12


@given(fock_states(), st.data())
def test_apply_phases_composes(state, data):
    d = state.mode_count - 1
    p1 = np.array([data.draw(phases) for _ in range(d)])
    p2 = np.array([data.draw(phases) for _ in range(d)])
    twice = apply_phases(apply_phases(state, p1), p2)
    once = apply_phases(state, wrap_phase(p1 + p2))
    assert twice.allclose(once, atol=1e-11)


@given(fock_states())
def test_covariance_matrix_symmetric_psd(state):
    cov = covariance_matrix(state)
    np.testing.assert_allclose(cov, cov.T, atol=1e-12)
    assert np.linalg.eigvalsh(cov)[0] >= -1e-10


def test_covariance_psd_on_100_random_states():
    from multiphase.hilbert import random_state

    rng = np.random.default_rng(7)
    for _ in range(100):
        s = random_state(rng, int(rng.integers(2, 6)), 4)
        assert np.linalg.eigvalsh(covariance_matrix(s))[0] >= -1e-10
