import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from multiphase.fisher import fi_matrix, qfi_matrix
from multiphase.hilbert import FockState, apply_phases
from multiphase.measure import (
    Povm,
    SupportError,
    born_fi_matrix,
    born_model,
    born_probabilities,
    find_saturation_point,
    gram_schmidt,
    optimal_basis,
    optimal_povm,
    printed_pattern,
    probe_adapted_povm,
    sample_counts,
    sample_outcomes,
    subspace_coefficients,
)
from multiphase.probes import GeneralizedNoonSpec, make_generalized_noon, make_noon, optimal_alpha_sq


def optimal_probe(d, N=2):
    return make_generalized_noon(GeneralizedNoonSpec(d, N, optimal_alpha_sq(d)))


def test_optimal_povm_d1():
    basis = optimal_basis(1)
    np.testing.assert_allclose(basis, np.array([[1, 1], [1, -1]]) / math.sqrt(2), atol=1e-15)


def test_optimal_povm_d2_rows():
    basis = optimal_basis(2)
    np.testing.assert_allclose(basis[1], [1 / math.sqrt(2), -1 / math.sqrt(2), 0], atol=1e-15)
    np.testing.assert_allclose(basis[2], np.array([1, 1, -2]) / math.sqrt(6), atol=1e-15)


@pytest.mark.parametrize("d", range(1, 7))
def test_rows_match_closed_form(d):
    basis = optimal_basis(d)
    for n in range(1, d + 1):
        row = np.zeros(d + 1)
        row[:n] = 1.0
        row[n] = -n
        np.testing.assert_allclose(basis[n], row / math.sqrt(n * (n + 1)), atol=1e-12)


def test_printed_pattern_is_subnormalized():
    seeds = printed_pattern(3)
    norms = np.sum(seeds**2, axis=1)
    assert norms[1] == pytest.approx(1.0)
    assert norms[2] == pytest.approx(2 / 3)
    np.testing.assert_allclose(seeds[:2], optimal_basis(3)[:2], atol=1e-15)


@pytest.mark.parametrize("d", range(1, 7))
def test_basis_agrees_with_gram_schmidt_oracle(d):
    # Gram-Schmidt over prefix indicator vectors, longest (uniform) first
    D = d + 1
    seeds = np.array([np.r_[np.ones(k), np.zeros(D - k)] for k in range(D, 0, -1)])
    gs = gram_schmidt(seeds).real
    np.testing.assert_allclose(gs, optimal_basis(d)[[0, *range(d, 0, -1)]], atol=1e-12)


@pytest.mark.parametrize("d", range(1, 7))
def test_optimal_povm_orthogonal_projectors(d):
    povm = optimal_povm(d)
    for i, a in enumerate(povm.elements):
        for j, b in enumerate(povm.elements):
            np.testing.assert_allclose(a @ b, a if i == j else 0 * a, atol=1e-12)
    assert povm.completeness_error() < 1e-12
    assert len(povm) == d + 1


def test_povm_validation():
    with pytest.raises(ValueError):
        Povm((np.eye(2), np.eye(2)))
    with pytest.raises(ValueError):
        Povm((np.array([[1.0, 1.0], [0.0, 0.0]]), np.array([[0.0, -1.0], [0.0, 1.0]])))
    with pytest.raises(ValueError):
        Povm((np.diag([1.5, 0.5]), np.diag([-0.5, 0.5])))


def test_gram_schmidt_rejects_dependent_rows():
    with pytest.raises(ValueError):
        gram_schmidt(np.array([[1.0, 0.0], [2.0, 0.0]]))


def test_born_eigenstate():
    psi = FockState({(1, 0, 0): 1 / math.sqrt(3), (0, 1, 0): 1 / math.sqrt(3), (0, 0, 1): 1 / math.sqrt(3)})
    np.testing.assert_allclose(born_probabilities(psi, optimal_povm(2), [0.0, 0.0]), [1, 0, 0], atol=1e-12)


def test_born_matches_dense_oracle(rng):
    state = optimal_probe(2)
    povm = optimal_povm(2)
    phi = rng.uniform(-math.pi, math.pi, 2)
    _, c = subspace_coefficients(state)
    psi = c * np.exp(1j * 2 * np.concatenate([[0.0], phi]))
    expected = [np.real(psi.conj() @ e @ psi) for e in povm.elements]
    np.testing.assert_allclose(born_probabilities(state, povm, phi), expected, atol=1e-12)
    np.testing.assert_allclose(born_model(state, povm)(phi), expected, atol=1e-12)


def test_born_rejects_out_of_subspace():
    s = FockState({(1, 1, 0): 0.6, (2, 0, 0): 0.8})
    with pytest.raises(SupportError):
        born_probabilities(s, optimal_povm(2))
    with pytest.raises(SupportError):
        born_probabilities(make_noon(2), optimal_povm(3))


def test_born_model_with_controls():
    state = optimal_probe(2)
    m = born_model(state, optimal_povm(2), with_controls=True)
    plain = born_model(state, optimal_povm(2))
    np.testing.assert_allclose(m([0.1, 0.2], [0.3, -0.1]), plain([0.4, 0.1]), atol=1e-14)


@pytest.mark.parametrize("d", range(1, 7))
def test_fi_below_qfi_at_random_phases(d):
    state = optimal_probe(d)
    q = qfi_matrix(state).matrix
    rng = np.random.default_rng(d)
    for povm in (optimal_povm(d), probe_adapted_povm(state)):
        for phi in rng.uniform(-math.pi, math.pi, (100, d)):
            fi = born_fi_matrix(state, povm, phi).matrix
            assert np.linalg.eigvalsh(q - fi)[0] >= -1e-8


@pytest.mark.parametrize("d", range(1, 7))
def test_born_fi_matches_finite_differences(d):
    state = optimal_probe(d)
    povm = optimal_povm(d)
    phi = np.random.default_rng(d).uniform(-1, 1, d)
    np.testing.assert_allclose(fi_matrix(born_model(state, povm), phi, 1e-5).matrix,
                               born_fi_matrix(state, povm, phi).matrix, atol=1e-7)


@pytest.mark.parametrize("d", range(1, 7))
def test_probe_adapted_povm_saturates(d):
    state = optimal_probe(d)
    point, fi = find_saturation_point(state, probe_adapted_povm(state))
    np.testing.assert_allclose(fi.matrix, qfi_matrix(state).matrix, atol=1e-6)
    assert np.linalg.norm(point) < 1e-3


def test_phi_zero_is_checked_first_and_rejected():
    state = optimal_probe(2)
    fi0 = born_fi_matrix(state, probe_adapted_povm(state), np.zeros(2))
    assert np.abs(fi0.matrix - qfi_matrix(state).matrix).max() > 1e-3


def test_uniform_povm_does_not_saturate_optimal_probe():
    state = optimal_probe(3)
    assert find_saturation_point(state, optimal_povm(3)) is None


def test_probe_adapted_equals_optimal_for_uniform_probe():
    d = 3
    state = make_generalized_noon(GeneralizedNoonSpec(d, 2, d / (d + 1)))
    for a, b in zip(probe_adapted_povm(state).elements, optimal_povm(d).elements):
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_sampling_deterministic_distribution():
    psi = make_generalized_noon(GeneralizedNoonSpec(2, 1, 2 / 3))
    out = sample_outcomes(psi, optimal_povm(2), [0.0, 0.0], 50, seed=1)
    assert all(s.outcome_index == 0 for s in out)
    assert out[3].seed_record == "pcg64:1:3"


def test_sampling_binomial():
    counts = sample_counts([0.5, 0.5], 1_000_000, seed=2)
    np.testing.assert_allclose(counts / 1e6, [0.5, 0.5], atol=0.002)


def test_sampling_reproducible():
    state = optimal_probe(2)
    a = sample_outcomes(state, optimal_povm(2), [0.3, -0.2], 100, seed=9)
    b = sample_outcomes(state, optimal_povm(2), [0.3, -0.2], 100, seed=9)
    assert [s.outcome_index for s in a] == [s.outcome_index for s in b]
    with pytest.raises(ValueError):
        sample_outcomes(state, optimal_povm(2), [0.3, -0.2], 0, seed=9)


@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_born_probabilities_normalized(d, seed):
    rng = np.random.default_rng(seed)
    state = optimal_probe(d)
    p = born_probabilities(state, optimal_povm(d), rng.uniform(-math.pi, math.pi, d))
    assert np.all(p >= 0) and abs(p.sum() - 1) < 1e-10
