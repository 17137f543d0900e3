import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from multiphase.fisher import (
    CostMatrix,
    FrequencyTable,
    InfoMatrix,
    ModelError,
    ProbabilityModel,
    ScalingFamily,
    binary_model,
    constant_model,
    empirical_fi,
    fi_matrix,
    inverse_bound,
    qfi_matrix,
    sample_frequency_table,
    scaling_table,
    weighted_bound,
)
from multiphase.hilbert import DimensionError, FockState, apply_phases, covariance_matrix
from multiphase.measure import born_model, find_saturation_point, probe_adapted_povm
from multiphase.probes import GeneralizedNoonSpec, make_generalized_noon, make_noon, optimal_alpha_sq

from conftest import fock_states, phases


def test_info_matrix_validation():
    with pytest.raises(ValueError):
        InfoMatrix(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        InfoMatrix(np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        CostMatrix(np.diag([1.0, -0.1]))


def test_qfi_examples():
    np.testing.assert_allclose(qfi_matrix(make_noon(2)).matrix, [[4.0]])
    q = qfi_matrix(make_generalized_noon(GeneralizedNoonSpec(3, 2, 0.75))).matrix
    np.testing.assert_allclose(q, 4 * np.eye(3) - 1, atol=1e-12)
    product = FockState.fock((1, 2, 3))
    q = qfi_matrix(product).matrix
    np.testing.assert_allclose(q, np.diag(np.diag(q)), atol=1e-15)


def test_qfi_rejects_single_mode():
    with pytest.raises(DimensionError):
        qfi_matrix(FockState.fock((2,)))


@given(fock_states())
def test_qfi_equals_covariance_oracle(state):
    np.testing.assert_allclose(qfi_matrix(state).matrix, 4 * covariance_matrix(state), atol=1e-10)


@given(fock_states(), st.data())
def test_qfi_phase_independent(state, data):
    phi = np.array([data.draw(phases) for _ in range(state.mode_count - 1)])
    np.testing.assert_allclose(qfi_matrix(apply_phases(state, phi)).matrix, qfi_matrix(state).matrix, atol=1e-10)


def test_fi_constant_model_is_zero():
    np.testing.assert_allclose(fi_matrix(constant_model([0.2, 0.8]), [0.3]).matrix, [[0.0]], atol=1e-12)


@pytest.mark.parametrize("phi", [0.3, 1.0, 2.0, -2.5])
def test_fi_binary_model_is_one(phi):
    assert fi_matrix(binary_model(), [phi]).matrix[0, 0] == pytest.approx(1.0, abs=1e-7)


def test_fi_richardson_convergence():
    m = binary_model()
    h = 0.05
    f1, f2, f4 = (fi_matrix(m, [0.7], s).matrix[0, 0] for s in (h, h / 2, h / 4))
    # errors shrink by roughly 4x when the step halves
    assert abs(f2 - f4) < 0.3 * abs(f1 - f2)
    assert abs(f1 - 1.0) < 1e-3


def test_fi_rejects_bad_step():
    with pytest.raises(ValueError):
        fi_matrix(binary_model(), [0.1], step=0.2)


def test_fi_rejects_unnormalized_model():
    bad = ProbabilityModel(2, 1, lambda p, c: np.stack([np.full(p.shape[:-1], 0.7)] * 2, axis=-1))
    with pytest.raises(ModelError):
        fi_matrix(bad, [0.1])


def test_fi_flags_divergence_at_zero_probability():
    # p(1) = sin^2 vanishes at 0 but is flat there: no flag; a linear zero is flagged
    assert not fi_matrix(binary_model(), [0.0]).possibly_divergent
    ramp = lambda p, c: np.clip(p[..., 0], 0.0, None) / 4
    kink = ProbabilityModel(2, 1, lambda p, c: np.stack([1 - ramp(p, c), ramp(p, c)], axis=-1))
    assert fi_matrix(kink, [0.0]).possibly_divergent


def test_fi_saturates_qfi_at_saturation_point():
    state = make_generalized_noon(GeneralizedNoonSpec(2, 2, optimal_alpha_sq(2)))
    povm = probe_adapted_povm(state)
    point, _ = find_saturation_point(state, povm)
    fi = fi_matrix(born_model(state, povm), point, step=1e-6)
    np.testing.assert_allclose(fi.matrix, qfi_matrix(state).matrix, atol=1e-6)


def test_inverse_bound_examples():
    np.testing.assert_allclose(inverse_bound(InfoMatrix(np.eye(3))).matrix, np.eye(3))
    np.testing.assert_allclose(inverse_bound(InfoMatrix(np.diag([4.0, 16.0]))).matrix, np.diag([0.25, 0.0625]))
    q = qfi_matrix(make_generalized_noon(GeneralizedNoonSpec(3, 2, 0.75)))
    np.testing.assert_allclose(inverse_bound(q).matrix, 0.25 * np.eye(3) + 0.25 * np.ones((3, 3)), atol=1e-12)


def test_inverse_bound_flags_singular():
    inv = inverse_bound(InfoMatrix(np.diag([1.0, 0.0])))
    assert inv.singular and "singular" in inv.note
    np.testing.assert_allclose(inv.matrix, np.diag([1.0, 0.0]))


@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_inverse_bound_two_sided(seed, d):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(d, d))
    m = a @ a.T + 0.1 * np.eye(d)
    info = InfoMatrix(m)
    inv = inverse_bound(info).matrix
    np.testing.assert_allclose(m @ inv @ m, m, atol=1e-9 * max(1.0, np.abs(m).max()))


def test_weighted_bound_examples():
    opt = make_generalized_noon(GeneralizedNoonSpec(3, 2, optimal_alpha_sq(3)))
    assert weighted_bound(qfi_matrix(opt)) == pytest.approx(1.3995, abs=1e-4)
    uni = make_generalized_noon(GeneralizedNoonSpec(3, 2, 0.75))
    assert weighted_bound(qfi_matrix(uni)) == pytest.approx(1.5, abs=1e-10)
    assert weighted_bound(qfi_matrix(uni), CostMatrix(np.zeros((3, 3)))) == 0.0
    with pytest.raises(DimensionError):
        weighted_bound(qfi_matrix(uni), CostMatrix.identity(2))


def test_scaling_table_examples():
    assert scaling_table(ScalingFamily.COHERENT_EQUAL, 2, 1) == pytest.approx(1.0)
    assert scaling_table("SeparateNoon", 2, 2) == pytest.approx(0.5)
    assert scaling_table("GeneralizedNoonOptimal", 2, 2) == pytest.approx(0.25)
    assert scaling_table("GeneralizedNoonOptimal", 2, 2) / scaling_table("SeparateNoon", 2, 2) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        scaling_table("Squeezed", 2, 2)


def test_empirical_fi_plug_in_consistency():
    m = binary_model()
    center, step = np.array([math.pi / 3]), 0.05
    table = FrequencyTable(center, step, m(FrequencyTable(center, step, np.zeros((1, 2))).grid_points()))
    np.testing.assert_allclose(empirical_fi(table).matrix, fi_matrix(m, center, step).matrix, atol=1e-10)


def test_empirical_fi_sampled_binary(rng):
    table = sample_frequency_table(binary_model(), [math.pi / 3], 0.05, 1_000_000, rng)
    assert empirical_fi(table, samples_per_setting=1_000_000).matrix[0, 0] == pytest.approx(1.0, rel=0.05)


def test_empirical_fi_constant_model(rng):
    # Pure noise gives F ~ chi2_1 / (2 n step^2) for two outcomes; the 5 K / n band needs a wide step.
    n, K = 10_000, 2
    table = sample_frequency_table(constant_model([0.3, 0.7]), [0.2], 0.5, n, rng)
    assert abs(empirical_fi(table).matrix[0, 0]) < 5 / n * K


def test_empirical_fi_noise_floor_matches_theory():
    rng = np.random.default_rng(3)
    n, step, K = 10_000, 0.05, 3
    model = constant_model([0.2, 0.3, 0.5])
    values = [empirical_fi(sample_frequency_table(model, [0.0], step, n, rng)).matrix[0, 0] for _ in range(400)]
    expected = (K - 1) / (2 * n * step**2)
    assert np.mean(values) == pytest.approx(expected, rel=0.15)


def test_empirical_fi_missing_grid_point():
    freq = {(0.0,): [5, 5], (0.05,): [6, 4]}
    with pytest.raises(KeyError):
        FrequencyTable.from_mapping([0.0], 0.05, freq)
    freq[(-0.05,)] = [4, 6]
    table = FrequencyTable.from_mapping([0.0], 0.05, freq)
    assert table.counts.shape == (3, 2)
