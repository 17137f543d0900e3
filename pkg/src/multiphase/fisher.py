"""Fisher information matrices, quantum Fisher information and Cramér-Rao bounds."""

from __future__ import annotations

import enum
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

import numpy as np

from .hilbert import DimensionError, FockState

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10
NORMALIZATION_TOL = 1e-10
ZERO_PROB = 1e-12
DIVERGENCE_SLOPE = 1e-6
PINV_RCOND = 1e-10
DEFAULT_STEP = 1e-4
DEFAULT_EMPIRICAL_STEP = 0.05

# Ratio between the best attainable weighted bound and Tr(R Q^-1) for any R.
ATTAINABILITY_FACTOR_RANGE = (1.0, 2.0)


class ModelError(ValueError):
    """Probability model returned an invalid distribution."""


def _check_psd(name: str, m: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m), initial=0.0)))
    if np.max(np.abs(m - m.T), initial=0.0) > SYMMETRY_TOL * scale:
        raise ValueError(f"{name} is not symmetric")
    m = 0.5 * (m + m.T)
    if m.size and np.linalg.eigvalsh(m)[0] < -tol * scale:
        raise ValueError(f"{name} is not positive semidefinite (min eigenvalue {np.linalg.eigvalsh(m)[0]:.3e})")
    return m


@dataclass(frozen=True)
class InfoMatrix:
    """Symmetric PSD information matrix (FI, QFI or an inverse bound).

    ``singular`` marks matrices whose bounds only hold on the supported
    subspace; ``possibly_divergent`` marks FI matrices evaluated where a
    zero-probability outcome still has a nonzero slope.
    """

    matrix: np.ndarray
    singular: bool = False
    possibly_divergent: bool = False
    note: str = ""

    def __post_init__(self):
        m = _check_psd("information matrix", self.matrix)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.matrix))


@dataclass(frozen=True)
class CostMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = _check_psd("cost matrix", self.matrix)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, d: int) -> CostMatrix:
        return cls(np.eye(d))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ProbabilityModel:
    """Outcome distribution p(n | phases, controls).

    ``func`` must broadcast: phases of shape ``(..., phase_dim)`` and controls
    of shape ``(..., control_dim)`` give probabilities ``(..., outcome_count)``.
    Calling the model validates normalization.
    """

    outcome_count: int
    phase_dim: int
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    control_dim: int = 0
    labels: tuple = field(default=())

    def __call__(self, phases, controls=None) -> np.ndarray:
        phases = np.asarray(phases, dtype=float)
        if phases.shape[-1:] != (self.phase_dim,):
            raise DimensionError(f"model expects {self.phase_dim} phases, got shape {phases.shape}")
        if controls is None:
            controls = np.zeros(self.control_dim)
        controls = np.asarray(controls, dtype=float)
        if controls.shape[-1:] != (self.control_dim,):
            raise DimensionError(f"model expects {self.control_dim} controls, got shape {controls.shape}")
        p = np.asarray(self.func(phases, controls), dtype=float)
        if p.shape[-1] != self.outcome_count:
            raise ModelError(f"model returned {p.shape[-1]} outcomes, expected {self.outcome_count}")
        if np.any(p < -ZERO_PROB) or np.any(np.abs(p.sum(axis=-1) - 1.0) > NORMALIZATION_TOL):
            raise ModelError("model probabilities are not normalized")
        return np.clip(p, 0.0, None)


def qfi_matrix(state: FockState, probing_modes=None) -> InfoMatrix:
    """QFI matrix of a pure state under exp(i sum phi_j N_j).

    Uses the derivative form 4 Re(<d_i psi|d_j psi> - <psi|d_i psi><d_j psi|psi>)
    with d_j psi = i N_j psi. Independent of the phase values.
    """
    if probing_modes is None:
        if state.mode_count < 2:
            raise DimensionError("single-mode state has no probing modes relative to the reference")
        probing_modes = range(1, state.mode_count)
    modes = list(probing_modes)
    if not modes:
        raise DimensionError("no probing modes")
    occ = state.occupation_array()[:, modes]
    amps = state.amplitude_array()
    deriv = 1j * occ * amps[:, None]
    gram = deriv.conj().T @ deriv
    overlap = amps.conj() @ deriv
    q = 4.0 * np.real(gram - np.outer(overlap, overlap.conj()))
    return InfoMatrix(0.5 * (q + q.T))


def fi_matrix(model: ProbabilityModel, phases, step: float = DEFAULT_STEP, controls=None) -> InfoMatrix:
    """Classical FI matrix by central finite differences on the log-likelihood gradient."""
    if not 0.0 < step <= 0.1:
        raise ValueError(f"step must lie in (0, 0.1], got {step}")
    phases = np.asarray(phases, dtype=float)
    d = model.phase_dim
    shifts = np.concatenate([np.eye(d), -np.eye(d)]) * step
    probs = model(np.vstack([phases, phases + shifts]), controls)
    p0 = probs[0]
    grad = (probs[1 : d + 1] - probs[d + 1 :]) / (2 * step)
    keep = p0 >= ZERO_PROB
    divergent = bool(np.any(np.abs(grad[:, ~keep]) > DIVERGENCE_SLOPE))
    g = grad[:, keep]
    f = (g / p0[keep]) @ g.T
    return InfoMatrix(0.5 * (f + f.T), possibly_divergent=divergent,
                      note="FI possibly divergent at this phase point" if divergent else "")


def inverse_bound(info: InfoMatrix) -> InfoMatrix:
    """Moore-Penrose pseudoinverse, flagged when ``info`` is numerically singular."""
    m = info.matrix
    if m.size == 0:
        return InfoMatrix(m)
    evals = np.linalg.eigvalsh(m)
    top = max(abs(evals[-1]), 0.0)
    singular = top == 0.0 or evals[0] < PINV_RCOND * top
    inv = np.linalg.pinv(m, rcond=PINV_RCOND, hermitian=True)
    note = "singular - bounds apply only on the supported subspace" if singular else ""
    return InfoMatrix(0.5 * (inv + inv.T), singular=singular, note=note)


def weighted_bound(info: InfoMatrix, cost: CostMatrix | None = None) -> float:
    """Tr(R pinv(info)); R defaults to the identity."""
    if cost is None:
        cost = CostMatrix.identity(info.dim)
    if cost.dim != info.dim:
        raise DimensionError(f"cost is {cost.dim}x{cost.dim} but information matrix is {info.dim}x{info.dim}")
    return max(0.0, float(np.trace(cost.matrix @ inverse_bound(info).matrix)))


class ScalingFamily(str, enum.Enum):
    COHERENT_EQUAL = "CoherentEqual"
    SEPARATE_NOON = "SeparateNoon"
    GENERALIZED_NOON_OPTIMAL = "GeneralizedNoonOptimal"


def scaling_table(family, d: int, energy: float) -> float:
    """Closed-form lower bound on Tr(V) for ``d`` phases and probing energy ``energy``."""
    family = ScalingFamily(family)
    if d < 1 or energy <= 0:
        raise ValueError("need d >= 1 and energy > 0")
    if family is ScalingFamily.COHERENT_EQUAL:
        return d**2 / (4 * energy)
    if family is ScalingFamily.SEPARATE_NOON:
        return d**3 / (4 * energy**2)
    return d**2 / (4 * energy**2)


@dataclass(frozen=True)
class FrequencyTable:
    """Outcome counts at a center phase and its +-step neighbours along each axis.

    ``counts`` rows are ordered: center, +step*e_1..+step*e_d, -step*e_1..-step*e_d.
    Counts may be real (exact probabilities give the plug-in limit).
    """

    center: np.ndarray
    step: float
    counts: np.ndarray

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        counts = np.asarray(self.counts, dtype=float)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_mapping(cls, center, step: float, frequencies: Mapping) -> FrequencyTable:
        """Assemble from ``{phase tuple: counts}``; missing grid points are rejected."""
        center = np.atleast_1d(np.asarray(center, dtype=float))
        d = center.size
        keys = [np.asarray(k, dtype=float) for k in frequencies]
        values = list(frequencies.values())
        rows = []
        for point in [center, *(center + step * e for e in np.eye(d)), *(center - step * e for e in np.eye(d))]:
            match = [i for i, k in enumerate(keys) if k.shape == point.shape and np.allclose(k, point, atol=1e-12, rtol=0)]
            if not match:
                raise KeyError(f"frequency table has no entry for phase point {tuple(point)}")
            rows.append(np.asarray(values[match[0]], dtype=float))
        return cls(center, step, np.array(rows))

    def grid_points(self) -> np.ndarray:
        d = self.center.size
        return np.vstack([self.center, self.center + self.step * np.eye(d), self.center - self.step * np.eye(d)])


def sample_frequency_table(model: ProbabilityModel, center, step: float, samples: int,
                           rng: np.random.Generator, controls=None) -> FrequencyTable:
    center = np.atleast_1d(np.asarray(center, dtype=float))
    table = FrequencyTable(center, step, np.zeros((1, model.outcome_count)))
    probs = model(table.grid_points(), controls)
    counts = np.array([rng.multinomial(samples, p) for p in probs])
    return FrequencyTable(center, step, counts)


def empirical_fi(table: FrequencyTable, step: float | None = None, samples_per_setting: int | None = None) -> InfoMatrix:
    """Plug-in FI matrix from observed outcome frequencies."""
    step = table.step if step is None else step
    if not np.isclose(step, table.step, rtol=0, atol=1e-15):
        raise ValueError(f"step {step} does not match the table grid step {table.step}")
    d = table.center.size
    if table.counts.shape[0] != 2 * d + 1:
        raise KeyError(f"frequency table needs {2 * d + 1} grid rows, has {table.counts.shape[0]}")
    totals = table.counts.sum(axis=1)
    if np.any(totals <= 0):
        raise ValueError("every setting needs at least one recorded count")
    if samples_per_setting is not None and not np.allclose(totals, samples_per_setting):
        raise ValueError("row totals do not match samples_per_setting")
    freqs = table.counts / totals[:, None]
    grad = (freqs[1 : d + 1] - freqs[d + 1 :]) / (2 * step)
    keep = table.counts[0] > 0
    g = grad[:, keep]
    f = (g / freqs[0, keep]) @ g.T
    return InfoMatrix(0.5 * (f + f.T))


def binary_model(with_control: bool = False) -> ProbabilityModel:
    """Single-phase two-outcome fringe: p(0) = cos^2((phi + c)/2), p(1) = sin^2(...); F = 1.

    The control phase c is only an argument when ``with_control`` is set.
    """

    def func(phases, controls):
        x = (phases[..., 0] + (controls[..., 0] if controls.shape[-1] else 0.0)) / 2
        c2 = np.cos(x) ** 2
        return np.stack([c2, 1.0 - c2], axis=-1)

    return ProbabilityModel(2, 1, func, 1 if with_control else 0)


def constant_model(probabilities, phase_dim: int = 1) -> ProbabilityModel:
    probabilities = np.asarray(probabilities, dtype=float)

    def func(phases, controls):
        shape = np.broadcast_shapes(phases.shape[:-1], controls.shape[:-1])
        return np.broadcast_to(probabilities, shape + probabilities.shape).copy()

    return ProbabilityModel(probabilities.size, phase_dim, func)
