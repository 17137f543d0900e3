"""Probe-state families and the coherent-state benchmark."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .fisher import InfoMatrix
from .hilbert import FockState

INFINITE = math.inf


def make_noon(N: int) -> FockState:
    """(|N,0> + |0,N>)/sqrt(2); the phase sits on mode 1."""
    if N < 1:
        raise ValueError("NOON state needs N >= 1")
    amp = 1 / math.sqrt(2)
    return FockState({(N, 0): amp, (0, N): amp}, 2)


def make_zero_n_superposition(N: int) -> FockState:
    """Single-mode (|0> + |N>)/sqrt(2), which needs an external phase reference."""
    if N < 1:
        raise ValueError("N must be >= 1")
    amp = 1 / math.sqrt(2)
    return FockState({(0,): amp, (N,): amp}, 1)


@dataclass(frozen=True)
class GeneralizedNoonSpec:
    """beta|N,0..0> + alpha/sqrt(d) sum_m |0..N_m..0> over d+1 modes."""

    d: int
    N: int
    alpha_sq: float

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("need at least one probing mode")
        if self.N < 1:
            raise ValueError("need at least one photon")
        if not 0.0 < self.alpha_sq < 1.0:
            raise ValueError(f"alpha_sq must lie in (0, 1), got {self.alpha_sq}")

    @property
    def beta_sq(self) -> float:
        return 1.0 - self.alpha_sq

    @property
    def probing_energy(self) -> float:
        return self.alpha_sq * self.N


def single_mode_ket(mode_count: int, mode: int, N: int) -> tuple[int, ...]:
    occ = [0] * mode_count
    occ[mode] = N
    return tuple(occ)


def make_generalized_noon(spec: GeneralizedNoonSpec) -> FockState:
    M = spec.d + 1
    amps = {single_mode_ket(M, 0, spec.N): math.sqrt(spec.beta_sq)}
    probe_amp = math.sqrt(spec.alpha_sq / spec.d)
    for m in range(1, M):
        amps[single_mode_ket(M, m, spec.N)] = probe_amp
    return FockState(amps, M)


def optimal_alpha_sq(d: int) -> float:
    """Weight on the probing modes that minimizes Tr(Q^-1) for a generalized NOON probe."""
    if d < 1:
        raise ValueError("d must be >= 1")
    return math.sqrt(d) / (1 + math.sqrt(d))


def generalized_noon_qfi(d: int, N: float, alpha_sq: float) -> InfoMatrix:
    """Closed-form QFI of the generalized NOON probe; N may be non-integer for scaling sweeps."""
    scale = 4 * N**2 * alpha_sq / d
    return InfoMatrix(scale * (np.eye(d) - alpha_sq / d))


def generalized_noon_qfi_inverse(d: int, N: float, alpha_sq: float) -> np.ndarray:
    """Closed-form inverse: identity times d/(4N^2 alpha^2) plus all-ones times 1/(4N^2 beta^2)."""
    beta_sq = 1.0 - alpha_sq
    return d / (4 * N**2 * alpha_sq) * np.eye(d) + np.ones((d, d)) / (4 * N**2 * beta_sq)


def generalized_noon_trace_bound(d: int, N: float, alpha_sq: float) -> float:
    return d / (4 * N**2) * (d / alpha_sq + 1 / (1 - alpha_sq))


def make_separate_noon(photon_numbers) -> tuple[FockState, list[int]]:
    """Product of d two-mode NOON states.

    Pair i occupies modes (2i, 2i+1); the phase for pair i acts on mode 2i+1.
    Returns the state and its probing-mode list.
    """
    photon_numbers = [int(n) for n in photon_numbers]
    if not photon_numbers or min(photon_numbers) < 1:
        raise ValueError("need at least one NOON pair with N >= 1")
    terms = {(): 1.0 + 0j}
    amp = 1 / math.sqrt(2)
    for N in photon_numbers:
        terms = {occ + pair: a * amp for occ, a in terms.items() for pair in ((N, 0), (0, N))}
    M = 2 * len(photon_numbers)
    return FockState(terms, M), [2 * i + 1 for i in range(len(photon_numbers))]


def separate_noon_qfi(photon_numbers) -> InfoMatrix:
    return InfoMatrix(np.diag(np.asarray(photon_numbers, dtype=float) ** 2))


class ReferenceLayout(str, enum.Enum):
    SEPARATE = "SeparateReferences"
    SINGLE = "SingleReference"
    INFINITE = "Infinite"


@dataclass(frozen=True)
class CoherentBenchmark:
    """Multimode coherent probe with a given phase-reference arrangement.

    ``reference_energy`` is the total reference energy; with separate
    references it is split evenly over the d phases. Use ``INFINITE`` for an
    ideal reference.
    """

    probe_energies: tuple[float, ...]
    reference_energy: float = INFINITE
    layout: ReferenceLayout = ReferenceLayout.INFINITE
    total_energy: float = field(init=False)

    def __post_init__(self):
        energies = tuple(float(e) for e in self.probe_energies)
        if not energies or min(energies) <= 0:
            raise ValueError("probe energies must be positive")
        if not self.reference_energy > 0:
            raise ValueError("reference energy must be positive")
        layout = ReferenceLayout(self.layout)
        if layout is not ReferenceLayout.INFINITE and math.isinf(self.reference_energy):
            layout = ReferenceLayout.INFINITE
        object.__setattr__(self, "probe_energies", energies)
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "total_energy", math.fsum(energies))

    @classmethod
    def equal(cls, d: int, total_energy: float, reference_energy: float = INFINITE,
              layout: ReferenceLayout = ReferenceLayout.INFINITE) -> CoherentBenchmark:
        return cls((total_energy / d,) * d, reference_energy, layout)

    @property
    def d(self) -> int:
        return len(self.probe_energies)


def coherent_qfi_matrix(bench: CoherentBenchmark) -> InfoMatrix:
    a = np.asarray(bench.probe_energies)
    if bench.layout is ReferenceLayout.INFINITE:
        return InfoMatrix(np.diag(4 * a))
    if bench.layout is ReferenceLayout.SEPARATE:
        per_ref = bench.reference_energy / bench.d
        return InfoMatrix(np.diag(4 / (1 / a + 1 / per_ref)))
    inv = (np.diag(1 / a) + np.ones((bench.d, bench.d)) / bench.reference_energy) / 4
    return InfoMatrix(np.linalg.inv(inv))


def homodyne_variance(alpha_sq: float, beta_sq: float, mismatch_angle: float) -> float:
    """Error-propagated phase variance of homodyne detection against a reference beam.

    ``beta_sq`` may be ``INFINITE``. Returns ``math.inf`` where the fringe slope vanishes.
    """
    if alpha_sq <= 0 or beta_sq <= 0:
        raise ValueError("energies must be positive")
    c2 = math.cos(mismatch_angle) ** 2
    if c2 < 1e-15:
        return math.inf
    return (1 / alpha_sq + 1 / beta_sq) / (4 * c2)
