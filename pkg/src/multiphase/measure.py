"""POVMs on the single-excitation subspace {|N_m>} and Born-rule simulation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fisher import DIVERGENCE_SLOPE, ZERO_PROB, InfoMatrix, ProbabilityModel, qfi_matrix
from .hilbert import FockState, apply_phases

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
COMPLETENESS_TOL = 1e-10
CLAMP_TOL = 1e-12


class SupportError(ValueError):
    """State has weight outside the subspace spanned by the |N_m> kets."""


@dataclass(frozen=True)
class Povm:
    """Measurement on the (d+1)-dimensional span of |N_m>, m = 0..d.

    Any complete family of PSD operators is accepted, so larger POVMs can be
    plugged in through ``Povm(elements)`` or ``Povm.from_vectors``.
    """

    elements: tuple[np.ndarray, ...]

    def __post_init__(self):
        elements = tuple(np.array(e, dtype=complex) for e in self.elements)
        if not elements:
            raise ValueError("POVM needs at least one element")
        dim = elements[0].shape[0]
        for k, e in enumerate(elements):
            if e.shape != (dim, dim):
                raise ValueError(f"element {k} has shape {e.shape}, expected {(dim, dim)}")
            if np.max(np.abs(e - e.conj().T)) > HERMITIAN_TOL:
                raise ValueError(f"element {k} is not Hermitian")
            if np.linalg.eigvalsh(e)[0] < -PSD_TOL:
                raise ValueError(f"element {k} is not positive semidefinite")
            e.setflags(write=False)
        if np.max(np.abs(sum(elements) - np.eye(dim))) > COMPLETENESS_TOL:
            raise ValueError("POVM elements do not sum to the identity")
        object.__setattr__(self, "elements", elements)

    @classmethod
    def from_vectors(cls, vectors) -> Povm:
        """Rank-one projectors onto the rows of ``vectors``."""
        return cls(tuple(np.outer(v, np.conj(v)) for v in np.asarray(vectors, dtype=complex)))

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    @property
    def d(self) -> int:
        return self.dim - 1

    def __len__(self) -> int:
        return len(self.elements)

    def completeness_error(self) -> float:
        return float(np.max(np.abs(sum(self.elements) - np.eye(self.dim))))


def printed_pattern(d: int) -> np.ndarray:
    """Seed vectors: uniform row, then rows n with 1/sqrt(n(n+1)) on m < n and -1/sqrt(n+1) on m = n."""
    D = d + 1
    seeds = np.zeros((D, D))
    seeds[0] = 1 / math.sqrt(D)
    for n in range(1, D):
        seeds[n, :n] = math.sqrt(math.factorial(n - 1) / math.factorial(n + 1))
        seeds[n, n] = -1 / math.sqrt(n + 1)
    return seeds


def gram_schmidt(rows: np.ndarray) -> np.ndarray:
    """Orthonormalize rows in order (modified Gram-Schmidt, two passes)."""
    out = []
    for v in np.asarray(rows, dtype=complex):
        w = v.copy()
        for _ in range(2):
            for u in out:
                w = w - np.vdot(u, w) * u
        norm = np.linalg.norm(w)
        if norm < 1e-12:
            raise ValueError("seed vectors are linearly dependent")
        out.append(w / norm)
    return np.array(out)


def optimal_basis(d: int) -> np.ndarray:
    """Uniform row, then rows n with 1/sqrt(n(n+1)) on m < n and -n/sqrt(n(n+1)) on m = n.

    Same support and signs as ``printed_pattern``, which is orthonormal only
    up to n = 1.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    D = d + 1
    basis = np.zeros((D, D))
    basis[0] = 1 / math.sqrt(D)
    for n in range(1, D):
        scale = 1 / math.sqrt(n * (n + 1))
        basis[n, :n] = scale
        basis[n, n] = -n * scale
    return basis


def optimal_povm(d: int) -> Povm:
    """Projective POVM |Y^(n)><Y^(n)|, n = 0..d, with Y^(0) uniform; see ``optimal_basis``."""
    return Povm.from_vectors(optimal_basis(d))


def subspace_coefficients(state: FockState) -> tuple[int, np.ndarray]:
    """Return (N, c) with c_m the amplitude of |N photons in mode m>."""
    Ns = state.photon_numbers()
    if len(Ns) != 1:
        raise SupportError(f"state mixes photon numbers {sorted(Ns)}")
    (N,) = Ns
    M = state.mode_count
    coeffs = np.zeros(M, dtype=complex)
    for occ, amp in state.amplitudes.items():
        nonzero = [m for m, n in enumerate(occ) if n]
        if len(nonzero) != 1:
            raise SupportError(f"occupation {occ!r} spreads photons over several modes")
        coeffs[nonzero[0]] = amp
    return N, coeffs


def probe_adapted_povm(state: FockState) -> Povm:
    """Projective POVM whose first element projects onto the probe itself.

    The remaining elements come from orthonormalizing the rows of
    ``optimal_basis`` against the probe; for the uniform probe this equals
    ``optimal_povm``.
    The FI of this POVM approaches the QFI as the phases approach zero.
    """
    _, c = subspace_coefficients(state)
    d = c.size - 1
    seeds = np.vstack([c, optimal_basis(d)[1:]])
    return Povm.from_vectors(gram_schmidt(seeds))


def _factors(povm: Povm) -> tuple[np.ndarray, np.ndarray]:
    """Rows w with Pi_k = sum of w w^H over the rows owned by k, plus the owner matrix.

    Summing |w^H psi|^2 keeps small probabilities accurate where the
    quadratic form psi^H Pi psi would cancel.
    """
    rows, owner = [], []
    for k, e in enumerate(povm.elements):
        vals, vecs = np.linalg.eigh(e)
        for lam, v in zip(vals, vecs.T):
            if lam > PSD_TOL:
                rows.append(np.sqrt(lam) * v)
                owner.append(k)
    select = np.zeros((len(povm), len(rows)))
    select[owner, np.arange(len(rows))] = 1.0
    return np.array(rows), select


def _clamp(p: np.ndarray) -> np.ndarray:
    if np.any(p < -CLAMP_TOL):
        raise ValueError(f"negative probability {p.min():.3e} beyond clamping tolerance")
    p = np.clip(p, 0.0, None)
    return p / p.sum(axis=-1, keepdims=True)


def born_probabilities(state: FockState, povm: Povm, phases=None) -> np.ndarray:
    """p_k = <psi_phi|Pi_k|psi_phi>."""
    if phases is not None:
        state = apply_phases(state, phases)
    _, c = subspace_coefficients(state)
    if c.size != povm.dim:
        raise SupportError(f"state spans {c.size} modes, POVM acts on dimension {povm.dim}")
    rows, select = _factors(povm)
    return _clamp(np.abs(rows.conj() @ c) ** 2 @ select.T)


def born_model(state: FockState, povm: Povm, with_controls: bool = False) -> ProbabilityModel:
    """Vectorized Born-rule model over the d probing phases.

    With ``with_controls`` the model takes d control phases that add to the
    unknown ones before the measurement.
    """
    N, c = subspace_coefficients(state)
    if c.size != povm.dim:
        raise SupportError(f"state spans {c.size} modes, POVM acts on dimension {povm.dim}")
    rows, select = _factors(povm)

    def func(phases, controls):
        phases = np.asarray(phases, dtype=float)
        if with_controls:
            phases = phases + controls
        full = np.concatenate([np.zeros(phases.shape[:-1] + (1,)), phases], axis=-1)
        psi = c * np.exp(1j * N * full)
        return _clamp(np.abs(psi @ rows.conj().T) ** 2 @ select.T)

    return ProbabilityModel(len(povm), c.size - 1, func, c.size - 1 if with_controls else 0)


def born_fi_matrix(state: FockState, povm: Povm, phases) -> InfoMatrix:
    """Exact FI of ``povm`` on the phase-shifted state, from analytic derivatives.

    dp_k/dphi_j = 2 Re(psi^H Pi_k d_j psi) with d_j psi = i N psi_j on mode j.
    """
    N, c = subspace_coefficients(state)
    if c.size != povm.dim:
        raise SupportError(f"state spans {c.size} modes, POVM acts on dimension {povm.dim}")
    phases = np.atleast_1d(np.asarray(phases, dtype=float))
    full = np.concatenate([[0.0], phases])
    psi = c * np.exp(1j * N * full)
    elems = np.array(povm.elements)
    e_psi = elems @ psi  # (K, D)
    p = np.real(e_psi.conj() @ psi)
    grad = 2 * np.real(e_psi.conj()[:, 1:] * (1j * N * psi[1:])).T  # (d, K)
    keep = p >= ZERO_PROB
    divergent = bool(np.any(np.abs(grad[:, ~keep]) > DIVERGENCE_SLOPE))
    g = grad[:, keep]
    f = (g / p[keep]) @ g.T
    return InfoMatrix(0.5 * (f + f.T), possibly_divergent=divergent,
                      note="FI possibly divergent at this phase point" if divergent else "")


SATURATION_SCALES = (1e-4, 1e-5, 1e-6)


def find_saturation_point(state: FockState, povm: Povm, tol: float = 1e-6, direction=None):
    """Phase point where the POVM's FI matches the QFI within ``tol``.

    phi = 0 is tried first. When outcomes with vanishing probability make
    the FI degenerate there, points eps * direction with shrinking eps are
    tried instead. Returns ``(phases, fi)`` or ``None`` when nothing matches.
    """
    N, c = subspace_coefficients(state)
    d = c.size - 1
    q = qfi_matrix(state).matrix
    direction = np.arange(1, d + 1) / d if direction is None else np.asarray(direction, dtype=float)
    for phases in [np.zeros(d), *(eps * direction for eps in SATURATION_SCALES)]:
        fi = born_fi_matrix(state, povm, phases)
        if not fi.possibly_divergent and np.max(np.abs(fi.matrix - q)) <= tol:
            return phases, fi
    return None


@dataclass(frozen=True)
class OutcomeSample:
    outcome_index: int
    setting: tuple[float, ...]
    seed_record: str


def sample_counts(probabilities, shots: int, seed: int) -> np.ndarray:
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = np.random.default_rng(seed)
    return rng.multinomial(shots, np.asarray(probabilities, dtype=float))


def sample_outcomes(state: FockState, povm: Povm, phases, shots: int, seed: int) -> list[OutcomeSample]:
    """I.i.d. Born-rule draws, reproducible from ``seed``."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p = born_probabilities(state, povm, phases)
    rng = np.random.default_rng(seed)
    draws = rng.choice(len(p), size=shots, p=p)
    setting = tuple(float(x) for x in np.atleast_1d(phases)) if phases is not None else ()
    return [OutcomeSample(int(k), setting, f"pcg64:{seed}:{i}") for i, k in enumerate(draws)]
