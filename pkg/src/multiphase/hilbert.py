"""Sparse multimode Fock states and number-operator statistics.

States are stored as a map from occupation vectors to complex amplitudes.
Mode 0 is the phase reference: ``apply_phases`` takes ``mode_count - 1``
phases and leaves mode 0 untouched.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from types import MappingProxyType

import numpy as np

NORM_TOL = 1e-12
RENORM_LIMIT = 1e-9
PRUNE_TOL = 1e-14


class DimensionError(ValueError):
    """Raised when mode counts or phase-vector lengths do not match."""


class NormalizationError(ValueError):
    pass


class OccupationVector(tuple):
    """Photon counts per mode, usable as a dictionary key."""

    def __new__(cls, counts: Iterable[int]):
        counts = tuple(int(n) for n in counts)
        if any(n < 0 for n in counts):
            raise ValueError(f"negative photon number in {counts}")
        self = super().__new__(cls, counts)
        self._total = sum(counts)
        return self

    @property
    def total(self) -> int:
        return self._total

    @property
    def mode_count(self) -> int:
        return len(self)

    def __repr__(self) -> str:
        return "|" + ",".join(str(n) for n in self) + ">"


def wrap_phase(x):
    """Reduce angles into [-pi, pi)."""
    return np.mod(np.asarray(x, dtype=float) + np.pi, 2 * np.pi) - np.pi


def phase_vector(values) -> np.ndarray:
    """Build a 1-D wrapped phase vector."""
    return np.atleast_1d(wrap_phase(values)).astype(float)


class FockState:
    """Immutable normalized pure state over ``mode_count`` bosonic modes.

    Parameters
    ----------
    amplitudes : mapping
        Occupation vector (any int sequence) -> complex amplitude.
    mode_count : int, optional
        Inferred from the keys when omitted.
    normalize : bool
        If True, rescale to unit norm regardless of the input norm. Otherwise
        the norm must already be 1 up to ``RENORM_LIMIT``; smaller drifts are
        absorbed silently.
    """

    __slots__ = ("_mode_count", "_amps")

    def __init__(self, amplitudes: Mapping, mode_count: int | None = None, normalize: bool = False):
        amps: dict[OccupationVector, complex] = {}
        for key, value in amplitudes.items():
            occ = OccupationVector(key)
            if mode_count is None:
                mode_count = occ.mode_count
            if occ.mode_count != mode_count:
                raise DimensionError(f"occupation {occ!r} does not have {mode_count} modes")
            amps[occ] = amps.get(occ, 0j) + complex(value)
        if mode_count is None:
            raise ValueError("empty state needs an explicit mode_count")

        amps = {k: v for k, v in amps.items() if abs(v) >= PRUNE_TOL}
        norm_sq = math.fsum(abs(v) ** 2 for v in amps.values())
        if norm_sq == 0.0:
            raise NormalizationError("state has zero norm")
        deviation = abs(norm_sq - 1.0)
        if not normalize and deviation > RENORM_LIMIT:
            raise NormalizationError(f"norm^2 = {norm_sq!r} deviates from 1 by {deviation:.3e}")
        if normalize or deviation > NORM_TOL:
            scale = 1.0 / math.sqrt(norm_sq)
            amps = {k: v * scale for k, v in amps.items()}

        self._mode_count = int(mode_count)
        self._amps = MappingProxyType(dict(sorted(amps.items())))

    @classmethod
    def fock(cls, counts: Iterable[int]) -> FockState:
        occ = OccupationVector(counts)
        return cls({occ: 1.0}, occ.mode_count)

    @property
    def mode_count(self) -> int:
        return self._mode_count

    @property
    def amplitudes(self) -> Mapping[OccupationVector, complex]:
        return self._amps

    def support(self) -> list[OccupationVector]:
        return list(self._amps)

    def photon_numbers(self) -> set[int]:
        return {occ.total for occ in self._amps}

    def amplitude(self, counts) -> complex:
        return self._amps.get(OccupationVector(counts), 0j)

    def norm(self) -> float:
        return math.sqrt(math.fsum(abs(v) ** 2 for v in self._amps.values()))

    def occupation_array(self) -> np.ndarray:
        """Support as an ``(n_terms, mode_count)`` integer array."""
        return np.array(list(self._amps), dtype=int).reshape(len(self._amps), self._mode_count)

    def amplitude_array(self) -> np.ndarray:
        return np.array(list(self._amps.values()), dtype=complex)

    def __len__(self) -> int:
        return len(self._amps)

    def __repr__(self) -> str:
        terms = " + ".join(f"({v:.4g}){k!r}" for k, v in self._amps.items())
        return f"FockState({terms})"

    def allclose(self, other: FockState, atol: float = 1e-12) -> bool:
        if other.mode_count != self.mode_count:
            return False
        keys = set(self._amps) | set(other._amps)
        return all(abs(self._amps.get(k, 0j) - other._amps.get(k, 0j)) <= atol for k in keys)


def _check_mode(state: FockState, mode: int) -> None:
    if not 0 <= mode < state.mode_count:
        raise IndexError(f"mode {mode} out of range for {state.mode_count} modes")


def apply_phases(state: FockState, phases) -> FockState:
    """Apply exp(i sum_j phi_j N_j) over modes 1..M-1 (mode 0 is the reference)."""
    phases = np.atleast_1d(np.asarray(phases, dtype=float))
    if phases.ndim != 1 or phases.size != state.mode_count - 1:
        raise DimensionError(
            f"expected {state.mode_count - 1} phases for a {state.mode_count}-mode state, got {phases.size}"
        )
    out = {}
    for occ, amp in state.amplitudes.items():
        angle = float(np.dot(phases, occ[1:]))
        out[occ] = amp * complex(math.cos(angle), math.sin(angle))
    return FockState(out, state.mode_count)


def number_expectation(state: FockState, mode: int) -> float:
    _check_mode(state, mode)
    return math.fsum(abs(a) ** 2 * occ[mode] for occ, a in state.amplitudes.items())


def number_covariance(state: FockState, mode_i: int, mode_j: int) -> float:
    """Symmetrized covariance of N_i and N_j (the number operators commute)."""
    _check_mode(state, mode_i)
    _check_mode(state, mode_j)
    second = math.fsum(abs(a) ** 2 * occ[mode_i] * occ[mode_j] for occ, a in state.amplitudes.items())
    return second - number_expectation(state, mode_i) * number_expectation(state, mode_j)


def covariance_matrix(state: FockState, modes: Iterable[int] | None = None) -> np.ndarray:
    """Matrix of ``number_covariance`` over ``modes`` (default: probing modes 1..M-1)."""
    modes = list(range(1, state.mode_count)) if modes is None else list(modes)
    k = len(modes)
    cov = np.empty((k, k))
    for a in range(k):
        for b in range(a, k):
            cov[a, b] = cov[b, a] = number_covariance(state, modes[a], modes[b])
    return cov


def inner_product(a: FockState, b: FockState) -> complex:
    """<a|b>, antilinear in the first argument."""
    if a.mode_count != b.mode_count:
        raise DimensionError(f"mode counts differ: {a.mode_count} vs {b.mode_count}")
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    total = 0j
    for occ, amp in small.amplitudes.items():
        other = large.amplitudes.get(occ)
        if other is not None:
            total += amp.conjugate() * other if small is a else other.conjugate() * amp
    return total


def random_state(rng: np.random.Generator, mode_count: int, max_photons: int, terms: int | None = None) -> FockState:
    """Random superposition of occupation vectors with at most ``max_photons`` photons each."""
    from itertools import product

    basis = [occ for occ in product(range(max_photons + 1), repeat=mode_count) if sum(occ) <= max_photons]
    if terms is None:
        terms = int(rng.integers(1, min(len(basis), 8) + 1))
    idx = rng.choice(len(basis), size=min(terms, len(basis)), replace=False)
    amps = rng.normal(size=idx.size) + 1j * rng.normal(size=idx.size)
    return FockState({basis[i]: amps[n] for n, i in enumerate(idx)}, mode_count, normalize=True)
