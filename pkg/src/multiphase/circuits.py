"""Passive linear optics: beam splitters, phase shifters, tritters and their Fock-space action.

Convention: a mode unitary U sends a_j^dagger to sum_i U_ij a_i^dagger. Beam
splitters use the symmetric form [[sqrt(T), i sqrt(1-T)], [i sqrt(1-T), sqrt(T)]].
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .fisher import ProbabilityModel
from .hilbert import DimensionError, FockState, OccupationVector

UNITARITY_TOL = 1e-10
MAX_PHOTONS = 4

# T1, T2, T3, theta giving |U_ij|^2 = 1/3 for compose_tritter.
BALANCED_TRITTER = (0.5, 1.0 / 3.0, 0.5, math.pi / 2)


@dataclass(frozen=True)
class ModeUnitary:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"mode unitary must be square, got {m.shape}")
        if np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) > UNITARITY_TOL:
            raise ValueError("matrix is not unitary")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other: ModeUnitary) -> ModeUnitary:
        return ModeUnitary(self.matrix @ other.matrix)


def _check_transmittivity(T: float) -> None:
    if not 0.0 <= T <= 1.0:
        raise ValueError(f"transmittivity must lie in [0, 1], got {T}")


def beam_splitter(i: int, j: int, T: float, M: int) -> ModeUnitary:
    _check_transmittivity(T)
    if i == j or not (0 <= i < M and 0 <= j < M):
        raise ValueError(f"invalid beam-splitter modes ({i}, {j}) for {M} modes")
    u = np.eye(M, dtype=complex)
    t, r = math.sqrt(T), 1j * math.sqrt(1.0 - T)
    u[i, i] = u[j, j] = t
    u[i, j] = u[j, i] = r
    return ModeUnitary(u)


def phase_shifter(mode: int, theta: float, M: int) -> ModeUnitary:
    u = np.eye(M, dtype=complex)
    u[mode, mode] = np.exp(1j * theta)
    return ModeUnitary(u)


def compose_tritter(T1: float, T2: float, T3: float, theta: float) -> ModeUnitary:
    """U_12(T3) P(theta) U_23(T2) U_12(T1) on modes 0, 1, 2; P acts on mode 0."""
    return (beam_splitter(0, 1, T3, 3) @ phase_shifter(0, theta, 3)
            @ beam_splitter(1, 2, T2, 3) @ beam_splitter(0, 1, T1, 3))


# -- circuit description ------------------------------------------------------

@dataclass(frozen=True)
class BeamSplitter:
    i: int
    j: int
    T: float


@dataclass(frozen=True)
class PhaseShifter:
    mode: int
    theta: float


@dataclass(frozen=True)
class UnknownPhase:
    mode: int
    index: int  # 1-based symbol index


@dataclass(frozen=True)
class ControlPhase:
    mode: int
    index: int  # 1-based control slot


Element = Union[BeamSplitter, PhaseShifter, UnknownPhase, ControlPhase]

_TAGS = {
    "beam_splitter": BeamSplitter,
    "phase_shifter": PhaseShifter,
    "unknown_phase": UnknownPhase,
    "control_phase": ControlPhase,
}
_TAG_OF = {cls: tag for tag, cls in _TAGS.items()}


@dataclass(frozen=True)
class CircuitSpec:
    """Ordered layers; the first layer acts first on the input."""

    mode_count: int
    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        M = self.mode_count
        for el in layers:
            if isinstance(el, BeamSplitter):
                if el.i == el.j or not (0 <= el.i < M and 0 <= el.j < M):
                    raise ValueError(f"invalid beam splitter {el}")
                _check_transmittivity(el.T)
            elif isinstance(el, (PhaseShifter, UnknownPhase, ControlPhase)):
                if not 0 <= el.mode < M:
                    raise ValueError(f"mode out of range in {el}")
            else:
                raise TypeError(f"unknown circuit element {el!r}")
        for kind in (UnknownPhase, ControlPhase):
            idx = sorted({el.index for el in layers if isinstance(el, kind)})
            if idx != list(range(1, len(idx) + 1)):
                raise ValueError(f"{kind.__name__} indices must run 1..k without gaps, got {idx}")
        object.__setattr__(self, "layers", layers)

    @property
    def phase_dim(self) -> int:
        return len({el.index for el in self.layers if isinstance(el, UnknownPhase)})

    @property
    def control_dim(self) -> int:
        return len({el.index for el in self.layers if isinstance(el, ControlPhase)})

    def to_dict(self) -> dict:
        return {
            "mode_count": self.mode_count,
            "layers": [{"type": _TAG_OF[type(el)], **el.__dict__} for el in self.layers],
        }

    @classmethod
    def from_dict(cls, data: dict) -> CircuitSpec:
        layers = []
        for raw in data["layers"]:
            raw = dict(raw)
            tag = raw.pop("type")
            if tag not in _TAGS:
                raise ValueError(f"unknown layer type {tag!r}")
            layers.append(_TAGS[tag](**raw))
        return cls(int(data["mode_count"]), tuple(layers))


def tritter_layers(T1: float, T2: float, T3: float, theta: float, offset: int = 0) -> list:
    """Layers equivalent to ``compose_tritter`` on modes offset..offset+2."""
    a, b, c = offset, offset + 1, offset + 2
    return [BeamSplitter(a, b, T1), BeamSplitter(b, c, T2), PhaseShifter(a, theta), BeamSplitter(a, b, T3)]


def two_tritter_circuit(with_controls: bool = True) -> CircuitSpec:
    """Balanced tritter, unknown phases on modes 1 and 2, optional control phases, balanced tritter."""
    layers = tritter_layers(*BALANCED_TRITTER)
    layers += [UnknownPhase(1, 1), UnknownPhase(2, 2)]
    if with_controls:
        layers += [ControlPhase(1, 1), ControlPhase(2, 2)]
    layers += tritter_layers(*BALANCED_TRITTER)
    return CircuitSpec(3, tuple(layers))


def _compile(spec: CircuitSpec) -> list:
    """Merge runs of fixed elements into single matrices."""
    M = spec.mode_count
    ops: list = []
    block = None
    for el in spec.layers:
        if isinstance(el, (UnknownPhase, ControlPhase)):
            if block is not None:
                ops.append(block)
                block = None
            ops.append(el)
            continue
        if isinstance(el, BeamSplitter):
            m = beam_splitter(el.i, el.j, el.T, M).matrix
        else:
            m = phase_shifter(el.mode, el.theta, M).matrix
        block = m if block is None else m @ block
    if block is not None:
        ops.append(block)
    return ops


def circuit_columns(spec: CircuitSpec, cols, phases=None, controls=None, _ops=None) -> np.ndarray:
    """Selected columns of the batched circuit matrix, shape ``batch + (M, len(cols))``.

    Work before the first phase-dependent layer is batch-free, and adjacent
    phase layers are merged into one diagonal.
    """
    phases = np.zeros(spec.phase_dim) if phases is None else np.asarray(phases, dtype=float)
    controls = np.zeros(spec.control_dim) if controls is None else np.asarray(controls, dtype=float)
    M = spec.mode_count
    ops = _compile(spec) if _ops is None else _ops
    v = np.eye(M, dtype=complex)[:, list(cols)]
    diag = None
    for op in ops:
        if isinstance(op, np.ndarray):
            if diag is not None:
                v = diag[..., :, None] * v
                diag = None
            v = np.moveaxis(np.tensordot(op, v, axes=([1], [-2])), 0, -2)
        else:
            source = phases if isinstance(op, UnknownPhase) else controls
            angle = source[..., op.index - 1]
            if diag is None:
                diag = np.ones(angle.shape + (M,), dtype=complex)
            elif diag.shape[:-1] != angle.shape:
                diag = np.broadcast_to(diag, np.broadcast_shapes(diag.shape[:-1], angle.shape) + (M,)).copy()
            diag[..., op.mode] = diag[..., op.mode] * np.exp(1j * angle)
    if diag is not None:
        v = diag[..., :, None] * v
    batch = np.broadcast_shapes(phases.shape[:-1], controls.shape[:-1])
    return np.broadcast_to(v, batch + v.shape[-2:])


def circuit_unitary(spec: CircuitSpec, phases=None, controls=None) -> np.ndarray:
    """Batched circuit matrix of shape ``batch + (M, M)``."""
    return circuit_columns(spec, range(spec.mode_count), phases, controls)


# -- permanents and Fock evolution -------------------------------------------

def permanent(a: np.ndarray) -> np.ndarray:
    """Ryser permanent over the last two axes (batched)."""
    a = np.asarray(a)
    n = a.shape[-1]
    if a.shape[-2] != n:
        raise DimensionError("permanent needs square matrices")
    if n == 0:
        return np.ones(a.shape[:-2], dtype=a.dtype)
    if n == 1:
        return a[..., 0, 0]
    if n == 2:
        return a[..., 0, 0] * a[..., 1, 1] + a[..., 0, 1] * a[..., 1, 0]
    total = np.zeros(a.shape[:-2], dtype=np.result_type(a, complex))
    for mask in range(1, 1 << n):
        cols = [j for j in range(n) if mask >> j & 1]
        row_sums = a[..., cols].sum(axis=-1)
        total = total + (-1) ** len(cols) * np.prod(row_sums, axis=-1)
    return (-1) ** n * total


def occupations(M: int, n: int) -> list[OccupationVector]:
    """All occupation vectors of n photons in M modes, lexicographically descending."""
    out = [OccupationVector(c) for c in itertools.product(range(n, -1, -1), repeat=M) if sum(c) == n]
    return out


def _mode_list(occ) -> list[int]:
    return [m for m, k in enumerate(occ) for _ in range(k)]


def _fact_norm(occ) -> float:
    return math.prod(math.factorial(k) for k in occ)


def transition_amplitudes(u: np.ndarray, inp, outputs) -> np.ndarray:
    """<t|U|s> for each output pattern t; batched over leading axes of ``u``."""
    cols = _mode_list(inp)
    out = []
    for t in outputs:
        rows = _mode_list(t)
        sub = u[..., rows, :][..., :, cols]
        out.append(permanent(sub) / math.sqrt(_fact_norm(inp) * _fact_norm(t)))
    return np.stack(out, axis=-1)


def distinguishable_probabilities(u: np.ndarray, inp, outputs) -> np.ndarray:
    cols = _mode_list(inp)
    w = np.abs(u) ** 2
    out = []
    for t in outputs:
        rows = _mode_list(t)
        out.append(np.real(permanent(w[..., rows, :][..., :, cols])) / _fact_norm(t))
    return np.stack(out, axis=-1)


def _check_photons(state: FockState) -> None:
    top = max(state.photon_numbers())
    if top > MAX_PHOTONS:
        raise ValueError(f"{top} photons exceed the cap of {MAX_PHOTONS}")


def fock_evolve(u: ModeUnitary, state: FockState) -> FockState:
    """Second-quantized action of a mode unitary on a few-photon state."""
    if u.dim != state.mode_count:
        raise DimensionError(f"unitary acts on {u.dim} modes, state has {state.mode_count}")
    _check_photons(state)
    out: dict[OccupationVector, complex] = {}
    for n in sorted(state.photon_numbers()):
        outputs = occupations(u.dim, n)
        acc = np.zeros(len(outputs), dtype=complex)
        for occ, amp in state.amplitudes.items():
            if occ.total == n:
                acc += amp * transition_amplitudes(u.matrix, occ, outputs)
        for t, a in zip(outputs, acc):
            out[t] = out.get(t, 0j) + a
    return FockState(out, u.dim)


def interferometer_model(spec: CircuitSpec, input_state: FockState, visibility: float = 1.0) -> ProbabilityModel:
    """Photon-counting statistics at the circuit output.

    Probabilities blend indistinguishable and distinguishable photons as
    V p_indist + (1 - V) p_dist. Partial visibility needs a Fock (single
    occupation) input.
    """
    if not 0.0 <= visibility <= 1.0:
        raise ValueError(f"visibility must lie in [0, 1], got {visibility}")
    if input_state.mode_count != spec.mode_count:
        raise DimensionError("input state and circuit have different mode counts")
    _check_photons(input_state)
    ns = input_state.photon_numbers()
    if len(ns) != 1:
        raise ValueError("input must have a definite photon number")
    (n,) = ns
    if visibility < 1.0 and len(input_state) != 1:
        raise ValueError("partial visibility is only defined for Fock-state inputs")
    outputs = occupations(spec.mode_count, n)
    terms = list(input_state.amplitudes.items())
    used = sorted({m for occ, _ in terms for m in _mode_list(occ)})
    ops = _compile(spec)
    plans = []
    for occ, amp in terms:
        cols = [used.index(m) for m in _mode_list(occ)]
        norm = [math.sqrt(_fact_norm(occ) * _fact_norm(t)) for t in outputs]
        plans.append((amp, cols, norm))
    rows = np.array([_mode_list(t) for t in outputs], dtype=int)
    out_fact = np.array([_fact_norm(t) for t in outputs], dtype=float)

    def func(phases, controls):
        v = circuit_columns(spec, used, phases, controls, ops)
        amp_total = 0.0
        for amp, cols, norm in plans:
            amps = permanent(v[..., rows, :][..., cols]) / np.asarray(norm)
            amp_total = amp_total + amp * amps
        p = np.abs(amp_total) ** 2
        if visibility < 1.0:
            w = np.abs(v[..., plans[0][1]]) ** 2
            p_dist = np.real(permanent(w[..., rows, :])) / out_fact
            p = visibility * p + (1.0 - visibility) * p_dist
        return p

    return ProbabilityModel(len(outputs), spec.phase_dim, func, spec.control_dim, tuple(outputs))
