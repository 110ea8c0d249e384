"""Two-register correction circuit.

Each register-2 qubit is paired with a register-1 ancilla that starts in
``|0>``. The ancilla is put into superposition, picks up a phase kickback from
a controlled ``|good><good| - |bad><bad|``, is rotated back, and then controls
the swap ``|good> <-> |bad>`` on its partner. Without noise the partner always
ends in ``|good>``, and whatever entropy it carried moves into the ancilla.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .qcore import (
    HADAMARD,
    PAULI_I,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    QChannel,
    apply_channel,
    apply_unitary,
    check_density_matrix,
    kron,
    partial_trace,
    projector,
    vn_entropy,
)

_P0 = np.diag([1.0, 0.0]).astype(complex)
_P1 = np.diag([0.0, 1.0]).astype(complex)
_ORTHO_TOL = 1e-12


@dataclass(frozen=True)
class TargetSpec:
    good: np.ndarray
    bad: np.ndarray

    def __post_init__(self):
        good = np.asarray(self.good, dtype=complex).reshape(2)
        bad = np.asarray(self.bad, dtype=complex).reshape(2)
        if abs(np.vdot(good, good) - 1) > _ORTHO_TOL or abs(np.vdot(bad, bad) - 1) > _ORTHO_TOL:
            raise ValueError("target kets must be normalized")
        if abs(np.vdot(good, bad)) > _ORTHO_TOL:
            raise ValueError("good and bad kets must be orthogonal")
        object.__setattr__(self, "good", good)
        object.__setattr__(self, "bad", bad)

    @classmethod
    def from_good(cls, good) -> "TargetSpec":
        """Complete a target ket with its orthogonal partner ``(-b*, a*)``."""
        good = np.asarray(good, dtype=complex).reshape(2)
        good = good / np.linalg.norm(good)
        return cls(good, np.array([-good[1].conjugate(), good[0].conjugate()]))


@dataclass(frozen=True)
class PauliNoise:
    p_x: float = 0.0
    p_y: float = 0.0
    p_z: float = 0.0

    def __post_init__(self):
        for name in ("p_x", "p_y", "p_z"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v!r} is not a probability")
        if self.p_x + self.p_y + self.p_z > 1.0 + 1e-12:
            raise ValueError("p_x + p_y + p_z exceeds 1")


class NoisePlacement(str, Enum):
    NONE = "none"
    BEFORE_PROBE = "before_probe"
    AFTER_CORRECTION = "after_correction"
    BOTH = "both"


def pauli_channel(noise: PauliNoise) -> QChannel:
    p0 = max(0.0, 1.0 - noise.p_x - noise.p_y - noise.p_z)
    return QChannel.from_terms([(p0, PAULI_I), (noise.p_x, PAULI_X), (noise.p_y, PAULI_Y), (noise.p_z, PAULI_Z)])


def build_probe_unitary(spec: TargetSpec) -> np.ndarray:
    """Controlled ``|good><good| - |bad><bad|``, control first."""
    signed = projector(spec.good) - projector(spec.bad)
    return kron(_P0, PAULI_I) + kron(_P1, signed)


def build_correction_unitary(spec: TargetSpec) -> np.ndarray:
    """Controlled ``|bad><good| + |good><bad|``, control first."""
    rot = np.outer(spec.bad, spec.good.conj()) + np.outer(spec.good, spec.bad.conj())
    return kron(_P0, PAULI_I) + kron(_P1, rot)


@dataclass
class ProtocolReport:
    """Per-pair results. ``pair_states[i]`` is the 4x4 state of (reg-1 qubit i, reg-2 qubit i)."""

    pair_states: list[np.ndarray]
    reg1_states: list[np.ndarray]
    reg2_states: list[np.ndarray]
    fidelity: list[float]

    @property
    def reg1_entropy(self) -> list[float]:
        return [vn_entropy(r) for r in self.reg1_states]

    @property
    def reg2_entropy(self) -> list[float]:
        return [vn_entropy(r) for r in self.reg2_states]

    @property
    def reg1_total_entropy(self) -> float:
        # Pairs never interact, so each register is a product state.
        return float(sum(self.reg1_entropy))

    @property
    def reg2_total_entropy(self) -> float:
        return float(sum(self.reg2_entropy))

    @property
    def final_joint(self) -> np.ndarray:
        """Joint state of all pairs, ordered pair 0 (reg1, reg2), pair 1, ..."""
        if len(self.pair_states) > 6:
            raise ValueError("joint state of more than 6 pairs is too large to materialize")
        return kron(*self.pair_states)


def _run_pair(rho_in: np.ndarray, spec: TargetSpec, noise: QChannel, placement: NoisePlacement) -> np.ndarray:
    before = placement in (NoisePlacement.BEFORE_PROBE, NoisePlacement.BOTH)
    after = placement in (NoisePlacement.AFTER_CORRECTION, NoisePlacement.BOTH)
    if before:
        rho_in = apply_channel(rho_in, noise)
    h_ctrl = kron(HADAMARD, PAULI_I)
    rho = kron(_P0, rho_in)
    rho = apply_unitary(rho, h_ctrl)
    rho = apply_unitary(rho, build_probe_unitary(spec))
    rho = apply_unitary(rho, h_ctrl)
    rho = apply_unitary(rho, build_correction_unitary(spec))
    if after:
        rho = _noise_on_target(rho, noise)
    return rho


def _noise_on_target(rho_pair: np.ndarray, ch: QChannel) -> np.ndarray:
    """Apply a single-qubit channel to the second qubit of a two-qubit state."""
    lifted = QChannel(ch.weights, tuple(kron(PAULI_I, k) for k in ch.kraus))
    return apply_channel(rho_pair, lifted)


def run_correction_protocol(
    inputs: Sequence[np.ndarray],
    specs: Sequence[TargetSpec],
    noise: PauliNoise = PauliNoise(),
    placement: NoisePlacement | str = NoisePlacement.BEFORE_PROBE,
) -> ProtocolReport:
    if len(inputs) != len(specs):
        raise ValueError(f"{len(inputs)} input qubits but {len(specs)} target specs")
    placement = NoisePlacement(placement)
    ch = pauli_channel(noise)
    pairs, r1, r2, fid = [], [], [], []
    for i, (rho_in, spec) in enumerate(zip(inputs, specs)):
        rho_in = check_density_matrix(rho_in, f"input qubit {i}")
        if rho_in.shape != (2, 2):
            raise ValueError(f"input qubit {i} is not a single qubit")
        out = _run_pair(rho_in, spec, ch, placement)
        reg1 = partial_trace(out, (2, 2), [0])
        reg2 = partial_trace(out, (2, 2), [1])
        pairs.append(out)
        r1.append(reg1)
        r2.append(reg2)
        f = float(np.real(spec.good.conj() @ reg2 @ spec.good))
        fid.append(min(1.0, max(0.0, f)))
    return ProtocolReport(pairs, r1, r2, fid)
