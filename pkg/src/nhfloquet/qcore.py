"""Dense linear algebra for small Hilbert spaces.

Density matrices and unitaries are plain complex ``numpy`` arrays. Validation
lives in the ``check_*`` helpers; channels are the only wrapped type because
their completeness has to be checked once, at construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# Global numeric tolerances. Every module reads from here.
TOL = {
    "hermitian": 1e-10,
    "trace": 1e-10,
    "psd": 1e-10,
    "unitary": 1e-10,
    "cptp": 1e-8,
}

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex)
    return np.outer(vec, vec.conj())


def kron(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of one or more square operators, left to right."""
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def _square(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    return a


def is_hermitian(a: np.ndarray, tol: float = TOL["hermitian"]) -> bool:
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol)


def is_unitary(u: np.ndarray, tol: float = TOL["unitary"]) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol)


def check_density_matrix(rho: np.ndarray, name: str = "rho") -> np.ndarray:
    """Return ``rho`` as a complex array, raising ValueError if it is not a valid state."""
    rho = _square(rho, name)
    if not is_hermitian(rho):
        raise ValueError(f"{name} is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > TOL["trace"]:
        raise ValueError(f"{name} has trace {tr!r}, expected 1")
    if np.linalg.eigvalsh(rho).min() < -TOL["psd"]:
        raise ValueError(f"{name} has a negative eigenvalue")
    return rho


def check_unitary(u: np.ndarray, name: str = "U") -> np.ndarray:
    u = _square(u, name)
    if not is_unitary(u):
        raise ValueError(f"{name} is not unitary")
    return u


def apply_unitary(rho: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Return ``U rho U^dagger``."""
    rho = np.asarray(rho)
    u = np.asarray(u)
    if rho.shape != u.shape:
        raise ValueError(f"dimension mismatch: state {rho.shape} vs operator {u.shape}")
    return u @ rho @ u.conj().T


def permutation_of(u: np.ndarray) -> np.ndarray | None:
    """Index map ``p`` with ``U|j> = |p[j]>`` if ``U`` is a 0/1 permutation matrix, else None."""
    u = np.asarray(u)
    p = np.argmax(np.abs(u), axis=0)
    cols = np.arange(u.shape[1])
    if not np.all(u[p, cols] == 1):
        return None
    if np.count_nonzero(u) != u.shape[0] or len(np.unique(p)) != len(p):
        return None
    return p


def apply_permutation(rho: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """``P rho P^dagger`` for the permutation matrix with ``P|j> = |perm[j]>``."""
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    return rho[np.ix_(inv, inv)]


@dataclass(frozen=True)
class QChannel:
    """A weighted Kraus map ``rho -> sum_j w_j K_j rho K_j^dagger``.

    Completeness ``sum_j w_j K_j^dagger K_j = I`` is enforced on construction.
    Kraus operators that are permutation matrices are detected and applied by
    index shuffling instead of matrix products.
    """

    weights: tuple[float, ...]
    kraus: tuple[np.ndarray, ...]
    _perms: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.weights) != len(self.kraus) or not self.kraus:
            raise ValueError("channel needs one weight per Kraus operator")
        dim = self.kraus[0].shape[0]
        perms = []
        acc = np.zeros((dim, dim), dtype=complex)
        perm_weight = 0.0
        for w, k in zip(self.weights, self.kraus):
            if not 0.0 <= w <= 1.0:
                raise ValueError(f"Kraus weight {w!r} outside [0, 1]")
            if k.shape != (dim, dim):
                raise ValueError("Kraus operators must share one square shape")
            p = permutation_of(k)
            perms.append(p)
            if p is not None:
                perm_weight += w
            elif w:
                acc += w * (k.conj().T @ k)
        acc += perm_weight * np.eye(dim)
        err = np.max(np.abs(acc - np.eye(dim)))
        if err > TOL["cptp"]:
            raise ValueError(f"channel is not trace preserving (completeness error {err:.3e})")
        object.__setattr__(self, "_perms", tuple(perms))

    @classmethod
    def from_terms(cls, terms: Sequence[tuple[float, np.ndarray]]) -> "QChannel":
        return cls(tuple(float(w) for w, _ in terms), tuple(np.asarray(k, dtype=complex) for _, k in terms))

    @classmethod
    def identity(cls, dim: int) -> "QChannel":
        return cls((1.0,), (np.eye(dim, dtype=complex),))

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[0]

    def completeness_error(self) -> float:
        acc = sum(w * (k.conj().T @ k) for w, k in zip(self.weights, self.kraus))
        return float(np.max(np.abs(acc - np.eye(self.dim))))


def apply_channel(rho: np.ndarray, ch: QChannel) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape != (ch.dim, ch.dim):
        raise ValueError(f"dimension mismatch: state {rho.shape} vs channel dim {ch.dim}")
    out = np.zeros_like(rho, dtype=complex)
    for w, k, p in zip(ch.weights, ch.kraus, ch._perms):
        if w == 0.0:
            continue
        if p is not None:
            out += w * apply_permutation(rho, p)
        else:
            out += w * (k @ rho @ k.conj().T)
    return out


def partial_trace(rho: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Reduced matrix on the factors listed in ``keep`` (kept in ascending order).

    ``dims`` is the ordered list of tensor-factor dimensions; its product must
    equal the dimension of ``rho``.
    """
    rho = np.asarray(rho)
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims) or int(np.prod(dims)) != rho.shape[0]:
        raise ValueError(f"factor dims {dims} do not multiply to {rho.shape[0]}")
    keep = sorted(set(int(k) for k in keep))
    n = len(dims)
    if not keep or len(keep) >= n or keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"keep={keep} must be a nonempty proper subset of factor indices 0..{n - 1}")
    drop = [i for i in range(n) if i not in keep]
    t = rho.reshape(dims + dims)
    # Contract each dropped factor's row index with its column index.
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows = list(letters[:n])
    cols = list(letters[n:2 * n])
    for i in drop:
        cols[i] = rows[i]
    out = "".join(rows[i] for i in keep) + "".join(cols[i] for i in keep)
    t = np.einsum("".join(rows) + "".join(cols) + "->" + out, t)
    dk = int(np.prod([dims[i] for i in keep]))
    return t.reshape(dk, dk)


def vn_entropy(rho: np.ndarray) -> float:
    """Von Neumann entropy in bits; eigenvalues are clamped to [0, 1] first."""
    lam = np.clip(np.linalg.eigvalsh(np.asarray(rho)), 0.0, 1.0)
    lam = lam[lam > 0]
    return float(-np.sum(lam * np.log2(lam))) + 0.0


class HermitianPropagator:
    """Caches ``H = V diag(lam) V^dagger`` so ``exp(-iHt)`` is cheap for any ``t``."""

    def __init__(self, h: np.ndarray):
        h = _square(h, "H")
        if not is_hermitian(h):
            raise ValueError("H is not Hermitian")
        self.eigvals, self.eigvecs = np.linalg.eigh(h)

    def __call__(self, t: float) -> np.ndarray:
        v = self.eigvecs
        return (v * np.exp(-1j * self.eigvals * t)) @ v.conj().T


def expm_hermitian(h: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i H t)`` by eigendecomposition (units with hbar = 1)."""
    return HermitianPropagator(h)(t)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
