"""Ancilla-assisted sweep that pushes particles from the bottom half of the cylinder to the top.

Two distinguishable particles live on the tensor-product space of dimension
``N**2`` (index ``p1 * N + p2``). For each site pair ``(k, m)`` with ``m``
directly above ``k``, a fresh ancilla qubit is appended as the last tensor
factor, flipped iff more particles sit on ``k`` than on ``m``, used to control
the swap ``k <-> m`` on both particles, and traced out again. Two Kraus noise
families model faulty swaps and leaks to neighbouring sites.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .afai import (
    CycleSeries,
    Drive,
    Lattice,
    default_particle_sites,
    occupation_matrix,
    pumped_charge_per_cycle,
    row_occupations,
    run_baseline,
)
from .qcore import QChannel, apply_channel, apply_permutation, kron, partial_trace, permutation_of

MAX_SITES = 36


@dataclass(frozen=True)
class NHNoise:
    gamma: float = 0.0
    gamma2: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 0.5:
            raise ValueError(f"gamma={self.gamma!r} outside [0, 1/2]")
        if not 0.0 <= self.gamma2 <= 1 / 16:
            raise ValueError(f"gamma2={self.gamma2!r} outside [0, 1/16]")


def sweep_plan(lattice: Lattice) -> list[tuple[int, int]]:
    """Row-major pairs ``(k, m)`` from the bottom row up to the row below the half-way line."""
    return [
        (lattice.site(x, y), lattice.site(x, y + 1))
        for y in range(lattice.Ly // 2)
        for x in range(lattice.width)
    ]


def _check_pair(k: int, m: int, lattice: Lattice) -> None:
    N = lattice.n_sites
    if not (0 <= k < N and 0 <= m < N) or lattice.neighbor(k, 0, 1) != m:
        raise ValueError(f"site {m} is not directly above site {k}")


def two_particle_state(sites, lattice: Lattice) -> np.ndarray:
    p1, p2 = sites
    N = lattice.n_sites
    rho = np.zeros((N * N, N * N), dtype=complex)
    rho[p1 * N + p2, p1 * N + p2] = 1.0
    return rho


def site_swap(k: int, m: int, n_sites: int) -> np.ndarray:
    """``|k><m| + |m><k|`` completed by the identity on every other site."""
    s = np.eye(n_sites, dtype=complex)
    s[[k, m]] = s[[m, k]]
    return s


def attach_ancilla(rho: np.ndarray) -> np.ndarray:
    if rho.shape[0] > MAX_SITES**2:
        raise ValueError(f"state dimension {rho.shape[0]} exceeds the two-particle limit {MAX_SITES**2}")
    return np.kron(rho, np.diag([1.0, 0.0]).astype(complex))


def detach_ancilla(rho: np.ndarray) -> np.ndarray:
    return partial_trace(rho, (rho.shape[0] // 2, 2), [0])


def _excess_on_k(k: int, m: int, n_sites: int) -> np.ndarray:
    """Boolean over two-particle configurations: more particles on ``k`` than on ``m``."""
    p1, p2 = np.divmod(np.arange(n_sites * n_sites), n_sites)
    on_k = (p1 == k).astype(int) + (p2 == k)
    on_m = (p1 == m).astype(int) + (p2 == m)
    return on_k > on_m


def build_counting_unitary(k: int, m: int, lattice: Lattice) -> np.ndarray:
    """Flip the ancilla exactly on configurations with more particles on ``k`` than on ``m``."""
    _check_pair(k, m, lattice)
    flip = _excess_on_k(k, m, lattice.n_sites)
    dim = 2 * flip.size
    u = np.zeros((dim, dim), dtype=complex)
    src = np.arange(dim)
    dst = src ^ np.repeat(flip.astype(int), 2)
    u[dst, src] = 1.0
    return u


def build_conditional_swap(k: int, m: int, lattice: Lattice) -> np.ndarray:
    _check_pair(k, m, lattice)
    s = site_swap(k, m, lattice.n_sites)
    return kron(np.eye(lattice.n_sites**2), np.diag([1.0, 0.0])) + kron(s, s, np.diag([0.0, 1.0]))


def swap_failure_channel(k: int, m: int, gamma: float, lattice: Lattice) -> QChannel:
    if not 0.0 <= gamma <= 0.5:
        raise ValueError(f"gamma={gamma!r} outside [0, 1/2]")
    N = lattice.n_sites
    eye = np.eye(N, dtype=complex)
    s = site_swap(k, m, N)
    return QChannel.from_terms([(1 - 2 * gamma, np.eye(N * N)), (gamma, kron(eye, s)), (gamma, kron(s, eye))])


def neighbor_leak_channel(k: int, m: int, gamma2: float, lattice: Lattice) -> QChannel:
    """Swap a particle between ``k`` (or ``m``) and one of that site's neighbours.

    Terms run over both particle slots and every existing neighbour of ``k``
    and of ``m``; neighbours missing at the open y edges are skipped and the
    identity weight shrinks to ``1 - n_terms * gamma2``.
    """
    if not 0.0 <= gamma2 <= 1 / 16:
        raise ValueError(f"gamma2={gamma2!r} outside [0, 1/16]")
    N = lattice.n_sites
    eye = np.eye(N, dtype=complex)
    swaps = [site_swap(c, l, N) for c in (k, m) for l in lattice.neighbors(c)]
    terms = [(gamma2, kron(eye, s)) for s in swaps] + [(gamma2, kron(s, eye)) for s in swaps]
    return QChannel.from_terms([(1 - len(terms) * gamma2, np.eye(N * N))] + terms)


@lru_cache(maxsize=128)
def _sweep_permutations(k: int, m: int, lattice: Lattice) -> tuple[np.ndarray, np.ndarray]:
    count = permutation_of(build_counting_unitary(k, m, lattice))
    swap = permutation_of(build_conditional_swap(k, m, lattice))
    return count, swap


@lru_cache(maxsize=64)
def _pair_channels(k: int, m: int, noise: NHNoise, lattice: Lattice) -> tuple[QChannel, QChannel]:
    return swap_failure_channel(k, m, noise.gamma, lattice), neighbor_leak_channel(k, m, noise.gamma2, lattice)


def nh_step(rho: np.ndarray, k: int, m: int, lattice: Lattice, noise: NHNoise, correction: bool = True) -> np.ndarray:
    """One site pair: leak noise, ancilla count / swap / detach, swap-failure noise, leak noise."""
    fail, leak = _pair_channels(k, m, noise, lattice)
    count, swap = _sweep_permutations(k, m, lattice)
    rho = apply_channel(rho, leak)
    big = apply_permutation(attach_ancilla(rho), count)
    if correction:
        big = apply_permutation(big, swap)
    rho = detach_ancilla(big)
    rho = apply_channel(rho, fail)
    return apply_channel(rho, leak)


def nh_sweep(
    rho: np.ndarray,
    lattice: Lattice,
    noise: NHNoise = NHNoise(),
    correction: bool = True,
    plan: list[tuple[int, int]] | None = None,
) -> np.ndarray:
    if lattice.n_sites > MAX_SITES:
        raise ValueError(f"two-particle runs are limited to {MAX_SITES} sites")
    for k, m in sweep_plan(lattice) if plan is None else plan:
        rho = nh_step(rho, k, m, lattice, noise, correction)
    return rho


@dataclass
class NHResult:
    green: CycleSeries
    blue: CycleSeries

    def top_half_fraction(self, which: str = "green") -> np.ndarray:
        rows = getattr(self, which).rows
        ly = rows.shape[1]
        return rows[:, ly // 2:].sum(axis=1) / rows.sum(axis=1)


def run_nh_afai(
    drive: Drive,
    cycles: int,
    noise: NHNoise = NHNoise(),
    sites=None,
    correction: bool = True,
    substeps: int = 40,
) -> NHResult:
    """Disordered two-particle AFAI with the sweep after every cycle (green) and without it (blue).

    Both curves start from the same two occupied sites and see the same
    disorder realization. The blue curve runs on the one-body density matrix,
    which for distinguishable non-interacting particles gives the same Q and
    row occupations as the two-particle state.
    """
    lattice = drive.lattice
    sites = default_particle_sites(lattice) if sites is None else list(sites)
    rho = two_particle_state(sites, lattice)
    qs = np.zeros(cycles)
    rows = np.zeros((cycles, lattice.Ly))
    for c in range(cycles):
        qs[c], rho = pumped_charge_per_cycle(rho, drive, c, substeps)
        rho = nh_sweep(rho, lattice, noise, correction)
        rows[c] = row_occupations(rho, lattice)
    blue = run_baseline(drive, occupation_matrix(sites, lattice), cycles, substeps)
    return NHResult(CycleSeries(qs, rows), blue)
