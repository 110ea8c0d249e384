"""Localization by repeated ancilla entanglement.

Every drive step is cut into ``M`` slices. After each slice, every site in
turn gets a fresh ancilla that is flipped iff the particle sits on that site;
the ancilla is then discarded. Discarding it removes the coherence between
"on the site" and "elsewhere", so frequent slicing freezes hopping.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .afai import Drive, Lattice
from .qcore import apply_permutation


@dataclass(frozen=True)
class LocalizationConfig:
    M: int = 1000
    cycles: int = 100
    record_stride: int = 100
    x0: int = 0
    y0: int | None = None  # defaults to the top row
    dephase: bool = True
    method: str = "ancilla"

    def __post_init__(self):
        if self.M < 1 or self.record_stride < 1 or self.cycles < 0:
            raise ValueError("need M >= 1, record_stride >= 1 and cycles >= 0")
        if self.method not in ("ancilla", "projector"):
            raise ValueError(f"unknown dephasing method {self.method!r}")


def _occupancy_cnot(n_sites: int, s: int) -> np.ndarray:
    perm = np.arange(2 * n_sites)
    perm[[2 * s, 2 * s + 1]] = perm[[2 * s + 1, 2 * s]]
    return perm


def site_dephase(rho: np.ndarray, s: int) -> np.ndarray:
    """Attach an ancilla, flip it iff the particle is on site ``s``, trace it out.

    The ancilla is the last tensor factor, so ``rho (x) |0><0|`` fills the
    even-even entries and the partial trace sums the even-even and odd-odd
    blocks.
    """
    n = rho.shape[0]
    if not 0 <= s < n:
        raise ValueError(f"site {s} outside 0..{n - 1}")
    big = np.zeros((2 * n, 2 * n), dtype=complex)
    big[::2, ::2] = rho
    big = apply_permutation(big, _occupancy_cnot(n, s))
    return big[::2, ::2] + big[1::2, 1::2]


def dephase_all_sites(rho: np.ndarray, method: str = "ancilla") -> np.ndarray:
    if method == "projector":
        # Sequential two-projector channels over every site leave only the diagonal.
        return np.diag(np.diag(rho))
    for s in range(rho.shape[0]):
        rho = site_dephase(rho, s)
    return rho


@dataclass
class LocalizationSeries:
    substeps: np.ndarray
    times: np.ndarray
    rows: np.ndarray  # column j = rows at distance j from the starting row


def row_index_map(lattice: Lattice, y0: int) -> np.ndarray:
    if y0 not in (0, lattice.Ly - 1):
        raise ValueError(f"starting row must be the top or bottom row, got y0={y0}")
    return np.abs(np.arange(lattice.Ly) - y0)


def run_localization(drive: Drive, config: LocalizationConfig) -> LocalizationSeries:
    """Single-particle evolution in ``M`` slices per step, sampled every ``record_stride`` slices.

    Row occupations are re-indexed by distance from the starting row, so
    column 0 is the row the particle started in. The first sample is the
    initial state at slice 0.
    """
    lattice = drive.lattice
    y0 = lattice.Ly - 1 if config.y0 is None else config.y0
    order = row_index_map(lattice, y0)
    rows_of_site = order[lattice.rows()]
    start = lattice.site(config.x0, y0)
    rho = np.zeros((lattice.n_sites, lattice.n_sites), dtype=complex)
    rho[start, start] = 1.0

    def sample():
        occ = np.bincount(rows_of_site, weights=np.real(np.diag(rho)), minlength=lattice.Ly)
        return occ

    steps, times, rows = [0], [0.0], [sample()]
    k, t = 0, 0.0
    for c in range(config.cycles):
        for prop, t_n in zip(drive.propagators, drive.durations(c)):
            dt = t_n / config.M
            u = prop(dt)
            ud = u.conj().T
            for _ in range(config.M):
                rho = u @ rho @ ud
                if config.dephase:
                    rho = dephase_all_sites(rho, config.method)
                k += 1
                t += dt
                if k % config.record_stride == 0:
                    steps.append(k)
                    times.append(t)
                    rows.append(sample())
    return LocalizationSeries(np.array(steps), np.array(times), np.array(rows))
