"""Anomalous Floquet-Anderson insulator on a cylinder.

Sites live on a ``2*Lx`` by ``Ly`` grid, periodic in x and open in y, with
index ``s = x + 2*Lx*y``. Sublattice A is the checkerboard ``(x + y)`` even.
Hopping step ``n`` (1..4) couples every A site to its neighbour in direction
``+y, +x, -y, -x`` respectively; step 5 is the staggered potential
``+delta`` on A and ``-delta`` on B. At ``J*T/5 = pi/2`` every bulk particle
runs a closed loop per cycle, while top-row A sites hop one unit cell in +x
and bottom-row B sites one unit cell in -x.

Hamiltonians here are single-particle ``N x N`` matrices. States may be a
single-particle density matrix, a one-body density matrix of several
non-interacting particles (trace = particle number) or a two-particle
density matrix on the ``N**2`` tensor-product space.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .qcore import HermitianPropagator, kron

STEP_DIRECTIONS = {1: (0, 1), 2: (1, 0), 3: (0, -1), 4: (-1, 0)}


@dataclass(frozen=True)
class Lattice:
    Lx: int = 2
    Ly: int = 4

    def __post_init__(self):
        if self.Lx < 1 or self.Ly < 2:
            raise ValueError(f"need Lx >= 1 and Ly >= 2, got Lx={self.Lx}, Ly={self.Ly}")

    @property
    def width(self) -> int:
        return 2 * self.Lx

    @property
    def n_sites(self) -> int:
        return 2 * self.Lx * self.Ly

    def site(self, x: int, y: int) -> int:
        if not 0 <= y < self.Ly:
            raise ValueError(f"row {y} outside 0..{self.Ly - 1}")
        return x % self.width + self.width * y

    def coords(self, s: int) -> tuple[int, int]:
        return s % self.width, s // self.width

    def is_a(self, s: int) -> bool:
        x, y = self.coords(s)
        return (x + y) % 2 == 0

    def neighbor(self, s: int, dx: int, dy: int) -> int | None:
        x, y = self.coords(s)
        if not 0 <= y + dy < self.Ly:
            return None
        return self.site(x + dx, y + dy)

    def neighbors(self, s: int) -> list[int]:
        """Existing nearest neighbours in the order +x, -x, +y, -y."""
        out = [self.neighbor(s, dx, dy) for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1))]
        return [n for n in out if n is not None]

    def bonds(self, step: int) -> list[tuple[int, int]]:
        """(A site, partner) pairs driven during hopping step 1..4."""
        if step not in STEP_DIRECTIONS:
            raise ValueError(f"hopping step must be 1..4, got {step}")
        dx, dy = STEP_DIRECTIONS[step]
        out = []
        for s in range(self.n_sites):
            if self.is_a(s):
                t = self.neighbor(s, dx, dy)
                if t is not None:
                    out.append((s, t))
        return out

    def rows(self) -> np.ndarray:
        return np.arange(self.n_sites) // self.width

    def top_half(self) -> list[int]:
        return [s for s in range(self.n_sites) if self.coords(s)[1] >= self.Ly // 2]


@dataclass(frozen=True)
class DriveParams:
    J: float = 1.25
    delta: float = 0.4
    T: float = 2 * np.pi

    def __post_init__(self):
        if self.J <= 0 or self.delta <= 0 or self.T <= 0:
            raise ValueError("J, delta and T must be positive")

    @property
    def step_time(self) -> float:
        return self.T / 5


@dataclass(frozen=True)
class Disorder:
    """Static site potentials ``mu`` and per-cycle step-duration offsets ``delta[cycle, step-1]``."""

    mu: np.ndarray
    delta: np.ndarray
    seed: int | None = None
    W: float = 0.0
    W_T: float = 0.0

    @classmethod
    def clean(cls, lattice: Lattice, cycles: int) -> "Disorder":
        return cls(np.zeros(lattice.n_sites), np.zeros((cycles, 5)))

    @property
    def cycles(self) -> int:
        return self.delta.shape[0]


def sample_disorder(lattice: Lattice, W: float, W_T: float, seed, cycles: int) -> Disorder:
    """Draw ``mu_i ~ U[-W, W]`` once and ``delta_n ~ U[-W_T, W_T]`` per cycle and step.

    ``seed`` is anything ``numpy.random.default_rng`` accepts, including a
    ``SeedSequence``.
    """
    if W < 0 or W_T < 0:
        raise ValueError("disorder strengths must be non-negative")
    rng = np.random.default_rng(seed)
    mu = rng.uniform(-W, W, size=lattice.n_sites)
    delta = rng.uniform(-W_T, W_T, size=(cycles, 5))
    return Disorder(mu, delta, seed if isinstance(seed, int) else None, W, W_T)


def step_durations(params: DriveParams, disorder: Disorder, cycle: int) -> np.ndarray:
    """Durations ``T (1 + delta_n) / 5`` of the five steps in ``cycle`` (0-based)."""
    return params.step_time * (1.0 + disorder.delta[cycle])


def build_step_hamiltonian(n: int, lattice: Lattice, params: DriveParams, mu: np.ndarray | None = None) -> np.ndarray:
    N = lattice.n_sites
    h = np.zeros((N, N), dtype=complex)
    if n in STEP_DIRECTIONS:
        for i, j in lattice.bonds(n):
            h[i, j] = h[j, i] = -params.J
    elif n == 5:
        eta = np.array([1.0 if lattice.is_a(s) else -1.0 for s in range(N)])
        h[np.diag_indices(N)] = params.delta * eta
    else:
        raise ValueError(f"drive step must be 1..5, got {n}")
    if mu is not None:
        h[np.diag_indices(N)] += mu
    return h


def step_unitary(h: np.ndarray, duration: float) -> np.ndarray:
    if duration < 0:
        raise ValueError("duration must be non-negative")
    return HermitianPropagator(h)(duration)


def current_operator(n: int, lattice: Lattice, params: DriveParams, cut: int = 0) -> np.ndarray:
    """Bond current through the seam just left of column ``cut``, oriented +x.

    For each step-``n`` bond ``i -> j`` crossing the seam (``i`` left of it)
    the contribution is ``iJ(|j><i| - |i><j|)``, the rate of change of the
    occupation on the right-hand side. Steps without crossing bonds give zero.
    """
    if n not in range(1, 6):
        raise ValueError(f"drive step must be 1..5, got {n}")
    N = lattice.n_sites
    op = np.zeros((N, N), dtype=complex)
    if n == 5:
        return op
    left = (cut - 1) % lattice.width
    right = cut % lattice.width
    for a, b in lattice.bonds(n):
        for i, j in ((a, b), (b, a)):
            if lattice.coords(i)[0] == left and lattice.coords(j)[0] == right:
                op[j, i] += 1j * params.J
                op[i, j] -= 1j * params.J
    return op


def crossing_bonds(n: int, lattice: Lattice, cut: int = 0) -> int:
    return int(np.count_nonzero(np.triu(current_operator(n, lattice, DriveParams(), cut))))


def clean_orbit_check(lattice: Lattice, params: DriveParams, tol: float = 1e-8) -> bool:
    """True if the four hopping steps close every bulk orbit and shift the edges.

    Top-row A sites must move one unit cell (+2 sites) in +x, bottom-row B
    sites one unit cell in -x, and every other site must return to itself,
    all with unit amplitude.
    """
    u = np.eye(lattice.n_sites, dtype=complex)
    for n in (1, 2, 3, 4):
        u = step_unitary(build_step_hamiltonian(n, lattice, params), params.step_time) @ u
    for s in range(lattice.n_sites):
        x, y = lattice.coords(s)
        target = s
        if y == lattice.Ly - 1 and lattice.is_a(s):
            target = lattice.site(x + 2, y)
        elif y == 0 and not lattice.is_a(s):
            target = lattice.site(x - 2, y)
        if abs(abs(u[target, s]) - 1.0) > tol:
            return False
    return True


@dataclass
class Drive:
    """Step Hamiltonians of one disorder realization, with cached eigendecompositions."""

    lattice: Lattice
    params: DriveParams
    disorder: Disorder
    cut: int = 0
    hamiltonians: list = field(init=False)
    propagators: list = field(init=False)
    currents: list = field(init=False)

    def __post_init__(self):
        mu = self.disorder.mu
        self.hamiltonians = [build_step_hamiltonian(n, self.lattice, self.params, mu) for n in range(1, 6)]
        self.propagators = [HermitianPropagator(h) for h in self.hamiltonians]
        self.currents = [current_operator(n, self.lattice, self.params, self.cut) for n in range(1, 6)]

    def durations(self, cycle: int) -> np.ndarray:
        return step_durations(self.params, self.disorder, cycle)

    def cycle_unitaries(self, cycle: int) -> list[np.ndarray]:
        return [p(t) for p, t in zip(self.propagators, self.durations(cycle))]

    @cached_property
    def top_half_projector(self) -> np.ndarray:
        p = np.zeros(self.lattice.n_sites)
        p[self.lattice.top_half()] = 1.0
        return p


def _expect(rho: np.ndarray, op: np.ndarray) -> float:
    return float(np.real(np.sum(rho * op.T)))


def _charge_one_body(rho: np.ndarray, drive: Drive, cycle: int, substeps: int, quadrature: str) -> tuple[float, np.ndarray]:
    q = 0.0
    for prop, cur, t_n in zip(drive.propagators, drive.currents, drive.durations(cycle)):
        dt = t_n / substeps
        if not cur.any():
            rho = _conj(prop(t_n), rho)
            continue
        half = prop(dt / 2)
        f_start = _expect(rho, cur)
        for _ in range(substeps):
            mid = _conj(half, rho)
            rho = _conj(half, mid)
            if quadrature == "midpoint":
                q += _expect(mid, cur) * dt
            else:
                f_end = _expect(rho, cur)
                q += (f_start + 4 * _expect(mid, cur) + f_end) * dt / 6
                f_start = f_end
    return q, rho


def _conj(u: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return u @ rho @ u.conj().T


def particle_marginals(rho: np.ndarray, n_sites: int) -> tuple[np.ndarray, np.ndarray]:
    t = rho.reshape(n_sites, n_sites, n_sites, n_sites)
    return np.einsum("ajbj->ab", t), np.einsum("iaib->ab", t)


def pumped_charge_per_cycle(
    rho: np.ndarray,
    drive: Drive,
    cycle: int,
    substeps: int = 40,
    quadrature: str = "simpson",
) -> tuple[float, np.ndarray]:
    """Charge through the seam during one Floquet cycle, and the end-of-cycle state.

    Each step of duration ``T_n`` is split into ``substeps`` pieces and the
    current expectation is integrated by composite Simpson (start, midpoint,
    end of each piece); ``quadrature="midpoint"`` keeps only the midpoint
    sample. For a two-particle state the current is ``I (x) 1 + 1 (x) I``;
    since the drive acts as ``U (x) U`` its expectation is the sum over the
    single-particle marginals, which is what gets integrated.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if quadrature not in ("simpson", "midpoint"):
        raise ValueError(f"unknown quadrature {quadrature!r}")
    N = drive.lattice.n_sites
    dim = rho.shape[0]
    if dim == N:
        return _charge_one_body(rho, drive, cycle, substeps, quadrature)
    if dim != N * N:
        raise ValueError(f"state dimension {dim} is neither N={N} nor N^2")
    q = 0.0
    for marginal in particle_marginals(rho, N):
        q += _charge_one_body(marginal, drive, cycle, substeps, quadrature)[0]
    for u in drive.cycle_unitaries(cycle):
        rho = _conj_two_particle(u, rho)
    return q, rho


def _conj_two_particle(u: np.ndarray, rho: np.ndarray) -> np.ndarray:
    uu = kron(u, u)
    return uu @ rho @ uu.conj().T


def row_occupations(rho: np.ndarray, lattice: Lattice) -> np.ndarray:
    """``sum_x <n(x, y)>`` for each row, summed over particles."""
    N = lattice.n_sites
    if rho.shape[0] == N:
        diag = np.real(np.diag(rho))
    else:
        a, b = particle_marginals(rho, N)
        diag = np.real(np.diag(a) + np.diag(b))
    return np.bincount(lattice.rows(), weights=diag, minlength=lattice.Ly)


def occupation_matrix(sites, lattice: Lattice) -> np.ndarray:
    """One-body density matrix with one particle on each listed site."""
    rho = np.zeros((lattice.n_sites, lattice.n_sites), dtype=complex)
    for s in sites:
        rho[s, s] += 1.0
    return rho


def default_particle_sites(lattice: Lattice) -> list[int]:
    """Two particles on top-row A sites one unit cell apart (the edge channel)."""
    y = lattice.Ly - 1
    x0 = y % 2
    return [lattice.site(x0, y), lattice.site(x0 + 2, y)]


@dataclass
class CycleSeries:
    Q: np.ndarray
    rows: np.ndarray


def run_baseline(drive: Drive, rho0: np.ndarray, cycles: int, substeps: int = 40) -> CycleSeries:
    """Plain disordered Floquet evolution, recording Q and row occupations after each cycle."""
    qs = np.zeros(cycles)
    rows = np.zeros((cycles, drive.lattice.Ly))
    rho = np.asarray(rho0, dtype=complex)
    for c in range(cycles):
        qs[c], rho = pumped_charge_per_cycle(rho, drive, c, substeps)
        rows[c] = row_occupations(rho, drive.lattice)
    return CycleSeries(qs, rows)
