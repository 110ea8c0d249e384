import numpy as np
import pytest

from nhfloquet.afai import (
    Disorder,
    Drive,
    DriveParams,
    Lattice,
    particle_marginals,
    pumped_charge_per_cycle,
    row_occupations,
    sample_disorder,
)
from nhfloquet.nhdrive import (
    NHNoise,
    attach_ancilla,
    build_conditional_swap,
    build_counting_unitary,
    detach_ancilla,
    neighbor_leak_channel,
    nh_step,
    nh_sweep,
    run_nh_afai,
    site_swap,
    swap_failure_channel,
    sweep_plan,
    two_particle_state,
)
from nhfloquet.qcore import (
    PAULI_I,
    PAULI_X,
    apply_channel,
    apply_unitary,
    is_unitary,
    kron,
    partial_trace,
    projector,
    random_density_matrix,
)

LAT = Lattice(2, 4)
N = LAT.n_sites
K, M = LAT.site(1, 1), LAT.site(1, 2)  # bulk pair
P0 = np.diag([1.0, 0.0])
P1 = np.diag([0.0, 1.0])


def basis(p1, p2):
    return two_particle_state((p1, p2), LAT)


def with_ancilla(p1, p2, a):
    return kron(basis(p1, p2), P1 if a else P0)


def nine_term_counting(k, m):
    """Sum over (where particle 1 is) x (where particle 2 is), each in {k, m, elsewhere}."""
    pk = projector(np.eye(N)[k])
    pm = projector(np.eye(N)[m])
    rest = np.eye(N) - pk - pm
    parts = {"k": pk, "m": pm, "~": rest}
    total = 0
    for a, pa in parts.items():
        for b, pb in parts.items():
            on_k = (a == "k") + (b == "k")
            on_m = (a == "m") + (b == "m")
            total = total + kron(pa, pb, PAULI_X if on_k > on_m else PAULI_I)
    return total


def top_half_weight(rho):
    return row_occupations(rho, LAT)[LAT.Ly // 2:].sum()


def random_two_particle(rng, rank=None):
    return random_density_matrix(N * N, rng, rank=rank)


def test_sweep_plan_order():
    plan = sweep_plan(LAT)
    assert len(plan) == LAT.width * LAT.Ly // 2
    assert plan[0] == (LAT.site(0, 0), LAT.site(0, 1))
    assert plan[-1] == (LAT.site(3, 1), LAT.site(3, 2))
    assert all(LAT.neighbor(k, 0, 1) == m for k, m in plan)


def test_attach_detach(rng):
    rho = random_two_particle(rng)
    big = attach_ancilla(rho)
    assert big.shape == (512, 512)
    assert np.trace(big).real == pytest.approx(1.0)
    assert np.max(np.abs(detach_ancilla(big) - rho)) <= 1e-14
    assert np.allclose(partial_trace(big, (256, 2), [1]), P0)


@pytest.mark.parametrize("k,m", [(K, M), (LAT.site(0, 0), LAT.site(0, 1)), (LAT.site(3, 1), LAT.site(3, 2))])
def test_counting_unitary_matches_nine_terms(k, m):
    u = build_counting_unitary(k, m, LAT)
    assert is_unitary(u)
    assert np.array_equal(u, nine_term_counting(k, m))


def test_counting_examples():
    u = build_counting_unitary(K, M, LAT)
    p = LAT.site(3, 3)
    assert np.allclose(apply_unitary(with_ancilla(K, K, 0), u), with_ancilla(K, K, 1))
    assert np.allclose(apply_unitary(with_ancilla(K, p, 0), u), with_ancilla(K, p, 1))
    assert np.allclose(apply_unitary(with_ancilla(M, K, 0), u), with_ancilla(M, K, 0))
    assert np.allclose(apply_unitary(with_ancilla(p, 0, 0), u), with_ancilla(p, 0, 0))


def test_invalid_pairs():
    with pytest.raises(ValueError, match="directly above"):
        build_counting_unitary(K, K + 1, LAT)
    with pytest.raises(ValueError):
        build_conditional_swap(M, K, LAT)
    with pytest.raises(ValueError):
        build_counting_unitary(LAT.site(0, 3), 99, LAT)


def test_conditional_swap_examples():
    u = build_conditional_swap(K, M, LAT)
    assert is_unitary(u)
    p = LAT.site(0, 3)
    assert np.allclose(apply_unitary(with_ancilla(K, p, 0), u), with_ancilla(K, p, 0))
    assert np.allclose(apply_unitary(with_ancilla(K, p, 1), u), with_ancilla(M, p, 1))
    assert np.allclose(apply_unitary(with_ancilla(K, K, 1), u), with_ancilla(M, M, 1))


def test_site_swap():
    s = site_swap(2, 5, 8)
    assert is_unitary(s)
    assert s[5, 2] == 1 and s[2, 5] == 1 and s[0, 0] == 1 and s[2, 2] == 0


def test_swap_failure_channel(rng):
    rho = random_two_particle(rng)
    assert np.allclose(apply_channel(rho, swap_failure_channel(K, M, 0.0, LAT)), rho)
    ch = swap_failure_channel(K, M, 0.3, LAT)
    assert ch.weights == pytest.approx((0.4, 0.3, 0.3))
    assert ch.completeness_error() <= 1e-8
    assert abs(np.trace(apply_channel(rho, ch)).real - 1) <= 1e-10
    with pytest.raises(ValueError):
        swap_failure_channel(K, M, 0.6, LAT)


def test_neighbor_leak_term_counts(rng):
    bulk = neighbor_leak_channel(K, M, 0.05, LAT)
    assert len(bulk.weights) == 1 + 16
    assert bulk.weights[0] == pytest.approx(1 - 16 * 0.05)
    edge = neighbor_leak_channel(LAT.site(0, 0), LAT.site(0, 1), 0.05, LAT)
    assert len(edge.weights) == 1 + 14
    for ch in (bulk, edge):
        assert ch.completeness_error() <= 1e-8
        assert abs(np.trace(apply_channel(random_two_particle(rng), ch)).real - 1) <= 1e-10
    rho = random_two_particle(rng)
    assert np.allclose(apply_channel(rho, neighbor_leak_channel(K, M, 0.0, LAT)), rho)
    with pytest.raises(ValueError):
        neighbor_leak_channel(K, M, 0.07, LAT)


def test_noise_params_validated():
    NHNoise(0.5, 1 / 16)
    with pytest.raises(ValueError):
        NHNoise(gamma=0.51)
    with pytest.raises(ValueError):
        NHNoise(gamma2=0.1)


def test_sweep_leaves_top_half_alone(rng):
    top = LAT.top_half()
    rho = np.zeros((N * N, N * N), dtype=complex)
    psi = np.zeros(N * N, dtype=complex)
    for a in top[:3]:
        for b in top[3:6]:
            psi[a * N + b] = rng.normal() + 1j * rng.normal()
    rho = projector(psi / np.linalg.norm(psi))
    assert np.max(np.abs(nh_sweep(rho, LAT) - rho)) <= 1e-10


def test_sweep_lifts_bottom_particle():
    rho = basis(LAT.site(2, 0), LAT.site(1, 3))
    out = nh_sweep(rho, LAT)
    m1, m2 = particle_marginals(out, N)
    rows = LAT.rows()
    assert np.real(np.diag(m1))[rows >= 2].sum() == pytest.approx(1.0, abs=1e-12)
    assert np.real(np.diag(m2))[rows >= 2].sum() == pytest.approx(1.0, abs=1e-12)


def test_correction_off_dephases_sector():
    psi = np.zeros(N * N, dtype=complex)
    p = LAT.site(3, 3)
    psi[K * N + p] = psi[LAT.site(0, 3) * N + p] = 1 / np.sqrt(2)
    rho = projector(psi)
    out = nh_step(rho, K, M, LAT, NHNoise(), correction=False)
    assert np.allclose(np.diag(out), np.diag(rho))
    assert abs(out[K * N + p, LAT.site(0, 3) * N + p]) <= 1e-14


def test_sweep_conserves_trace_and_number(rng):
    noise = NHNoise(0.05, 0.03)
    for _ in range(5):
        out = nh_sweep(random_two_particle(rng), LAT, noise)
        assert abs(np.trace(out).real - 1) <= 1e-9
        m1, m2 = particle_marginals(out, N)
        assert abs(np.trace(m1).real - 1) <= 1e-9 and abs(np.trace(m2).real - 1) <= 1e-9
        assert np.linalg.eigvalsh(out).min() >= -1e-10


def test_monotone_rescue(rng):
    for i in range(100):
        rho = random_two_particle(rng, rank=int(rng.integers(1, 4)))
        assert top_half_weight(nh_sweep(rho, LAT)) >= top_half_weight(rho) - 1e-10


def test_ancilla_diagonal_after_counting(rng):
    for k, m in sweep_plan(LAT)[:3]:
        rho = random_two_particle(rng)
        big = apply_unitary(attach_ancilla(rho), build_counting_unitary(k, m, LAT))
        anc = partial_trace(big, (N * N, 2), [1])
        assert abs(anc[0, 1]) <= 1e-12
        assert np.allclose(detach_ancilla(big)[np.diag_indices(N * N)], np.diag(rho), atol=1e-10)


def test_correction_off_equals_projector_dephasing(rng):
    def oracle(rho):
        for k, m in sweep_plan(LAT):
            u = build_counting_unitary(k, m, LAT)
            # The flip sector is where the counting unitary moves the ancilla.
            flip = np.real(np.diag(u[1::2, ::2])) > 0.5
            p = np.diag(flip.astype(float))
            q = np.eye(N * N) - p
            rho = p @ rho @ p + q @ rho @ q
        return rho
    rho = random_two_particle(rng)
    assert np.max(np.abs(nh_sweep(rho, LAT, correction=False) - oracle(rho))) <= 1e-10


def test_sweep_refuses_large_lattice():
    with pytest.raises(ValueError, match="36"):
        nh_sweep(np.zeros((1, 1)), Lattice(5, 4))


def test_clean_nh_run_pumps_one():
    drive = Drive(LAT, DriveParams(), Disorder.clean(LAT, 5))
    res = run_nh_afai(drive, 5)
    assert np.allclose(res.green.Q, 1.0, atol=1e-3)
    assert np.allclose(res.blue.Q, 1.0, atol=1e-3)
    assert np.allclose(res.top_half_fraction("green"), 1.0)


def test_blue_matches_two_particle_without_sweep():
    drive = Drive(LAT, DriveParams(), sample_disorder(LAT, 1.5, 0.2, 7, 4))
    sites = [LAT.site(1, 3), LAT.site(0, 2)]
    res = run_nh_afai(drive, 4, sites=sites, substeps=8)
    rho = two_particle_state(sites, LAT)
    for c in range(4):
        q, rho = pumped_charge_per_cycle(rho, drive, c, 8)
        assert q == pytest.approx(res.blue.Q[c], abs=1e-10)
        assert np.allclose(row_occupations(rho, LAT), res.blue.rows[c], atol=1e-10)
