from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from ffstlab import spin
from ffstlab.chain import DisorderModel, build_coupling_matrix, make_uniform_spec, sample_disorder
from ffstlab.errors import InvalidArgument, SizeCapExceeded
from ffstlab.fermions import propagator
from ffstlab.spin import SpinHamiltonian, build_spin_hamiltonian, evolve_state, krylov_expm, popcount

from _dense import dense_xx


def random_spec(seed, N):
    base = make_uniform_spec(N, 1.0, 0.2, delta=0.15)
    return sample_disorder(base, DisorderModel(kind="both", strength=0.4, seed=seed), 0)


@given(st.integers(0, 2**32), st.integers(1, 5))
@settings(max_examples=20, deadline=None)
def test_sector_blocks_match_kron_construction(seed, N):
    spec = random_spec(seed, N)
    H = build_spin_hamiltonian(spec)
    bonds = [(0, 1, spec.g_left), (N, N + 1, spec.g_right)] + [(j, j + 1, k) for j, k in enumerate(spec.kappa, 1)]
    fields = [spec.delta, *spec.onsite, spec.delta]
    assert np.allclose(H.to_sparse().toarray(), dense_xx(N + 2, bonds, fields), atol=1e-14)


def test_popcount():
    x = np.arange(1024)
    assert np.array_equal(popcount(x), [bin(int(v)).count("1") for v in x])
    assert np.array_equal(spin._popcount_slow(x), popcount(x))


def test_single_excitation_sector_is_the_coupling_matrix():
    spec = random_spec(3, 6)
    H = build_spin_hamiltonian(spec)
    sec = H.sector(1)
    assert np.array_equal(sec.states, 1 << np.arange(spec.n_sites))
    assert np.allclose(sec.block.toarray(), build_coupling_matrix(spec))
    U = sec.evolve(np.eye(sec.dim), 37.0)
    assert np.allclose(U, propagator(build_coupling_matrix(spec), 37.0), atol=1e-12)


@given(st.integers(0, 2**32), st.floats(0.0, 100.0))
@settings(max_examples=15, deadline=None)
def test_evolution_conserves_norm_and_magnetization(seed, t):
    spec = random_spec(seed, 5)
    H = build_spin_hamiltonian(spec)
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=H.dim) + 1j * rng.normal(size=H.dim)
    psi /= np.linalg.norm(psi)
    out = evolve_state(H, psi, t)
    assert abs(np.linalg.norm(out) - 1.0) < 1e-12
    M = H.magnetization
    for m in range(H.n_sites + 1):
        before = np.sum(np.abs(psi[M == m]) ** 2)
        after = np.sum(np.abs(out[M == m]) ** 2)
        assert abs(before - after) < 1e-12


def test_basis_state_never_leaves_its_sector():
    H = build_spin_hamiltonian(random_spec(9, 6))
    psi = np.zeros(H.dim, dtype=complex)
    psi[0b10110101] = 1.0
    out = evolve_state(H, psi, 250.0)
    assert np.sum(np.abs(out[H.magnetization != 5]) ** 2) < 1e-24


def test_evolution_matches_dense_expm():
    spec = random_spec(21, 4)
    H = build_spin_hamiltonian(spec)
    rng = np.random.default_rng(0)
    psi = rng.normal(size=H.dim) + 1j * rng.normal(size=H.dim)
    expected = scipy.linalg.expm(-1j * 13.0 * H.to_sparse().toarray()) @ psi
    assert np.allclose(evolve_state(H, psi, 13.0), expected, atol=1e-10)


def test_krylov_matches_dense_diagonalization(monkeypatch):
    spec = random_spec(4, 8)
    H = build_spin_hamiltonian(spec)
    psi = np.zeros(H.dim, dtype=complex)
    psi[[0b0101010101, 0b1000011110]] = [0.6, 0.8j]
    dense = evolve_state(H, psi, 40.0)
    monkeypatch.setattr(spin, "DENSE_SECTOR_LIMIT", 10)
    krylov = evolve_state(spin.build_spin_hamiltonian(spec), psi, 40.0)
    assert np.max(np.abs(krylov - dense)) < 1e-9


def test_krylov_expm_small_matrix():
    rng = np.random.default_rng(5)
    A = rng.normal(size=(60, 60))
    A = A + A.T
    v = rng.normal(size=60) + 0j
    expected = scipy.linalg.expm(-1j * 3.0 * A) @ v
    assert np.allclose(krylov_expm(A, v, 3.0), expected, atol=1e-8)
    assert np.array_equal(krylov_expm(A, v, 0.0), v)


def test_spectrum_is_sorted_and_complete():
    H = build_spin_hamiltonian(random_spec(2, 3))
    dense = np.linalg.eigvalsh(H.to_sparse().toarray())
    assert np.allclose(H.spectrum(), dense, atol=1e-12)


def test_size_cap_and_validation():
    with pytest.raises(SizeCapExceeded):
        build_spin_hamiltonian(make_uniform_spec(15, 1.0, 0.1))
    with pytest.raises(InvalidArgument):
        SpinHamiltonian(3, [(0, 3, 1.0)], [0, 0, 0])
    with pytest.raises(InvalidArgument):
        SpinHamiltonian(3, [(0, 1, 1.0)], [0, 0])
    H = SpinHamiltonian(3, [(0, 1, 1.0)], [0, 0, 0])
    with pytest.raises(InvalidArgument):
        H.sector(1).local_index([0b011])


def test_rabi_half_period_phase():
    c = 0.7
    H = SpinHamiltonian(2, [(0, 1, c)], [0.0, 0.0])
    assert np.allclose(np.linalg.eigvalsh(H.sector(1).block.toarray()), [-c, c])
    psi = np.zeros(4, dtype=complex)
    psi[0b01] = 1.0  # site 0 up, site 1 down
    out = evolve_state(H, psi, np.pi / (2 * c))
    assert out[0b10] == pytest.approx(-1j, abs=1e-12)
    assert abs(out[0b01]) < 1e-12


def test_trivial_evolutions():
    spec = make_uniform_spec(1, 1.0, 0.0, delta=0.3)
    H = build_spin_hamiltonian(spec)
    full = H.to_sparse().toarray()
    assert np.allclose(full, np.diag(np.diag(full)))
    assert np.allclose(np.diag(full), [0.3 * (bin(s & 1).count("1") + bin(s & 4).count("1")) for s in range(8)])
    psi = np.full(8, 1 / np.sqrt(8), dtype=complex)
    assert np.array_equal(evolve_state(build_spin_hamiltonian(random_spec(1, 1)), psi, 0.0), psi)
    zero = SpinHamiltonian(3, [], [0.0, 0.0, 0.0])
    assert np.array_equal(evolve_state(zero, psi, 17.0), psi)
