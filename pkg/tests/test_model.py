import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from openchain.model import (GOLDEN, HamiltonianSpec, ModelError, PotentialSpec, build_hamiltonian,
                             fibonacci_word, potential_values, single_particle_matrix, site_operator)


def dense(op):
    return op.toarray() if hasattr(op, "toarray") else np.asarray(op)


def test_xxz_two_sites_spectrum():
    H = build_hamiltonian(HamiltonianSpec("xxz", L=2, J=1.0))
    assert np.allclose(np.sort(np.linalg.eigvalsh(H)), [-2, 0, 0, 2], atol=1e-12)


@pytest.mark.parametrize("J,delta,h", [(1.0, 0.0, 0.3), (0.7, 2.0, -1.1)])
def test_single_site_is_field_only(J, delta, h):
    H = build_hamiltonian(HamiltonianSpec("xxz", L=1, J=J, delta=delta, potential=PotentialSpec("uniform", h=h)))
    assert np.allclose(H, np.diag([-h, h]))


def test_tight_binding_open_chain_dispersion():
    L, J = 3, 0.8
    hm = single_particle_matrix(HamiltonianSpec("tight_binding", L=L, J=J))
    k = np.arange(1, L + 1)
    assert np.allclose(np.sort(np.linalg.eigvalsh(hm)), np.sort(-2 * J * np.cos(np.pi * k / (L + 1))))


def test_boson_dimension():
    spec = HamiltonianSpec("tight_binding", L=3, statistics="boson", boson_cutoff=2)
    assert build_hamiltonian(spec).shape == (27, 27)


def test_non_hermitian_hopping_rejected():
    with pytest.raises(ModelError):
        HamiltonianSpec("tight_binding", L=2, hopping=np.array([[0, 1], [2, 0]]))


def test_dimension_cap():
    with pytest.raises(ModelError):
        build_hamiltonian(HamiltonianSpec("xxz", L=10, max_dim=256))


def test_fermion_anticommutators():
    spec = HamiltonianSpec("tight_binding", L=3)
    c = [site_operator("annihilate", i, spec) for i in (1, 2, 3)]
    for i, j in itertools.product(range(3), repeat=2):
        acomm = c[i] @ c[j].conj().T + c[j].conj().T @ c[i]
        assert np.allclose(acomm, np.eye(8) * (i == j))
        assert np.allclose(c[i] @ c[j] + c[j] @ c[i], 0)


@pytest.mark.parametrize("L", [1, 2, 3, 4])
def test_number_is_half_one_plus_sz(L):
    spec = HamiltonianSpec("xxz", L=L)
    for i in range(1, L + 1):
        n = site_operator("create", i, spec) @ site_operator("annihilate", i, spec)
        assert np.allclose(n, 0.5 * (np.eye(2**L) + site_operator("sz", i, spec)))


def test_spin_ladder_is_number():
    spec = HamiltonianSpec("xxz", L=3)
    sp_sm = site_operator("sp", 2, spec) @ site_operator("sm", 2, spec)
    assert np.allclose(sp_sm, site_operator("number", 2, spec))


def test_site_out_of_range():
    with pytest.raises(ModelError):
        site_operator("sz", 4, HamiltonianSpec("xxz", L=3))


def test_aah_first_site():
    v = potential_values(PotentialSpec("aah", lam=1.0), 3)
    assert v[0] == pytest.approx(2 * np.cos(2 * np.pi * GOLDEN))
    assert v[0] == pytest.approx(-1.4747378, abs=1e-6)


def test_aah_alpha_guard():
    with pytest.raises(ModelError):
        potential_values(PotentialSpec("aah", lam=1.0, alpha=1.0), 5)


def test_fibonacci_values_and_word():
    v = potential_values(PotentialSpec("fibonacci", h=1.0), 50)
    assert set(np.unique(v)) <= {-0.5, 0.5}
    word = fibonacci_word(13)
    # golden-mean Sturmian word: 1s have density g - 1, so "00" never occurs
    assert "00" not in "".join(map(str, word))
    assert word.sum() == int(np.floor(14 * GOLDEN) - np.floor(GOLDEN)) - 13


def test_uniform_zero():
    assert np.array_equal(potential_values(PotentialSpec("uniform", h=0.0), 4), np.zeros(4))


@given(st.floats(0.01, 5.0), st.integers(0, 2**31 - 1))
def test_disorder_bounds_and_determinism(h, seed):
    spec = PotentialSpec("disorder", h=h, seed=seed)
    v = potential_values(spec, 30)
    assert np.all(np.abs(v) <= h)
    assert np.array_equal(v, potential_values(spec, 30))


@given(st.integers(1, 5), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_hermitian_all_families(L, J, delta, h):
    for spec in (HamiltonianSpec("xxz", L=L, J=J, delta=delta, potential=PotentialSpec("uniform", h=h)),
                 HamiltonianSpec("xyz", L=L, Jx=J, Jy=delta, Jz=h),
                 HamiltonianSpec("tight_binding", L=L, J=J, potential=PotentialSpec("uniform", h=h))):
        H = dense(build_hamiltonian(spec))
        assert np.abs(H - H.conj().T).max() < 1e-12


@given(st.integers(1, 6), st.integers(0, 1000))
def test_jordan_wigner_spectrum(L, seed):
    rng = np.random.default_rng(seed)
    J = rng.uniform(0.2, 2)
    spec = HamiltonianSpec("xxz", L=L, J=J, potential=PotentialSpec("disorder", h=1.0, seed=seed))
    eps = np.linalg.eigvalsh(single_particle_matrix(spec))
    many = sorted(sum(eps[list(s)]) for r in range(L + 1) for s in itertools.combinations(range(L), r))
    # Jordan-Wigner energies are measured from the all-down reference energy -sum h_i
    ref = -np.sum(spec.fields())
    E = np.sort(np.linalg.eigvalsh(dense(build_hamiltonian(spec))))
    assert np.allclose(E, np.array(many) + ref, atol=1e-9)


def test_magnetization_conservation():
    xxz = HamiltonianSpec("xxz", L=4, J=1.0, delta=0.7, potential=PotentialSpec("uniform", h=0.3))
    xyz = HamiltonianSpec("xyz", L=4, Jx=1.0, Jy=0.5, Jz=0.2)
    for spec, conserved in ((xxz, True), (xyz, False)):
        H = dense(build_hamiltonian(spec))
        M = sum(site_operator("sz", i, spec) for i in range(1, 5))
        norm = np.abs(H @ M - M @ H).max()
        assert (norm < 1e-12) == conserved
