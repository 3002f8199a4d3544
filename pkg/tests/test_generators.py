import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_hermitian
from openchain.baths import BathSpec, fermi
from openchain.generators import (Counter, GeneratorError, Kind, add_dephasing, build_gme, build_lme,
                                  build_redfield, dump_bundle, pauli_rates, tilt)
from openchain.liouville import liouvillian, steady_state, vectorize
from openchain.model import HamiltonianSpec, PotentialSpec, build_hamiltonian, site_operator

EPS, BETA, MU_L, MU_R = 1.0, 1.0, 1.0, -1.0


def dense(L):
    return L.toarray() if hasattr(L, "toarray") else np.asarray(L)


def left(A, d):
    return np.kron(np.eye(d), A)


def right(A, d):
    return np.kron(A.T, np.eye(d))


def hamiltonian_part(H):
    d = H.shape[0]
    return -1j * (left(H, d) - right(H, d))


def lindblad(A):
    d = A.shape[0]
    K = A.conj().T @ A
    return np.kron(A.conj(), A) - 0.5 * left(K, d) - 0.5 * right(K, d)


def double_dot(h, eps=EPS):
    return HamiltonianSpec("tight_binding", L=2, hopping=np.array([[eps, h], [h, eps]]))


def dot_baths(gL=0.1, gR=0.07):
    return [BathSpec("fermion", site=1, gamma=gL, beta=BETA, mu=MU_L),
            BathSpec("fermion", site=2, gamma=gR, beta=BETA, mu=MU_R)]


def f(mu, w):
    return fermi(BETA * (w - mu))


def test_double_dot_lme_term_by_term():
    spec, (bL, bR) = double_dot(0.3), dot_baths()
    dL, dR = site_operator("annihilate", 1, spec), site_operator("annihilate", 2, spec)
    ref = hamiltonian_part(build_hamiltonian(spec))
    for d, b in ((dL, bL), (dR, bR)):
        ref = ref + b.gamma * ((1 - f(b.mu, EPS)) * lindblad(d) + f(b.mu, EPS) * lindblad(d.conj().T))
    assert np.abs(ref - dense(liouvillian(build_lme(spec, [bL, bR])))).max() < 1e-12


def _redfield_pair(A, B, C, d=4):
    # superoperator of [A, B rho] + [rho C, A^dag]
    D = A.conj().T
    return left(A @ B, d) - np.kron(A.T, B) + right(C @ D, d) - np.kron(C.T, D)


def test_double_dot_redfield_term_by_term():
    h = 0.3
    spec, baths = double_dot(h), dot_baths()
    dL, dR = site_operator("annihilate", 1, spec), site_operator("annihilate", 2, spec)
    ref = hamiltonian_part(build_hamiltonian(spec))
    for d, o, b in ((dL, dR, baths[0]), (dR, dL, baths[1])):
        dd, od = d.conj().T, o.conj().T
        for s, w in ((1, EPS + h), (-1, EPS - h)):
            ref = ref - b.gamma / 4 * f(b.mu, w) * _redfield_pair(d, dd + s * od, d + s * o)
            ref = ref - b.gamma / 4 * (1 - f(b.mu, w)) * _redfield_pair(dd, d + s * o, dd + s * od)
    got = dense(liouvillian(build_redfield(spec, baths)))
    assert np.abs(ref - got).max() < 1e-12


def test_redfield_falls_back_to_lme():
    spec, baths = double_dot(1e-9), dot_baths()
    a = dense(liouvillian(build_redfield(spec, baths)))
    b = dense(liouvillian(build_lme(spec, baths)))
    assert np.abs(a - b).max() < 1e-6


def test_gme_degenerate_limit_is_local():
    spec, baths = double_dot(1e-9), dot_baths()
    a = dense(liouvillian(build_gme(spec, baths, secular_tol=1e-6)))
    b = dense(liouvillian(build_lme(spec, baths)))
    assert np.abs(a - b).max() < 1e-6


def test_qubit_lme_thermal_occupation():
    h, beta = 0.4, 2.0
    spec = HamiltonianSpec("xxz", L=1, potential=PotentialSpec("uniform", h=h))
    g = build_lme(spec, [BathSpec("fermion", site=1, gamma=0.5, beta=beta, mu=0.0)])
    rho = steady_state(g).rho
    up = np.trace(site_operator("sp", 1, spec) @ site_operator("sm", 1, spec) @ rho).real
    assert up == pytest.approx(fermi(beta * 2 * h), abs=1e-12)


def test_zero_rates_give_commutator():
    spec = HamiltonianSpec("xxz", L=2)
    g = build_lme(spec, [BathSpec("target", site=1, gamma=0.0, f=0.3)])
    assert np.abs(dense(liouvillian(g)) - hamiltonian_part(build_hamiltonian(spec))).max() < 1e-15
    r = build_redfield(double_dot(0.2), dot_baths(0.0, 0.0))
    assert np.abs(dense(liouvillian(r)) - hamiltonian_part(build_hamiltonian(double_dot(0.2)))).max() < 1e-15


def test_bad_site():
    with pytest.raises(GeneratorError):
        build_lme(HamiltonianSpec("xxz", L=2), [BathSpec("target", site=3, gamma=1.0, f=0.5)])


def _random_xxz(seed, L=4):
    rng = np.random.default_rng(seed)
    return HamiltonianSpec("xxz", L=L, J=rng.uniform(0.5, 1.5), delta=rng.uniform(-1, 1),
                           potential=PotentialSpec("disorder", h=1.0, seed=seed))


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_gme_gibbs_fixed_point_and_detailed_balance(seed):
    spec, beta = _random_xxz(seed), 0.8
    g = build_gme(spec, [BathSpec("fermion", site=2, gamma=0.3, beta=beta, mu=0.0)])
    H = build_hamiltonian(spec)
    E, V = np.linalg.eigh(H)
    gibbs = V @ np.diag(np.exp(-beta * (E - E.min()))) @ V.conj().T
    gibbs /= np.trace(gibbs)
    assert np.linalg.norm(dense(liouvillian(g)) @ vectorize(gibbs)) < 1e-9
    E, W = pauli_rates(g)
    a, b = np.nonzero(W > 1e-12)
    ratio = W[a, b] / W[b, a]
    assert np.allclose(ratio, np.exp(-beta * (E[a] - E[b])), rtol=1e-10, atol=0)


def test_gme_equals_lme_for_single_qubit():
    spec = HamiltonianSpec("xxz", L=1, potential=PotentialSpec("uniform", h=0.3))
    bath = [BathSpec("fermion", site=1, gamma=0.4, beta=1.3, mu=0.1)]
    assert np.abs(dense(liouvillian(build_gme(spec, bath))) - dense(liouvillian(build_lme(spec, bath)))).max() < 1e-14


def test_dephasing_zero_is_identity():
    g = build_lme(HamiltonianSpec("xxz", L=2), [BathSpec("target", site=1, gamma=1.0, f=0.5)])
    assert add_dephasing(g, 0.0) is g


def test_spin_dephasing_fixes_diagonal_states(rng):
    spec = HamiltonianSpec("xxz", L=3)
    g = add_dephasing(build_lme(spec, []), 0.7)
    L_deph = dense(liouvillian(g)) - hamiltonian_part(build_hamiltonian(spec))
    rho = np.diag(rng.uniform(size=8)).astype(complex)
    assert np.abs(L_deph @ vectorize(rho)).max() < 1e-14


def test_dephasing_weights_are_zero():
    g = add_dephasing(build_lme(HamiltonianSpec("xxz", L=2), [BathSpec("target", site=1, gamma=1.0, f=1.0)]), 0.3)
    deph = [ch for ch in g.channels if ch.bath is None]
    assert len(deph) == 2 and all(ch.weights["particle"] == 0 for ch in deph)
    assert all(Counter("particle").weight(ch) == 0 for ch in deph)


def test_tilt_zero_is_identity():
    g = build_lme(double_dot(0.2), dot_baths())
    for q in ("particle", "energy", "activity"):
        assert np.array_equal(dense(liouvillian(tilt(g, Counter(q, 0), 0.0))), dense(liouvillian(g)))


def test_energy_counting_on_redfield():
    spec = HamiltonianSpec("tight_binding", L=3)
    baths = [BathSpec("fermion", site=1, gamma=0.1), BathSpec("fermion", site=3, gamma=0.1)]
    with pytest.raises(GeneratorError):
        tilt(build_redfield(spec, baths), Counter("energy", 0), 0.1)
    tilt(build_redfield(double_dot(0.2), dot_baths()), Counter("energy", 0), 0.1)


def test_redfield_is_not_flagged_gksl():
    assert not build_redfield(double_dot(0.2), dot_baths()).is_gksl
    assert build_lme(double_dot(0.2), dot_baths()).kind is Kind.LME


def test_dump_bundle_deterministic():
    g = build_lme(double_dot(0.2), dot_baths())
    text = dump_bundle(g)
    assert text.startswith("kind lme\ndim 4")
    assert text == dump_bundle(build_lme(double_dot(0.2), dot_baths()))
    assert text.count("channel ") == 4


BUILDERS = [build_lme, build_gme, build_redfield]


@given(st.integers(0, 10**6), st.sampled_from(BUILDERS))
def test_trace_and_hermiticity_preservation(seed, builder):
    rng = np.random.default_rng(seed)
    hop = np.diag(rng.uniform(0.5, 1.5, 2)) + rng.uniform(0.05, 0.5) * np.array([[0, 1], [1, 0]])
    spec = HamiltonianSpec("tight_binding", L=2, hopping=hop)
    baths = [BathSpec("fermion", site=1, gamma=rng.uniform(0.01, 0.3), beta=rng.uniform(0.5, 2), mu=rng.uniform(-1, 1)),
             BathSpec("fermion", site=2, gamma=rng.uniform(0.01, 0.3), beta=rng.uniform(0.5, 2), mu=rng.uniform(-1, 1))]
    L = dense(liouvillian(builder(spec, baths)))
    assert np.abs(vectorize(np.eye(4)).conj() @ L).max() < 1e-12
    X = random_hermitian(rng, 4)
    Y = (L @ vectorize(X)).reshape(4, 4, order="F")
    assert np.abs(Y - Y.conj().T).max() < 1e-12
