import numpy as np
import pytest
from hypothesis import given, strategies as st

from openchain.analysis import fit_exponent
from openchain.analytic import toeplitz_coherence, xx_dephasing_current
from openchain.baths import BathSpec
from openchain.gaussian import (GaussianError, boundary_driven_chain, build_lyapunov, chain_matrix,
                                covariance_current, covariance_from_density_matrix, evolve_covariance,
                                majorana_covariance, solve_steady, solve_steady_dephasing)
from openchain.generators import build_lme
from openchain.liouville import steady_state
from openchain.model import HamiltonianSpec, PotentialSpec, potential_values


def test_diffusion_matrix_boundary_baths():
    sys = boundary_driven_chain(5, 1.0, 0.6, 0.8, 0.3)
    assert np.allclose(sys.D, np.diag([0.6 * 0.8, 0, 0, 0, 0.6 * 0.3]))
    assert np.allclose(sys.W, 1j * chain_matrix(5) + np.diag([0.3, 0, 0, 0, 0.3]))


def test_no_baths_unstable():
    sys = build_lyapunov(chain_matrix(3))
    assert np.allclose(sys.W, 1j * chain_matrix(3)) and np.allclose(sys.D, 0)
    assert not sys.is_stable()
    with pytest.raises(GaussianError):
        solve_steady(sys)


def test_fermion_boson_sign():
    h = np.array([[0.5, 0.1], [0.1, -0.2]])
    baths_f = [BathSpec("fermion", site=1, gamma=0.4, beta=1.0, mu=0.0)]
    baths_b = [BathSpec("boson", site=1, gamma=0.4, beta=1.0, mu=0.0)]
    Wf = build_lyapunov(h, baths_f, "fermion").W
    Wb = build_lyapunov(h, baths_b, "boson").W
    n_f, n_b = 1 / (np.exp(0.5) + 1), 1 / (np.exp(0.5) - 1)
    assert Wf[0, 0] == pytest.approx(0.5j + 0.4 * ((1 - n_f) + n_f) / 2)
    assert Wb[0, 0] == pytest.approx(0.5j + 0.4 * ((1 + n_b) - n_b) / 2)


def test_toeplitz_solution():
    gamma, J, n1, nL = 0.4, 0.7, 0.9, 0.2
    sys = boundary_driven_chain(8, J, gamma, n1, nL)
    st = solve_steady(sys)
    x = toeplitz_coherence(gamma, J, n1, nL)
    for j in range(7):
        assert st.C[j, j + 1] == pytest.approx(x, abs=1e-12)
        assert st.current(sys.h, j + 1) == pytest.approx(2 * J * x.imag * -1, abs=1e-12)
    assert st.residual < 1e-10


def test_equilibrium_is_flat():
    st = solve_steady(boundary_driven_chain(6, 1.0, 0.5, 0.3, 0.3))
    assert np.allclose(st.C, 0.3 * np.eye(6), atol=1e-12)
    assert abs(covariance_current(st.C, chain_matrix(6), 3)) < 1e-13


def test_liouvillian_equivalence_l4():
    L, J, gamma = 4, 0.8, 0.6
    spec = HamiltonianSpec("tight_binding", L=L, J=J, potential=PotentialSpec("disorder", h=0.5, seed=3))
    baths = [BathSpec("fermion", site=1, gamma=gamma, beta=1.0, mu=1.0),
             BathSpec("fermion", site=L, gamma=gamma, beta=2.0, mu=-0.5)]
    rho = steady_state(build_lme(spec, baths)).rho
    h = chain_matrix(L, J, potential_values(spec.potential, L))
    C = solve_steady(build_lyapunov(h, baths)).C
    assert np.abs(covariance_from_density_matrix(rho, spec) - C).max() < 1e-8


def test_dephasing_two_sites():
    st = solve_steady(boundary_driven_chain(2, 1.0, 1.0, 1.0, 0.0, dephasing=1.0))
    assert st.current(chain_matrix(2), 1) == pytest.approx(2 / 7, abs=1e-12)


def test_dephasing_zero_matches_lyapunov():
    sys = boundary_driven_chain(7, 1.0, 0.5, 0.9, 0.1)
    assert np.abs(solve_steady_dephasing(sys).C - solve_steady(sys).C).max() < 1e-12


def test_dephasing_linear_profile():
    st = solve_steady(boundary_driven_chain(50, 1.0, 1.0, 1.0, 0.0, dephasing=0.5))
    n = st.occupations[1:-1]
    line = np.polyval(np.polyfit(np.arange(n.size), n, 1), np.arange(n.size))
    assert np.abs(n - line).max() < 1e-8


@given(st.integers(2, 60), st.floats(0.05, 3.0), st.floats(0.05, 3.0))
def test_dephasing_closed_form(L, gamma, Gamma):
    st = solve_steady(boundary_driven_chain(L, 1.0, gamma, 1.0, 0.0, dephasing=Gamma))
    ref = xx_dephasing_current(gamma, Gamma, 1.0, L, 1.0, 0.0)
    got = [st.current(chain_matrix(L), k) for k in range(1, L)]
    assert np.allclose(got, ref, rtol=1e-9, atol=0)


def test_dephasing_leaves_diagonal_untouched():
    from openchain.gaussian import LyapunovSystem

    sys = boundary_driven_chain(4, 1.0, 0.5, 1.0, 0.0, dephasing=0.7)
    plain = LyapunovSystem(sys.h, sys.gamma_minus, sys.gamma_plus, np.zeros(4))
    C = np.random.default_rng(0).normal(size=(4, 4)) + 0j
    C = C + C.T
    diff = sys.rhs(C) - plain.rhs(C)
    assert np.allclose(np.diag(diff), 0)


def test_evolve_covariance_limits():
    sys = boundary_driven_chain(4, 1.0, 0.5, 1.0, 0.0)
    C0 = 0.5 * np.eye(4, dtype=complex)
    out = evolve_covariance(sys, C0, [0.0, 400.0])
    assert np.array_equal(out[0].C, C0)
    assert np.abs(out[1].C - solve_steady(sys).C).max() < 1e-8
    deph = boundary_driven_chain(4, 1.0, 0.5, 1.0, 0.0, dephasing=0.3)
    C_end = evolve_covariance(deph, C0, [400.0])[-1].C
    assert np.abs(C_end - solve_steady(deph).C).max() < 1e-8
    assert np.abs(C_end - C_end.conj().T).max() < 1e-12


def test_single_site_relaxation():
    gamma, n = 0.7, 0.3
    sys = build_lyapunov(np.array([[0.4]]), [BathSpec("target", site=1, gamma=gamma, f=n)])
    times = np.linspace(0, 5, 6)
    got = [s.C[0, 0].real for s in evolve_covariance(sys, np.array([[1.0 + 0j]]), times)]
    assert np.allclose(got, n + (1 - n) * np.exp(-gamma * times), atol=1e-10)


def test_particle_balance_first_bond():
    gamma, n1 = 0.6, 0.9
    sys = boundary_driven_chain(6, 1.0, gamma, n1, 0.1)
    st = solve_steady(sys)
    inflow = gamma * (n1 - st.occupations[0])
    assert inflow == pytest.approx(st.current(sys.h, 1), abs=1e-12)


def test_fibonacci_currents_decrease():
    sizes = [34, 55, 89, 144, 233]
    cur = []
    for L in sizes:
        sys = boundary_driven_chain(L, onsite=potential_values(PotentialSpec("fibonacci", h=1.0), L))
        cur.append(solve_steady(sys).current(sys.h, L // 2))
    assert np.all(np.diff(cur) < 0)
    fit = fit_exponent(sizes, cur, L_min=34)
    assert 0 < fit.alpha < np.inf


def test_majorana_covariance_antisymmetric():
    C = solve_steady(boundary_driven_chain(3, 1.0, 0.5, 0.8, 0.1)).C
    M = majorana_covariance(C)
    assert M.shape == (6, 6)
    assert np.allclose(M, -M.T)
    assert np.abs(np.linalg.eigvals(1j * M)).max() <= 1 + 1e-12


def test_large_chain_lyapunov():
    st = solve_steady(boundary_driven_chain(300, 1.0, 1.0, 1.0, 0.0, dephasing=0.2))
    assert st.residual < 1e-10
