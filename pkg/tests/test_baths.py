import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from openchain.baths import (BathError, BathSpec, SpectralDensity, golden_rule_rates, load_tabulated,
                             occupation, principal_value_shifts, rate, reaction_coordinate, vacancy)

SEMI = SpectralDensity("semi_elliptic", eps=1.0, tau=0.5, tau_a=0.2)


def test_target_parametrizations_agree():
    b = BathSpec("target", site=1, gamma=1.0, eta=0.4)
    assert b.f == pytest.approx(0.7)
    with pytest.raises(BathError):
        BathSpec("target", site=1, gamma=1.0, f=0.2, eta=0.4)


def test_negative_rate_rejected():
    with pytest.raises(BathError):
        BathSpec("fermion", gamma=-1.0)


def test_fermion_symmetric_point():
    assert occupation(BathSpec("fermion", gamma=1, beta=2.0, mu=0.3), 0.3) == pytest.approx(0.5)


def test_fermion_log3():
    assert occupation(BathSpec("fermion", gamma=1, beta=1.0, mu=0.0), np.log(3)) == pytest.approx(0.25)


def test_boson_occupation():
    b = BathSpec("boson", gamma=1, beta=1.0)
    assert occupation(b, 60.0) == pytest.approx(0.0, abs=1e-25)
    assert occupation(b, 1.0) == pytest.approx(1 / (np.e - 1))
    with pytest.raises(BathError):
        occupation(b, -0.5)


def test_semi_elliptic_peak_and_edge():
    assert rate(SEMI, 1.0) == pytest.approx(2 * 0.2**2 / 0.5)
    assert rate(SEMI, 2.0) == pytest.approx(0.0, abs=1e-15)
    assert rate(SEMI, 2.5) == 0.0
    assert SEMI.support == (0.0, 2.0)


def test_wideband_constant():
    sd = SpectralDensity(gamma=0.3)
    assert np.allclose(rate(sd, np.array([-10.0, 0.0, 7.0])), 0.3)


def test_tabulated_extrapolation_error(tmp_path):
    path = tmp_path / "gamma.csv"
    path.write_text("omega,Gamma\n0.0,1.0\n1.0,2.0\n2.0,1.0\n")
    sd = load_tabulated(path)
    assert rate(sd, 0.5) == pytest.approx(1.5)
    with pytest.raises(BathError):
        rate(sd, 3.0)


def test_golden_rule_half_filling():
    sd = SpectralDensity(gamma=0.4)
    absorb, emit = golden_rule_rates(sd, BathSpec("fermion", gamma=0.4, beta=3.0, mu=1.2), 1.2)
    assert absorb == pytest.approx(0.2) and emit == pytest.approx(0.2)


def test_golden_rule_ratio_e():
    sd = SpectralDensity(gamma=1.0)
    absorb, emit = golden_rule_rates(sd, BathSpec("fermion", gamma=1.0, beta=1.0, mu=0.0), 1.0)
    assert emit / absorb == pytest.approx(np.e, rel=1e-12)


def test_golden_rule_zero_temperature():
    absorb, _ = golden_rule_rates(SpectralDensity(gamma=1.0), BathSpec("fermion", gamma=1.0, beta=1e6), 0.1)
    assert absorb == pytest.approx(0.0, abs=1e-300)


@given(st.floats(0.05, 5.0), st.floats(0.05, 3.0), st.floats(-2.0, 2.0))
def test_kms_grid(beta, omega, mu):
    sd = SpectralDensity(gamma=0.7)
    a, e = golden_rule_rates(sd, BathSpec("fermion", gamma=0.7, beta=beta, mu=mu), omega)
    if a > 1e-250:
        assert e / a == pytest.approx(np.exp(beta * (omega - mu)), rel=1e-12)
    ab, eb = golden_rule_rates(sd, BathSpec("boson", gamma=0.7, beta=beta, mu=0.0), omega)
    assert eb / ab == pytest.approx(np.exp(beta * omega), rel=1e-10)


def test_boson_odd_continuation():
    sd = SpectralDensity(gamma=0.5)
    spec = BathSpec("boson", gamma=0.5, beta=1.0)
    a_pos, e_pos = golden_rule_rates(sd, spec, 0.8)
    a_neg, e_neg = golden_rule_rates(sd, spec, -0.8)
    assert a_neg == pytest.approx(e_pos) and e_neg == pytest.approx(a_pos)


def test_semi_elliptic_sum_rule():
    val, _ = integrate.quad(lambda w: rate(SEMI, w), *SEMI.support, epsabs=1e-13)
    assert val / (2 * np.pi) == pytest.approx(0.2**2, rel=1e-8)


def test_reaction_coordinate_flat_band():
    a, b, g0 = 0.5, 2.0, 0.3
    sd = SpectralDensity("tabulated", grid=(a, b), values=(g0, g0))
    Omega, lam = reaction_coordinate(sd)
    assert Omega**2 == pytest.approx(((b**2 - a**2) / 2) / np.log(b / a), rel=1e-8)
    assert lam**2 == pytest.approx(g0 * (b**2 - a**2) / 2 / (2 * np.pi * Omega), rel=1e-8)


def test_reaction_coordinate_narrow_band():
    Omega, _ = reaction_coordinate(SpectralDensity("semi_elliptic", eps=3.0, tau=1e-3, tau_a=1e-3))
    assert Omega == pytest.approx(3.0, rel=1e-6)


def test_reaction_coordinate_linear_in_prefactor():
    _, lam1 = reaction_coordinate(SEMI)
    _, lam2 = reaction_coordinate(SEMI.scaled(2.0))
    assert lam2**2 == pytest.approx(2 * lam1**2, rel=1e-8)


def test_reaction_coordinate_divergence():
    with pytest.raises(BathError):
        reaction_coordinate(SpectralDensity("semi_elliptic", eps=0.0, tau=1.0, tau_a=0.1))


def test_principal_value_wideband_zero_and_semi_finite():
    spec = BathSpec("fermion", spectral=SEMI, beta=1.0, mu=1.0)
    assert principal_value_shifts(SpectralDensity(gamma=1.0), spec, 0.5) == (0.0, 0.0)
    s_abs, s_emit = principal_value_shifts(SEMI, spec, 1.3)
    assert np.isfinite(s_abs) and np.isfinite(s_emit)


def test_vacancy_no_cancellation():
    b = BathSpec("fermion", site=1, gamma=1.0, beta=2.0, mu=0.1)
    w = -15.0
    assert float(vacancy(b, w)) == pytest.approx(np.exp(2.0 * (w - 0.1)), rel=1e-12)
    assert float(vacancy(b, 0.3) + occupation(b, 0.3)) == pytest.approx(1.0, abs=1e-15)
    absorb, emit = golden_rule_rates(b.density, b, w)
    assert emit / absorb == pytest.approx(np.exp(2.0 * (w - 0.1)), rel=1e-12)
    t = BathSpec("target", site=1, gamma=1.0, f=0.25)
    assert float(vacancy(t, 1.0)) == 0.75
