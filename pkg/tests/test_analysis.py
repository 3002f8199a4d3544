import numpy as np
import pytest
from hypothesis import given, strategies as st

from openchain.analysis import (
    FitError,
    Regime,
    RegimeThresholds,
    classify,
    dephasing_crossover,
    fit_exponent,
    rectification,
    spreading_exponent,
)
from openchain.analytic import xx_dephasing_current

SIZES = [16, 32, 64, 128, 256, 512]


def test_constant_current_is_ballistic():
    fit = fit_exponent(SIZES, np.full(len(SIZES), 0.3))
    assert fit.alpha == pytest.approx(0.0, abs=0.01)
    assert fit.regime is Regime.BALLISTIC


def test_dephasing_data_diffusive():
    sizes = np.arange(50, 401, 25)
    cur = [xx_dephasing_current(1.0, 1.0, 1.0, int(L), 1.0, 0.0) for L in sizes]
    fit = fit_exponent(sizes, cur, L_min=50)
    assert fit.alpha == pytest.approx(1.0, abs=0.02)
    assert fit.regime is Regime.DIFFUSIVE
    assert fit.ci[0] <= fit.alpha <= fit.ci[1]
    assert fit.window == (50, 400)


@pytest.mark.parametrize("alpha", [0.5, 1.5, 2.0])
def test_exact_power_law(alpha):
    L = np.array(SIZES, dtype=float)
    fit = fit_exponent(L, 3.0 * L**-alpha)
    assert fit.alpha == pytest.approx(alpha, abs=1e-10)
    assert fit.r2 == pytest.approx(1.0)
    assert fit.nu == pytest.approx(1 / (alpha + 1))


def test_exponential_decay_localized():
    L = np.array(SIZES, dtype=float)
    fit = fit_exponent(L, np.exp(-L / 30.0))
    assert fit.regime is Regime.LOCALIZED
    assert fit.L0 == pytest.approx(30.0, rel=1e-8)
    assert fit.nu == 0.0


@given(st.floats(1e-6, 1e6), st.floats(0.0, 3.0))
def test_scale_invariance(c, alpha):
    L = np.array(SIZES, dtype=float)
    J = (1 + 0.05 * np.sin(L)) * L**-alpha
    a, b = fit_exponent(L, J, rtol=0.2), fit_exponent(L, c * J, rtol=0.2)
    assert a.alpha == pytest.approx(b.alpha, abs=1e-9)
    assert a.regime is b.regime


def test_nu_anchors():
    assert spreading_exponent(0) == 1
    assert spreading_exponent(1) == 0.5
    assert spreading_exponent(-0.5) == 2
    assert spreading_exponent(2) == pytest.approx(1 / 3)
    assert spreading_exponent(np.inf) == 0


@pytest.mark.parametrize("alpha,regime", [(0.05, Regime.BALLISTIC), (0.5, Regime.SUPERDIFFUSIVE),
                                          (1.08, Regime.DIFFUSIVE), (1.7, Regime.SUBDIFFUSIVE),
                                          (np.inf, Regime.LOCALIZED)])
def test_classify(alpha, regime):
    assert classify(alpha) is regime


def test_custom_thresholds():
    assert classify(0.15, RegimeThresholds(ballistic=0.2)) is Regime.BALLISTIC
    assert classify(0.15) is Regime.SUPERDIFFUSIVE


def test_nonmonotone_rejected():
    cur = [1.0, 0.8, 0.9, 0.5, 0.4, 0.3]
    with pytest.raises(FitError) as exc:
        fit_exponent(SIZES, cur)
    assert "32" in str(exc.value) and "64" in str(exc.value)


def test_input_validation():
    with pytest.raises(FitError):
        fit_exponent([8, 16, 32], [1, 0.5, 0.25])
    with pytest.raises(FitError):
        fit_exponent(SIZES, [1, 0.5, 0.0, -1, -2, -3])
    with pytest.raises(FitError):
        fit_exponent(SIZES, np.ones(6), L_min=300)


def test_default_window():
    L = np.array([4, 8, 16, 32, 64, 128])
    fit = fit_exponent(L, L**-1.0)
    assert fit.window == (8, 128)
    fit = fit_exponent([10, 12, 14, 16, 18], np.ones(5))
    # window [20, 18] is empty: the four largest sizes are used
    assert fit.window == (12, 18)


def test_to_dict_serializable():
    import json

    fit = fit_exponent(SIZES, np.array(SIZES, dtype=float) ** -1.0)
    d = json.loads(json.dumps(fit.to_dict()))
    assert d["regime"] == "diffusive"
    assert d["nu"] == pytest.approx(0.5)


def test_crossover_ballistic():
    g1, g2 = dephasing_crossover(0.0, 0.1), dephasing_crossover(0.0, 0.4)
    assert g1.c_gamma / g2.c_gamma == pytest.approx(4.0)
    assert g1.L_gamma == pytest.approx(10.0)
    assert g1.plateau_exponent == -1


def test_crossover_diffusive_independent():
    assert dephasing_crossover(1.0, 0.01).c_gamma == pytest.approx(dephasing_crossover(1.0, 3.0).c_gamma)


def test_crossover_dephasing_assisted():
    small, larger = dephasing_crossover(2.0, 1e-3), dephasing_crossover(2.0, 1e-2)
    L = 1e3
    assert L > larger.L_gamma and L > small.L_gamma
    assert larger.current(L) * L > small.current(L) * L


@given(st.floats(0.0, 3.0), st.floats(1e-3, 10.0))
def test_crossover_continuous(alpha0, Gamma):
    c = dephasing_crossover(alpha0, Gamma, c0=2.0)
    Lg = c.L_gamma
    assert c.c0 / Lg**alpha0 == pytest.approx(c.c_gamma / Lg, rel=1e-9)
    assert c.c_gamma == pytest.approx(2.0 * Gamma**c.plateau_exponent, rel=1e-9)


def test_crossover_validation():
    with pytest.raises(ValueError):
        dephasing_crossover(1.0, 0.0)


def test_rectification():
    assert rectification(1.0, -1.0) == (1.0, 0.0)
    R, C = rectification(2.0, -1.0)
    assert R == 2.0 and C == pytest.approx(1 / 3)
    R, C = rectification(1.0, -1e-12)
    assert C == pytest.approx(1.0, abs=1e-11)
    assert rectification(1.0, 0.0) == (np.inf, 1.0)
    with pytest.raises(ValueError):
        rectification(0.0, 0.0)
    with pytest.raises(ValueError):
        rectification(1.0, 0.5)
