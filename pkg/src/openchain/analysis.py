"""Transport-regime classification and derived metrics."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy import stats

__all__ = [
    "FitError",
    "Regime",
    "RegimeThresholds",
    "TransportFit",
    "fit_exponent",
    "classify",
    "spreading_exponent",
    "Crossover",
    "dephasing_crossover",
    "rectification",
]

logger = logging.getLogger(__name__)


class FitError(ValueError):
    """Scan data unsuitable for a scaling fit."""


class Regime(str, Enum):
    BALLISTIC = "ballistic"
    SUPERDIFFUSIVE = "superdiffusive"
    DIFFUSIVE = "diffusive"
    SUBDIFFUSIVE = "subdiffusive"
    LOCALIZED = "localized"


@dataclass(frozen=True)
class RegimeThresholds:
    """Half-widths of the bands around the ballistic and diffusive anchors."""

    ballistic: float = 0.1
    diffusive: float = 0.1
    exp_preference: float = 10.0


def classify(alpha: float, thresholds: RegimeThresholds = RegimeThresholds()) -> Regime:
    if not np.isfinite(alpha):
        return Regime.LOCALIZED
    if abs(alpha) <= thresholds.ballistic:
        return Regime.BALLISTIC
    if abs(alpha - 1) <= thresholds.diffusive:
        return Regime.DIFFUSIVE
    return Regime.SUPERDIFFUSIVE if alpha < 1 else Regime.SUBDIFFUSIVE


def spreading_exponent(alpha: float) -> float:
    """Wavepacket spreading exponent ``nu = 1/(alpha + 1)`` (0 when localized)."""
    return 0.0 if not np.isfinite(alpha) else 1.0 / (alpha + 1.0)


@dataclass
class TransportFit:
    """Result of a ``J ~ 1/L**alpha`` fit.

    ``alpha`` is ``inf`` when the exponential form wins; ``L0`` is then the
    localization length.
    """

    alpha: float
    ci: tuple[float, float]
    regime: Regime
    window: tuple[int, int]
    r2: float
    L0: float | None = None
    residual_power: float = 0.0
    residual_exp: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def nu(self) -> float:
        return spreading_exponent(self.alpha)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "ci": list(self.ci), "regime": self.regime.value,
                "window": list(self.window), "r2": self.r2, "L0": self.L0, "nu": self.nu,
                "residual_power": self.residual_power, "residual_exp": self.residual_exp}


def _linfit(x, y, confidence):
    n = len(x)
    if np.ptp(y) == 0:
        return 0.0, float(y[0]), 0.0, 1.0, 0.0
    res = stats.linregress(x, y)
    ssr = float(np.sum((y - (res.intercept + res.slope * x)) ** 2))
    half = stats.t.ppf(0.5 + confidence / 2, n - 2) * res.stderr
    return res.slope, res.intercept, half, res.rvalue ** 2, ssr


def fit_exponent(sizes: Sequence[int], currents: Sequence[float], L_min: int | None = None,
                 L_max: int | None = None, thresholds: RegimeThresholds = RegimeThresholds(),
                 confidence: float = 0.95, rtol: float = 1e-8) -> TransportFit:
    """Fit ``log J = c - alpha log L`` over the window ``[L_min, L_max]``.

    By default the window drops boundary-dominated sizes below
    ``max(8, 2 * sizes[0])``; if fewer than four sizes survive, the four
    largest are used. An exponential ``J ~ exp(-L/L0)`` is preferred when
    its residual is at least ``thresholds.exp_preference`` times smaller.

    Raises
    ------
    FitError
        Fewer than four sizes, nonpositive currents or currents increasing
        with ``L`` beyond ``rtol``.
    """
    L = np.asarray(sizes, dtype=float)
    J = np.asarray(currents, dtype=float)
    if L.shape != J.shape or L.size < 4:
        raise FitError("need at least four (size, current) pairs")
    order = np.argsort(L)
    L, J = L[order], J[order]
    if np.any(J <= 0):
        raise FitError(f"currents must be positive; got {J[J <= 0].tolist()}")
    rises = np.nonzero(J[1:] > J[:-1] * (1 + rtol))[0]
    if rises.size:
        diag = [(int(L[i]), float(J[i]), int(L[i + 1]), float(J[i + 1])) for i in rises]
        raise FitError(f"current increases with size at (L, J, L', J') = {diag}")
    lo = max(8, 2 * L[0]) if L_min is None else L_min
    hi = L[-1] if L_max is None else L_max
    mask = (L >= lo) & (L <= hi)
    if mask.sum() < 4:
        if L_min is not None:
            raise FitError(f"only {int(mask.sum())} sizes inside window [{lo}, {hi}]")
        logger.info("window [%s, %s] keeps %d sizes; using the four largest", lo, hi, int(mask.sum()))
        mask = np.zeros_like(mask)
        mask[-4:] = True
    x, y = L[mask], np.log(J[mask])
    slope, _, half, r2, ssr_pow = _linfit(np.log(x), y, confidence)
    eslope, _, _, r2_exp, ssr_exp = _linfit(x, y, confidence)
    window = (int(x[0]), int(x[-1]))
    floor = 1e-20 * x.size
    if eslope < 0 and ssr_pow > floor and ssr_exp * thresholds.exp_preference <= ssr_pow:
        return TransportFit(np.inf, (np.inf, np.inf), Regime.LOCALIZED, window, float(r2_exp),
                            L0=float(-1.0 / eslope), residual_power=float(ssr_pow), residual_exp=float(ssr_exp))
    alpha = float(-slope)
    half, r2 = float(half), float(r2)
    return TransportFit(alpha, (alpha - half, alpha + half), classify(alpha, thresholds), window, r2,
                        residual_power=float(ssr_pow), residual_exp=float(ssr_exp))


@dataclass(frozen=True)
class Crossover:
    """Predicted competition between natural transport and dephasing.

    ``current(L)`` is ``c0 / L**alpha0`` below ``L_gamma`` and
    ``c_gamma / L`` above; both branches meet at ``L_gamma``.
    """

    alpha0: float
    Gamma: float
    c0: float
    L_gamma: float
    c_gamma: float

    def current(self, L):
        L = np.asarray(L, dtype=float)
        return np.where(L < self.L_gamma, self.c0 / L ** self.alpha0, self.c_gamma / L)

    @property
    def plateau_exponent(self) -> float:
        """Exponent of ``Gamma`` in the diffusive coefficient."""
        return (self.alpha0 - 1) / (self.alpha0 + 1)


def dephasing_crossover(alpha0: float, Gamma: float, c0: float = 1.0, scale: float = 1.0) -> Crossover:
    """Crossover length ``L_gamma = scale * Gamma**(-1/(alpha0+1))`` and the matching coefficient."""
    if Gamma <= 0:
        raise ValueError("Gamma must be positive")
    if not (np.isfinite(alpha0) and alpha0 >= 0):
        raise ValueError("alpha0 must be finite and nonnegative")
    L_gamma = scale * Gamma ** (-1.0 / (alpha0 + 1.0))
    c_gamma = c0 * L_gamma ** (1.0 - alpha0)
    return Crossover(alpha0, Gamma, c0, L_gamma, c_gamma)


def rectification(J_f: float, J_b: float) -> tuple[float, float]:
    """Return ``(R, C)`` with ``R = -J_f/J_b`` and ``C = |(J_f+J_b)/(J_f-J_b)|``.

    ``R`` is ``inf`` when ``J_b`` vanishes.
    """
    if J_f == 0 and J_b == 0:
        raise ValueError("both currents vanish")
    if J_f * J_b > 0:
        raise ValueError("forward and backward currents must have opposite signs")
    R = np.inf if J_b == 0 else -J_f / J_b
    C = abs((J_f + J_b) / (J_f - J_b))
    return float(R), float(C)
