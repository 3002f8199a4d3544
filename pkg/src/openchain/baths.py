"""Reservoir occupations, spectral densities and golden-rule rates."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import integrate, special

__all__ = [
    "Statistics",
    "SpectralKind",
    "SpectralDensity",
    "BathSpec",
    "BathError",
    "fermi",
    "bose",
    "occupation",
    "vacancy",
    "rate",
    "golden_rule_rates",
    "principal_value_shifts",
    "reaction_coordinate",
    "load_tabulated",
]

QUAD_RTOL = 1e-8


class BathError(ValueError):
    """Invalid bath input or an integral that does not exist."""


class Statistics(str, Enum):
    FERMION = "fermion"
    BOSON = "boson"
    TARGET = "target"


class SpectralKind(str, Enum):
    WIDEBAND = "wideband"
    SEMI_ELLIPTIC = "semi_elliptic"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class SpectralDensity:
    """Coupling spectral density ``Gamma(omega)``.

    ``wideband`` is flat with value ``gamma``. ``semi_elliptic`` is the
    density of a semi-infinite tight-binding lead with band centre ``eps``,
    hopping ``tau`` and tunnel amplitude ``tau_a``:
    ``Gamma(w) = (tau_a/tau)**2 * sqrt(4 tau**2 - (w - eps)**2)`` inside the band.
    ``tabulated`` linearly interpolates samples ``values`` on ``grid``.
    """

    kind: SpectralKind = SpectralKind.WIDEBAND
    gamma: float = 1.0
    eps: float = 0.0
    tau: float = 1.0
    tau_a: float = 0.1
    grid: tuple[float, ...] | None = None
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SpectralKind(self.kind))
        if self.kind is SpectralKind.TABULATED:
            if self.grid is None or self.values is None or len(self.grid) != len(self.values):
                raise BathError("tabulated spectral density needs grid and values of equal length")
            g = np.asarray(self.grid, dtype=float)
            if np.any(np.diff(g) <= 0):
                raise BathError("tabulated grid must be strictly increasing")
            if np.any(np.asarray(self.values) < 0):
                raise BathError("spectral density must be nonnegative")
            object.__setattr__(self, "grid", tuple(map(float, self.grid)))
            object.__setattr__(self, "values", tuple(map(float, self.values)))
        if self.kind is SpectralKind.WIDEBAND and self.gamma < 0:
            raise BathError("wideband rate must be nonnegative")

    @property
    def support(self) -> tuple[float, float]:
        if self.kind is SpectralKind.WIDEBAND:
            return (-np.inf, np.inf)
        if self.kind is SpectralKind.SEMI_ELLIPTIC:
            return (self.eps - 2 * self.tau, self.eps + 2 * self.tau)
        return (self.grid[0], self.grid[-1])

    @property
    def peak(self) -> float:
        """``Gamma(eps)`` for the semi-elliptic band."""
        return 2 * self.tau_a**2 / self.tau

    def scaled(self, factor: float) -> "SpectralDensity":
        if self.kind is SpectralKind.WIDEBAND:
            return SpectralDensity(gamma=self.gamma * factor)
        if self.kind is SpectralKind.SEMI_ELLIPTIC:
            return SpectralDensity(SpectralKind.SEMI_ELLIPTIC, eps=self.eps, tau=self.tau,
                                   tau_a=self.tau_a * np.sqrt(factor))
        return SpectralDensity(SpectralKind.TABULATED, grid=self.grid,
                               values=tuple(v * factor for v in self.values))


def load_tabulated(path: str | Path) -> SpectralDensity:
    """Read a two-column ``omega,Gamma`` CSV (a header row is allowed)."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(rec[0]), float(rec[1])))
            except ValueError:
                if rows:
                    raise
    w, g = zip(*rows)
    return SpectralDensity(SpectralKind.TABULATED, grid=w, values=g)


@dataclass(frozen=True)
class BathSpec:
    """One reservoir attached to a single site.

    Parameters
    ----------
    statistics : Statistics
        ``fermion``, ``boson`` or ``target`` (magnetization-target bath with a
        fixed occupation ``f`` independent of frequency).
    site : int
        1-based attachment site.
    gamma : float, optional
        Local rate used by the LME. If omitted it is taken from ``spectral``
        at the local site energy.
    spectral : SpectralDensity, optional
        Required by the global and Redfield equations; defaults to a wideband
        density of height ``gamma``.
    beta, mu : float
        Inverse temperature and chemical potential of thermal baths.
    f, eta : float, optional
        Target occupation of ``target`` baths, ``f = (1 + eta) / 2``.
    """

    statistics: Statistics = Statistics.FERMION
    site: int = 1
    gamma: float | None = None
    spectral: SpectralDensity | None = None
    beta: float = 1.0
    mu: float = 0.0
    f: float | None = None
    eta: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "statistics", Statistics(self.statistics))
        if self.gamma is not None and self.gamma < 0:
            raise BathError("bath rate gamma must be nonnegative")
        if self.statistics is Statistics.TARGET:
            if self.f is None and self.eta is None:
                raise BathError("target bath needs f or eta")
            if self.f is not None and self.eta is not None and not np.isclose(self.f, (1 + self.eta) / 2):
                raise BathError("f and eta disagree: f must equal (1 + eta)/2")
            f = self.f if self.f is not None else (1 + self.eta) / 2
            if not 0 <= f <= 1:
                raise BathError(f"target occupation {f} outside [0, 1]")
            object.__setattr__(self, "f", float(f))
            object.__setattr__(self, "eta", 2 * float(f) - 1)
        if self.gamma is None and self.spectral is None:
            raise BathError("bath needs gamma or a spectral density")

    @property
    def density(self) -> SpectralDensity:
        if self.spectral is not None:
            return self.spectral
        return SpectralDensity(SpectralKind.WIDEBAND, gamma=self.gamma)

    def local_rate(self, omega: float) -> float:
        if self.gamma is not None:
            return float(self.gamma)
        return float(rate(self.spectral, omega))


def fermi(x):
    """``1 / (exp(x) + 1)`` evaluated without overflow."""
    return special.expit(-np.asarray(x, dtype=float))


def bose(x):
    """``1 / (exp(x) - 1)`` for ``x > 0``."""
    return 1.0 / np.expm1(np.asarray(x, dtype=float))


def occupation(spec: BathSpec, omega):
    """Bath occupation at energy ``omega``."""
    if spec.statistics is Statistics.TARGET:
        return np.full_like(np.asarray(omega, dtype=float), spec.f) + 0.0
    if spec.statistics is Statistics.FERMION:
        return fermi(spec.beta * (np.asarray(omega, dtype=float) - spec.mu))
    x = spec.beta * (np.asarray(omega, dtype=float) - spec.mu)
    if np.any(x <= 0):
        raise BathError("bosonic occupation requires beta (omega - mu) > 0")
    return bose(x)


def vacancy(spec: BathSpec, omega):
    """``1 - f`` for fermionic and target baths, free of cancellation when ``f`` is close to one."""
    if spec.statistics is Statistics.FERMION:
        return fermi(-spec.beta * (np.asarray(omega, dtype=float) - spec.mu))
    if spec.statistics is Statistics.TARGET:
        return np.full_like(np.asarray(omega, dtype=float), 1.0 - spec.f) + 0.0
    raise BathError("vacancy is defined for fermionic and target baths only")


def rate(sd: SpectralDensity, omega):
    """Spectral density ``Gamma(omega)``; zero outside the support."""
    w = np.asarray(omega, dtype=float)
    if sd.kind is SpectralKind.WIDEBAND:
        return np.full_like(w, sd.gamma) + 0.0
    if sd.kind is SpectralKind.SEMI_ELLIPTIC:
        x = 4 * sd.tau**2 - (w - sd.eps) ** 2
        return (sd.tau_a / sd.tau) ** 2 * np.sqrt(np.clip(x, 0.0, None))
    lo, hi = sd.support
    if np.any((w < lo) | (w > hi)):
        raise BathError(f"frequency outside tabulated grid [{lo}, {hi}]")
    return np.interp(w, sd.grid, sd.values)


def golden_rule_rates(sd: SpectralDensity, spec: BathSpec, omega: float) -> tuple[float, float]:
    """Absorption and emission rates for a system transition of energy ``omega``.

    Fermions (and target baths): ``(Gamma f, Gamma (1 - f))``. Bosons:
    ``(Gamma n, Gamma (n + 1))`` where ``Gamma`` is continued as an odd
    function to negative frequencies.
    """
    omega = float(omega)
    if spec.statistics is Statistics.BOSON:
        if omega == spec.mu:
            raise BathError("bosonic rates are undefined at omega = mu")
        g = float(np.sign(omega) * rate(sd, abs(omega)))
        n = float(bose(spec.beta * (omega - spec.mu)))
        return g * n, g * (n + 1)
    g = float(rate(sd, omega))
    return g * float(occupation(spec, omega)), g * float(vacancy(spec, omega))


def _pv(func, omega: float, lo: float, hi: float) -> float:
    """``P int_lo^hi func(x) / (x - omega) dx``."""
    if not lo < omega < hi:
        val, _ = integrate.quad(lambda x: func(x) / (x - omega), lo, hi, epsrel=QUAD_RTOL, limit=400)
        return val
    val, _ = integrate.quad(func, lo, hi, weight="cauchy", wvar=omega, epsrel=QUAD_RTOL, limit=400)
    return val


def principal_value_shifts(sd: SpectralDensity, spec: BathSpec, omega: float) -> tuple[float, float]:
    """Principal-value parts ``(S_abs, S_emit)`` of the half-sided bath transforms.

    ``S_abs = P int dw'/2pi Gamma(w') n(w') / (w' - omega)`` and
    ``S_emit = P int dw'/2pi Gamma(w') (1 -+ n(w')) / (omega - w')``.
    A wideband density has no finite principal value; zero is returned so the
    shift is absorbed into the system Hamiltonian.
    """
    if sd.kind is SpectralKind.WIDEBAND:
        return 0.0, 0.0
    lo, hi = sd.support
    sign = -1.0 if spec.statistics is Statistics.BOSON else 1.0

    def occ(x):
        if spec.statistics is Statistics.TARGET:
            return spec.f
        if spec.statistics is Statistics.FERMION:
            return float(fermi(spec.beta * (x - spec.mu)))
        return float(bose(spec.beta * (x - spec.mu))) if x > spec.mu else 0.0

    s_abs = _pv(lambda x: float(rate(sd, x)) * occ(x), omega, lo, hi) / (2 * np.pi)
    s_emit = -_pv(lambda x: float(rate(sd, x)) * (1 - sign * occ(x)), omega, lo, hi) / (2 * np.pi)
    return s_abs, s_emit


def _band_integral(sd: SpectralDensity, g) -> float:
    """``int Gamma(w) g(w) dw`` over the support."""
    if sd.kind is SpectralKind.WIDEBAND:
        raise BathError("moments of a wideband density diverge")
    if sd.kind is SpectralKind.SEMI_ELLIPTIC:
        # w = eps + 2 tau sin(theta) removes the square-root band edges
        pref = (sd.tau_a / sd.tau) ** 2 * 4 * sd.tau**2

        def integrand(th):
            w = sd.eps + 2 * sd.tau * np.sin(th)
            return pref * np.cos(th) ** 2 * g(w)

        val, _ = integrate.quad(integrand, -np.pi / 2, np.pi / 2, epsrel=QUAD_RTOL, limit=400)
        return val
    grid = np.asarray(sd.grid)
    val, _ = integrate.quad(lambda w: float(rate(sd, w)) * g(w), grid[0], grid[-1],
                            epsrel=QUAD_RTOL, limit=max(400, 4 * len(grid)), points=grid[1:-1][:100])
    return val


def reaction_coordinate(sd: SpectralDensity) -> tuple[float, float]:
    """Frequency ``Omega_1`` and coupling ``lambda_1`` of the reaction coordinate.

    ``Omega_1**2 = int w Gamma / int Gamma / w`` and
    ``lambda_1**2 = int w Gamma / (2 pi Omega_1)``.
    """
    lo, hi = sd.support
    if lo <= 0 <= hi and float(rate(sd, 0.0)) > 0:
        raise BathError("int Gamma(w)/w dw diverges: support contains w = 0 with Gamma(0) > 0")
    if lo < 0 < hi:
        raise BathError("reaction coordinate requires a support on one side of w = 0")
    m1 = _band_integral(sd, lambda w: w)
    m_1 = _band_integral(sd, lambda w: 1.0 / w)
    if m_1 <= 0 or m1 <= 0:
        raise BathError("reaction-coordinate moments must be positive")
    omega1 = np.sqrt(m1 / m_1)
    lam1 = np.sqrt(m1 / (2 * np.pi * omega1))
    return float(omega1), float(lam1)
