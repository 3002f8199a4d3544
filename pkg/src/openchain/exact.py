"""Exact benchmarks for non-interacting dots coupled to tight-binding leads.

Finite leads are handled by diagonalizing the full single-particle
Hamiltonian (system plus lead modes) and propagating the one-body
correlation matrix; infinite wideband leads by the stationary
Green's-function integral.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as la
from scipy import integrate

from .baths import BathSpec, SpectralDensity, SpectralKind, fermi

__all__ = [
    "ExactError",
    "LeadSpec",
    "ExactSetup",
    "lead_modes",
    "total_hamiltonian",
    "exact_evolution",
    "self_energy",
    "retarded_green",
    "wideband_steady",
    "transmission",
    "landauer_current",
    "single_particle_density",
    "trace_distance",
    "fermi_function",
    "single_dot_benchmark",
    "validity_map",
    "ValidityPoint",
]

MODE_BUDGET = 20000


class ExactError(RuntimeError):
    """Budget exceeded, quadrature failure or a point on a branch cut."""


@dataclass(frozen=True)
class LeadSpec:
    """Finite tight-binding lead with ``n_sites`` sites, band centre ``eps`` and hopping ``tau``."""

    eps: float = 0.0
    tau: float = 1.0
    tau_a: float = 0.1
    n_sites: int = 100
    beta: float = 1.0
    mu: float = 0.0

    @property
    def gamma_peak(self) -> float:
        return 2 * self.tau_a**2 / self.tau

    def spectral_density(self) -> SpectralDensity:
        return SpectralDensity(SpectralKind.SEMI_ELLIPTIC, eps=self.eps, tau=self.tau, tau_a=self.tau_a)


def lead_modes(lead: LeadSpec) -> tuple[np.ndarray, np.ndarray]:
    """Mode energies ``eps - 2 tau cos(k pi/(N+1))`` and couplings ``tau_a sqrt(2/(N+1)) sin(k pi/(N+1))``."""
    N = lead.n_sites
    q = np.pi * np.arange(1, N + 1) / (N + 1)
    return lead.eps - 2 * lead.tau * np.cos(q), lead.tau_a * np.sqrt(2.0 / (N + 1)) * np.sin(q)


def fermi_function(beta: float, mu: float) -> Callable:
    return lambda w: fermi(beta * (np.asarray(w) - mu))


@dataclass(frozen=True)
class ExactSetup:
    """System matrix ``h``, optional left/right leads and the initial system covariance.

    The left lead couples to ``left_site`` and the right lead to
    ``right_site`` (1-based, default first and last system site).
    """

    h: np.ndarray
    left: LeadSpec | None = None
    right: LeadSpec | None = None
    C0: np.ndarray | None = None
    left_site: int = 1
    right_site: int | None = None

    @property
    def N(self) -> int:
        return self.h.shape[0]


def total_hamiltonian(setup: ExactSetup) -> tuple[np.ndarray, np.ndarray]:
    """Single-particle matrix of system + lead modes and the initial correlation matrix."""
    h = np.asarray(setup.h, dtype=complex)
    N = h.shape[0]
    blocks, occ = [], []
    leads = [(setup.left, setup.left_site), (setup.right, setup.right_site or N)]
    n_tot = N + sum(l.n_sites for l, _ in leads if l is not None)
    if n_tot > MODE_BUDGET:
        raise ExactError(f"{n_tot} single-particle modes exceed the budget of {MODE_BUDGET}")
    Ht = np.zeros((n_tot, n_tot), dtype=complex)
    Ht[:N, :N] = h
    C0 = np.zeros((n_tot, n_tot), dtype=complex)
    C0[:N, :N] = np.zeros((N, N)) if setup.C0 is None else setup.C0
    pos = N
    for lead, site in leads:
        if lead is None:
            continue
        e, t = lead_modes(lead)
        sl = slice(pos, pos + lead.n_sites)
        Ht[sl, sl] = np.diag(e)
        Ht[site - 1, sl] = t
        Ht[sl, site - 1] = t
        C0[sl, sl] = np.diag(fermi(lead.beta * (e - lead.mu)))
        pos += lead.n_sites
    return Ht, C0


def exact_evolution(setup: ExactSetup, times, full: bool = False):
    """System covariance ``C_ij(t) = <d_j^dag d_i>`` at ``times``.

    With ``full=True`` the total particle number of system plus leads is
    returned as a second array.
    """
    Ht, C0 = total_hamiltonian(setup)
    N = setup.N
    E, V = la.eigh(Ht)
    M = V.conj().T @ C0 @ V
    Vs = V[:N]
    out, totals = [], []
    for t in np.asarray(times, dtype=float):
        ph = np.exp(-1j * E * t)
        A = Vs * ph  # rows of U(t) belonging to the system
        out.append(A @ M @ A.conj().T)
        if full:
            U = (V * ph) @ V.conj().T
            totals.append(np.trace(U @ C0 @ U.conj().T).real)
    return (out, np.array(totals)) if full else out


def self_energy(lead: LeadSpec, z: complex) -> complex:
    """Tunnel self-energy ``sum_k |t_k|^2 / (z + i eps_k)`` of a semi-infinite lead.

    Closed form ``(tau_a^2 / 2 tau^2) (w sqrt(1 + 4 tau^2/w^2) - w)`` with
    ``w = z + i eps``; the principal square root picks the branch that
    decays like ``tau_a^2 / z``.
    """
    w = complex(z) + 1j * lead.eps
    if w == 0 or (abs(w.real) < 1e-300 and abs(w.imag) <= 2 * lead.tau):
        raise ExactError("z lies on the branch cut of the lead self-energy")
    return lead.tau_a**2 / (2 * lead.tau**2) * (w * np.sqrt(1 + 4 * lead.tau**2 / w**2) - w)


def retarded_green(h: np.ndarray, omega: float, sigma: np.ndarray) -> np.ndarray:
    """``(omega - h + i sigma)^{-1}`` with a Hermitian broadening matrix ``sigma``."""
    n = h.shape[0]
    return la.inv(omega * np.eye(n) - h + 1j * sigma)


def _broadening(N, gL, gR, left_site, right_site):
    s = np.zeros((N, N))
    s[left_site - 1, left_site - 1] += gL / 2
    s[right_site - 1, right_site - 1] += gR / 2
    return s


def _window(h, extra):
    ev = np.linalg.eigvalsh(h)
    width = 40 * max(extra)
    return ev.min() - width, ev.max() + width


def wideband_steady(h: np.ndarray, gamma_L: float, gamma_R: float, f_L: Callable, f_R: Callable,
                    left_site: int = 1, right_site: int | None = None, tol: float = 1e-8,
                    beta_hint: float = 1.0) -> np.ndarray:
    """Stationary covariance ``C_ij = <d_j^dag d_i>`` with wideband leads.

    ``<d_i^dag d_j> = sum_a int dw/2pi Gamma_a conj(G_ia) G_ja f_a(w)`` with
    the retarded Green's function of ``h`` broadened by ``Gamma_a / 2`` on
    the contact sites.
    """
    h = np.asarray(h, dtype=complex)
    N = h.shape[0]
    right_site = right_site or N
    sig = _broadening(N, gamma_L, gamma_R, left_site, right_site)
    l, r = left_site - 1, right_site - 1

    def integrand(w):
        G = retarded_green(h, w, sig)
        gl, gr = G[:, l], G[:, r]
        K = gamma_L * f_L(w) * np.outer(gl.conj(), gl) + gamma_R * f_R(w) * np.outer(gr.conj(), gr)
        return K.reshape(-1) / (2 * np.pi)

    a, b = _window(h, (gamma_L, gamma_R, 1.0 / beta_hint, 1.0))
    total = np.zeros(N * N, dtype=complex)
    for lo, hi in ((-np.inf, a), (a, b), (b, np.inf)):
        val, err = integrate.quad_vec(integrand, lo, hi, epsabs=tol * 1e-2, epsrel=tol, limit=2000)
        if not np.all(np.isfinite(val)):
            raise ExactError("wideband quadrature did not converge")
        total += val
    K = total.reshape(N, N)  # K_ij = <d_i^dag d_j>
    C = K.T
    return 0.5 * (C + C.conj().T)


def transmission(h: np.ndarray, gamma_L: float, gamma_R: float, left_site: int = 1,
                 right_site: int | None = None) -> Callable:
    """Transmission function ``Gamma_L Gamma_R |G_{LR}(w)|^2`` of a wideband junction."""
    h = np.asarray(h, dtype=complex)
    N = h.shape[0]
    right_site = right_site or N
    sig = _broadening(N, gamma_L, gamma_R, left_site, right_site)

    def T(w):
        G = retarded_green(h, w, sig)
        return float(gamma_L * gamma_R * abs(G[left_site - 1, right_site - 1]) ** 2)

    return T


def landauer_current(T: Callable, f_L: Callable, f_R: Callable, window: tuple[float, float] = (-50.0, 50.0),
                     tol: float = 1e-10) -> float:
    """``(1/2pi) int T(w) (f_L(w) - f_R(w)) dw``."""

    def integrand(w):
        t = T(w)
        if t < -1e-12 or t > 1 + 1e-12:
            raise ExactError(f"transmission {t} outside [0, 1] at w = {w}")
        return t * (f_L(w) - f_R(w))

    total = 0.0
    a, b = window
    for lo, hi in ((-np.inf, a), (a, b), (b, np.inf)):
        val, _ = integrate.quad(integrand, lo, hi, epsabs=tol * 1e-2, epsrel=tol, limit=2000)
        total += val
    return total / (2 * np.pi)


def single_particle_density(C: np.ndarray) -> np.ndarray:
    """Normalized single-particle density matrix ``<d_i^dag d_j> / sum_k <n_k>``."""
    K = np.asarray(C).T
    return K / np.trace(K).real


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.linalg.eigvalsh(rho - sigma)).sum())


def single_dot_benchmark(times, n_lead: int, eps: float = 1.0, tau: float | None = None,
                         tau_a: float | None = None, beta: float | None = None, mu: float | None = None,
                         n0: float = 0.0):
    """Dot occupation with one finite lead (exact) and from the local master equation.

    Defaults follow the resonant set-up ``mu = eps``, ``tau = eps``,
    ``tau_a = 0.1 eps`` and ``beta = 1/eps``. Returns ``(exact, lme)``.
    """
    from .generators import build_lme
    from .liouville import evolve
    from .model import HamiltonianSpec

    tau = eps if tau is None else tau
    tau_a = 0.1 * eps if tau_a is None else tau_a
    beta = 1.0 / eps if beta is None else beta
    mu = eps if mu is None else mu
    lead = LeadSpec(eps=eps, tau=tau, tau_a=tau_a, n_sites=n_lead, beta=beta, mu=mu)
    setup = ExactSetup(np.array([[eps]]), left=lead, C0=np.array([[n0]]))
    exact = np.array([C[0, 0].real for C in exact_evolution(setup, times)])
    spec = HamiltonianSpec("tight_binding", L=1, hopping=np.array([[eps]]))
    bath = BathSpec("fermion", site=1, spectral=lead.spectral_density(), beta=beta, mu=mu)
    g = build_lme(spec, [bath])
    rho0 = np.diag([1 - n0, n0]).astype(complex)
    lme = np.array([r[1, 1].real for r in evolve(g, rho0, times)])
    return exact, lme


@dataclass(frozen=True)
class ValidityPoint:
    h: float
    gamma: float
    d_lme: float
    d_gme: float
    d_red: float


def validity_map(h_values: Sequence[float], gamma_values: Sequence[float], eps: float = 1.0,
                 beta: float = 1.0, mu_L: float | None = None, mu_R: float | None = None
                 ) -> list[ValidityPoint]:
    """Trace distances between exact and master-equation single-particle densities.

    Symmetric double dot with on-site energies ``eps``, internal coupling
    ``h`` and wideband couplings ``Gamma_L = Gamma_R = Gamma``.
    """
    from .gaussian import covariance_from_density_matrix
    from .generators import build_gme, build_lme, build_redfield
    from .liouville import steady_state
    from .model import HamiltonianSpec

    mu_L = eps if mu_L is None else mu_L
    mu_R = -eps if mu_R is None else mu_R
    out = []
    for h in h_values:
        hm = np.array([[eps, h], [h, eps]], dtype=complex)
        spec = HamiltonianSpec("tight_binding", L=2, hopping=hm)
        for g in gamma_values:
            baths = [BathSpec("fermion", site=1, gamma=g, beta=beta, mu=mu_L),
                     BathSpec("fermion", site=2, gamma=g, beta=beta, mu=mu_R)]
            C_ex = wideband_steady(hm, g, g, fermi_function(beta, mu_L), fermi_function(beta, mu_R),
                                   beta_hint=beta)
            rho_ex = single_particle_density(C_ex)
            ds = []
            for build in (build_lme, build_gme, build_redfield):
                rho = steady_state(build(spec, baths)).rho
                C = covariance_from_density_matrix(rho, spec)
                ds.append(trace_distance(rho_ex, single_particle_density(C)))
            out.append(ValidityPoint(float(h), float(g), *ds))
    return out
