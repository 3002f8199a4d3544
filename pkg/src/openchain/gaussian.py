"""Covariance-matrix dynamics of quadratic chains with linear baths.

The single-particle correlation matrix ``C_ij = <a_j^dag a_i>`` obeys

``dC/dt = -(W C + C W^dag) + D - 2 Gamma Delta(C)``

with ``W = i h + (gamma_minus +- gamma_plus)/2`` (upper sign fermions),
``D = gamma_plus`` and ``Delta`` the off-diagonal part. ``Gamma`` is the
per-site dephasing strength entering through ``(Gamma_i + Gamma_j)/2``;
the Lindblad channels ``sqrt(g) n_i`` correspond to ``Gamma_i = g / 2``.
"""
from __future__ import annotations

import logging
from functools import lru_cache
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .baths import BathSpec, Statistics, occupation

log = logging.getLogger(__name__)

__all__ = [
    "GaussianError",
    "CovarianceState",
    "LyapunovSystem",
    "build_lyapunov",
    "solve_steady",
    "solve_steady_dephasing",
    "evolve_covariance",
    "covariance_current",
    "chain_matrix",
    "boundary_driven_chain",
    "majorana_covariance",
    "covariance_from_density_matrix",
]


class GaussianError(RuntimeError):
    """Unstable drift matrix, singular system or integrator failure."""


@dataclass(frozen=True)
class CovarianceState:
    C: np.ndarray
    statistics: str = "fermion"
    residual: float = 0.0

    @property
    def occupations(self) -> np.ndarray:
        return np.real(np.diag(self.C))

    def current(self, h: np.ndarray, bond: int) -> float:
        return covariance_current(self.C, h, bond)


@dataclass(frozen=True)
class LyapunovSystem:
    h: np.ndarray
    gamma_minus: np.ndarray
    gamma_plus: np.ndarray
    dephasing: np.ndarray
    statistics: str = "fermion"

    @property
    def L(self) -> int:
        return self.h.shape[0]

    @property
    def W(self) -> np.ndarray:
        s = 1.0 if self.statistics == "fermion" else -1.0
        return 1j * self.h + 0.5 * (self.gamma_minus + s * self.gamma_plus)

    @property
    def D(self) -> np.ndarray:
        return self.gamma_plus.astype(complex)

    def is_stable(self) -> bool:
        return _stable(self.W)

    def rhs(self, C: np.ndarray) -> np.ndarray:
        W = self.W
        out = -(W @ C + C @ W.conj().T) + self.D
        if np.any(self.dephasing):
            g = self.dephasing
            off = C - np.diag(np.diag(C))
            out = out - (g[:, None] + g[None, :]) * off
        return out


def _stable(W: np.ndarray) -> bool:
    # a positive definite Hermitian part is sufficient and much cheaper to test
    if np.linalg.eigvalsh(0.5 * (W + W.conj().T))[0] > 0:
        return True
    return bool(np.all(np.linalg.eigvals(W).real > 0))


def chain_matrix(L: int, J: float = 1.0, onsite=None) -> np.ndarray:
    """Open chain with hopping ``-J`` and on-site energies ``onsite``."""
    h = np.zeros((L, L), dtype=complex)
    idx = np.arange(L - 1)
    h[idx, idx + 1] = -J
    h[idx + 1, idx] = -J
    if onsite is not None:
        h[np.arange(L), np.arange(L)] = onsite
    return h


def build_lyapunov(h: np.ndarray, baths: Sequence[BathSpec] = (), statistics: str = "fermion",
                   dephasing: float | Iterable[float] = 0.0) -> LyapunovSystem:
    """Drift and diffusion matrices for local linear baths on a quadratic chain."""
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("h must be square")
    if not np.allclose(h, h.conj().T, atol=1e-12):
        raise ValueError("single-particle matrix is not Hermitian")
    L = h.shape[0]
    gm = np.zeros((L, L))
    gp = np.zeros((L, L))
    for bath in baths:
        i = bath.site - 1
        if not 0 <= i < L:
            raise ValueError(f"bath attached to non-existent site {bath.site}")
        eps = float(h[i, i].real)
        g = bath.local_rate(eps)
        n = float(occupation(bath, eps))
        gp[i, i] += g * n
        gm[i, i] += g * (1 + n) if statistics == "boson" and bath.statistics is Statistics.BOSON else g * (1 - n)
    deph = np.broadcast_to(np.asarray(dephasing, dtype=float), (L,)).copy()
    if np.any(deph < 0):
        raise ValueError("dephasing rates must be nonnegative")
    return LyapunovSystem(h, gm, gp, deph, statistics)


def boundary_driven_chain(L: int, J: float = 1.0, gamma: float = 1.0, n1: float = 1.0,
                          nL: float = 0.0, dephasing: float = 0.0, onsite=None) -> LyapunovSystem:
    """Uniform fermionic chain with target baths of occupation ``n1``, ``nL`` at its ends."""
    baths = [BathSpec("target", site=1, gamma=gamma, f=n1), BathSpec("target", site=L, gamma=gamma, f=nL)]
    if L == 1:
        baths = [BathSpec("target", site=1, gamma=2 * gamma, f=0.5 * (n1 + nL))]
    return build_lyapunov(chain_matrix(L, J, onsite), baths, "fermion", dephasing)


def solve_steady(sys: LyapunovSystem) -> CovarianceState:
    """Solve ``W C + C W^dag = D`` with a Schur-based dense algorithm."""
    if np.any(sys.dephasing):
        return solve_steady_dephasing(sys)
    if not sys.is_stable():
        raise GaussianError("W has eigenvalues with nonpositive real part: no unique steady state")
    W, D = sys.W, sys.D
    C = la.solve_continuous_lyapunov(W, D)
    C = 0.5 * (C + C.conj().T)
    res = float(np.abs(W @ C + C @ W.conj().T - D).max())
    return CovarianceState(C, sys.statistics, res)


def _dephasing_operator(sys: LyapunovSystem) -> sp.csc_matrix:
    L = sys.L
    W = sp.csr_matrix(sys.W)
    I = sp.identity(L, dtype=complex, format="csr")
    g = sys.dephasing
    rates = (g[:, None] + g[None, :])
    np.fill_diagonal(rates, 0.0)
    M = sp.kron(I, W) + sp.kron(W.conj(), I) + sp.diags(rates.reshape(-1, order="F"))
    return sp.csc_matrix(M)


@lru_cache(maxsize=32)
def _nested_dissection(n: int) -> np.ndarray:
    """Nested-dissection ordering of an ``n x n`` grid (column-stacked indices)."""
    out: list[int] = []
    stack = [(0, n, 0, n, False)]
    # iterative post-order: children first, separator last
    while stack:
        i0, i1, j0, j1, emit = stack.pop()
        ni, nj = i1 - i0, j1 - j0
        if ni <= 0 or nj <= 0:
            continue
        if emit or ni * nj <= 64:
            ii, jj = np.meshgrid(np.arange(i0, i1), np.arange(j0, j1), indexing="ij")
            out.extend((ii + n * jj).reshape(-1, order="F"))
            continue
        if ni >= nj:
            m = (i0 + i1) // 2
            stack += [(m, m + 1, j0, j1, True), (m + 1, i1, j0, j1, False), (i0, m, j0, j1, False)]
        else:
            m = (j0 + j1) // 2
            stack += [(i0, i1, m, m + 1, True), (i0, i1, m + 1, j1, False), (i0, i1, j0, m, False)]
    return np.asarray(out)


def solve_steady_dephasing(sys: LyapunovSystem) -> CovarianceState:
    """Solve ``W C + C W^dag + 2 Gamma Delta(C) = D`` as a sparse linear system.

    The ``L**2`` unknowns form a grid coupled by the hopping, so a
    nested-dissection ordering keeps the direct factorization cheap.
    """
    if not _stable(sys.W + np.diag(sys.dephasing)):
        raise GaussianError("drift matrix has eigenvalues with nonpositive real part: no unique steady state")
    L = sys.L
    M = _dephasing_operator(sys)
    b = sys.D.reshape(-1, order="F")
    if L <= 2000:
        p = _nested_dissection(L)
        try:
            lu = spla.splu(sp.csc_matrix(M[p][:, p]), permc_spec="NATURAL", diag_pivot_thresh=0.0,
                           options=dict(SymmetricMode=True))
            y = lu.solve(b[p])
        except RuntimeError as exc:
            raise GaussianError(f"singular dephasing system: {exc}") from exc
        x = np.empty_like(y)
        x[p] = y
    else:
        ilu = spla.spilu(M, drop_tol=1e-6, fill_factor=10)
        pre = spla.LinearOperator(M.shape, ilu.solve, dtype=complex)
        x, info = spla.gmres(M, b, M=pre, rtol=1e-12, restart=100, maxiter=1000)
        if info != 0:
            raise GaussianError(f"iterative dephasing solve failed (info={info})")
    C = x.reshape((L, L), order="F")
    C = 0.5 * (C + C.conj().T)
    res = float(np.abs(sys.rhs(C)).max())
    if not np.isfinite(res):
        raise GaussianError("singular dephasing system")
    return CovarianceState(C, sys.statistics, res)


def evolve_covariance(sys: LyapunovSystem, C0: np.ndarray, times, rtol: float = 1e-10,
                      atol: float = 1e-12) -> list[CovarianceState]:
    """Covariance matrices at ``times`` starting from ``C0`` at ``t = 0``."""
    times = np.asarray(times, dtype=float)
    C0 = np.asarray(C0, dtype=complex)
    L = sys.L
    if not np.any(sys.dephasing) and (sys.is_stable() or not np.any(sys.D)):
        W = sys.W
        Css = solve_steady(sys).C if np.any(sys.D) else np.zeros_like(C0)
        out = []
        for t in times:
            U = la.expm(-W * t)
            C = Css + U @ (C0 - Css) @ U.conj().T
            out.append(CovarianceState(0.5 * (C + C.conj().T), sys.statistics))
        return out
    if times.size == 0:
        return []

    def f(t, y):
        return sys.rhs(y.reshape((L, L), order="F")).reshape(-1, order="F")

    sol = solve_ivp(f, (0.0, float(times.max())), C0.reshape(-1, order="F"), method="DOP853",
                    t_eval=times, rtol=rtol, atol=atol)
    if not sol.success:
        raise GaussianError(f"integrator failure: {sol.message}")
    out = []
    for y in sol.y.T:
        C = y.reshape((L, L), order="F")
        out.append(CovarianceState(0.5 * (C + C.conj().T), sys.statistics))
    return out


def covariance_current(C: np.ndarray, h: np.ndarray, bond: int) -> float:
    """Particle current from site ``bond`` to ``bond + 1`` (1-based).

    Equals ``2 Im(h_{k+1,k} C_{k,k+1})``; for hopping ``-J`` this is
    ``i J <a_{k+1}^dag a_k - a_k^dag a_{k+1}>``.
    """
    k = bond - 1
    return float(2 * np.imag(h[k + 1, k] * C[k, k + 1]))


def covariance_from_density_matrix(rho: np.ndarray, spec) -> np.ndarray:
    """``C_ij = <a_j^dag a_i>`` of a many-body state (fermionic Jordan-Wigner modes)."""
    from .model import site_operator

    cs = [site_operator("annihilate", i, spec) for i in range(1, spec.L + 1)]
    L = spec.L
    C = np.empty((L, L), dtype=complex)
    for i in range(L):
        for j in range(L):
            C[i, j] = np.trace(rho @ cs[j].conj().T @ cs[i])
    return C


def majorana_covariance(C: np.ndarray) -> np.ndarray:
    """Real antisymmetric Majorana covariance of a number-conserving fermionic state.

    With ``w_{2j-1} = a_j + a_j^dag`` and ``w_{2j} = i(a_j - a_j^dag)`` the
    matrix is ``M_kl = <[w_k, w_l]>/(2i)``. Pairing terms are not supported.
    """
    L = C.shape[0]
    G = np.asarray(C).T  # G_ij = <a_i^dag a_j>
    M = np.zeros((2 * L, 2 * L))
    for i in range(L):
        for j in range(L):
            delta = 1.0 if i == j else 0.0
            # <w_{2i} w_{2j}> etc. from <a_i^dag a_j> and <a_i a_j^dag> = delta - G_ji
            aa_dag = delta - G[j, i]
            ad_a = G[i, j]
            xx = aa_dag + ad_a                    # <(a_i + a_i^dag)(a_j + a_j^dag)>
            yy = aa_dag + ad_a                    # <i(a_i - a_i^dag) i(a_j - a_j^dag)>
            xy = 1j * (-aa_dag + ad_a)            # <(a_i + a_i^dag) i(a_j - a_j^dag)>
            yx = 1j * (aa_dag - ad_a)             # <i(a_i - a_i^dag)(a_j + a_j^dag)>
            M[2 * i, 2 * j] = np.imag(xx) if i != j else 0.0
            M[2 * i + 1, 2 * j + 1] = np.imag(yy) if i != j else 0.0
            M[2 * i, 2 * j + 1] = np.imag(xy)
            M[2 * i + 1, 2 * j] = np.imag(yx)
    return M
