"""Vectorized Liouvillians, steady states, spectra, dynamics and currents.

Density matrices are vectorized by stacking columns, so that
``vec(A B C) = (C^T kron A) vec(B)``.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .generators import GeneratorBundle, Kind, _dense

log = logging.getLogger(__name__)

__all__ = [
    "LiouvilleError",
    "MultiplicityError",
    "SteadyState",
    "SpectrumResult",
    "vectorize",
    "devectorize",
    "liouvillian",
    "jump_superoperator",
    "apply_generator",
    "steady_state",
    "spectrum",
    "evolve",
    "perturbative_steady",
    "dissipative_current",
    "bond_current",
    "bond_currents",
    "entropy_production",
    "expectation",
]

DENSE_LIMIT = 4096  # d**2 up to which dense linear algebra is used
SVD_LIMIT = 1024  # dimension up to which uniqueness is probed by a full SVD


class LiouvilleError(RuntimeError):
    """Solver breakdown or invalid input."""


class MultiplicityError(LiouvilleError):
    """The generator has more than one steady state."""


def vectorize(rho) -> np.ndarray:
    """Column-stacked vector of a matrix."""
    return np.asarray(rho).reshape(-1, order="F")


def devectorize(v) -> np.ndarray:
    """Inverse of :func:`vectorize`."""
    v = np.asarray(v)
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise ValueError(f"vector length {v.size} is not a perfect square")
    return v.reshape((d, d), order="F")


def _sp(op) -> sp.csr_matrix:
    m = sp.csr_matrix(op, dtype=complex)
    m.eliminate_zeros()
    return m


def _sandwich(X, Y) -> sp.csr_matrix:
    """Superoperator of ``rho -> X rho Y^dag``."""
    return sp.kron(_sp(Y).conj(), _sp(X), format="csr")


def _anticomm(K, d) -> sp.csr_matrix:
    """Superoperator of ``rho -> 1/2 {K, rho}``."""
    I = sp.identity(d, dtype=complex, format="csr")
    K = _sp(K)
    return 0.5 * (sp.kron(I, K, format="csr") + sp.kron(K.T, I, format="csr"))


def _commutator(H, d) -> sp.csr_matrix:
    I = sp.identity(d, dtype=complex, format="csr")
    H = _sp(H)
    return -1j * (sp.kron(I, H, format="csr") - sp.kron(H.T, I, format="csr"))


def jump_superoperator(g: GeneratorBundle, weight_power: int = 0, counter=None) -> sp.csr_matrix:
    """``sum_k r_k w_k**p (X_k . Y_k^dag)`` over channels (``p = 0``: all jumps)."""
    d = g.dim
    out = sp.csr_matrix((d * d, d * d), dtype=complex)
    for ch in g.channels:
        w = 1.0 if counter is None else counter.weight(ch)
        if weight_power and w == 0:
            continue
        out = out + (ch.rate * w**weight_power) * _sandwich(ch.left, ch.right)
    return out


def liouvillian(g: GeneratorBundle, dense: bool | None = None):
    """Vectorized generator ``L`` with ``d vec(rho)/dt = L vec(rho)``.

    A tilted bundle multiplies every sandwich term by ``exp(i chi w)``.
    """
    d = g.dim
    counter, chi = g.tilt if g.tilt is not None else (None, 0.0)
    L = _commutator(g.H_eff_part, d)
    for ch in g.channels:
        X, Y = ch.left, ch.right
        phase = 1.0
        if counter is not None:
            phase = np.exp(1j * chi * counter.weight(ch))
        YdX = _dense(Y).conj().T @ _dense(X)
        L = L + ch.rate * (phase * _sandwich(X, Y) - _anticomm(YdX, d))
    L = L.tocsr()
    if dense is None:
        dense = d * d <= SVD_LIMIT
    return L.toarray() if dense else L


def apply_generator(g: GeneratorBundle, rho: np.ndarray) -> np.ndarray:
    """Act with the untilted generator directly on a matrix."""
    H = g.H_eff_part
    out = -1j * (H @ rho - rho @ H)
    for ch in g.channels:
        X, Y = _dense(ch.left), _dense(ch.right)
        YdX = Y.conj().T @ X
        out = out + ch.rate * (X @ rho @ Y.conj().T - 0.5 * (YdX @ rho + rho @ YdX))
    return out


def _as_matrix(L):
    if isinstance(L, GeneratorBundle):
        return liouvillian(L)
    return L


@dataclass
class SteadyState:
    """Normalized fixed point of a generator."""

    rho: np.ndarray
    residual: float
    gap: float | None = None
    method: str = "lu"

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.rho))


def _smallest_singular(L, k=2):
    """Smallest singular values (dense) or smallest-modulus eigenvalues (large)."""
    n = L.shape[0]
    if n <= SVD_LIMIT:
        A = L.toarray() if sp.issparse(L) else L
        return np.sort(la.svdvals(A))[:k]
    sigma = 1e-10
    if sp.issparse(L):
        vals = spla.eigs(sp.csc_matrix(L), k=k, sigma=sigma, return_eigenvectors=False)
    else:
        lu = la.lu_factor(L - sigma * np.eye(n))
        op = spla.LinearOperator((n, n), matvec=lambda x: la.lu_solve(lu, x), dtype=complex)
        mu = spla.eigs(op, k=k, which="LM", return_eigenvectors=False)
        vals = sigma + 1.0 / mu
    return np.sort(np.abs(vals))


def steady_state(L, method: str = "lu", check_unique: bool = True, tol: float = 1e-9) -> SteadyState:
    """Trace-normalized null vector of ``L``.

    ``method='lu'`` replaces the first row of ``L`` by ``vec(1)^dag`` and
    solves directly; ``'iterative'`` uses GMRES on the same bordered system
    with an incomplete-LU preconditioner; ``'variational'`` minimizes
    ``<v|L^dag L|v>``, which squares the condition number and is kept only
    as a fallback.
    """
    L = _as_matrix(L)
    n = L.shape[0]
    d = int(round(np.sqrt(n)))
    norm = spla.norm(L, 1) if sp.issparse(L) else np.abs(L).sum(axis=0).max()
    gap = None
    if check_unique:
        s = _smallest_singular(L)
        if s[1] <= tol * max(norm, 1.0):
            raise MultiplicityError(
                f"steady state not unique: two smallest singular values {s[0]:.3e}, {s[1]:.3e}")
        gap = float(s[1])
    trace_row = vectorize(np.eye(d)).conj()
    rhs = np.zeros(n, dtype=complex)
    rhs[0] = 1.0
    if method == "variational":
        M = L.conj().T @ L
        if sp.issparse(M) and n > DENSE_LIMIT:
            vals, vecs = spla.eigsh(M, k=1, sigma=-1e-12, which="LM")
        else:
            M = M.toarray() if sp.issparse(M) else M
            vals, vecs = la.eigh(M, subset_by_index=[0, 0])
        v = vecs[:, 0]
        v = v / (trace_row @ v)
    else:
        if sp.issparse(L):
            A = sp.lil_matrix(L)
            A[0, :] = trace_row
            A = A.tocsc()
        else:
            A = np.array(L, copy=True)
            A[0, :] = trace_row
        if method == "lu":
            v = spla.spsolve(A, rhs) if sp.issparse(A) else la.solve(A, rhs)
        elif method == "iterative":
            A = sp.csc_matrix(A)
            ilu = spla.spilu(A, drop_tol=1e-8, fill_factor=20)
            M = spla.LinearOperator(A.shape, ilu.solve, dtype=complex)
            v, info = spla.gmres(A, rhs, M=M, rtol=1e-12, restart=200, maxiter=2000)
            if info != 0:
                raise LiouvilleError(f"GMRES did not converge (info={info})")
        else:
            raise ValueError(f"unknown steady-state method {method!r}")
    if not np.all(np.isfinite(v)):
        raise LiouvilleError("steady-state solve produced non-finite values")
    rho = devectorize(v)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    res = float(np.linalg.norm(L @ vectorize(rho)))
    return SteadyState(rho, res, gap, method)


@dataclass
class SpectrumResult:
    """Rapidities with biorthonormal right (columns of ``right``) and left eigenvectors."""

    values: np.ndarray
    right: np.ndarray | None = None
    left: np.ndarray | None = None
    condition: np.ndarray | None = None
    imaginary_modes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def reconstruct(self) -> np.ndarray:
        return self.right @ np.diag(self.values) @ self.left.conj().T


def spectrum(L, k: int | None = None, tol: float = 1e-9) -> SpectrumResult:
    """Eigenvalues of ``L`` ordered by decreasing real part.

    Full decomposition (with left eigenvectors normalized so that
    ``left^dag right = 1``) for ``d**2 <= 4096``; otherwise the ``k``
    rapidities closest to zero via shift-invert Arnoldi.
    """
    L = _as_matrix(L)
    n = L.shape[0]
    if k is None or n <= DENSE_LIMIT:
        if n > DENSE_LIMIT:
            raise LiouvilleError("full spectrum limited to d**2 <= 4096; pass k")
        A = L.toarray() if sp.issparse(L) else np.asarray(L)
        vals, left, right = la.eig(A, left=True, right=True)
        order = np.lexsort((vals.imag, -vals.real))
        vals, left, right = vals[order], left[:, order], right[:, order]
        norms = np.einsum("ij,ij->j", left.conj(), right)
        cond = np.linalg.norm(left, axis=0) * np.linalg.norm(right, axis=0) / np.abs(norms)
        left = left / norms.conj()
        if k is not None:
            vals, left, right, cond = vals[:k], left[:, :k], right[:, :k], cond[:k]
        imag = np.nonzero((np.abs(vals.real) < tol) & (np.abs(vals.imag) > tol))[0]
        if np.any(cond > 1e8):
            log.warning("near-defective Liouvillian: max eigenvector condition %.2e", cond.max())
        return SpectrumResult(vals, right, left, cond, imag)
    try:
        vals, right = spla.eigs(sp.csc_matrix(L), k=k, sigma=1e-8)
    except spla.ArpackNoConvergence as exc:
        raise LiouvilleError(f"iterative eigensolver did not converge: {exc}") from exc
    order = np.argsort(-vals.real)
    vals = vals[order]
    imag = np.nonzero((np.abs(vals.real) < tol) & (np.abs(vals.imag) > tol))[0]
    return SpectrumResult(vals, right[:, order], None, None, imag)


def evolve(L, rho0: np.ndarray, times, method: str = "ode", rtol: float = 1e-9,
           atol: float = 1e-12) -> list[np.ndarray]:
    """Density matrices at ``times`` (starting from ``rho0`` at ``t = 0``).

    ``method='ode'`` integrates with an implicit BDF scheme; ``'spectral'``
    uses the eigendecomposition of ``L``; ``'expm'`` applies the matrix
    exponential action.
    """
    L = _as_matrix(L)
    times = np.asarray(times, dtype=float)
    v0 = vectorize(np.asarray(rho0, dtype=complex))
    if method == "spectral":
        s = spectrum(L)
        c = s.left.conj().T @ v0
        vs = [s.right @ (np.exp(s.values * t) * c) for t in times]
    elif method == "expm":
        Ls = sp.csc_matrix(L)
        vs, prev_t, v = [], 0.0, v0
        for t in times:
            v = spla.expm_multiply(Ls * (t - prev_t), v) if t > prev_t else v
            prev_t = t
            vs.append(v)
    elif method == "ode":
        Ls = sp.csr_matrix(L)
        if times.size and times.max() == 0:
            vs = [v0 for _ in times]
        else:
            sol = solve_ivp(lambda t, y: Ls @ y, (0.0, float(times.max())), v0, method="BDF",
                            t_eval=times, rtol=rtol, atol=atol, jac=Ls)
            if not sol.success:
                raise LiouvilleError(f"integrator failure: {sol.message}")
            vs = list(sol.y.T)
    else:
        raise ValueError(f"unknown evolution method {method!r}")
    return [devectorize(v) for v in vs]


def perturbative_steady(L0, L1, order: int, tol: float = 1e-10) -> list[np.ndarray]:
    """Corrections ``rho_k`` with ``L0 rho_k = -L1 rho_{k-1}``, ``tr rho_k = 0``.

    ``sum_k mu**k rho_k`` approximates the fixed point of ``L0 + mu L1``.
    """
    L0, L1 = _as_matrix(L0), _as_matrix(L1)
    n = L0.shape[0]
    d = int(round(np.sqrt(n)))
    rho0 = steady_state(L0).rho
    out = [rho0]
    trace_row = vectorize(np.eye(d)).conj()
    A = L0.toarray() if sp.issparse(L0) else np.array(L0, copy=True)
    A[0, :] = trace_row
    lu = la.lu_factor(A)
    scale = max(np.abs(A).max(), 1.0)
    for _ in range(order):
        rhs = -(L1 @ vectorize(out[-1]))
        if abs(trace_row @ rhs) > tol * max(np.abs(rhs).max(), scale):
            raise LiouvilleError("right-hand side not orthogonal to the left null vector of L0")
        rhs = np.array(rhs, dtype=complex)
        rhs[0] = 0.0
        out.append(devectorize(la.lu_solve(lu, rhs)))
    return out


def expectation(rho, O) -> complex:
    return complex(np.trace(_dense(O) @ rho))


def _bath_dissipator(g: GeneratorBundle, nu: int, rho: np.ndarray) -> np.ndarray:
    out = np.zeros_like(rho, dtype=complex)
    for ch in g.bath_channels(nu):
        X, Y = _dense(ch.left), _dense(ch.right)
        YdX = Y.conj().T @ X
        out += ch.rate * (X @ rho @ Y.conj().T - 0.5 * (YdX @ rho + rho @ YdX))
    if nu in g.shifts:
        S = _dense(g.shifts[nu])
        out += -1j * (S @ rho - rho @ S)
    return out


def dissipative_current(rho: np.ndarray, g: GeneratorBundle, nu: int, O) -> float:
    """Flow ``tr{O D_nu(rho)}`` of ``O`` from bath ``nu`` into the system."""
    O = _dense(O)
    H = _dense(g.H)
    comm = H @ O - O @ H
    if np.abs(comm).max() > 1e-10 * max(np.abs(H).max(), 1.0):
        warnings.warn("[H, O] != 0: the dissipative flow is not a transport current", stacklevel=2)
    return float(np.real(np.trace(O @ _bath_dissipator(g, nu, rho))))


def bond_current(rho: np.ndarray, H_bond, O_k, O_k1=None) -> float:
    """Current ``-i <[H^{k,k+1}, O^k]>`` across one bond.

    When ``O_k1`` is given the local conservation condition
    ``[H^{k,k+1}, O^k + O^{k+1}] = 0`` is checked first.
    """
    Hb, Ok = _dense(H_bond), _dense(O_k)
    if O_k1 is not None:
        S = Ok + _dense(O_k1)
        if np.abs(Hb @ S - S @ Hb).max() > 1e-10 * max(np.abs(Hb).max(), 1.0):
            raise LiouvilleError("[H^{k,k+1}, O^k + O^{k+1}] != 0: no local current is defined")
    return float(np.real(-1j * np.trace(rho @ (Hb @ Ok - Ok @ Hb))))


def bond_currents(rho: np.ndarray, spec, quantity: str = "magnetization") -> np.ndarray:
    """Currents on all bonds of a chain for ``magnetization`` (sz) or ``particle`` (n)."""
    from .model import bond_terms, site_operator

    kind = {"magnetization": "sz", "particle": "number"}[quantity]
    bonds = bond_terms(spec)
    ops = [site_operator(kind, i, spec, sparse=True) for i in range(1, spec.L + 1)]
    return np.array([bond_current(rho, bonds[k], ops[k], ops[k + 1]) for k in range(spec.L - 1)])


def _logm_psd(rho, floor=1e-300):
    w, U = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    return (U * np.log(np.clip(w, floor, None))) @ U.conj().T


def entropy_production(rho: np.ndarray, g: GeneratorBundle, mode: str = "global",
                       force: bool = False) -> float:
    """Entropy production rate ``dS/dt - sum_nu beta_nu (J_E - mu_nu J_N)``.

    ``global`` uses the system Hamiltonian and total number (appropriate for
    global master equations); ``local`` uses each bath's site Hamiltonian
    ``H^k`` and site number (appropriate for local master equations). A
    mismatch between mode and generator kind raises unless ``force`` is set.
    """
    from .baths import Statistics
    from .model import site_operator, site_terms, total_number

    if mode not in ("global", "local"):
        raise ValueError(f"unknown mode {mode!r}")
    expected = Kind.GME if mode == "global" else Kind.LME
    if g.kind is not expected and not force:
        raise LiouvilleError(
            f"{mode} entropy production belongs to {expected.value.upper()} generators, got "
            f"{g.kind.value}; use global currents for GMEs and local currents for LMEs")
    spec = g.spec
    Lrho = apply_generator(g, rho)
    dS = -float(np.real(np.trace(Lrho @ _logm_psd(rho))))
    flow = 0.0
    for nu, bath in enumerate(g.baths):
        if bath.statistics is Statistics.TARGET:
            raise LiouvilleError("entropy production needs thermal baths")
        if mode == "global":
            E_op = _dense(g.H)
            N_op = total_number(spec)
        else:
            E_op = _dense(site_terms(spec)[bath.site - 1])
            N_op = site_operator("number", bath.site, spec)
        D = _bath_dissipator(g, nu, rho)
        JE = float(np.real(np.trace(E_op @ D)))
        JN = float(np.real(np.trace(N_op @ D)))
        flow += bath.beta * (JE - bath.mu * JN)
    return dS - flow
