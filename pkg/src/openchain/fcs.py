"""Full counting statistics from tilted generators.

With the tilted generator ``L(chi)`` the scaled cumulant generating function
is the eigenvalue ``lambda(chi)`` of largest real part, ``lambda(0) = 0``.
The current is ``-i lambda'(0)`` and the noise ``-lambda''(0)``; both are
also obtained directly from the steady state.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .generators import Counter, GeneratorBundle, tilt
from .liouville import DENSE_LIMIT, LiouvilleError, jump_superoperator, liouvillian, steady_state, vectorize

log = logging.getLogger(__name__)

__all__ = [
    "FCSError",
    "dominant_eigenvalue",
    "cgf_sweep",
    "mean_current",
    "noise",
    "finite_difference_cumulants",
    "CumulantEstimate",
]

CONTINUATION_STEP = 0.05
FD_STEP_FIRST = 1e-5
FD_STEP_SECOND = 1e-3


class FCSError(RuntimeError):
    """Branch crossing or inconsistent linear system."""


def _tilted(g: GeneratorBundle, counter: Counter, chi: float):
    return liouvillian(tilt(g, counter, chi))


def _eigs_near(L, target, v_prev=None):
    n = L.shape[0]
    if n <= DENSE_LIMIT:
        A = L.toarray() if sp.issparse(L) else L
        vals, vecs = la.eig(A)
        return vals, vecs
    vals, vecs = spla.eigs(sp.csc_matrix(L), k=4, sigma=target, v0=v_prev)
    return vals, vecs


def _follow(g, counter, chis, start=None):
    """Track the eigenvalue branch through ``chis`` starting from ``lambda(0) = 0``."""
    lam = 0.0 + 0.0j if start is None else start[0]
    v = None if start is None else start[1]
    out = []
    for chi in chis:
        vals, vecs = _eigs_near(_tilted(g, counter, chi), lam, v)
        if v is None:
            idx = int(np.argmin(np.abs(vals - lam)))
        else:
            overlap = np.abs(vecs.conj().T @ v) / np.linalg.norm(vecs, axis=0)
            dist = np.abs(vals - lam)
            idx = int(np.argmax(overlap - 1e-3 * dist))
            best_dist = int(np.argmin(dist))
            if idx != best_dist and abs(vals[idx] - vals[best_dist]) > 1e-8 and overlap[idx] < 0.9:
                raise FCSError(f"eigenvalue branch crossing detected near chi = {chi:.4g}")
        lam = vals[idx]
        v = vecs[:, idx] / np.linalg.norm(vecs[:, idx])
        out.append(lam)
    return np.array(out), v


def dominant_eigenvalue(g: GeneratorBundle, counter: Counter, chi: float,
                        step: float = CONTINUATION_STEP) -> complex:
    """``lambda(chi)`` continued from ``chi = 0`` in steps of at most ``step``.

    When every counting weight is an integer the tilted generator is
    ``2 pi`` periodic, so ``chi`` is first reduced to ``(-pi, pi]``.
    """
    if _integer_weights(g, counter):
        chi = float(chi - 2 * np.pi * np.round(chi / (2 * np.pi)))
    if chi == 0:
        L0 = liouvillian(g)
        vals, _ = _eigs_near(L0, 0.0)
        lam = vals[np.argmin(np.abs(vals))]
        return complex(lam)
    n = max(1, int(np.ceil(abs(chi) / step)))
    chis = np.linspace(0, chi, n + 1)
    vals, _ = _follow(g, counter, chis)
    return complex(vals[-1])


def _integer_weights(g: GeneratorBundle, counter: Counter) -> bool:
    w = np.array([counter.weight(ch) for ch in g.channels])
    return bool(np.all(np.abs(w - np.round(w)) < 1e-12))


def cgf_sweep(g: GeneratorBundle, counter: Counter, chis, step: float = CONTINUATION_STEP) -> np.ndarray:
    """``lambda(chi)`` along a sorted grid that contains (or starts near) zero."""
    chis = np.asarray(chis, dtype=float)
    return np.array([dominant_eigenvalue(g, counter, c, step) for c in chis])


def _derivative_superops(g: GeneratorBundle, counter: Counter):
    """``L'(0) = i J1`` and ``L''(0) = -J2`` with ``Jp = sum r w**p (X . Y^dag)``."""
    tilt(g, counter, 0.0)  # validates the counter
    J1 = jump_superoperator(g, 1, counter)
    J2 = jump_superoperator(g, 2, counter)
    return 1j * J1, -J2


def mean_current(g: GeneratorBundle, counter: Counter, rho=None) -> float:
    """Steady-state current ``-i tr{L'(0) rho}`` of the counted quantity."""
    rho = steady_state(g).rho if rho is None else rho
    d = g.dim
    Lp, _ = _derivative_superops(g, counter)
    v = vectorize(rho)
    tr = vectorize(np.eye(d)).conj()
    return float(np.real(-1j * (tr @ (Lp @ v))))


def noise(g: GeneratorBundle, counter: Counter, rho=None, tol: float = 1e-9) -> float:
    """Steady-state noise ``d<<n^2>>/dt = -tr{L''rho} - 2i tr{L' sigma}``.

    ``sigma`` solves ``L sigma = i L' rho + I rho`` with ``tr sigma = 0``.
    """
    L = liouvillian(g)
    rho = steady_state(L).rho if rho is None else rho
    d = g.dim
    Lp, Lpp = _derivative_superops(g, counter)
    v = vectorize(rho)
    tr = vectorize(np.eye(d)).conj()
    current = np.real(-1j * (tr @ (Lp @ v)))
    rhs = 1j * (Lp @ v) + current * v
    if abs(tr @ rhs) > tol * max(1.0, np.abs(rhs).max()):
        raise FCSError("noise equation right-hand side is inconsistent with trace preservation")
    A = L.toarray() if sp.issparse(L) else np.array(L, copy=True)
    A[0, :] = tr
    rhs = np.array(rhs, dtype=complex)
    rhs[0] = 0.0
    sigma = la.solve(A, rhs) if A.shape[0] <= DENSE_LIMIT else spla.spsolve(sp.csc_matrix(A), rhs)
    val = -(tr @ (Lpp @ v)) - 2j * (tr @ (Lp @ sigma))
    return float(np.real(val))


@dataclass(frozen=True)
class CumulantEstimate:
    mean: float
    noise: float


def finite_difference_cumulants(g: GeneratorBundle, counter: Counter, h1: float = FD_STEP_FIRST,
                                h2: float = FD_STEP_SECOND) -> CumulantEstimate:
    """First two scaled cumulants from derivatives of ``lambda(chi)`` at zero.

    Central difference with step ``h1`` for the first, five-point central
    stencil with step ``h2`` for the second derivative.
    """
    lam = lambda c: dominant_eigenvalue(g, counter, c)
    d1 = (lam(h1) - lam(-h1)) / (2 * h1)
    pts = {k: lam(k * h2) for k in (-2, -1, 1, 2)}
    pts[0] = 0.0
    d2 = (-pts[-2] + 16 * pts[-1] - 30 * pts[0] + 16 * pts[1] - pts[2]) / (12 * h2**2)
    return CumulantEstimate(float(np.real(-1j * d1)), float(np.real(-d2)))
