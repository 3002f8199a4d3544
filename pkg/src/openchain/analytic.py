"""Closed-form reference currents for boundary-driven chains."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "XXProfile",
    "xx_current",
    "xx_profile",
    "xx_dephasing_current",
    "heisenberg_ratio",
    "heisenberg_mps_current",
    "toeplitz_coherence",
]


def xx_current(gamma: float, J: float, f1: float, fL: float) -> float:
    """Magnetization current ``16 gamma J**2 (f1 - fL) / (16 J**2 + gamma**2)`` of the XX chain."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return 16 * gamma * J**2 * (f1 - fL) / (16 * J**2 + gamma**2)


@dataclass(frozen=True)
class XXProfile:
    bulk: float
    first: float
    last: float

    def as_array(self, L: int) -> np.ndarray:
        out = np.full(L, self.bulk)
        out[0], out[-1] = self.first, self.last
        return out


def xx_profile(gamma: float, J: float, f1: float, fL: float) -> XXProfile:
    """Magnetization profile: ``m* = f1 + fL - 1`` in the bulk, ``m* +- gamma J_mag / (16 J**2)`` at the edges."""
    m = f1 + fL - 1
    off = gamma * xx_current(gamma, J, f1, fL) / (16 * J**2)
    return XXProfile(m, m + off, m - off)


def xx_dephasing_current(gamma: float, Gamma: float, J: float, L: int, n1: float, nL: float) -> float:
    """Particle current of a dephasing tight-binding chain (hopping ``J``).

    ``2 gamma J**2 (n1 - nL) / (4 J**2 + gamma**2 + 2 gamma Gamma (L - 1))``,
    positive when particles flow from site 1 to site L.
    """
    return 2 * gamma * J**2 * (n1 - nL) / (4 * J**2 + gamma**2 + 2 * gamma * Gamma * (L - 1))


def toeplitz_coherence(gamma: float, J: float, n1: float, nL: float) -> complex:
    """``<a_{j+1}^dag a_j> = i x`` in the ballistic tight-binding steady state."""
    return 1j * gamma * J * (nL - n1) / (gamma**2 + 4 * J**2)


def _transfer_matrix(gamma: float, L: int) -> np.ndarray:
    k = np.arange(L + 1, dtype=np.longdouble)
    g = np.longdouble(gamma)
    B = np.zeros((L + 1, L + 1), dtype=np.longdouble)
    B[np.arange(L + 1), np.arange(L + 1)] = 2 * (k**2 + 1 / (4 * g**2))
    B[np.arange(L), np.arange(1, L + 1)] = (k[1:]) ** 2
    B[np.arange(1, L + 1), np.arange(L)] = k[:-1] ** 2 + 1 / g**2
    return B


def heisenberg_ratio(gamma: float, L: int) -> float:
    """``(2/gamma) (B^{L-1})_00 / (B^L)_00`` for the (L+1)-dimensional tridiagonal ``B``.

    Powers are accumulated on the vector ``B^n e_0`` with rescaling after
    every step, so only the ratio (never the raw powers) is formed.
    """
    if L < 2:
        raise ValueError("L must be >= 2")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    B = _transfer_matrix(gamma, L)
    v = np.zeros(L + 1, dtype=np.longdouble)
    v[0] = 1
    for _ in range(L - 1):
        v = B @ v
        v /= np.abs(v).max()
    num = v[0]
    den = (B @ v)[0]
    if not (np.isfinite(num) and np.isfinite(den)) or den == 0:
        raise OverflowError("transfer-matrix power overflowed despite rescaling")
    return float(2 / np.longdouble(gamma) * num / den)


def heisenberg_mps_current(gamma: float, L: int, J: float = 1.0) -> float:
    """Magnetization current of the maximally driven isotropic Heisenberg chain.

    The chain ``H = -J sum (sx sx + sy sy + sz sz)`` is pumped by
    ``sqrt(gamma) sigma^+_1`` and drained by ``sqrt(gamma) sigma^-_L``. The
    current is ``2 J R(L, gamma / (8 J))`` with ``R`` from
    :func:`heisenberg_ratio`.
    """
    return 2 * J * heisenberg_ratio(gamma / (8 * J), L)
