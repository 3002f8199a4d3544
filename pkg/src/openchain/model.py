"""Chain Hamiltonians, local site operators and on-site potentials.

All many-body operators live in the occupation-number basis with site 1
varying fastest: the basis index of a product state is ``sum_i n_i d**(i-1)``
where ``d`` is the local dimension. For two-level sites ``n_i = 1`` means the
spin points up (or the fermionic mode is occupied), so that
``sigma^+ = |1><0|`` and ``sigma^z = 2 n - 1``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
import scipy.sparse as sp

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0
DEFAULT_MAX_DIM = 2**16
DEFAULT_DENSE_THRESHOLD = 2**14

__all__ = [
    "Family",
    "PotentialKind",
    "PotentialSpec",
    "HamiltonianSpec",
    "potential_values",
    "fibonacci_word",
    "single_particle_matrix",
    "build_hamiltonian",
    "site_operator",
    "bond_terms",
    "site_terms",
    "total_number",
    "local_energy",
    "ModelError",
]


class ModelError(ValueError):
    """Invalid model specification."""


class Family(str, Enum):
    XXZ = "xxz"
    XYZ = "xyz"
    TIGHT_BINDING = "tight_binding"


class PotentialKind(str, Enum):
    UNIFORM = "uniform"
    DISORDER = "disorder"
    AAH = "aah"
    FIBONACCI = "fibonacci"


@dataclass(frozen=True)
class PotentialSpec:
    """On-site potential generator.

    Parameters
    ----------
    kind : PotentialKind
        ``uniform`` (every site gets ``h``), ``disorder`` (uniform in
        ``[-h, h]`` drawn from ``seed``), ``aah`` (generalized Aubry-Andre
        with ``lam``, ``alpha``, ``beta``, ``phi``) or ``fibonacci``
        (values ``+-h/2`` following the golden-mean Sturmian word).
    """

    kind: PotentialKind = PotentialKind.UNIFORM
    h: float = 0.0
    seed: int | None = None
    lam: float = 0.0
    alpha: float = 0.0
    beta: float = GOLDEN
    phi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", PotentialKind(self.kind))


def fibonacci_word(L: int, g: float = GOLDEN) -> np.ndarray:
    """Binary Sturmian word ``floor((l+1) g) - floor(l g) - 1`` for l = 1..L."""
    l = np.arange(1, L + 1, dtype=float)
    return (np.floor((l + 1) * g) - np.floor(l * g) - 1).astype(int)


def potential_values(spec: PotentialSpec, L: int) -> np.ndarray:
    """Length-``L`` vector of on-site energies ``h_l`` (site l = 1..L)."""
    l = np.arange(1, L + 1, dtype=float)
    if spec.kind is PotentialKind.UNIFORM:
        return np.full(L, float(spec.h))
    if spec.kind is PotentialKind.DISORDER:
        rng = np.random.default_rng(spec.seed)
        return rng.uniform(-spec.h, spec.h, size=L)
    if spec.kind is PotentialKind.AAH:
        if abs(spec.alpha) >= 1:
            raise ModelError(f"AAH requires |alpha| < 1, got {spec.alpha}")
        c = np.cos(2 * np.pi * spec.beta * l + spec.phi)
        return 2 * spec.lam * c / (1 - spec.alpha * c)
    if spec.kind is PotentialKind.FIBONACCI:
        return 0.5 * spec.h * (2 * fibonacci_word(L) - 1)
    raise ModelError(f"unknown potential kind {spec.kind!r}")


@dataclass(frozen=True)
class HamiltonianSpec:
    """Declarative description of a nearest-neighbour chain.

    The spin families read

    ``H = -sum_i (Jx sx_i sx_{i+1} + Jy sy_i sy_{i+1} + Jz sz_i sz_{i+1}) + sum_i h_i sz_i``

    with ``Jx = Jy = J`` and ``Jz = J * delta`` for XXZ. The tight-binding
    family is ``H = sum_ij hop_ij a_i^dag a_j`` where ``hop`` is either an
    explicit Hermitian matrix (the potential is added to its diagonal) or the
    uniform chain with hopping ``-J`` on the off-diagonals.
    """

    family: Family = Family.XXZ
    L: int = 2
    J: float = 1.0
    delta: float = 0.0
    Jx: float = 1.0
    Jy: float = 1.0
    Jz: float = 0.0
    statistics: str = "fermion"
    hopping: np.ndarray | None = None
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    boson_cutoff: int = 2
    max_dim: int = DEFAULT_MAX_DIM
    dense_threshold: int = DEFAULT_DENSE_THRESHOLD

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.L < 1:
            raise ModelError("L must be >= 1")
        if self.statistics not in ("fermion", "boson"):
            raise ModelError(f"statistics must be fermion or boson, got {self.statistics!r}")
        if self.hopping is not None:
            hop = np.asarray(self.hopping, dtype=complex)
            if hop.shape != (self.L, self.L):
                raise ModelError(f"hopping matrix must be {self.L}x{self.L}, got {hop.shape}")
            if not np.allclose(hop, hop.conj().T, atol=1e-12):
                raise ModelError("hopping matrix is not Hermitian")
            object.__setattr__(self, "hopping", hop)

    @property
    def is_spin(self) -> bool:
        return self.family is not Family.TIGHT_BINDING

    @property
    def is_boson(self) -> bool:
        return self.family is Family.TIGHT_BINDING and self.statistics == "boson"

    @property
    def local_dim(self) -> int:
        return self.boson_cutoff + 1 if self.is_boson else 2

    @property
    def dim(self) -> int:
        return self.local_dim**self.L

    def couplings(self) -> tuple[float, float, float]:
        if self.family is Family.XXZ:
            return self.J, self.J, self.J * self.delta
        return self.Jx, self.Jy, self.Jz

    def fields(self) -> np.ndarray:
        return potential_values(self.potential, self.L)

    def with_(self, **changes) -> "HamiltonianSpec":
        return dataclasses.replace(self, **changes)


# local two-level matrices in the (0 = empty/down, 1 = occupied/up) basis
_SP = np.array([[0, 0], [1, 0]], dtype=complex)
_SM = _SP.T.copy()
_SZ = np.diag([-1.0, 1.0]).astype(complex)
_SX = _SP + _SM
_SY = -1j * (_SP - _SM)
_N = np.diag([0.0, 1.0]).astype(complex)
_PARITY = np.diag([1.0, -1.0]).astype(complex)  # -sigma^z = (-1)^n

_SPIN_KINDS = {"sx": _SX, "sy": _SY, "sz": _SZ, "sp": _SP, "sm": _SM}
_ALIASES = {
    "σx": "sx", "σy": "sy", "σz": "sz", "σ+": "sp", "σ-": "sm",
    "sigma_x": "sx", "sigma_y": "sy", "sigma_z": "sz",
    "sigma_plus": "sp", "sigma_minus": "sm", "n": "number",
    "c": "annihilate", "cdag": "create", "a": "annihilate", "adag": "create",
}


def _embed(op: np.ndarray, i: int, L: int, d: int, left_fill=None) -> sp.csr_matrix:
    """Place ``op`` on site ``i``; ``left_fill`` (if given) fills sites < i."""
    eye = sp.identity(d, format="csr", dtype=complex)
    # site L is the leftmost Kronecker factor, site 1 the rightmost
    factors = []
    for site in range(L, 0, -1):
        if site == i:
            factors.append(sp.csr_matrix(op))
        elif site < i and left_fill is not None:
            factors.append(sp.csr_matrix(left_fill))
        else:
            factors.append(eye)
    out = factors[0]
    for f in factors[1:]:
        out = sp.kron(out, f, format="csr")
    return out


def _boson_lowering(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), k=1).astype(complex)


def site_operator(kind: str, i: int, spec: HamiltonianSpec, sparse: bool = False):
    """Operator acting on site ``i`` (1-based) of the chain described by ``spec``.

    ``kind`` is one of ``sx, sy, sz, sp, sm`` (Pauli matrices and
    ``sigma^+-``), ``number``, ``annihilate`` or ``create``. For two-level
    sites the fermionic operators carry the Jordan-Wigner string
    ``(-sz_1)...(-sz_{i-1})``; for bosons they are truncated ladder operators.
    """
    kind = _ALIASES.get(kind, kind)
    if not 1 <= i <= spec.L:
        raise ModelError(f"site index {i} outside 1..{spec.L}")
    if spec.dim > spec.max_dim:
        raise ModelError(f"dimension {spec.dim} exceeds cap {spec.max_dim}")
    d = spec.local_dim
    if spec.is_boson:
        a = _boson_lowering(spec.boson_cutoff)
        local = {"annihilate": a, "create": a.conj().T, "number": a.conj().T @ a}
        if kind not in local:
            raise ModelError(f"operator {kind!r} undefined for bosonic sites")
        out = _embed(local[kind], i, spec.L, d)
    elif kind in _SPIN_KINDS:
        out = _embed(_SPIN_KINDS[kind], i, spec.L, d)
    elif kind == "number":
        out = _embed(_N, i, spec.L, d)
    elif kind == "annihilate":
        out = _embed(_SM, i, spec.L, d, left_fill=_PARITY)
    elif kind == "create":
        out = _embed(_SP, i, spec.L, d, left_fill=_PARITY)
    else:
        raise ModelError(f"unknown operator kind {kind!r}")
    return out if sparse else out.toarray()


def single_particle_matrix(spec: HamiltonianSpec) -> np.ndarray:
    """Single-particle hopping matrix of a quadratic model.

    For tight-binding specs this is ``hop`` itself. For an XX chain
    (``Jz = 0``, ``Jx = Jy = J``) it is the Jordan-Wigner image with hopping
    ``-2J`` and on-site energies ``2 h_i``.
    """
    L = spec.L
    h = spec.fields()
    if spec.family is Family.TIGHT_BINDING:
        if spec.hopping is not None:
            return spec.hopping + np.diag(h)
        m = np.diag(h).astype(complex)
        idx = np.arange(L - 1)
        m[idx, idx + 1] = -spec.J
        m[idx + 1, idx] = -spec.J
        return m
    jx, jy, jz = spec.couplings()
    if jz != 0 or jx != jy:
        raise ModelError("only the XX chain maps to a number-conserving quadratic model")
    m = np.diag(2 * h).astype(complex)
    idx = np.arange(L - 1)
    m[idx, idx + 1] = -2 * jx
    m[idx + 1, idx] = -2 * jx
    return m


def site_terms(spec: HamiltonianSpec) -> list[sp.csr_matrix]:
    """On-site Hamiltonian pieces ``H^k`` (k = 1..L) as sparse matrices."""
    h = spec.fields()
    if spec.is_spin:
        return [h[k] * site_operator("sz", k + 1, spec, sparse=True) for k in range(spec.L)]
    hop = single_particle_matrix(spec)
    return [hop[k, k].real * site_operator("number", k + 1, spec, sparse=True) for k in range(spec.L)]


def bond_terms(spec: HamiltonianSpec) -> list[sp.csr_matrix]:
    """Nearest-neighbour pieces ``H^{k,k+1}`` (k = 1..L-1) as sparse matrices."""
    out = []
    if spec.is_spin:
        jx, jy, jz = spec.couplings()
        for k in range(1, spec.L):
            op = lambda kind, s: site_operator(kind, s, spec, sparse=True)
            out.append(-(jx * op("sx", k) @ op("sx", k + 1)
                         + jy * op("sy", k) @ op("sy", k + 1)
                         + jz * op("sz", k) @ op("sz", k + 1)))
        return out
    hop = single_particle_matrix(spec)
    for k in range(spec.L - 1):
        if spec.hopping is not None and np.any(np.abs(np.triu(hop, 2)) > 0):
            raise ModelError("bond decomposition requires a nearest-neighbour hopping matrix")
        ck = site_operator("annihilate", k + 1, spec, sparse=True)
        ck1 = site_operator("annihilate", k + 2, spec, sparse=True)
        term = hop[k, k + 1] * ck.conj().T @ ck1
        out.append(term + term.conj().T)
    return out


def build_hamiltonian(spec: HamiltonianSpec, sparse: bool | None = None):
    """Many-body Hamiltonian matrix.

    Returns a dense ``ndarray`` when the dimension is below
    ``spec.dense_threshold`` (or when ``sparse=False``), otherwise CSR.
    """
    if spec.dim > spec.max_dim:
        raise ModelError(f"dimension {spec.dim} exceeds cap {spec.max_dim}")
    if spec.family is Family.TIGHT_BINDING and spec.hopping is not None:
        hop = single_particle_matrix(spec)
        cs = [site_operator("annihilate", k + 1, spec, sparse=True) for k in range(spec.L)]
        H = sp.csr_matrix((spec.dim, spec.dim), dtype=complex)
        for i, j in zip(*np.nonzero(hop)):
            H = H + hop[i, j] * (cs[i].conj().T @ cs[j])
    else:
        H = sum(site_terms(spec) + bond_terms(spec), sp.csr_matrix((spec.dim, spec.dim), dtype=complex))
    H = sp.csr_matrix(H)
    H = 0.5 * (H + H.conj().T)
    if sparse is None:
        sparse = spec.dim >= spec.dense_threshold
    return H.tocsr() if sparse else H.toarray()


def total_number(spec: HamiltonianSpec, sparse: bool = False):
    """Total particle number (spins: number of up spins)."""
    N = sum(site_operator("number", k, spec, sparse=True) for k in range(1, spec.L + 1))
    return N if sparse else N.toarray()


def local_energy(spec: HamiltonianSpec, i: int) -> float:
    """Energy of one excitation on site ``i`` ignoring the bonds.

    This is the frequency at which a local bath is evaluated: ``2 h_i`` for
    spins (a flip of ``h_i sz_i``) and ``hop_ii`` for tight-binding sites.
    """
    if spec.is_spin:
        return 2.0 * float(spec.fields()[i - 1])
    return float(single_particle_matrix(spec)[i - 1, i - 1].real)
