"""Master-equation generators as Hamiltonian + jump-channel bundles.

A channel with left operator ``X``, right operator ``Y`` and rate ``r``
contributes ``r (X rho Y^dag - 1/2 {Y^dag X, rho})``. GKSL channels have
``X = Y`` and ``r >= 0``. Redfield dissipators are written as pairs of
channels ``(X, Y)`` and ``(Y, X)`` plus a Hermitian correction stored with
the Lamb-shift terms.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .baths import (
    BathSpec,
    Statistics,
    golden_rule_rates,
    occupation,
    principal_value_shifts,
    vacancy,
)
from .model import (
    Family,
    HamiltonianSpec,
    ModelError,
    build_hamiltonian,
    local_energy,
    site_operator,
)

__all__ = [
    "Kind",
    "JumpChannel",
    "Counter",
    "GeneratorBundle",
    "GeneratorError",
    "build_lme",
    "build_gme",
    "build_redfield",
    "add_dephasing",
    "tilt",
    "pauli_rates",
    "coupling_operator",
    "dump_bundle",
]


class GeneratorError(ValueError):
    """Inconsistent generator request."""


class Kind(str, Enum):
    LME = "lme"
    GME = "gme"
    REDFIELD = "redfield"
    CUSTOM = "custom"


def _dense(op) -> np.ndarray:
    return op.toarray() if sp.issparse(op) else np.asarray(op, dtype=complex)


@dataclass(frozen=True)
class JumpChannel:
    """One dissipative term.

    ``weights`` maps a counted quantity (``particle``, ``energy``) to the net
    amount the jump adds to the system; ``bath`` is the index of the reservoir
    that supplies it (``None`` for dephasing).
    """

    left: np.ndarray
    right: np.ndarray
    rate: float = 1.0
    weights: dict = field(default_factory=dict)
    bath: int | None = None
    label: str = ""

    @property
    def is_gksl(self) -> bool:
        return self.left is self.right and self.rate >= 0


@dataclass(frozen=True)
class Counter:
    """Which transfers a counting field tracks.

    ``quantity`` is ``particle``, ``energy`` or ``activity``; ``bath`` limits
    the count to one reservoir (``None``: every bath).
    """

    quantity: str = "particle"
    bath: int | None = None

    def __post_init__(self):
        if self.quantity not in ("particle", "energy", "activity"):
            raise GeneratorError(f"unknown counter quantity {self.quantity!r}")

    def weight(self, ch: JumpChannel) -> float:
        if self.quantity == "activity":
            return 1.0
        if self.bath is not None and ch.bath != self.bath:
            return 0.0
        if ch.bath is None:
            return 0.0
        if self.quantity not in ch.weights:
            raise GeneratorError(f"channel {ch.label!r} has no {self.quantity} weight")
        return float(ch.weights[self.quantity])


@dataclass(frozen=True)
class GeneratorBundle:
    """Hamiltonian part plus jump channels of a master equation.

    Attributes
    ----------
    H : ndarray
        System Hamiltonian.
    shifts : dict
        Hermitian corrections keyed by bath index (Lamb shifts, Redfield
        commutator corrections); added to ``H`` in the generator.
    tilt : tuple, optional
        ``(Counter, chi)`` when the bundle carries a counting field.
    """

    H: np.ndarray
    channels: tuple[JumpChannel, ...] = ()
    kind: Kind = Kind.CUSTOM
    shifts: dict = field(default_factory=dict)
    spec: HamiltonianSpec | None = None
    baths: tuple[BathSpec, ...] = ()
    tilt: tuple | None = None
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @property
    def H_eff_part(self) -> np.ndarray:
        out = _dense(self.H).copy()
        for s in self.shifts.values():
            out = out + _dense(s)
        return out

    @property
    def is_gksl(self) -> bool:
        return all(ch.is_gksl for ch in self.channels)

    def replace(self, **changes) -> "GeneratorBundle":
        return dataclasses.replace(self, **changes)

    def bath_channels(self, nu: int) -> list[JumpChannel]:
        return [ch for ch in self.channels if ch.bath == nu]


def coupling_operator(spec: HamiltonianSpec, site: int) -> np.ndarray:
    """Lowering operator through which a bath on ``site`` acts."""
    if site < 1 or site > spec.L:
        raise GeneratorError(f"bath attached to non-existent site {site} (L = {spec.L})")
    kind = "sm" if spec.is_spin else "annihilate"
    return site_operator(kind, site, spec)


def _local_rates(bath: BathSpec, omega: float) -> tuple[float, float]:
    g = bath.local_rate(omega)
    if bath.statistics is Statistics.BOSON:
        n = float(occupation(bath, omega))
        return g * n, g * (n + 1)
    return g * float(occupation(bath, omega)), g * float(vacancy(bath, omega))


def build_lme(spec: HamiltonianSpec, baths: Sequence[BathSpec]) -> GeneratorBundle:
    """Local master equation: each bath thermalizes its own site.

    Bath ``nu`` on site ``i`` contributes ``gamma (1 -+ n) D[a_i]`` and
    ``gamma n D[a_i^dag]`` with ``n`` the bath occupation at the local site
    energy (spin chains: ``sigma^-_i`` and ``f``).
    """
    H = build_hamiltonian(spec, sparse=False)
    channels = []
    for nu, bath in enumerate(baths):
        a = coupling_operator(spec, bath.site)
        eps = local_energy(spec, bath.site)
        absorb, emit = _local_rates(bath, eps)
        ad = a.conj().T.copy()
        channels.append(JumpChannel(a, a, emit, {"particle": -1.0, "energy": -eps}, nu, f"emit[{nu}]"))
        channels.append(JumpChannel(ad, ad, absorb, {"particle": 1.0, "energy": eps}, nu, f"absorb[{nu}]"))
    return GeneratorBundle(H, tuple(channels), Kind.LME, {}, spec, tuple(baths))


def _group_frequencies(omegas: np.ndarray, tol: float) -> np.ndarray:
    """Label array assigning each frequency to a cluster of width ``tol``."""
    order = np.argsort(omegas)
    labels = np.empty(len(omegas), dtype=int)
    current, start = 0, None
    for pos, idx in enumerate(order):
        w = omegas[idx]
        if start is None:
            start = w
        elif w - prev > tol:
            current += 1
        labels[idx] = current
        prev = w
    return labels


def _eigensystem(spec: HamiltonianSpec):
    H = build_hamiltonian(spec, sparse=False)
    E, V = np.linalg.eigh(H)
    return H, E, V


def _default_tol(E: np.ndarray, secular_tol: float | None) -> float:
    if secular_tol is not None:
        return secular_tol
    return max(1e-9 * float(E.max() - E.min()), 1e-12)


def _frequency_components(A_e: np.ndarray, E: np.ndarray, tol: float):
    """Split an eigenbasis operator into Bohr-frequency components.

    Yields ``(omega, mask)`` where ``omega = E_b - E_a`` is the energy the
    component ``|a><b|`` removes from the system.
    """
    cutoff = 1e-14 * max(np.abs(A_e).max(), 1.0)
    a_idx, b_idx = np.nonzero(np.abs(A_e) > cutoff)
    if len(a_idx) == 0:
        return []
    omegas = E[b_idx] - E[a_idx]
    labels = _group_frequencies(omegas, tol)
    out = []
    for lab in np.unique(labels):
        sel = labels == lab
        mask = np.zeros(A_e.shape, dtype=bool)
        mask[a_idx[sel], b_idx[sel]] = True
        out.append((float(omegas[sel].mean()), mask))
    return out


def build_gme(spec: HamiltonianSpec, baths: Sequence[BathSpec], secular_tol: float | None = None,
              lamb_shift: bool = True) -> GeneratorBundle:
    """Global (secular Born-Markov) master equation.

    Jump operators are the Bohr-frequency components ``A_w`` of each bath's
    coupling operator in the eigenbasis of ``H``; their rates are the
    golden-rule rates at ``w``. Frequencies closer than ``secular_tol``
    (default ``1e-9`` times the spectral range) are merged.
    """
    H, E, V = _eigensystem(spec)
    tol = _default_tol(E, secular_tol)
    channels, shifts = [], {}
    for nu, bath in enumerate(baths):
        sd = bath.density
        A_e = V.conj().T @ coupling_operator(spec, bath.site) @ V
        h_ls = np.zeros_like(H)
        for omega, mask in _frequency_components(A_e, E, tol):
            L_e = np.where(mask, A_e, 0.0)
            L = V @ L_e @ V.conj().T
            absorb, emit = golden_rule_rates(sd, bath, omega)
            Ld = L.conj().T.copy()
            channels.append(JumpChannel(L, L, emit, {"particle": -1.0, "energy": -omega}, nu,
                                        f"emit[{nu}]@{omega:.6g}"))
            channels.append(JumpChannel(Ld, Ld, absorb, {"particle": 1.0, "energy": omega}, nu,
                                        f"absorb[{nu}]@{omega:.6g}"))
            if lamb_shift:
                s_abs, s_emit = principal_value_shifts(sd, bath, omega)
                if s_abs or s_emit:
                    h_ls = h_ls + s_emit * (Ld @ L) + s_abs * (L @ Ld)
        if lamb_shift and np.any(h_ls):
            shifts[nu] = 0.5 * (h_ls + h_ls.conj().T)
    meta = {"secular_tol": tol, "energies": E}
    return GeneratorBundle(H, tuple(channels), Kind.GME, shifts, spec, tuple(baths), meta=meta)


def _is_worked_double_dot(spec: HamiltonianSpec) -> bool:
    if spec.family is not Family.TIGHT_BINDING or spec.statistics != "fermion" or spec.L != 2:
        return False
    from .model import single_particle_matrix

    h = single_particle_matrix(spec)
    return abs(h[0, 0] - h[1, 1]) < 1e-12


def build_redfield(spec: HamiltonianSpec, baths: Sequence[BathSpec],
                   include_principal_value: bool = False, secular_tol: float | None = None
                   ) -> GeneratorBundle:
    """Redfield-II equation with constant coefficients.

    For each bath with lowering coupling ``A`` the dissipator is
    ``-[A, Lam_A rho] - [A^dag, Lam_Ad rho] + h.c.`` where ``Lam_A`` collects
    the Bohr components of ``A^dag`` weighted by ``Gamma f / 2`` and
    ``Lam_Ad`` those of ``A`` weighted by ``Gamma (1 - f) / 2``. Principal
    values add imaginary parts to these weights when requested.
    """
    H, E, V = _eigensystem(spec)
    tol = _default_tol(E, secular_tol)
    channels, shifts = [], {}
    for nu, bath in enumerate(baths):
        sd = bath.density
        A = coupling_operator(spec, bath.site)
        Ad = A.conj().T.copy()
        A_e = V.conj().T @ A @ V
        h_c = np.zeros_like(H)
        # (Lambda operator built from components of `src`, partner P with term -[P, Lambda rho])
        terms = (
            (A_e.conj().T, A, +1.0),   # components of A^dag: absorption, partner A
            (A_e, Ad, -1.0),           # components of A: emission, partner A^dag
        )
        for src_e, partner, sign in terms:
            for omega_rm, mask in _frequency_components(src_e, E, tol):
                # omega_rm = E_b - E_a; the component changes the system energy by -omega_rm
                gain = -omega_rm
                w_bath = sign * gain  # frequency at which the bath functions are evaluated
                absorb, emit = golden_rule_rates(sd, bath, w_bath)
                weight = 0.5 * (absorb if sign > 0 else emit)
                if include_principal_value:
                    s_abs, s_emit = principal_value_shifts(sd, bath, w_bath)
                    weight = weight + 1j * (s_abs if sign > 0 else s_emit)
                if weight == 0:
                    continue
                lam = weight * (V @ np.where(mask, src_e, 0.0) @ V.conj().T)
                Y = partner.conj().T.copy()  # right operator: -[P, lam rho] -> lam rho P
                w = {"particle": sign, "energy": gain}
                channels.append(JumpChannel(lam, Y, 1.0, w, nu, f"redfield[{nu}]@{gain:.6g}"))
                channels.append(JumpChannel(Y, lam, 1.0, w, nu, f"redfield*[{nu}]@{gain:.6g}"))
                K = partner @ lam - lam.conj().T @ partner.conj().T
                h_c = h_c - 0.5j * K
        if np.any(np.abs(h_c) > 0):
            shifts[nu] = 0.5 * (h_c + h_c.conj().T)
    meta = {"secular_tol": tol, "energies": E, "energy_counting": _is_worked_double_dot(spec)}
    return GeneratorBundle(H, tuple(channels), Kind.REDFIELD, shifts, spec, tuple(baths), meta=meta)


def add_dephasing(g: GeneratorBundle, gamma: float, sites: Iterable[int] | None = None,
                  spec: HamiltonianSpec | None = None) -> GeneratorBundle:
    """Append dephasing channels ``sqrt(gamma) n_i`` (``sqrt(gamma) sz_i`` for spins)."""
    if gamma < 0:
        raise GeneratorError("dephasing rate must be nonnegative")
    if gamma == 0:
        return g
    spec = spec or g.spec
    if spec is None:
        raise GeneratorError("dephasing needs the Hamiltonian spec of the bundle")
    sites = range(1, spec.L + 1) if sites is None else sites
    kind = "sz" if spec.is_spin else "number"
    new = []
    for i in sites:
        op = site_operator(kind, i, spec)
        new.append(JumpChannel(op, op, float(gamma), {"particle": 0.0, "energy": 0.0}, None, f"dephasing[{i}]"))
    return g.replace(channels=g.channels + tuple(new))


def tilt(g: GeneratorBundle, counter: Counter, chi: float) -> GeneratorBundle:
    """Attach a counting field: every sandwich term gains ``exp(i chi w)``."""
    if counter.quantity == "energy" and g.kind is Kind.REDFIELD and not g.meta.get("energy_counting"):
        raise GeneratorError(
            "energy counting on a non-secular Redfield generator has no phenomenological "
            "definition; only the symmetric double dot carries microscopic energy weights")
    for ch in g.channels:
        counter.weight(ch)  # raises when weights are missing
    return g.replace(tilt=(counter, float(chi)))


def pauli_rates(g: GeneratorBundle) -> tuple[np.ndarray, np.ndarray]:
    """Transition rates ``W[a, b]`` (b -> a) between energy eigenstates.

    Returns ``(E, W)``; the diagonal of ``W`` is zero.
    """
    E, V = np.linalg.eigh(_dense(g.H))
    W = np.zeros((len(E), len(E)))
    for ch in g.channels:
        if not ch.is_gksl:
            raise GeneratorError("Pauli rates need a GKSL bundle")
        L_e = V.conj().T @ _dense(ch.left) @ V
        W += ch.rate * np.abs(L_e) ** 2
    np.fill_diagonal(W, 0.0)
    return E, W


def dump_bundle(g: GeneratorBundle, tol: float = 1e-14) -> str:
    """Plain-text listing of the bundle with operators in coordinate form."""

    def coo(op):
        m = sp.coo_matrix(_dense(op))
        keep = np.abs(m.data) > tol
        return "\n".join(f"    {i} {j} {v.real:.16e} {v.imag:.16e}"
                         for i, j, v in zip(m.row[keep], m.col[keep], m.data[keep]))

    lines = [f"kind {g.kind.value}", f"dim {g.dim}", "H", coo(g.H)]
    for nu, s in sorted(g.shifts.items()):
        lines += [f"shift bath={nu}", coo(s)]
    for ch in g.channels:
        w = " ".join(f"{k}={v:.16e}" for k, v in sorted(ch.weights.items()))
        lines += [f"channel {ch.label} bath={ch.bath} rate={ch.rate:.16e} {w}", "  left", coo(ch.left)]
        if ch.right is not ch.left:
            lines += ["  right", coo(ch.right)]
    return "\n".join(lines) + "\n"
