"""Quantum-jump unravelling of GKSL generators.

Trajectories are propagated together as the columns of one array, but every
trajectory draws its random numbers from its own counter-based generator
keyed by ``(seed, index)``, so results do not depend on batching.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg as la

from .generators import GeneratorBundle, _dense

__all__ = [
    "TrajectoryError",
    "TrajectoryConfig",
    "TrajectoryRecord",
    "EnsembleResult",
    "effective_hamiltonian",
    "run_ensemble",
    "count_statistics",
    "write_events",
]

CHUNK = 256


class TrajectoryError(ValueError):
    """Invalid trajectory request."""


@dataclass(frozen=True)
class TrajectoryConfig:
    """Stepping parameters.

    ``scheme`` is ``euler`` (jump with probability ``dt <L^dag L>`` each
    step) or ``waiting`` (jump when the no-jump norm drops below a uniform
    threshold). ``sample_every`` is the number of steps between samples.
    """

    dt: float = 0.01
    t_final: float = 1.0
    n_traj: int = 100
    seed: int = 0
    scheme: str = "euler"
    sample_every: int = 1

    def __post_init__(self):
        if self.scheme not in ("euler", "waiting"):
            raise TrajectoryError(f"unknown scheme {self.scheme!r}")
        if self.dt <= 0 or self.t_final < 0 or self.n_traj < 1 or self.sample_every < 1:
            raise TrajectoryError("dt, t_final, n_traj and sample_every must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    @property
    def sample_times(self) -> np.ndarray:
        return self.dt * np.arange(0, self.n_steps + 1, self.sample_every)


@dataclass
class TrajectoryRecord:
    jump_times: np.ndarray
    jump_channels: np.ndarray
    samples: np.ndarray
    final_state: np.ndarray


@dataclass
class EnsembleResult:
    times: np.ndarray
    means: np.ndarray
    stderr: np.ndarray
    records: list[TrajectoryRecord] = field(default_factory=list)
    names: tuple[str, ...] = ()

    def mean(self, name: str) -> np.ndarray:
        return self.means[self.names.index(name)]

    def error(self, name: str) -> np.ndarray:
        return self.stderr[self.names.index(name)]


def effective_hamiltonian(g: GeneratorBundle) -> np.ndarray:
    """``H - (i/2) sum_k r_k L_k^dag L_k``."""
    H = g.H_eff_part.astype(complex)
    for ch in g.channels:
        L = _dense(ch.left)
        H = H - 0.5j * ch.rate * (L.conj().T @ L)
    return H


def _rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


class _Uniforms:
    """Per-trajectory uniform streams served in chunks."""

    def __init__(self, seed, n):
        self.gens = [_rng(seed, i) for i in range(n)]
        self.buf = np.empty((n, 0))
        self.pos = 0

    def next(self, idx=None) -> np.ndarray:
        if self.pos >= self.buf.shape[1]:
            self.buf = np.stack([g.random(CHUNK) for g in self.gens])
            self.pos = 0
        out = self.buf[:, self.pos]
        self.pos += 1
        return out if idx is None else out[idx]


def _initial_states(psi0, n, gens) -> np.ndarray:
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.ndim == 1:
        nrm = np.linalg.norm(psi0)
        if abs(nrm - 1) > 1e-10:
            raise TrajectoryError("initial state is not normalized")
        return np.repeat(psi0[:, None], n, axis=1)
    # density matrix: each trajectory samples one eigenvector
    w, V = np.linalg.eigh(0.5 * (psi0 + psi0.conj().T))
    w = np.clip(w, 0, None)
    w = w / w.sum()
    cdf = np.cumsum(w)
    picks = np.array([min(np.searchsorted(cdf, g.random()), len(w) - 1) for g in gens])
    return V[:, picks]


def _expect(O, Psi):
    return np.real(np.einsum("in,in->n", Psi.conj(), O @ Psi))


def run_ensemble(g: GeneratorBundle, psi0, config: TrajectoryConfig,
                 observables: Mapping[str, np.ndarray] | Sequence[np.ndarray] = (),
                 keep_records: bool = True) -> EnsembleResult:
    """Average observables over ``config.n_traj`` quantum-jump trajectories.

    ``psi0`` is a normalized state vector, or a density matrix from whose
    eigen-decomposition each trajectory samples its initial state. The
    no-jump evolution uses the exact propagator ``exp(-i H_eff dt)``.
    """
    if not g.is_gksl:
        raise TrajectoryError("trajectory unravelling needs a GKSL bundle (Redfield is not)")
    if isinstance(observables, Mapping):
        names = tuple(observables)
        obs = [_dense(observables[k]) for k in names]
    else:
        obs = [_dense(o) for o in observables]
        names = tuple(f"obs{i}" for i in range(len(obs)))
    Ls = [np.sqrt(ch.rate) * _dense(ch.left) for ch in g.channels if ch.rate > 0]
    chan_index = np.array([i for i, ch in enumerate(g.channels) if ch.rate > 0], dtype=int)
    LdL = [L.conj().T @ L for L in Ls]
    max_rate = max((np.linalg.norm(K, 2) for K in LdL), default=0.0)
    if config.dt * max_rate > 0.1:
        raise TrajectoryError(f"dt * max <L^dag L> = {config.dt * max_rate:.3g} exceeds 0.1")
    Heff = effective_hamiltonian(g)
    U = la.expm(-1j * Heff * config.dt)
    n, dt = config.n_traj, config.dt
    uni = _Uniforms(config.seed, n)
    Psi = _initial_states(psi0, n, uni.gens)
    steps = config.n_steps
    sample_steps = set(range(0, steps + 1, config.sample_every))
    samples = np.zeros((len(obs), len(sample_steps), n))
    jumps_t: list[list[float]] = [[] for _ in range(n)]
    jumps_c: list[list[int]] = [[] for _ in range(n)]
    si = 0

    def record(Psi_norm):
        nonlocal si
        for o_i, O in enumerate(obs):
            samples[o_i, si] = _expect(O, Psi_norm)
        si += 1

    def jump(Psi, idx, r, probs):
        # choose channel for trajectories idx using uniforms r against cumulative probs
        cum = np.cumsum(probs[:, idx], axis=0)
        k = (r[None, :] >= cum).sum(axis=0)
        k = np.minimum(k, len(Ls) - 1)
        for j, kk in zip(idx, k):
            v = Ls[kk] @ Psi[:, j]
            Psi[:, j] = v / np.linalg.norm(v)
        return k

    record(Psi)
    if config.scheme == "euler":
        for step in range(1, steps + 1):
            r = uni.next()
            if Ls:
                probs = dt * np.stack([_expect(K, Psi) for K in LdL])
                dp = probs.sum(axis=0)
                hit = np.nonzero(r < dp)[0]
            else:
                hit = np.zeros(0, dtype=int)
            stay = np.setdiff1d(np.arange(n), hit, assume_unique=True)
            if stay.size:
                P = U @ Psi[:, stay]
                Psi[:, stay] = P / np.linalg.norm(P, axis=0)
            if hit.size:
                k = jump(Psi, hit, r[hit], probs)
                t = step * dt
                for j, kk in zip(hit, k):
                    jumps_t[j].append(t)
                    jumps_c[j].append(int(chan_index[kk]))
            if step in sample_steps:
                record(Psi)
    else:
        thresholds = uni.next()
        for step in range(1, steps + 1):
            Psi = U @ Psi
            norms = np.sum(np.abs(Psi) ** 2, axis=0)
            hit = np.nonzero(norms <= thresholds)[0] if Ls else np.zeros(0, dtype=int)
            if hit.size:
                Pn = Psi / np.sqrt(norms)
                probs = np.stack([_expect(K, Pn) for K in LdL])
                probs = probs / probs.sum(axis=0)
                r = uni.next()
                Psi[:, hit] = Pn[:, hit]
                k = jump(Psi, hit, r[hit], probs)
                fresh = uni.next()
                thresholds[hit] = fresh[hit]
                t = step * dt
                for j, kk in zip(hit, k):
                    jumps_t[j].append(t)
                    jumps_c[j].append(int(chan_index[kk]))
            if step in sample_steps:
                norms = np.sum(np.abs(Psi) ** 2, axis=0)
                record(Psi / np.sqrt(norms))
        Psi = Psi / np.linalg.norm(Psi, axis=0)
    times = config.sample_times
    means = samples.mean(axis=2)
    stderr = samples.std(axis=2, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(means)
    records = []
    if keep_records:
        records = [TrajectoryRecord(np.array(jumps_t[j]), np.array(jumps_c[j], dtype=int),
                                    samples[:, :, j].copy(), Psi[:, j].copy()) for j in range(n)]
    return EnsembleResult(times, means, stderr, records, names)


def count_statistics(records: Sequence[TrajectoryRecord], channels: Sequence[int] | Mapping[int, float],
                     t: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Empirical distribution ``p_n`` of (weighted) jump counts up to time ``t``.

    ``channels`` lists channel indices (weight 1 each) or maps them to
    integer weights, e.g. ``{absorb: 1, emit: -1}`` for a net particle count.
    Returns ``(n_values, probabilities)``.
    """
    weights = dict(channels) if isinstance(channels, Mapping) else {int(c): 1 for c in channels}
    counts = []
    for rec in records:
        sel = rec.jump_times <= t if t is not None else np.ones(len(rec.jump_times), dtype=bool)
        counts.append(sum(weights.get(int(c), 0) for c in rec.jump_channels[sel]))
    counts = np.asarray(counts)
    values, freq = np.unique(counts, return_counts=True)
    return values, freq / len(records)


def write_events(records: Sequence[TrajectoryRecord], path) -> None:
    """Stream jump events as newline-delimited JSON objects."""
    with open(path, "w") as fh:
        for i, rec in enumerate(records):
            for t, c in zip(rec.jump_times, rec.jump_channels):
                fh.write(json.dumps({"trajectory": i, "time": float(t), "channel": int(c)}) + "\n")
