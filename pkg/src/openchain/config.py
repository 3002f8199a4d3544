"""Run configuration: a YAML key-value tree validated against a fixed schema.

Top-level sections and their fields::

    model:      family, L, J, delta, Jx, Jy, Jz, statistics, hopping, boson_cutoff,
                potential {kind, h, seed, lam, alpha, beta, phi}
    baths:      list of {statistics, site, gamma, beta, mu, f, eta,
                spectral {kind, gamma, eps, tau, tau_a, file}}
    generator:  kind (lme | gme | redfield | gaussian), dephasing, secular_tol,
                lamb_shift, principal_value
    solver:     method (lu | iterative | variational), tol
    evolve:     t_final, n_times, method, initial (vacuum | mixed | full)
    spectrum:   k
    fcs:        quantity (particle | energy | activity), bath, chi_max, n_chi
    traj:       dt, t_final, n_traj, scheme, sample_every, initial (vacuum | steady)
    scan:       sizes, h, gamma, J, dephasing, window_min
    benchmark:  h, gamma, n_lead, t_final, n_times, eps
    seed:       integer

``generator.dephasing`` is the rate of the ``sqrt(rate) n_i`` (``sz_i`` for
spin families) channels. Site indices are 1-based; ``baths[k].site: -1``
means the last site.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .baths import BathSpec, SpectralDensity, load_tabulated
from .model import HamiltonianSpec, PotentialSpec

__all__ = ["ConfigError", "SCHEMA", "RunConfig", "load_config", "parse_config", "validate"]


class ConfigError(ValueError):
    """Schema violation; the message starts with the offending field path."""


_NUM = "number"
_SPECTRAL = {"kind": str, "gamma": _NUM, "eps": _NUM, "tau": _NUM, "tau_a": _NUM, "file": str}
_BATH = {"statistics": str, "site": int, "gamma": _NUM, "beta": _NUM, "mu": _NUM, "f": _NUM,
         "eta": _NUM, "spectral": _SPECTRAL}
SCHEMA: dict = {
    "model": {"family": str, "L": int, "J": _NUM, "delta": _NUM, "Jx": _NUM, "Jy": _NUM, "Jz": _NUM,
              "statistics": str, "hopping": [[_NUM]], "boson_cutoff": int,
              "potential": {"kind": str, "h": _NUM, "seed": int, "lam": _NUM, "alpha": _NUM,
                            "beta": _NUM, "phi": _NUM}},
    "baths": [_BATH],
    "generator": {"kind": str, "dephasing": _NUM, "secular_tol": _NUM, "lamb_shift": bool,
                  "principal_value": bool},
    "solver": {"method": str, "tol": _NUM},
    "evolve": {"t_final": _NUM, "n_times": int, "method": str, "initial": str},
    "spectrum": {"k": int},
    "fcs": {"quantity": str, "bath": int, "chi_max": _NUM, "n_chi": int},
    "traj": {"dt": _NUM, "t_final": _NUM, "n_traj": int, "scheme": str, "sample_every": int,
             "initial": str},
    "scan": {"sizes": [int], "h": [_NUM], "gamma": _NUM, "J": _NUM, "dephasing": [_NUM],
             "window_min": int},
    "benchmark": {"h": [_NUM], "gamma": [_NUM], "n_lead": [int], "t_final": _NUM, "n_times": int,
                  "eps": _NUM},
    "seed": int,
}

_CHOICES = {
    "generator.kind": ("lme", "gme", "redfield", "gaussian"),
    "solver.method": ("lu", "iterative", "variational"),
    "evolve.method": ("ode", "spectral", "expm"),
    "evolve.initial": ("vacuum", "mixed", "full"),
    "fcs.quantity": ("particle", "energy", "activity"),
    "traj.scheme": ("euler", "waiting"),
    "traj.initial": ("vacuum", "steady"),
}


def _check_scalar(value, typ, path):
    if typ is bool:
        ok = isinstance(value, bool)
    elif typ is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif typ == _NUM:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    else:
        ok = isinstance(value, typ)
    if not ok:
        name = typ if isinstance(typ, str) else typ.__name__
        raise ConfigError(f"{path}: expected {name}, got {type(value).__name__} {value!r}")


def validate(node: Any, schema: Any = SCHEMA, path: str = "") -> None:
    """Raise :class:`ConfigError` naming the first field that breaks ``schema``."""
    if isinstance(schema, dict):
        if not isinstance(node, dict):
            raise ConfigError(f"{path or '<root>'}: expected a mapping, got {type(node).__name__}")
        for key, value in node.items():
            sub = f"{path}.{key}" if path else str(key)
            if key not in schema:
                raise ConfigError(f"{sub}: unknown field (allowed: {', '.join(schema)})")
            if value is None:
                continue
            validate(value, schema[key], sub)
            if sub in _CHOICES and value not in _CHOICES[sub]:
                raise ConfigError(f"{sub}: {value!r} not one of {_CHOICES[sub]}")
    elif isinstance(schema, list):
        if not isinstance(node, list):
            raise ConfigError(f"{path}: expected a list, got {type(node).__name__}")
        for i, item in enumerate(node):
            validate(item, schema[0], f"{path}[{i}]")
    else:
        _check_scalar(node, schema, path)


@dataclass
class RunConfig:
    raw: dict
    model: HamiltonianSpec | None
    baths: list[BathSpec]
    seed: int = 0
    base: Path = field(default_factory=Path.cwd)

    def section(self, name: str) -> dict:
        return dict(self.raw.get(name) or {})


def _build_model(raw: dict) -> HamiltonianSpec:
    m = dict(raw)
    pot = m.pop("potential", None) or {}
    if "hopping" in m and m["hopping"] is not None:
        m["hopping"] = np.asarray(m["hopping"], dtype=float)
    return HamiltonianSpec(potential=PotentialSpec(**pot), **m)


def _build_bath(raw: dict, L: int, base: Path) -> BathSpec:
    b = dict(raw)
    if b.get("site", 1) < 0:
        b["site"] = L + 1 + b["site"]
    spec = b.pop("spectral", None)
    if spec:
        spec = dict(spec)
        if "file" in spec:
            b["spectral"] = load_tabulated(base / spec.pop("file"))
        else:
            b["spectral"] = SpectralDensity(**spec)
    return BathSpec(**b)


def parse_config(raw: dict, base: Path | str = ".") -> RunConfig:
    """Validate ``raw`` and instantiate the model and bath specifications."""
    raw = copy.deepcopy(raw or {})
    validate(raw)
    base = Path(base)
    model = None
    if raw.get("model"):
        try:
            model = _build_model(raw["model"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"model: {exc}") from exc
    baths = []
    for i, b in enumerate(raw.get("baths") or []):
        try:
            baths.append(_build_bath(b, model.L if model else 1, base))
        except (TypeError, ValueError, OSError) as exc:
            raise ConfigError(f"baths[{i}]: {exc}") from exc
        if model is not None and not 1 <= baths[-1].site <= model.L:
            raise ConfigError(f"baths[{i}].site: {baths[-1].site} outside 1..{model.L}")
    return RunConfig(raw, model, baths, int(raw.get("seed", 0)), base)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    return parse_config(raw or {}, path.parent)
