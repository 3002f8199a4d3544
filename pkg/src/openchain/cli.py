"""Command-line front end.

Every subcommand reads a YAML config (fields listed in :mod:`openchain.config`),
writes CSV tables plus a ``manifest.json`` to ``--out`` and exits with 0 on
success, 2 on validation errors and 3 on solver failures.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy
import scipy.linalg as la
from scipy.sparse.linalg import ArpackError

from . import __version__
from .analysis import FitError, fit_exponent
from .analytic import heisenberg_mps_current
from .baths import BathSpec
from .config import ConfigError, RunConfig, load_config, parse_config
from .exact import ExactError, single_dot_benchmark, validity_map
from .fcs import FCSError, cgf_sweep, finite_difference_cumulants, mean_current, noise
from .gaussian import GaussianError, boundary_driven_chain, build_lyapunov, solve_steady
from .generators import Counter, GeneratorError, add_dephasing, build_gme, build_lme, build_redfield
from .liouville import (LiouvilleError, bond_currents, dissipative_current, evolve, liouvillian, spectrum,
                        steady_state)
from .model import (HamiltonianSpec, ModelError, PotentialSpec, potential_values, single_particle_matrix,
                    site_operator)
from .trajectories import TrajectoryConfig, TrajectoryError, run_ensemble, write_events

logger = logging.getLogger(__name__)

MANIFEST_SCHEMA = 1
EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER = 0, 2, 3
FIBONACCI_SIZES = (34, 55, 89, 144, 233, 377, 610)
VALIDITY_H = (0.005, 0.01, 0.02, 0.04, 0.1, 0.2, 0.3, 0.5)
VALIDITY_GAMMA = (0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3)

_VALIDATION = (ConfigError, ModelError, GeneratorError, TrajectoryError, FitError, ValueError, KeyError)
_SOLVER = (LiouvilleError, GaussianError, ExactError, FCSError, la.LinAlgError, ArpackError,
           RuntimeError, FloatingPointError)


class Run:
    """Output directory, CSV writer and manifest accumulator for one invocation."""

    def __init__(self, out: Path, command: str, cfg: RunConfig, args: argparse.Namespace):
        self.out = out
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest = {
            "schema_version": MANIFEST_SCHEMA,
            "command": command,
            "target": getattr(args, "target", None),
            "config": cfg.raw,
            "seed": cfg.seed,
            "tol": args.tol,
            "threads": args.threads,
            "versions": {"openchain": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                         "python": platform.python_version()},
            "outputs": [],
            "residuals": {},
            "results": {},
        }

    def csv(self, name: str, header: Sequence[str], rows) -> Path:
        path = self.out / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(header)
            n, worst = 0, 0.0
            for row in rows:
                w.writerow([_fmt(v) for v in row])
                n += 1
                if "residual" in header:
                    worst = max(worst, abs(float(row[header.index("residual")])))
        self.manifest["outputs"].append({"file": name, "rows": n})
        if "residual" in header:
            self.manifest["residuals"][name] = worst
        return path

    def finish(self) -> None:
        with open(self.out / "manifest.json", "w") as fh:
            json.dump(self.manifest, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    return str(o)


def _require_model(cfg: RunConfig) -> HamiltonianSpec:
    if cfg.model is None:
        raise ConfigError("model: section is required for this command")
    return cfg.model


def _bundle(cfg: RunConfig, kind: str | None = None):
    spec = _require_model(cfg)
    gen = cfg.section("generator")
    kind = kind or gen.get("kind", "lme")
    if not cfg.baths:
        raise ConfigError("baths: at least one bath is required")
    if kind == "lme":
        g = build_lme(spec, cfg.baths)
    elif kind == "gme":
        g = build_gme(spec, cfg.baths, gen.get("secular_tol"), gen.get("lamb_shift", True))
    elif kind == "redfield":
        g = build_redfield(spec, cfg.baths, gen.get("principal_value", False), gen.get("secular_tol"))
    else:
        raise ConfigError(f"generator.kind: {kind!r} has no master-equation bundle")
    return add_dephasing(g, float(gen.get("dephasing", 0.0)))


def _quantity(spec: HamiltonianSpec) -> str:
    return "magnetization" if spec.is_spin else "particle"


def _solver_tol(cfg: RunConfig, args) -> float:
    return args.tol if args.tol is not None else float(cfg.section("solver").get("tol", 1e-9))


def _gaussian_steady(cfg: RunConfig, run: Run, args) -> None:
    spec = _require_model(cfg)
    h = single_particle_matrix(spec)
    rate = float(cfg.section("generator").get("dephasing", 0.0))
    # sqrt(rate) n_i  <->  Gamma = rate/2; sz = 2n - 1 quadruples the rate
    Gamma = rate / 2 * (4 if spec.is_spin else 1)
    st = solve_steady(build_lyapunov(h, cfg.baths, "fermion", Gamma))
    scale = 2.0 if spec.is_spin else 1.0
    currents = [scale * st.current(h, k) for k in range(1, spec.L)]
    occ = st.occupations
    q = _quantity(spec)
    run.csv("steady_currents.csv", ["bond", "quantity", "current", "residual"],
            ((k + 1, q, c, st.residual) for k, c in enumerate(currents)))
    run.csv("steady_profile.csv", ["site", "occupation", "magnetization", "residual"],
            ((i + 1, n, 2 * n - 1, st.residual) for i, n in enumerate(occ)))
    run.manifest["results"] = {"method": "lyapunov", "mean_current": float(np.mean(currents)) if currents else 0.0}


def cmd_steady(cfg: RunConfig, run: Run, args) -> None:
    if cfg.section("generator").get("kind") == "gaussian":
        return _gaussian_steady(cfg, run, args)
    spec = _require_model(cfg)
    g = _bundle(cfg)
    tol = _solver_tol(cfg, args)
    st = steady_state(g, method=cfg.section("solver").get("method", "lu"), tol=tol)
    q = _quantity(spec)
    currents = bond_currents(st.rho, spec, q) if spec.L > 1 else np.zeros(0)
    run.csv("steady_currents.csv", ["bond", "quantity", "current", "residual"],
            ((k + 1, q, c, st.residual) for k, c in enumerate(currents)))
    occ = [np.trace(site_operator("number", i, spec) @ st.rho).real for i in range(1, spec.L + 1)]
    run.csv("steady_profile.csv", ["site", "occupation", "magnetization", "residual"],
            ((i + 1, n, 2 * n - 1, st.residual) for i, n in enumerate(occ)))
    N = sum(site_operator("number", i, spec) for i in range(1, spec.L + 1))
    bath_rows = []
    for nu, bath in enumerate(cfg.baths):
        try:
            jb = dissipative_current(st.rho, g, nu, N)
        except (LiouvilleError, GeneratorError) as exc:
            logger.warning("bath %d current unavailable: %s", nu, exc)
            continue
        bath_rows.append((nu, bath.site, jb, st.residual))
    run.csv("bath_currents.csv", ["bath", "site", "particle_current", "residual"], bath_rows)
    run.manifest["results"] = {"method": st.method, "gap": st.gap, "residual": st.residual,
                               "mean_current": float(np.mean(currents)) if len(currents) else 0.0}


def _initial_state(spec: HamiltonianSpec, kind: str) -> np.ndarray:
    d = spec.dim
    if kind == "mixed":
        return np.eye(d, dtype=complex) / d
    rho = np.zeros((d, d), dtype=complex)
    rho[-1 if kind == "full" else 0, -1 if kind == "full" else 0] = 1.0
    return rho


def cmd_evolve(cfg: RunConfig, run: Run, args) -> None:
    spec = _require_model(cfg)
    g = _bundle(cfg)
    ev = cfg.section("evolve")
    times = np.linspace(0.0, float(ev.get("t_final", 10.0)), int(ev.get("n_times", 101)))
    rhos = evolve(g, _initial_state(spec, ev.get("initial", "vacuum")), times, method=ev.get("method", "ode"))
    ops = [site_operator("number", i, spec) for i in range(1, spec.L + 1)]
    header = ["t"] + [f"n_{i}" for i in range(1, spec.L + 1)] + ["residual"]
    run.csv("evolve.csv", header,
            ([t] + [np.trace(O @ r).real for O in ops] + [abs(np.trace(r) - 1)] for t, r in zip(times, rhos)))


def cmd_spectrum(cfg: RunConfig, run: Run, args) -> None:
    g = _bundle(cfg)
    L = liouvillian(g)
    k = cfg.section("spectrum").get("k")
    res = spectrum(L, k=k)
    A = L.toarray() if hasattr(L, "toarray") else np.asarray(L)
    rows = []
    for j, lam in enumerate(res.values):
        v = res.right[:, j]
        resid = np.linalg.norm(A @ v - lam * v) / max(np.linalg.norm(v), 1e-300)
        cond = res.condition[j] if res.condition is not None else float("nan")
        rows.append((j, lam.real, lam.imag, cond, resid))
    run.csv("spectrum.csv", ["index", "re", "im", "condition", "residual"], rows)
    run.manifest["results"] = {"gap": float(-res.values[1].real) if len(res.values) > 1 else None,
                               "imaginary_modes": res.imaginary_modes.tolist()}


def cmd_fcs(cfg: RunConfig, run: Run, args) -> None:
    g = _bundle(cfg)
    f = cfg.section("fcs")
    counter = Counter(f.get("quantity", "particle"), f.get("bath"))
    chi_max = float(f.get("chi_max", np.pi))
    chis = np.linspace(-chi_max, chi_max, int(f.get("n_chi", 41)))
    tol = _solver_tol(cfg, args)
    lam = cgf_sweep(g, counter, chis)
    run.csv("cgf.csv", ["chi", "re_lambda", "im_lambda", "residual"], ((c, l.real, l.imag, tol) for c, l in zip(chis, lam)))
    st = steady_state(g, tol=tol)
    mean, var = mean_current(g, counter, st.rho), noise(g, counter, st.rho)
    fd = finite_difference_cumulants(g, counter)
    run.csv("cumulants.csv", ["cumulant", "direct", "finite_difference", "residual"],
            [("mean", mean, fd.mean, st.residual), ("noise", var, fd.noise, st.residual)])
    run.manifest["results"] = {"mean": mean, "noise": var}


def cmd_traj(cfg: RunConfig, run: Run, args) -> None:
    spec = _require_model(cfg)
    g = _bundle(cfg)
    t = cfg.section("traj")
    tc = TrajectoryConfig(dt=float(t.get("dt", 0.01)), t_final=float(t.get("t_final", 1.0)),
                          n_traj=int(t.get("n_traj", 100)), seed=cfg.seed, scheme=t.get("scheme", "euler"),
                          sample_every=int(t.get("sample_every", 10)))
    if t.get("initial", "vacuum") == "steady":
        psi0 = steady_state(g).rho
    else:
        psi0 = np.zeros(spec.dim, dtype=complex)
        psi0[0] = 1.0
    obs = {f"n_{i}": site_operator("number", i, spec) for i in range(1, spec.L + 1)}
    res = run_ensemble(g, psi0, tc, obs)
    header = ["t"] + [c for k in obs for c in (f"mean_{k}", f"stderr_{k}")] + ["residual"]
    rows = []
    for j, time in enumerate(res.times):
        row = [time]
        for k in obs:
            row += [res.mean(k)[j], res.error(k)[j]]
        rows.append(row + [tc.dt])
    run.csv("traj.csv", header, rows)
    write_events(res.records, run.out / "events.jsonl")
    run.manifest["outputs"].append({"file": "events.jsonl"})
    jumps = np.array([len(r.jump_times) for r in res.records], dtype=float)
    run.manifest["results"] = {"jump_rate": float(jumps.mean() / tc.t_final) if tc.t_final else 0.0}


def _size_family(L: int) -> str:
    a, b = 1, 2
    while b < L:
        a, b = b, a + b
    return "fibonacci" if L in (1, 2, b) else "generic"


def _scan_point(name: str, param: float, L: int, J: float, gamma: float, seed: int):
    if name == "dephasing":
        sys = boundary_driven_chain(L, J, gamma, 1.0, 0.0, dephasing=param)
    else:
        pot = {"fibonacci": PotentialSpec("fibonacci", h=param),
               "aah": PotentialSpec("aah", lam=param),
               "disorder": PotentialSpec("disorder", h=param, seed=seed)}[name]
        sys = boundary_driven_chain(L, J, gamma, 1.0, 0.0, onsite=potential_values(pot, L))
    st = solve_steady(sys)
    return st.current(sys.h, max(1, L // 2)), st.residual


def cmd_scan(cfg: RunConfig, run: Run, args) -> None:
    name = args.target or "fibonacci"
    if name not in ("fibonacci", "aah", "disorder", "dephasing"):
        raise ConfigError(f"scan: unknown scan {name!r} (fibonacci, aah, disorder, dephasing)")
    s = cfg.section("scan")
    sizes = [int(L) for L in s.get("sizes", FIBONACCI_SIZES)]
    if name == "dephasing":
        params = [float(x) for x in s.get("dephasing", [0.1, 1.0])]
    else:
        params = [float(x) for x in s.get("h", [0.0, 0.5, 1.0, 1.5, 2.0, 2.5])]
    J, gamma = float(s.get("J", 1.0)), float(s.get("gamma", 1.0))
    points = [(p, L) for p in params for L in sizes]
    work: Callable = lambda pt: _scan_point(name, pt[0], pt[1], J, gamma, cfg.seed)
    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        results = list(pool.map(work, points))
    run.csv(f"scan_{name}.csv", ["scan", "param", "L", "size_family", "current", "residual"],
            ((name, p, L, _size_family(L), c, r) for (p, L), (c, r) in zip(points, results)))
    fits = []
    for p in params:
        for fam in ("fibonacci", "generic"):
            sel = [(L, c) for (pp, L), (c, _) in zip(points, results) if pp == p and _size_family(L) == fam]
            if len(sel) < 4:
                continue
            Ls, cs = zip(*sel)
            entry = {"param": p, "size_family": fam}
            try:
                entry.update(fit_exponent(Ls, cs, L_min=s.get("window_min")).to_dict())
            except FitError as exc:
                entry["error"] = str(exc)
            fits.append(entry)
    with open(run.out / f"fits_{name}.json", "w") as fh:
        json.dump(fits, fh, indent=2, default=_json_default)
        fh.write("\n")
    run.manifest["outputs"].append({"file": f"fits_{name}.json"})
    run.manifest["results"] = {"fits": fits}


def cmd_benchmark(cfg: RunConfig, run: Run, args) -> None:
    name = args.target or "fig4"
    b = cfg.section("benchmark")
    eps = float(b.get("eps", 1.0))
    if name == "fig4":
        hs = [float(x) for x in b.get("h", VALIDITY_H)]
        gs = [float(x) for x in b.get("gamma", VALIDITY_GAMMA)]
        pts = validity_map([h * eps for h in hs], [g * eps for g in gs], eps=eps, beta=1.0 / eps)
        tol = 1e-10
        rows = []
        for p in pts:
            best = min((p.d_lme, "lme"), (p.d_gme, "gme"), (p.d_red, "redfield"))[1]
            rows.append((p.h / eps, p.gamma / eps, p.d_lme, p.d_gme, p.d_red, best, tol))
        run.csv("fig4.csv", ["h", "gamma", "d_lme", "d_gme", "d_redfield", "best", "residual"], rows)
    elif name == "fig2":
        times = np.linspace(0.0, float(b.get("t_final", 100.0)), int(b.get("n_times", 201)))
        rows = []
        for n_lead in b.get("n_lead", [10, 30, 200]):
            ex, lme = single_dot_benchmark(times, int(n_lead), eps=eps)
            rows += [(int(n_lead), t, e, m, 1e-9) for t, e, m in zip(times, ex, lme)]
        run.csv("fig2.csv", ["n_lead", "t", "exact", "lme", "residual"], rows)
    elif name == "heisenberg":
        rows = []
        for gamma in b.get("gamma", [0.5, 1.0, 2.0]):
            spec = HamiltonianSpec("xxz", L=4, J=1.0, delta=1.0)
            g = build_lme(spec, [BathSpec("target", site=1, gamma=gamma, f=1.0),
                                 BathSpec("target", site=4, gamma=gamma, f=0.0)])
            st = steady_state(g)
            numeric = float(np.mean(bond_currents(st.rho, spec, "magnetization")))
            rows.append((gamma, heisenberg_mps_current(gamma, 4), numeric, st.residual))
        run.csv("heisenberg.csv", ["gamma", "closed_form", "lme", "residual"], rows)
    else:
        raise ConfigError(f"benchmark: unknown benchmark {name!r} (fig4, fig2, heisenberg)")


COMMANDS = {"steady": cmd_steady, "evolve": cmd_evolve, "spectrum": cmd_spectrum, "fcs": cmd_fcs,
            "traj": cmd_traj, "scan": cmd_scan, "benchmark": cmd_benchmark}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run configuration")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker threads for scans")
    common.add_argument("--seed", type=int, default=None, help="override config seed")
    common.add_argument("--tol", type=float, default=None, help="solver tolerance")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="openchain", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name in ("scan", "benchmark"):
            p.add_argument("target", nargs="?", help="scan or benchmark name")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else parse_config({})
        if args.seed is not None:
            cfg.seed = args.seed
            cfg.raw["seed"] = args.seed
        if args.threads < 1:
            raise ConfigError("--threads: must be >= 1")
        run = Run(args.out, args.command, cfg, args)
        COMMANDS[args.command](cfg, run, args)
        run.finish()
    except (la.LinAlgError, ArpackError) as exc:
        print(f"openchain: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except _VALIDATION as exc:
        print(f"openchain: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except _SOLVER as exc:
        print(f"openchain: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
