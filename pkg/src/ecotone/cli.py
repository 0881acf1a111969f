"""Command-line entry point: ``ecotone [COMMAND] --config run.ini [--out DIR] [--seed N] [--quiet]``.

Exit codes: 0 success, 2 invalid configuration or usage, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import diagnostics as dg
from .config import COMMANDS, RunConfig, build_field, load_config
from .convergence import coupled_recipe, heat_only_recipe, manufactured_convergence
from .dynamics import StepperConfig, simulate, write_seminorm_csv, write_snapshot_csv, write_trajectory_csv
from .equilibria import (
    Partition, near_homogeneous_equilibrium, ode_roots, partition_equilibrium,
    solve_monotone_equilibrium,
)
from .errors import ConfigError, NumericalError
from .experiments import forest_comparison, lipschitz_contrast, stabilize
from .grid import make_grid
from .model import FieldState, ForestParams, SystemParams
from .nonlinearity import from_catalog, polynomial_spec
from .operators import helmholtz_solve
from .perturbation import damped_oscillator_problem, double_well_problem, tv_check

log = logging.getLogger("ecotone")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _parser():
    p = _Parser(prog="ecotone", description="Coupled ODE-heat system experiments.")
    p.add_argument("command", nargs="?", help="one of: " + ", ".join(COMMANDS))
    p.add_argument("--config", required=True, help="INI run configuration")
    p.add_argument("--out", help="output directory (overrides run.output)")
    p.add_argument("--seed", type=int, help="seed for randomized initial data (overrides run.seed)")
    p.add_argument("--quiet", action="store_true", help="suppress progress messages")
    return p


# ---------------------------------------------------------------- builders

def _nonlinearity(cfg: RunConfig):
    m = cfg.values.get("model", {})
    kind = m.get("nonlinearity", "monotone_cubic")
    if kind == "polynomial":
        return polynomial_spec(m["f_coeffs"], m.get("phi_coeffs", [1.0]), beta0=m["beta0"], K=m["K"],
                               gamma0=m["gamma0"], delta=m["delta"], C=m["C"])
    return from_catalog(kind)


def _grid(cfg: RunConfig):
    m = cfg.values.get("model", {})
    dim = m.get("dim", 1)
    ext = m.get("extent", [1.0])
    nodes = m.get("nodes", [101])
    for key, val in (("extent", ext), ("nodes", nodes)):
        if len(val) not in (1, dim):
            raise ConfigError(f"model.{key}: expected 1 or {dim} values")
    return make_grid(dim, ext if len(ext) > 1 else ext[0], nodes if len(nodes) > 1 else nodes[0])


def _params(cfg: RunConfig, grid=None):
    grid = _grid(cfg) if grid is None else grid
    return SystemParams(cfg.get("model", "alpha", 0.5), _nonlinearity(cfg), grid)


def _initial(cfg: RunConfig, params: SystemParams, rng):
    g = params.grid
    sec = cfg.values.get("initial", {})
    v = build_field(sec.get("v", ("zero", [])), g, rng, "initial.v")
    vt = build_field(sec.get("vt", ("zero", [])), g, rng, "initial.vt")
    wspec = sec.get("w", ("zero", []))
    if wspec[0] == "equilibrated":
        w = helmholtz_solve(g, params.source * v, params.decay, params.diffusivity)
    else:
        w = build_field(wspec, g, rng, "initial.w")
    return FieldState(0.0, v, vt, w)


def _stepper(cfg: RunConfig, default_dt=1e-3, default_T=1.0):
    s = cfg.values.get("stepper", {})
    return StepperConfig(s.get("dt", default_dt), s.get("tol", 1e-10), s.get("stride", 1)), s.get("T", default_T)


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, default=_jsonable) + "\n")
    return path


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o))


def _partition_from_config(cfg, grid, roots):
    exp = cfg.values.get("experiment", {})
    if "partition_file" in exp:
        labels = np.loadtxt(exp["partition_file"], dtype=int, ndmin=1)
        if labels.shape != (grid.node_count,):
            raise ConfigError(f"experiment.partition_file: expected {grid.node_count} labels")
        return Partition(labels)
    parts = exp.get("partition")
    if parts is None:
        raise ConfigError("missing required key experiment.partition (or experiment.partition_file)")
    default = roots.index_of(parts[0][0])
    boxes = []
    for value, box in parts:
        if len(box) != grid.dim:
            raise ConfigError(f"experiment.partition: box needs {grid.dim} axes")
        boxes.append(([b[0] for b in box], [b[1] for b in box], roots.index_of(value)))
    return Partition.from_boxes(grid, boxes, default)


def _box_mask(grid, box):
    c = grid.coords
    inside = np.ones(grid.node_count, dtype=bool)
    for k, (lo, hi) in enumerate(box):
        inside &= (c[:, k] >= lo - 1e-12) & (c[:, k] <= hi + 1e-12)
    return inside


# ---------------------------------------------------------------- commands

def cmd_simulate(cfg, out, rng):
    params = _params(cfg)
    step, T = _stepper(cfg)
    init = _initial(cfg, params, rng)
    exp = cfg.values.get("experiment", {})
    h_list = exp.get("h_list", dg.default_h_list(params.grid))
    snaps = cfg.get("stepper", "snapshots", False)
    rec = simulate(init, params, step, T, probes=exp.get("probes"), h_list=h_list, keep_snapshots=snaps)
    files = [write_trajectory_csv(rec, out / "trajectory.csv"), write_seminorm_csv(rec, out / "seminorms.csv")]
    for k, s in enumerate(rec.snapshots):
        files.append(write_snapshot_csv(params.grid, s, out / f"snapshot_{k:05d}.csv"))
    summary = {
        "energy_residual": dg.energy_identity_residual(rec),
        "lyapunov_initial": float(rec.lyapunov[0]), "lyapunov_final": float(rec.lyapunov[-1]),
        "diss_l2": float(rec.diss_l2[-1]), "diss_l1": float(rec.diss_l1[-1]),
        "kato_violation": dg.kato_check(rec), "steps": rec.meta["steps"],
    }
    files.append(_write_json(out / "summary.json", summary))
    return files, summary


def _equilibrium_out(sol, grid, out, name="equilibrium"):
    sol.write_csv(grid, out / f"{name}.csv")
    sol.write_json(out / f"{name}.json")
    return [out / f"{name}.csv", out / f"{name}.json"], sol.summary()


def cmd_equilibrium(cfg, out, rng):
    params = _params(cfg)
    guess = cfg.get("experiment", "guess", 0.0)
    sol = solve_monotone_equilibrium(params, np.full(params.grid.node_count, guess))
    return _equilibrium_out(sol, params.grid, out)


def cmd_partition_eq(cfg, out, rng):
    params = _params(cfg)
    exp = cfg.values.get("experiment", {})
    roots = ode_roots(params.nonlinearity, exp.get("root_range", [-3.0, 3.0]))
    part = _partition_from_config(cfg, params.grid, roots)
    sol = partition_equilibrium(part, roots, params, alpha_max=exp.get("alpha_max", 0.05))
    return _equilibrium_out(sol, params.grid, out)


def cmd_near_homog_eq(cfg, out, rng):
    params = _params(cfg)
    exp = cfg.values.get("experiment", {})
    box = cfg.require("experiment", "omega2")
    if len(box) != params.grid.dim:
        raise ConfigError(f"experiment.omega2: box needs {params.grid.dim} axes")
    sol = near_homogeneous_equilibrium(cfg.require("experiment", "vbar"), cfg.require("experiment", "vtilde"),
                                       _box_mask(params.grid, box), params, delta0=exp.get("delta0"))
    return _equilibrium_out(sol, params.grid, out)


def cmd_stabilize(cfg, out, rng):
    params = _params(cfg)
    step, T = _stepper(cfg)
    init = _initial(cfg, params, rng)
    exp = cfg.values.get("experiment", {})
    rep = stabilize(params, init, step, T, label_T=exp.get("label_T", 200.0), label_dt=exp.get("label_dt", 0.01),
                    alpha_max=exp.get("alpha_max", 0.05), root_range=exp.get("root_range", [-3.0, 3.0]),
                    probes=exp.get("probes"))
    files = [write_trajectory_csv(rep.record, out / "trajectory.csv"),
             write_seminorm_csv(rep.record, out / "seminorms.csv"),
             write_snapshot_csv(params.grid, rep.record.final, out / "final_state.csv")]
    rep.equilibrium.write_csv(params.grid, out / "equilibrium.csv")
    files.append(out / "equilibrium.csv")
    summary = rep.summary()
    tol = exp.get("tolerance", 1e-3)
    summary["tolerance"] = tol
    summary["pass"] = bool(rep.l1 <= tol)
    files.append(_write_json(out / "stabilize.json", summary))
    return files, summary


def cmd_lipschitz_contrast(cfg, out, rng):
    grid = _grid(cfg)
    exp = cfg.values.get("experiment", {})
    step, T = _stepper(cfg, default_T=50.0)
    rep = lipschitz_contrast(grid, from_catalog("monotone_cubic"), from_catalog("bistable_cubic"),
                             cfg.get("model", "alpha", 0.5), exp.get("offset", 0.0), exp.get("amplitude", 1.0),
                             step, T, exp.get("lipschitz", [10.0, 100.0]), exp.get("h_smooth", 0.05))
    files = []
    for run in rep.runs:
        files.append(write_seminorm_csv(run.record, out / f"seminorms_{run.nonlinearity}_L{run.lipschitz:g}.csv"))
    summary = rep.summary()
    summary["monotone_pass"] = bool(rep.agreement <= 0.1)
    summary["nonmonotone_pass"] = bool(rep.ratio > 5.0)
    files.append(_write_json(out / "contrast.json", summary))
    return files, summary


def cmd_perturb_lab(cfg, out, rng):
    s = cfg.values.get("perturb", {})
    horizons = s.get("horizons", [100.0, 200.0, 400.0])
    eps, omega = s.get("eps", 0.05), s.get("omega", 1.0)
    if s.get("problem", "double_well") == "double_well":
        prob = double_well_problem(eps, omega, s.get("u0", [0.3])[0], max(horizons))
    else:
        u0 = s.get("u0", [0.5, 0.0])
        if len(u0) != 2:
            raise ConfigError("perturb.u0: the oscillator needs two values (y, y')")
        prob = damped_oscillator_problem(_nonlinearity(cfg), eps, omega, u0, max(horizons))
    rep = tv_check(prob, horizons, s.get("dt", 0.01), s.get("eps0", 0.1), s.get("C2_max", 100.0),
                   s.get("slack", 0.1), s.get("delta", 0.1))
    rep.write_json(out / "perturbation.json")
    summary = rep.as_dict()
    summary["notes"] = rep.notes
    return [out / "perturbation.json"], summary


def cmd_forest(cfg, out, rng):
    s = cfg.values.get("forest", {})
    p = ForestParams(*(s.get(k, 1.0) for k in ("alpha", "beta", "delta", "d", "f", "h")), gamma=s.get("gamma", [1.0]))
    grid = _grid(cfg)
    fields = [build_field(s.get(k, ("constant", [0.5])), grid, rng, f"forest.{k}") for k in ("u0", "v0", "w0")]
    cmp = forest_comparison(p, grid, *fields, s.get("dt", 1e-3), s.get("T", 10.0), s.get("every", 100),
                            with_imex=s.get("imex", False))
    path = out / "forest.csv"
    with path.open("w") as fh:
        fh.write("t,sup_dv,sup_du\n")
        for t, a, b, c, d in zip(cmp.t, cmp.v_direct, cmp.v_reduced, cmp.u_direct, cmp.u_recovered):
            fh.write(f"{t:.17g},{np.max(np.abs(a - b)):.17g},{np.max(np.abs(c - d)):.17g}\n")
    summary = cmp.summary()
    return [path, _write_json(out / "forest.json", summary)], summary


def cmd_convergence(cfg, out, rng):
    s = cfg.values.get("convergence", {})
    rep = manufactured_convergence(
        heat_only_recipe(), s.get("space_nodes", [9, 17, 33, 65]),
        coupled_recipe(s.get("alpha", 0.5)), s.get("dts", [0.02, 0.01, 0.005, 0.0025]),
        T=s.get("T", 0.5), cfl=s.get("cfl", 0.5), fine_nodes=s.get("fine_nodes", 257),
    )
    summary = rep.as_dict()
    return [_write_json(out / "convergence.json", summary)], summary


HANDLERS = {
    "simulate": cmd_simulate, "equilibrium": cmd_equilibrium, "partition-eq": cmd_partition_eq,
    "near-homog-eq": cmd_near_homog_eq, "stabilize": cmd_stabilize,
    "lipschitz-contrast": cmd_lipschitz_contrast, "perturb-lab": cmd_perturb_lab,
    "forest": cmd_forest, "convergence": cmd_convergence,
}


def _manifest(cfg, command, seed, files, wall, out):
    import importlib.metadata as md
    try:
        pkg = md.version("artifact")
    except md.PackageNotFoundError:
        pkg = __version__
    data = {
        "command": command, "config_sha256": cfg.digest, "config_path": str(cfg.path), "seed": seed,
        "versions": {"package": pkg, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "wall_time_s": wall, "files": sorted(str(Path(f).name) for f in files),
    }
    _write_json(out / "manifest.json", data)


def run(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
        logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
        cfg = load_config(args.config)
        command = args.command or cfg.command
        if command is None:
            raise ConfigError("no command given (positional argument or run.command)")
        if command not in HANDLERS:
            raise ConfigError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
        seed = args.seed if args.seed is not None else cfg.get("run", "seed", 0)
        if not 0 <= seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        out = Path(args.out or cfg.get("run", "output", "ecotone-out"))
        out.mkdir(parents=True, exist_ok=True)
        rng = np.random.default_rng(seed)
        t0 = time.perf_counter()
        files, summary = HANDLERS[command](cfg, out, rng)
        wall = time.perf_counter() - t0
        _manifest(cfg, command, seed, files, wall, out)
        log.info("%s finished in %.2fs; outputs in %s", command, wall, out)
        log.info(json.dumps(summary, default=_jsonable))
        return 0
    except ConfigError as exc:
        print(f"ecotone: configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"ecotone: numerical failure: {exc}", file=sys.stderr)
        return 3


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
