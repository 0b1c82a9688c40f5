"""Command line: single computations plus the experiment recipes.

Every subcommand takes ``--config FILE`` (flat ``key = value``) and any number
of ``key=value`` overrides; the resolved configuration is echoed into the
output directory together with the package version.

Examples
--------
::

    bidomain frank a=0.9 out=run/frank
    bidomain simulate-strip --config strip.cfg t_end=200
    bidomain recipe convergence out=run/conv
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings

import numpy as np

from . import __version__
from .config import SCHEMA, ConfigError, ExperimentConfig, load
from .recipes import (RECIPES, execute, params_of, reaction_of, strip_grid, write_csv,
                      _write_level_sets, _write_probes, check)
from .symbols import directional_matrices

log = logging.getLogger("bidomain")


# ------------------------------------------------------------ subcommands

def cmd_frank(cfg: ExperimentConfig) -> dict:
    from .frank import contact_set, frank_plot
    p = params_of(cfg)
    plot = frank_plot(p, cfg.resolution)
    cs = contact_set(plot)
    plot.to_csv(cfg.outdir / "frank.csv")
    write_csv(cfg.outdir / "contact_arcs.csv", ["theta_lo", "theta_hi"], np.array(cs.arcs).reshape(-1, 2))
    write_csv(cfg.outdir / "on_hull.csv", ["theta", "on_hull"], np.c_[plot.theta, cs.on_hull])
    return {"arcs": [list(x) for x in cs.arcs]}


def cmd_wulff(cfg: ExperimentConfig) -> dict:
    from .frank import wulff_shape
    W = wulff_shape(params_of(cfg), cfg.resolution)
    write_csv(cfg.outdir / "wulff.csv", ["x", "y"], W.vertices)
    return {"n_vertices": len(W.vertices)}


def cmd_planar_front(cfg: ExperimentConfig) -> dict:
    """Closed-form directional front; with ``t_end > 0`` also measured on the strip."""
    from .analytic import directional_front
    from .strip import planar_front_field, run_strip
    p = params_of(cfg)
    fr = directional_front(p, cfg.theta, cfg.alpha)
    g = strip_grid(cfg)
    xi = g.xi_interior
    write_csv(cfg.outdir / "profile.csv", ["xi", "u"], np.c_[xi, fr.profile(xi)])
    summary = {"speed_exact": fr.speed}
    if cfg.t_end > 0:
        m = directional_matrices(p, cfg.theta)
        run = run_strip(planar_front_field(g, m), g, m, reaction_of(cfg), cfg.dt, cfg.t_end,
                        probe_every=cfg.probe_every)
        _write_probes(cfg.outdir / "probes.csv", run)
        pr = run.probes()
        sel = pr["t"] >= 0.5 * cfg.t_end
        c = float(np.polyfit(pr["t"][sel], pr["front_offset"][sel], 1)[0])
        summary["speed_measured"] = c
        check(summary, "measured speed", c, "within 1% of exact", abs(c / fr.speed - 1) <= 0.01)
    return summary


def cmd_pulse1d(cfg: ExperimentConfig) -> dict:
    from .analytic import normalized_pulse
    R = reaction_of(cfg.replace(model="fhn"))
    P = normalized_pulse(R, n_xi=cfg.n_xi, kmap=cfg.kmap, dt=cfg.dt, tol=cfg.tol,
                         t_max=max(cfg.t_end, 1.0))
    write_csv(cfg.outdir / "pulse.csv", ["xi", "u", "v"], np.c_[P.xi, P.u, P.v])
    return {"exists": P.exists, "converged": P.converged, "speed": P.speed, "t": P.t}


def cmd_simulate_periodic(cfg: ExperimentConfig) -> dict:
    from .periodic import TorusField, TorusGrid, disc, run_spreading, write_field, write_pgm
    p = params_of(cfg)
    g = TorusGrid(cfg.d1, cfg.d2, cfg.n1, cfg.n2)
    u0 = disc(g, cfg.radius)
    fld = TorusField(u0, np.zeros_like(u0) if cfg.model == "fhn" else None)
    times = cfg.snapshot_times or (cfg.t_end,)
    rows = []
    for f in run_spreading(fld, g, p, reaction_of(cfg), cfg.dt, cfg.t_end, snapshot_times=times):
        write_field(cfg.outdir / f"u_t{f.t:g}.csv", f.u, g)
        write_pgm(cfg.outdir / f"u_t{f.t:g}.pgm", f.u)
        rows.append([f.t, float(f.u.min()), float(f.u.max()), float(f.u.mean())])
    write_csv(cfg.outdir / "snapshots.csv", ["t", "min_u", "max_u", "mean_u"], rows)
    return {"snapshots": len(rows)}


def cmd_simulate_strip(cfg: ExperimentConfig) -> dict:
    from .strip import planar_front_field, pulse_field, run_strip
    p = params_of(cfg)
    m = directional_matrices(p, cfg.theta)
    R = reaction_of(cfg)
    if cfg.init == "pulse":
        if not R.is_fhn:
            raise ConfigError("init=pulse needs model=fhn")
        from .analytic import normalized_pulse
        from .symbols import normal_multiplier
        P = normalized_pulse(R, n_xi=cfg.n_xi, kmap=cfg.kmap, dt=cfg.dt)
        if not P.exists:
            raise ConfigError("no 1D pulse at these reaction parameters")
        s = math.sqrt(normal_multiplier(p, cfg.theta))
        g = strip_grid(cfg, kmap=cfg.kmap * s)
        f = pulse_field(g, P, s, cfg.displace, seed=cfg.seed)
    else:
        g = strip_grid(cfg)
        f = planar_front_field(g, m, perturb=cfg.perturb, seed=cfg.seed)
    run = run_strip(f, g, m, R, cfg.dt, cfg.t_end, probe_every=cfg.probe_every,
                    snapshot_times=cfg.snapshot_times or (cfg.t_end,), prominence=cfg.prominence)
    _write_probes(cfg.outdir / "probes.csv", run)
    _write_level_sets(cfg.outdir / "level_sets.csv", run, g)
    fin = run.final
    write_csv(cfg.outdir / "final_u.csv", ["xi"] + [f"eta{j}" for j in range(g.n_eta)],
              np.c_[g.xi_interior, fin.u])
    return {"event": run.event, "event_time": run.event_time, "t_final": fin.t,
            "front_offset": fin.front_offset}


def cmd_eigs(cfg: ExperimentConfig) -> dict:
    from .stability import newton_continue
    p = params_of(cfg)
    g = strip_grid(cfg, d=1.0, n_eta=2)
    ws = cfg.l_values or tuple(np.arange(cfg.dl, cfg.l_max + 0.5 * cfg.dl, cfg.dl))
    br = newton_continue(g, p, cfg.theta, cfg.alpha, sorted(ws))
    write_csv(cfg.outdir / "branch.csv", ["l", "re", "im", "newton_iters"],
              [[e.w, e.lam.real, e.lam.imag, e.iters] for e in br.entries])
    return {"truncated": br.truncated, "lambda_last": complex(br.entries[-1].lam)}


def cmd_front_shape(cfg: ExperimentConfig) -> dict:
    from .diagnostics import extract_level_set
    from .front_shape import iterate_front, planar_seed, zigzag_seed
    p = params_of(cfg)
    g = strip_grid(cfg)
    seed = (zigzag_seed if cfg.front_seed == "zigzag" else planar_seed)(g, p, cfg.theta, cfg.alpha)
    sol = iterate_front(seed, tol=cfg.tol, max_iters=cfg.max_iters, anderson=cfg.anderson)
    write_csv(cfg.outdir / "front_u.csv", ["xi"] + [f"eta{j}" for j in range(g.n_eta)],
              np.c_[g.xi_interior, sol.u])
    ls = extract_level_set(sol.field(), g)
    write_csv(cfg.outdir / "level_set.csv", ["eta", "xi_half"], np.c_[ls.eta, ls.xi_half])
    return {"c_xi": sol.c_xi, "c_eta": sol.c_eta, "iterations": sol.iterations,
            "residual": sol.residual}


def cmd_measure(cfg: ExperimentConfig) -> dict:
    """Peaks and flank angles of a level set file (``eta, xi_half`` columns, header line)."""
    from .diagnostics import LevelSet, count_peaks, measure_angles
    if not cfg.input:
        raise ConfigError("measure needs input=<level set csv>")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)  # empty file: reported below
            data = np.loadtxt(cfg.input, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read {cfg.input}: {exc}") from None
    if data.shape[0] < 3 or data.shape[1] not in (2, 3):
        raise ConfigError(f"{cfg.input}: expected (eta, xi_half) or (t, eta, xi_half) rows")
    if data.shape[1] == 3:  # snapshot file: keep the last time
        data = data[data[:, 0] == data[-1, 0]][:, 1:]
    eta, xi = data[:, 0], data[:, 1]
    ls = LevelSet(eta, xi, cfg.d)
    pk = count_peaks(ls, cfg.prominence)
    out = {"n_peaks": pk.n_peaks, "peak_positions": pk.positions.tolist()}
    if pk.n_peaks == 1:
        tm, tp = measure_angles(ls, cfg.prominence)
        out.update(theta_minus=tm, theta_plus=tp)
    return out


COMMANDS = {
    "frank": cmd_frank,
    "wulff": cmd_wulff,
    "planar-front": cmd_planar_front,
    "pulse1d": cmd_pulse1d,
    "simulate-periodic": cmd_simulate_periodic,
    "simulate-strip": cmd_simulate_strip,
    "eigs": cmd_eigs,
    "front-shape": cmd_front_shape,
    "measure": cmd_measure,
}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bidomain", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"bidomain {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in list(COMMANDS) + ["recipe"]:
        sp = sub.add_parser(name, help=(COMMANDS[name].__doc__ or "").split("\n")[0] if name in COMMANDS
                            else "run a predefined experiment")
        if name == "recipe":
            sp.add_argument("name", help=", ".join(RECIPES))
        sp.add_argument("--config", help="key = value file")
        sp.add_argument("overrides", nargs="*", metavar="key=value")
    sub.add_parser("keys", help="list configuration keys")
    return ap


def main(argv=None) -> int:
    ap = _parser()
    # overrides may also follow --config, which argparse leaves unconsumed
    args, extra = ap.parse_known_args(argv)
    stray = [x for x in extra if x.startswith("-") or "=" not in x]
    if stray or (extra and args.command == "keys"):
        ap.error(f"unrecognized arguments: {' '.join(stray or extra)}")
    if extra:
        args.overrides = list(args.overrides) + extra
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    if args.command == "keys":
        for k, (_, default, text) in SCHEMA.items():
            print(f"{k:16s} {default!s:24s} {text}")
        return 0
    try:
        if args.command == "recipe":
            if args.name not in RECIPES:
                ap.error(f"unknown recipe {args.name!r}; choose from {', '.join(RECIPES)}")
            fn, defaults = RECIPES[args.name]
            cfg = load(args.config, args.overrides, defaults, recipe=args.name)
        else:
            fn = COMMANDS[args.command]
            cfg = load(args.config, args.overrides, recipe=args.command)
    except ConfigError as exc:
        ap.error(str(exc))
    try:
        summary = execute(fn, cfg)
    except ConfigError as exc:
        print(f"bidomain: error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps({k: summary[k] for k in ("recipe", "pass") if k in summary}
                     | {"out": str(cfg.outdir)}))
    return 0 if summary["pass"] else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
