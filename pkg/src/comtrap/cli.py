"""``comtrap`` command line.

Subcommands mirror the library: ``spectrum``, ``window``, ``trajectory``,
``verify-family``, ``fewbody``, plus ``run`` which dispatches on the
``scenario`` key of a config file. Flags override config values.

Exit status: 0 success, 1 invalid input, 2 numerical failure. Failures also
print one JSON object on stderr. ``COMTRAP_LOG`` sets the log level.
"""

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import classical, fewbody, meanfield, spectral
from .config import load_config, validate
from .errors import ComtrapError, InstabilityAbort, NumericalError, ValidationError
from .trap import (ModulatedTrap, RotatingTrap, RotationSpec, make_trap, rotation_from_config,
                   trap_from_config)

log = logging.getLogger("comtrap")


def fmt(x):
    """17 significant digits: enough to round-trip any float64."""
    return format(float(x), ".17g")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def _floats(text, n=None, sep=","):
    try:
        vals = [float(v) for v in text.split(sep)]
    except ValueError:
        raise ValidationError(f"expected numbers separated by {sep!r}, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise ValidationError(f"expected {n} values, got {text!r}")
    return vals


def _first(*values):
    for v in values:
        if v is not None:
            return v
    return None


def _write(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
        log.info("wrote %s", out)


def _geometry(cfg):
    trap_cfg = cfg.get("trap")
    trap = trap_from_config(trap_cfg) if trap_cfg else make_trap(1.0, 1.0, 1.0)
    return trap, rotation_from_config(cfg.get("rotation"))


def _axis(flag, section, rot):
    if flag is not None:
        return np.array(_floats(flag, 3))
    if section.get("axis") is not None:
        return np.array(section["axis"], dtype=float)
    return rot.axis if rot.is_rotating else np.array([0.0, 0.0, 1.0])


# -- spectrum ---------------------------------------------------------------

def _omega_grid(text):
    start, stop, step = _floats(text, 3, sep=":") if isinstance(text, str) else text
    if not step > 0 or stop < start:
        raise ValidationError("omega range must be start:stop:step with step > 0 and stop >= start")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def _perpendicular(trap, axis):
    """The two principal values perpendicular to ``axis`` if it is a principal axis."""
    n = trap.principal_axes.T @ (axis / np.linalg.norm(axis))
    k = int(np.argmax(np.abs(n)))
    if abs(abs(n[k]) - 1.0) > 1e-12:
        raise ValidationError("--closed-form needs rotation about a principal axis")
    others = [v for i, v in enumerate(trap.principal_values) if i != k]
    return others[0], others[1]


def cmd_spectrum(args, cfg):
    sec = cfg.get("spectrum", {})
    trap, rot = _geometry(cfg)
    axis = _axis(args.axis, sec, rot)
    omegas = _omega_grid(_first(args.omega_range, sec.get("omega_range"), "0:3:0.01"))
    closed = args.closed_form or sec.get("closed_form", False)
    sets = spectral.stability_sweep(trap, axis, omegas, threads=args.threads)
    header = ["omega"]
    for i in range(1, 4):
        header += [f"re_w{i}sq", f"im_w{i}sq"]
    header.append("classification")
    if closed:
        ax, ay = _perpendicular(trap, axis)
        header += ["w_plus_sq", "w_minus_sq"]
    rows = []
    for w, fs in sorted(zip(omegas, sets), key=lambda r: r[0]):
        row = [fmt(w)]
        for z in fs.omega_sq:
            row += [fmt(z.real), fmt(z.imag)]
        row.append(fs.classification.value)
        if closed:
            pm = spectral.omega_pm(ax, ay, w)
            row += [fmt(pm.omega_plus_sq), fmt(pm.omega_minus_sq)]
        rows.append(row)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    _write(buf.getvalue(), args.out)
    return 0


# -- window -----------------------------------------------------------------

def cmd_window(args, cfg):
    sec = cfg.get("window", {})
    trap, rot = _geometry(cfg)
    axis = _axis(args.axis, sec, rot)
    method = _first(args.method, sec.get("method"), "biquadratic")
    win = spectral.instability_window(trap, axis, method=method)
    out = win.as_dict()
    if args.details:
        from .trap import axis_invariants
        inv = axis_invariants(trap, axis)
        disc = spectral.discriminant(inv)
        out["invariants"] = {"trA": inv.trA, "trA2": inv.trA2, "detA": inv.detA,
                             "nAn": inv.nAn, "nA2n": inv.nA2n}
        out["discriminant"] = {"delta": disc.delta, "rearranged": disc.rearranged}
        out["method"] = method
    _write(json.dumps(out, sort_keys=True) + "\n", args.out)
    return 0


# -- trajectory -------------------------------------------------------------

def _trajectory_csv(traj, with_boundary):
    header = ["t", "Rx", "Ry", "Rz", "Vx", "Vy", "Vz", "f"]
    if with_boundary:
        header.append("f_boundary")
        fb = classical.action_boundary(traj)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for i in range(len(traj)):
        row = [fmt(traj.t[i]), *map(fmt, traj.R[i]), *map(fmt, traj.V[i]),
               fmt(traj.action[i])]
        if with_boundary:
            row.append(fmt(fb[i]))
        writer.writerow(row)
    return buf.getvalue()


def _trajectory_rows(traj, frame, trap, rot):
    """Samples in the requested frame plus the lab-frame action of the same path."""
    if frame == "rot":
        lab = classical.rotating_to_lab(traj, trap, rot)
        return classical.Trajectory(traj.t, traj.R, traj.V, traj.acc, traj.frame,
                                    lab.action, lab.lagrangian, traj.potential), lab
    return traj, traj


def cmd_trajectory(args, cfg):
    sec = cfg.get("trajectory", {})
    trap, rot = _geometry(cfg)
    r0 = _floats(args.r0, 3) if args.r0 else sec.get("r0", [1.0, 0.0, 0.0])
    v0 = _floats(args.v0, 3) if args.v0 else sec.get("v0", [0.0, 0.0, 0.0])
    t_end = _first(args.t_end, sec.get("t_end"), 2.0 * np.pi)
    frame = _first(args.frame, sec.get("frame"), "lab")
    force = args.force or sec.get("force", False)
    with_boundary = args.with_boundary or sec.get("with_boundary", False)
    omega_max = trap.omega_max + (rot.magnitude if frame == "rot" else 0.0)
    dt = _first(args.dt, sec.get("dt"), 2.0 * np.pi / omega_max / 100.0)
    s0 = classical.ClassicalState(r0, v0)
    potential = RotatingTrap(trap, rot) if rot.is_rotating else trap
    try:
        if frame == "lab":
            traj = classical.integrate_lab(potential, s0, t_end, dt, force=force)
        else:
            traj = classical.integrate_rotating(trap, rot, s0, t_end, dt, force=force)
    except InstabilityAbort as exc:
        # keep the partial path: it shows where the escape happened
        part = exc.trajectory
        if part is not None and len(part) > 1:
            if frame == "lab":
                full = classical.Trajectory(part.t, part.R, part.V, part.acc, part.frame,
                                            classical.action(part, potential),
                                            classical.lagrangian(part, potential), potential)
                rows, lab = full, full
            else:
                rows, lab = _trajectory_rows(part, frame, trap, rot)
            _write(_trajectory_csv(rows, with_boundary and frame == "lab"), args.out)
        raise
    rows, lab = _trajectory_rows(traj, frame, trap, rot)
    if with_boundary and frame == "rot":
        # the boundary form is a lab-frame identity
        raise ValidationError("--with-boundary requires --frame lab")
    _write(_trajectory_csv(rows, with_boundary), args.out)
    return 0


# -- verify-family ----------------------------------------------------------

def cmd_verify_family(args, cfg):
    sec = cfg.get("verify_family", {})
    trap, rot = _geometry(cfg)
    if rot.is_rotating:
        raise ValidationError("verify-family runs on a 1D grid; rotation is not supported")
    g = _first(args.g, sec.get("g"), 1.0)
    r0 = _first(args.r0, sec.get("r0"), 0.7)
    v0 = _first(args.v0, sec.get("v0"), 0.0)
    dt = _first(args.dt, sec.get("dt"), 1e-3)
    tol = _first(args.tol, sec.get("tolerance"), 1e-5)
    quartic = _first(args.quartic, sec.get("quartic"))
    if args.grid:
        n, extent = _floats(args.grid, 2)
    else:
        gs = sec.get("grid", {})
        n, extent = gs.get("points", 1024), gs.get("extent", 10.0)
    if float(n) != int(n):
        raise ValidationError(f"grid points must be an integer, got {n}")
    grid = meanfield.GridSpec(1, float(extent), int(n))
    period = 2.0 * np.pi / np.sqrt(trap.principal_values[0])
    if args.t_checks:
        t_checks = _floats(args.t_checks)
    else:
        t_checks = sec.get("t_checks", [0.25 * period, 0.5 * period, period])
    modulation = sec.get("modulation")
    if args.modulation:
        depth, freq = _floats(args.modulation, 2)
        modulation = {"depth": depth, "frequency": freq}
    schedule = trap
    if modulation:
        schedule = ModulatedTrap.sinusoidal(trap, modulation["depth"], modulation["frequency"])
    nl = meanfield.NonlinearitySpec(g=g)
    perturbation = None
    if quartic:
        perturbation = lambda x: quartic * x**4  # noqa: E731
    psi0, info = meanfield.ground_state(grid, trap, nl, return_info=True)
    t_end = max(t_checks)
    traj_dt = min(dt, 2.0 * np.pi / schedule.schedule_omega_max(t_end) / 200.0)
    traj = classical.integrate_lab(schedule, classical.ClassicalState([r0, 0, 0], [v0, 0, 0]),
                                   t_end, traj_dt)
    report = meanfield.verify_family(psi0, traj, schedule, nl, t_checks, dt, tol=tol,
                                     perturbation=perturbation)
    out = report.as_dict()
    out["ground_state"] = {"mu": info.mu, "iterations": info.iterations}
    out["parameters"] = {"g": g, "r0": r0, "v0": v0, "dt": dt, "points": grid.points,
                         "extent": grid.extent, "modulation": modulation, "quartic": quartic,
                         "seed": cfg.get("seed")}
    dump = _first(args.dump_snapshot, sec.get("dump_snapshot"))
    if dump:
        meanfield.save_snapshot(psi0, dump)
    _write(json.dumps(out, indent=2, sort_keys=True) + "\n", args.out)
    return 0


# -- fewbody ----------------------------------------------------------------

def cmd_fewbody(args, cfg):
    sec = cfg.get("fewbody", {})
    a = _first(args.a, sec.get("a"), 1.0)
    inter = fewbody.parse_interaction(_first(args.interaction, sec.get("interaction"),
                                             "harmonic:0.5"))
    if args.grid:
        n, extent = _floats(args.grid, 2)
    else:
        gs = sec.get("grid", {})
        n, extent = gs.get("points", 256), gs.get("extent", 4.5)
    if float(n) != int(n):
        raise ValidationError(f"grid points must be an integer, got {n}")
    k = int(_first(args.k, sec.get("k"), 12))
    problem = fewbody.FewBodyProblem(a, inter, fewbody.two_body_grid(int(n), float(extent)))
    if k >= 10:
        spec = fewbody.spectrum(problem, k)
    else:  # too few levels for a ladder fit
        spec = fewbody.diagonalize(fewbody.build_hamiltonian(problem), k)
    out = {
        "a": a,
        "interaction": _first(args.interaction, sec.get("interaction"), "harmonic:0.5"),
        "grid": {"points": problem.grid.points, "extent": problem.grid.extent},
        "eigenvalues": spec.eigenvalues.tolist(),
        "parity": spec.parity.tolist(),
        "residuals": spec.residuals.tolist(),
        "ladder_fit": spec.ladder_fit.as_dict() if spec.ladder_fit else None,
    }
    if isinstance(inter, fewbody.HarmonicInteraction):
        exact = inter.exact_levels(a, k)
        out["exact"] = exact.tolist()
        out["max_error"] = float(np.max(np.abs(spec.eigenvalues - exact)))
    if args.transform_check or sec.get("transform_check", False):
        R = args.r0 if args.r0 is not None else 0.5
        V = args.v0 if args.v0 is not None else 0.0
        state = classical.ClassicalState([R, 0, 0], [V, 0, 0])
        psi = spec.state(0)
        moved = fewbody.transform_two_body(psi, state, 0.0)
        _, before = fewbody.relative_marginal(psi)
        _, after = fewbody.relative_marginal(moved)
        out["transform_check"] = {"R": R, "V": V,
                                  "marginal_change": float(np.max(np.abs(after - before))),
                                  "com_shift": fewbody.com_expectation_two_body(moved)[0]
                                  - fewbody.com_expectation_two_body(psi)[0]}
    _write(json.dumps(out, indent=2, sort_keys=True) + "\n", args.out)
    return 0


# -- plumbing ---------------------------------------------------------------

COMMANDS = {
    "spectrum": cmd_spectrum,
    "window": cmd_window,
    "trajectory": cmd_trajectory,
    "verify-family": cmd_verify_family,
    "fewbody": cmd_fewbody,
}


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--threads", type=int, default=None, help="cap on worker threads")
    common.add_argument("--seed", type=int, default=None, help="seed recorded with outputs")

    p = _Parser(prog="comtrap", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("spectrum", parents=[common], help="characteristic frequencies vs Omega")
    s.add_argument("--omega-range", help="start:stop:step")
    s.add_argument("--axis", help="rotation axis x,y,z (default: config rotation axis or z)")
    s.add_argument("--closed-form", action="store_true",
                   help="add closed-form in-plane columns (principal-axis rotation)")

    s = sub.add_parser("window", parents=[common], help="instability window about an axis")
    s.add_argument("--axis")
    s.add_argument("--method", choices=["biquadratic", "bisection"])
    s.add_argument("--details", action="store_true", help="include invariants and discriminant")

    s = sub.add_parser("trajectory", parents=[common], help="classical COM trajectory")
    s.add_argument("--r0")
    s.add_argument("--v0")
    s.add_argument("--t-end", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--frame", choices=["lab", "rot"])
    s.add_argument("--force", action="store_true", help="skip the time-step bound")
    s.add_argument("--with-boundary", action="store_true",
                   help="add the boundary form of the action (lab frame)")

    s = sub.add_parser("verify-family", parents=[common],
                       help="displace/evolve commutation on a 1D condensate")
    s.add_argument("--g", type=float)
    s.add_argument("--r0", type=float)
    s.add_argument("--v0", type=float)
    s.add_argument("--t-checks")
    s.add_argument("--dt", type=float)
    s.add_argument("--grid", help="N,L")
    s.add_argument("--modulation", help="depth,frequency of a(t) = a (1 + depth sin(freq t))")
    s.add_argument("--quartic", type=float, help="add c x**4 to the potential (breaks the family)")
    s.add_argument("--tol", type=float)
    s.add_argument("--dump-snapshot", help="path prefix for the ground-state .bin/.json")

    s = sub.add_parser("fewbody", parents=[common], help="two-body grid spectrum")
    s.add_argument("--a", type=float)
    s.add_argument("--interaction", help="harmonic:kappa or gaussian:g,s")
    s.add_argument("--grid", help="N,L")
    s.add_argument("--k", type=int)
    s.add_argument("--transform-check", action="store_true",
                   help="displace the ground state and report the relative marginal change")
    s.add_argument("--r0", type=float)
    s.add_argument("--v0", type=float)

    sub.add_parser("run", parents=[common], help="run the scenario named in --config")
    return p


def _defaults_for(command):
    """Namespace with every flag of ``command`` unset, for config-driven runs."""
    return build_parser().parse_args([command])


def run(config: dict, out=None, threads=None) -> int:
    """Run the scenario described by a config dict; returns the exit status."""
    validate(config)
    scenario = config.get("scenario")
    if scenario is None:
        raise ValidationError("config has no scenario")
    args = _defaults_for(scenario)
    args.out = _first(out, config.get("out"))
    args.threads = threads
    return COMMANDS[scenario](args, config)


def _configure_logging():
    level = os.environ.get("COMTRAP_LOG", "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        level = "WARNING"
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _fail(exc, code):
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for extra in ("leak", "residual"):
        if hasattr(exc, extra):
            err[extra] = getattr(exc, extra)
    sys.stderr.write(json.dumps(err, default=float) + "\n")
    return code


def main(argv=None) -> int:
    _configure_logging()
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config) if args.config else {}
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.command == "run":
            if not args.config:
                raise ValidationError("run needs --config")
            return run(cfg, out=args.out, threads=args.threads)
        if cfg.get("scenario") not in (None, args.command):
            raise ValidationError(
                f"config scenario {cfg['scenario']!r} does not match command {args.command!r}")
        return COMMANDS[args.command](args, cfg)
    except ValidationError as exc:
        return _fail(exc, 1)
    except NumericalError as exc:
        return _fail(exc, 2)
    except ComtrapError as exc:  # pragma: no cover - every subclass is one of the above
        return _fail(exc, 2)


if __name__ == "__main__":
    sys.exit(main())
