"""Experiment driver.

Subcommands:

    rho-star             admissibility threshold curve, optional q3 grid and
                         the (rho, alpha) fixed point
    mesh                 mesh tables, optional ratio report and kernel rows
    caputo-convergence   fractional-derivative benchmark tables
    tfch-convergence     temporal self-convergence of the full solver
    tfch-run             one full run with energy/mass/validator outputs
    manufactured         forced-solution accuracy sweep
    verify               structural verification battery

Every subcommand accepts --out DIR (default .) and --config FILE, where the
file holds `key = value` lines using the flag names (dashes or underscores);
explicit command-line flags override file values. Each run rewrites
run_meta.txt in the output directory with the resolved settings, with no
timestamps, so reruns on identical inputs are byte-identical.

Exit codes: 0 success, 1 runtime failure (including failed verification),
2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.special import gamma

from . import diagnostics, temporal_mesh
from ._fmt import fmt
from ._verification import run_verification_suite
from .caputo_l2 import (
    q3,
    rho_bar,
    rho_star,
    solve_linear_fode,
    write_kernel_row_csv,
    write_q3_csv,
    write_rho_star_csv,
)
from .compact_spatial import norm_inf
from .tfch_solver import (
    SolverConfig,
    manufactured_solution,
    quartic_bump,
    solve,
)

__all__ = ["main", "build_parser"]


class UsageError(ValueError):
    """Bad flag values or combinations; reported with exit code 2."""


def _zero_initial(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def _float_list(text: str):
    items = [float(p) for p in text.split(",") if p.strip()]
    if not items:
        raise argparse.ArgumentTypeError("expected at least one value")
    return items


def _int_list(text: str):
    items = [int(p) for p in text.split(",") if p.strip()]
    if not items:
        raise argparse.ArgumentTypeError("expected at least one value")
    return items


_TRUE_WORDS = {"1", "true", "yes", "on"}


def _add_common(sub) -> None:
    sub.add_argument("--out", default=".", help="output directory")
    sub.add_argument("--config", default=None,
                     help="key=value defaults file; flags override")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tfch",
        description="nonuniform-mesh fractional Cahn-Hilliard experiments")
    subs = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")
    registry = {}

    s = subs.add_parser("rho-star", help="admissibility threshold tables")
    s.add_argument("--alphas", type=_float_list,
                   default=[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
    s.add_argument("--q3", action="store_true",
                   help="also write the q3 grid over (rho, alpha)")
    s.add_argument("--q3-rhos", type=_float_list,
                   default=list(np.round(np.arange(1.2, 8.01, 0.2), 10)))
    s.add_argument("--fixed-point", action="store_true",
                   help="also locate the (rho, alpha) fixed point")
    _add_common(s)
    registry["rho-star"] = s

    s = subs.add_parser("mesh", help="mesh tables and kernel rows")
    s.add_argument("--N", type=int, default=None, help="number of steps")
    s.add_argument("--T", type=float, default=1.0, help="time horizon")
    s.add_argument("--mesh", default="graded-cubic",
                   help="graded-cubic, uniform, or a path to a mesh file "
                        "(mesh.csv layout or one step size per line)")
    s.add_argument("--alpha", type=float, default=None,
                   help="enables the ratio-bound report (and kernel rows)")
    s.add_argument("--kernel-level", type=int, default=None,
                   help="write the kernel rows at this level (needs --alpha)")
    _add_common(s)
    registry["mesh"] = s

    s = subs.add_parser("caputo-convergence",
                        help="fractional-derivative benchmark")
    s.add_argument("--alphas", type=_float_list, default=[0.3, 0.5, 0.7, 0.9])
    s.add_argument("--Ns", type=_int_list, default=[250, 500, 1000, 2000, 4000])
    s.add_argument("--T", type=float, default=1.0)
    _add_common(s)
    registry["caputo-convergence"] = s

    s = subs.add_parser("tfch-convergence",
                        help="temporal self-convergence of the solver")
    s.add_argument("--alphas", type=_float_list, default=[0.3, 0.5, 0.7, 0.9])
    s.add_argument("--Ns", type=_int_list, default=[15, 18, 21, 24])
    s.add_argument("--N0", type=int, default=200, help="reference resolution")
    s.add_argument("--M", type=int, default=60)
    s.add_argument("--T", type=float, default=1.0)
    s.add_argument("--kappa", type=float, default=0.01)
    s.add_argument("--epsilon", type=float, default=0.1)
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--workers", type=int, default=1,
                   help="thread fan-out over the alpha list")
    _add_common(s)
    registry["tfch-convergence"] = s

    s = subs.add_parser("tfch-run", help="one full run with diagnostics")
    s.add_argument("--alpha", type=float, default=None)
    s.add_argument("--N", type=int, default=200)
    s.add_argument("--M", type=int, default=60)
    s.add_argument("--T", type=float, default=1.0)
    s.add_argument("--kappa", type=float, default=0.01)
    s.add_argument("--epsilon", type=float, default=0.1)
    s.add_argument("--mesh", default="graded-cubic",
                   help="graded-cubic, uniform, or a path to a mesh file")
    s.add_argument("--initial", choices=("quartic-bump", "zero"),
                   default="quartic-bump")
    s.add_argument("--source", choices=("none", "manufactured"),
                   default="none")
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--max-iterations", type=int, default=500)
    s.add_argument("--dump-states", type=int, default=0, metavar="K",
                   help="write state_{n}.csv every K levels (0 disables)")
    _add_common(s)
    registry["tfch-run"] = s

    s = subs.add_parser("manufactured", help="forced-solution accuracy sweep")
    s.add_argument("--alphas", type=_float_list, default=[0.1, 0.3, 0.6, 0.9])
    s.add_argument("--Ns", type=_int_list, default=[200])
    s.add_argument("--M", type=int, default=60)
    s.add_argument("--T", type=float, default=1.0)
    s.add_argument("--kappa", type=float, default=0.01)
    s.add_argument("--epsilon", type=float, default=0.1)
    s.add_argument("--tol", type=float, default=1e-10)
    _add_common(s)
    registry["manufactured"] = s

    s = subs.add_parser("verify", help="structural verification battery")
    s.add_argument("--seed", type=int, default=0)
    _add_common(s)
    registry["verify"] = s

    return parser, registry


def _load_config_file(path: str) -> dict:
    values = {}
    with open(path) as f:
        for raw in f:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError("config line %r is not key=value" % raw.strip())
            key, val = line.split("=", 1)
            values[key.strip().replace("-", "_")] = val.strip()
    return values


def _apply_config(sub: argparse.ArgumentParser, values: dict, parser) -> None:
    by_dest = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        action = by_dest.get(key)
        if action is None:
            parser.error("unknown config key %r" % key)
        if isinstance(action, (argparse._StoreTrueAction,
                               argparse._StoreFalseAction)):
            defaults[key] = raw.lower() in _TRUE_WORDS
        elif action.type is not None:
            try:
                defaults[key] = action.type(raw)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise ValueError("config key %r: %s" % (key, exc))
        else:
            defaults[key] = raw
    sub.set_defaults(**defaults)


def _write_meta(args, outputs, notes=()):
    """Rewrite run_meta.txt: command, resolved settings, outputs, notes."""
    skip = {"command", "out", "config"}
    path = os.path.join(args.out, "run_meta.txt")
    with open(path, "w") as f:
        f.write("command: %s\n" % args.command)
        for key in sorted(vars(args)):
            if key in skip:
                continue
            value = getattr(args, key)
            if isinstance(value, list):
                value = ",".join(str(v) for v in value)
            f.write("%s: %s\n" % (key, value))
        f.write("outputs: %s\n" % ", ".join(outputs))
        for line in notes:
            f.write("note: %s\n" % line)
    return path


def _out_path(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _cmd_rho_star(args) -> int:
    for a in args.alphas:
        if not 0.0 < a <= 1.0:
            raise UsageError("alpha %g outside (0,1]" % a)
    outputs = ["rho_star.csv"]
    notes = []
    write_rho_star_csv(args.alphas, _out_path(args, "rho_star.csv"))
    if args.q3:
        write_q3_csv(args.q3_rhos, args.alphas,
                     _out_path(args, "q3_curves.csv"))
        outputs.append("q3_curves.csv")
    if args.fixed_point:
        rho, alpha = rho_bar()
        with open(_out_path(args, "fixed_point.csv"), "w") as f:
            f.write("rho_bar,alpha_bar\n%s,%s\n" % (fmt(rho), fmt(alpha)))
        outputs.append("fixed_point.csv")
        notes.append("fixed point rho=%s alpha=%s" % (fmt(rho), fmt(alpha)))
        print("fixed point: rho = %.7f, alpha = %.5f" % (rho, alpha))
    _write_meta(args, outputs, notes)
    return 0


def _mesh_from_file(path: str):
    """Load a mesh from mesh.csv layout (node column) or raw step sizes."""
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if not lines:
        raise UsageError("mesh file %r is empty" % path)
    if lines[0].startswith("k,"):
        nodes = np.array([float(ln.split(",")[1]) for ln in lines[1:]])
        if nodes.size < 2 or nodes[0] != 0.0:
            raise UsageError("mesh file must start at t_0 = 0 with N >= 1")
        return temporal_mesh._finalize(nodes)
    return temporal_mesh.build_custom([float(ln) for ln in lines])


def _build_mesh(spec: str, N, T: float):
    if spec == "graded-cubic":
        if N is None:
            raise UsageError("--N is required for the graded-cubic mesh")
        return temporal_mesh.build_graded_cubic(N, T)
    if spec == "uniform":
        if N is None:
            raise UsageError("--N is required for the uniform mesh")
        return temporal_mesh.build_uniform(N, T)
    if not os.path.exists(spec):
        raise UsageError("--mesh must be graded-cubic, uniform, or an "
                         "existing file path (got %r)" % spec)
    return _mesh_from_file(spec)


def _cmd_mesh(args) -> int:
    mesh = _build_mesh(args.mesh, args.N, args.T)
    temporal_mesh.write_mesh_csv(mesh, _out_path(args, "mesh.csv"))
    outputs = ["mesh.csv"]
    notes = []
    if args.alpha is not None:
        report = temporal_mesh.validate_ratio_bound(mesh, args.alpha)
        if report.ok:
            notes.append("ratio bound holds: all ratios within [1, %s]"
                         % fmt(report.rho_star))
        else:
            notes.append("ratio bound fails at %d steps (first k=%d), "
                         "threshold %s" % (len(report.offenders),
                                           report.offenders[0],
                                           fmt(report.rho_star)))
        print(notes[-1])
        if args.kernel_level is not None:
            write_kernel_row_csv(args.kernel_level, mesh, args.alpha,
                                 _out_path(args, "kernel_row.csv"))
            outputs.append("kernel_row.csv")
    elif args.kernel_level is not None:
        raise UsageError("--kernel-level needs --alpha")
    _write_meta(args, outputs, notes)
    return 0


def _caputo_error(alpha: float, N: int, T: float) -> float:
    """Worst nodal error of the marched benchmark w with (d/dt)^a w = rhs.

    The benchmark solution is t^{3+alpha}, whose derivative is the cubic
    Gamma(4+alpha)/Gamma(4) t^3.
    """
    mesh = temporal_mesh.build_graded_cubic(N, T)
    coeff = gamma(4.0 + alpha) / gamma(4.0)
    w = solve_linear_fode(mesh, alpha, lambda t: coeff * t ** 3)
    return float(np.max(np.abs(mesh.nodes ** (3.0 + alpha) - w)))


def _cmd_caputo_convergence(args) -> int:
    path = _out_path(args, "caputo_convergence.csv")
    print("alpha      N      error   order")
    with open(path, "w", newline="") as f:
        f.write("alpha,N,error,order\n")
        for alpha in args.alphas:
            errors = [_caputo_error(alpha, N, args.T) for N in args.Ns]
            orders = diagnostics.convergence_order(errors, args.Ns)
            for i, (N, err) in enumerate(zip(args.Ns, errors)):
                order_txt = "" if i == 0 else fmt(orders[i - 1])
                f.write("%s,%d,%s,%s\n" % (fmt(alpha), N, fmt(err), order_txt))
                shown = "   --" if i == 0 else "%5.2f" % orders[i - 1]
                print("%5.2f  %5d  %9.3g   %s" % (alpha, N, err, shown))
    _write_meta(args, ["caputo_convergence.csv"])
    return 0


def _tfch_errors_for_alpha(alpha, args):
    """Terminal-state errors against the N0 reference, one per N."""
    initial = quartic_bump
    def make_cfg(N):
        return SolverConfig(
            alpha=alpha, kappa=args.kappa, epsilon=args.epsilon,
            mesh=temporal_mesh.build_graded_cubic(N, args.T), M=args.M,
            iteration_tol=args.tol, initial=initial)
    ref = solve(make_cfg(args.N0)).terminal
    errors = []
    for N in args.Ns:
        term = solve(make_cfg(N)).terminal
        diff = term.values - ref.values
        errors.append(float(np.max(np.abs(diff[1:-1]))))
    return errors


def _cmd_tfch_convergence(args) -> int:
    if args.N0 <= max(args.Ns):
        raise UsageError("--N0 must exceed every entry of --Ns")
    results = {}
    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            futures = {alpha: pool.submit(_tfch_errors_for_alpha, alpha, args)
                       for alpha in args.alphas}
            results = {alpha: fut.result() for alpha, fut in futures.items()}
    else:
        for alpha in args.alphas:
            results[alpha] = _tfch_errors_for_alpha(alpha, args)

    path = _out_path(args, "tfch_convergence.csv")
    print("alpha      N      error   order")
    with open(path, "w", newline="") as f:
        f.write("alpha,N,error,order\n")
        for alpha in args.alphas:
            errors = results[alpha]
            orders = diagnostics.convergence_order(errors, args.Ns)
            for i, (N, err) in enumerate(zip(args.Ns, errors)):
                order_txt = "" if i == 0 else fmt(orders[i - 1])
                f.write("%s,%d,%s,%s\n" % (fmt(alpha), N, fmt(err), order_txt))
                shown = "   --" if i == 0 else "%5.2f" % orders[i - 1]
                print("%5.2f  %5d  %9.3g   %s" % (alpha, N, err, shown))
    _write_meta(args, ["tfch_convergence.csv"])
    return 0


def _write_state_csv(state, path: str) -> None:
    x = np.linspace(state.domain[0], state.domain[1], state.values.size)
    with open(path, "w", newline="") as f:
        f.write("x,u\n")
        for xi, ui in zip(x, state.values):
            f.write("%s,%s\n" % (fmt(xi), fmt(ui)))


def _cmd_tfch_run(args) -> int:
    if args.alpha is None:
        raise UsageError("tfch-run requires --alpha (flag or config)")
    mesh = _build_mesh(args.mesh, args.N, args.T)
    initial = quartic_bump if args.initial == "quartic-bump" else _zero_initial
    source = None if args.source == "none" else "manufactured"
    cfg = SolverConfig(
        alpha=args.alpha, kappa=args.kappa, epsilon=args.epsilon,
        mesh=mesh, M=args.M, iteration_tol=args.tol,
        max_iterations=args.max_iterations, source=source, initial=initial)
    history = solve(cfg)
    series = diagnostics.energy_series(history)

    diagnostics.write_energy_csv(series, _out_path(args, "energy.csv"))
    diagnostics.write_mass_csv(series, _out_path(args, "mass.csv"))
    outputs = ["energy.csv", "mass.csv", "validators.csv",
               "terminal_state.csv"]
    with open(_out_path(args, "validators.csv"), "w", newline="") as f:
        f.write("kind,violations,first_level\n")
        for kind in sorted(history.violations):
            levels = history.violations[kind]
            f.write("%s,%d,%s\n" % (kind, len(levels),
                                    levels[0] if levels else ""))
    _write_state_csv(history.terminal, _out_path(args, "terminal_state.csv"))
    if args.dump_states > 0:
        for n in range(0, mesh.N + 1, args.dump_states):
            name = "state_%04d.csv" % n
            _write_state_csv(history.states[n], _out_path(args, name))
            outputs.append(name)

    notes = ["iterations total=%d max=%d" % (history.iterations.sum(),
                                             history.iterations.max())]
    for kind in sorted(history.violations):
        levels = history.violations[kind]
        notes.append("validator %s: %d violations%s" % (
            kind, len(levels),
            " (first at n=%d)" % levels[0] if levels else ""))
    notes.append("lipschitz constant %s, step limit %s"
                 % (fmt(history.lipschitz_constant),
                    fmt(history.lipschitz_limit)))
    drift = float(np.max(np.abs(series.mass - series.mass[0])))
    notes.append("max mass drift %s" % fmt(drift))
    _write_meta(args, outputs, notes)
    print("energy: E0 = %.6f, EN = %.6f; max mass drift %.3e"
          % (series.free_energy[0], series.free_energy[-1], drift))
    return 0


def _cmd_manufactured(args) -> int:
    outputs = []
    notes = []
    for N in args.Ns:
        mesh = temporal_mesh.build_graded_cubic(N, args.T)
        detail_path = _out_path(args, "manufactured_N%d.csv" % N)
        summary_path = _out_path(args, "summary_N%d.csv" % N)
        with open(detail_path, "w", newline="") as fd, \
                open(summary_path, "w", newline="") as fs:
            fd.write("alpha,x,exact,numeric,abs_error\n")
            fs.write("alpha,max_error\n")
            for alpha in args.alphas:
                cfg = SolverConfig(
                    alpha=alpha, kappa=args.kappa, epsilon=args.epsilon,
                    mesh=mesh, M=args.M, iteration_tol=args.tol,
                    source="manufactured", initial=_zero_initial)
                history = solve(cfg)
                x = np.linspace(0.0, 1.0, args.M + 1)
                exact = manufactured_solution(x, args.T, alpha)
                numeric = history.terminal.values
                err = np.abs(exact - numeric)
                for xi, ei, ni_, ai in zip(x, exact, numeric, err):
                    fd.write("%s,%s,%s,%s,%s\n" % (fmt(alpha), fmt(xi),
                                                   fmt(ei), fmt(ni_), fmt(ai)))
                max_err = float(err.max())
                fs.write("%s,%s\n" % (fmt(alpha), fmt(max_err)))
                notes.append("N=%d alpha=%s max error %s"
                             % (N, fmt(alpha), fmt(max_err)))
                print("N=%4d  alpha=%4.2f  max error %.3e"
                      % (N, alpha, max_err))
        outputs.extend([os.path.basename(detail_path),
                        os.path.basename(summary_path)])
    _write_meta(args, outputs, notes)
    return 0


def _cmd_verify(args) -> int:
    results = run_verification_suite(args.seed)
    failed = 0
    lines = []
    for r in results:
        if r.passed:
            tag = "WARN" if r.warning else "PASS"
        else:
            tag = "FAIL"
            failed += 1
        line = "%s %s: %s" % (tag, r.name, r.detail)
        lines.append(line)
        print(line)
    _write_meta(args, [], lines)
    print("%d/%d checks passed" % (len(results) - failed, len(results)))
    return 1 if failed else 0


_DISPATCH = {
    "rho-star": _cmd_rho_star,
    "mesh": _cmd_mesh,
    "caputo-convergence": _cmd_caputo_convergence,
    "tfch-convergence": _cmd_tfch_convergence,
    "tfch-run": _cmd_tfch_run,
    "manufactured": _cmd_manufactured,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    parser, registry = build_parser()
    ns, _ = parser.parse_known_args(argv)
    if ns.command is None:
        parser.error("a subcommand is required")
    if getattr(ns, "config", None):
        try:
            values = _load_config_file(ns.config)
            _apply_config(registry[ns.command], values, parser)
        except (OSError, ValueError) as exc:
            print("usage error: %s" % exc, file=sys.stderr)
            return 2
    args = parser.parse_args(argv)
    os.makedirs(args.out, exist_ok=True)
    try:
        return _DISPATCH[args.command](args)
    except UsageError as exc:
        print("usage error: %s" % exc, file=sys.stderr)
        return 2
    except Exception as exc:  # surface the message, keep the exit contract
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
