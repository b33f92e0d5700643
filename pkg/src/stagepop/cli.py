"""Command-line front end.

    stagepop COMMAND --scenario PATH_OR_NAME [--out DIR] [--workers K] [--verbose]

Exit codes: 0 success, 2 hypothesis failure, 3 solver non-convergence,
4 configuration error.
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
import copy
import csv
import itertools
import logging
from pathlib import Path
import sys

import numpy as np

from . import asymptotics, dynamics, output
from .coefficients import (
    check_cor2_condition,
    check_h2,
    prop1_sign_certificate,
    validate_h1,
    validate_h3,
)
from .config import build_scenario, load_scenario, parse_seeds, resolve_scenario_path
from .evolution import PopulationState, integrate
from .exceptions import (
    ConfigurationError,
    ConvergenceError,
    NumericalResolutionError,
    PreconditionError,
    StagePopError,
)
from .spectral import kinetic_lambda, principal_eigenpair

logger = logging.getLogger("stagepop")

EXIT_OK, EXIT_HYPOTHESIS, EXIT_SOLVER, EXIT_CONFIG = 0, 2, 3, 4
ROUNDOFF_ERROR = 1e-10
COMMANDS = ("check", "eigen", "simulate", "periodic", "steady", "classify", "stability", "profile", "sweep")


class HypothesisFailure(StagePopError):
    pass


def _require_h1(sc):
    rep = validate_h1(sc.params)
    if not rep.satisfied:
        names = sorted({v[2] for v in rep.violations})
        raise HypothesisFailure(f"(H1) fails for {', '.join(names)}")


def _eigen(sc):
    opts = sc.section("eigen")
    return principal_eigenpair(
        sc.params, sc.grid, opts.get("dt", 1e-3), opts.get("tol", 1e-8),
        extrapolate=opts.get("extrapolate", True),
    )


def _constant_kinetic(params):
    if params.n_nodes is None and params.time_independent:
        return kinetic_lambda(*(params.sup(k) for k in ("r", "s", "a", "e")))
    return None


def cmd_check(sc, out):
    h1 = validate_h1(sc.params)
    h3 = validate_h3(sc.params)
    cor2 = check_cor2_condition(sc.params, sc.grid)
    summary = {"scenario": sc.name, "h1_satisfied": h1.satisfied}
    summary.update({f"h1_{k}": v for k, v in h1.margins.items()})
    summary["h3_satisfied"] = h3.satisfied
    summary.update({f"h3_{k}": v for k, v in h3.margins.items()})
    summary["cor2_applicable"] = cor2.applicable
    summary["cor2_satisfied"] = cor2.satisfied
    if not h1.satisfied:
        summary["verdict"] = "H1Violated"
        output.write_summary(out / "summary.txt", summary)
        return EXIT_HYPOTHESIS, summary
    cert, details = prop1_sign_certificate(sc.params, sc.grid)
    summary["prop1_certificate"] = str(cert)
    summary["verdict"] = str(cert)
    summary.update({f"prop1_{k}": v for k, v in details.items()})
    if sc.section("check").get("h2", True):
        try:
            sol = dynamics.find_periodic_solution(sc.params, sc.grid, sc.dt, tol=sc.section("check").get("tol", 1e-6))
            h2 = check_h2(sc.params, sol)
            summary["h2_satisfied"] = h2.satisfied
            summary.update({f"h2_{k}": v for k, v in h2.margins.items()})
        except dynamics.DegenerateAttractorError:
            summary["h2_satisfied"] = "not_applicable"
    output.write_summary(out / "summary.txt", summary)
    return EXIT_OK, summary


def cmd_eigen(sc, out):
    _require_h1(sc)
    pair = _eigen(sc)
    pair.to_csv(out / "eigenfunction.csv")
    cert, _ = prop1_sign_certificate(sc.params, sc.grid)
    summary = {
        "scenario": sc.name,
        "lambda_star": pair.lambda_star,
        "lambda_grid": pair.lambda_grid,
        "M": pair.M,
        "residual": pair.residual,
        "iterations": pair.iterations,
        "prop1_certificate": str(cert),
    }
    kin = _constant_kinetic(sc.params)
    if kin is not None:
        summary["kinetic_lambda"] = kin
    output.write_summary(out / "summary.txt", summary)
    return EXIT_OK, summary


def _initial_state(sc):
    spec = sc.section("simulate").get("initial")
    if spec is None:
        bound = sc.params.density_bound()
        return PopulationState.constant(sc.grid, 0.5 * bound, 0.5 * bound)
    pair = _eigen(sc) if spec.get("kind") == "eigen" else None
    return parse_seeds([spec], sc.grid, pair, sc.raw.get("random_seed", 0))[0]


def cmd_simulate(sc, out):
    _require_h1(sc)
    opts = sc.section("simulate")
    u0 = _initial_state(sc)
    # stride is given in time units; integrate counts steps
    stride = opts.get("stride")
    if stride is not None:
        stride = max(1, round(stride / sc.dt))
    traj = integrate(u0, sc.params, sc.grid, u0.t + opts.get("t_end", sc.horizon), sc.dt, stride=stride)
    traj.to_csv(out / "trajectory.csv")
    if opts.get("svg", True):
        x = sc.grid.nodes
        picks = sorted(set(np.linspace(0, len(traj.snapshots) - 1, 5).astype(int)))
        series = [(x, traj.snapshots[k].u1, f"u1 t={traj.snapshots[k].t:.3g}") for k in picks]
        series += [(x, traj.snapshots[k].u2, f"u2 t={traj.snapshots[k].t:.3g}") for k in picks]
        output.write_svg(out / "profiles.svg", series, title=f"{sc.name}: profiles", xlabel="x", ylabel="density")
        output.write_svg(out / "norm.svg", [(traj.times, traj.sup_norms(), "sup norm")],
                         title=f"{sc.name}: sup norm", xlabel="t", ylabel="sup norm", logy=True)
    summary = {
        "scenario": sc.name,
        "t_end": traj.final.t,
        "final_norm": traj.final.norm,
        "max_norm": float(traj.sup_norms().max()),
        "min_floor": float(traj.floors()[1:].min()) if len(traj.snapshots) > 1 else traj.final.floor,
        "snapshots": len(traj.snapshots),
    }
    output.write_summary(out / "summary.txt", summary)
    return EXIT_OK, summary


def _write_states(path, grid, states):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "node_index", "x", "u1", "u2"])
        for st in states:
            for i, xi in enumerate(grid.nodes):
                w.writerow([f"{st.t:.12g}", i, f"{xi:.12g}", f"{st.u1[i]:.17g}", f"{st.u2[i]:.17g}"])


def cmd_periodic(sc, out):
    _require_h1(sc)
    opts = sc.section("periodic")
    sol = dynamics.find_periodic_solution(
        sc.params, sc.grid, sc.dt, tol=opts.get("tol", 1e-6), max_periods=opts.get("max_periods", 2000)
    )
    _write_states(out / "periodic.csv", sc.grid, sol.slices)
    summary = {
        "scenario": sc.name,
        "period_defect": sol.period_defect,
        "positivity_floor": sol.positivity_floor,
        "periods": sol.periods,
        "max_u1": float(sol.u1.max()),
        "max_u2": float(sol.u2.max()),
    }
    output.write_summary(out / "summary.txt", summary)
    return EXIT_OK, summary


def cmd_steady(sc, out):
    _require_h1(sc)
    opts = sc.section("steady")
    ss = dynamics.find_steady_state(sc.params, sc.grid, opts.get("tol", 1e-10), t_relax=opts.get("t_relax", 30.0))
    _write_states(out / "steady.csv", sc.grid, [ss.as_state()])
    summary = {
        "scenario": sc.name,
        "residual": ss.residual,
        "used_fallback": ss.used_fallback,
        "newton_iterations": ss.newton_iterations,
        "min_u1": float(ss.u1.min()),
        "min_u2": float(ss.u2.min()),
        "max_u1": float(ss.u1.max()),
        "max_u2": float(ss.u2.max()),
    }
    output.write_summary(out / "summary.txt", summary)
    return EXIT_OK, summary


def cmd_classify(sc, out):
    _require_h1(sc)
    opts = sc.section("classify")
    pair = _eigen(sc)
    seeds = None
    if "seeds" in sc.options:
        seeds = parse_seeds(sc.options["seeds"], sc.grid, pair, sc.raw.get("random_seed", 0))
    rep = dynamics.classify(
        sc.params, sc.grid, sc.dt, t_end=opts.get("t_end"), seeds=seeds,
        n_seeds=opts.get("n_seeds", 5), random_state=sc.raw.get("random_seed", 0), pair=pair,
        attractor=opts.get("attractor", True),
    )
    rep.to_csv(out / "seeds.csv")
    summary = {"scenario": sc.name, **rep.summary()}
    if rep.attractor is not None:
        summary["attractor_period_defect"] = rep.attractor.period_defect
        summary["attractor_floor"] = rep.attractor.positivity_floor
    output.write_summary(out / "summary.txt", summary)
    return EXIT_OK, summary


def cmd_stability(sc, out):
    _require_h1(sc)
    opts = sc.section("stability")
    pair = _eigen(sc)
    specs = sc.options.get("seeds", [{"kind": "eigen", "scale": 0.1}, {"kind": "constant", "u1": 10.0, "u2": 10.0}])
    seeds = parse_seeds(specs, sc.grid, pair, sc.raw.get("random_seed", 0))
    tol = opts.get("tol", 1e-4)
    t0_list = opts.get("t0", [0.0])
    attractor = dynamics.find_periodic_solution(sc.params, sc.grid, sc.dt, tol=tol * 1e-2, pair=pair)
    summary = {"scenario": sc.name, "lambda_star": pair.lambda_star}
    ok = True
    for k, t0 in enumerate(t0_list):
        seeds_t0 = [PopulationState(float(t0), s.u1, s.u2) for s in seeds]
        rep = dynamics.verify_global_stability(
            sc.params, sc.grid, seeds_t0, sc.dt, tol, opts.get("max_periods", 200),
            t0=float(t0), attractor=attractor,
        )
        rep.to_csv(out / (f"distances_t0_{k}.csv" if len(t0_list) > 1 else "distances.csv"))
        suffix = f"_t0_{k}" if len(t0_list) > 1 else ""
        summary[f"hypothesis{suffix}"] = rep.hypothesis
        summary[f"converged{suffix}"] = rep.converged
        summary[f"periods{suffix}"] = rep.periods
        summary[f"max_pair_distance{suffix}"] = rep.max_pair_distance
        summary[f"max_attractor_distance{suffix}"] = rep.max_attractor_distance
        ok &= rep.converged
    output.write_summary(out / "summary.txt", summary)
    if not ok:
        raise ConvergenceError("seeds did not converge to a common periodic solution")
    return EXIT_OK, summary


def cmd_profile(sc, out):
    _require_h1(sc)
    opts = sc.section("profile")
    prof = asymptotics.limit_profile(sc.params, sc.grid)
    prof.to_csv(out / "profile.csv")
    summary = {
        "scenario": sc.name,
        "support_fraction": float(prof.support_mask.mean()),
        "profile_residual": prof.residual,
        "max_u1_star": float(prof.u1_star.max()),
        "max_u2_star": float(prof.u2_star.max()),
    }
    d_list = opts.get("d_list", [])
    if d_list:
        rows = asymptotics.profile_convergence_study(
            sc.params, sc.grid, d_list, opts.get("exclusion_radius", 0.1 * sc.grid.length)
        )
        asymptotics.write_study_csv(rows, out / "study.csv")
        for row in rows:
            summary[f"sup_error_d_{row.d:.0e}"] = row.sup_error
        errors = [row.sup_error for row in rows]
        # errors already at rounding level count as converged
        summary["monotone_decrease"] = all(b < a or b < ROUNDOFF_ERROR for a, b in zip(errors, errors[1:]))
        output.write_svg(
            out / "profile.svg",
            [(sc.grid.nodes, prof.u1_star, "u1*"), (sc.grid.nodes, prof.u2_star, "u2*")],
            title=f"{sc.name}: limit profile", xlabel="x", ylabel="density",
        )
    output.write_summary(out / "summary.txt", summary)
    return EXIT_OK, summary


def _set_dotted(raw, key, value):
    parts = key.split(".")
    node = raw
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value


def sweep_points(sc):
    """Parameter assignments for every sweep point, in declared order."""
    opts = sc.section("sweep")
    if "random" in opts:
        rnd = opts["random"]
        rng = np.random.default_rng(rnd.get("random_seed", 0))
        ranges = rnd.get("ranges", {})
        points = []
        for _ in range(int(rnd.get("draws", 10))):
            points.append({k: float(rng.uniform(lo, hi)) for k, (lo, hi) in ranges.items()})
        return points
    grid_spec = opts.get("parameters", {})
    keys = list(grid_spec)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid_spec[k] for k in keys))]


def _run_point(args):
    raw, base_dir, command, out_dir, assignment = args
    raw = copy.deepcopy(raw)
    raw.pop("sweep", None)
    for key, value in assignment.items():
        _set_dotted(raw, key, value)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        sc = build_scenario(raw, Path(base_dir))
        code, summary = COMMAND_TABLE[command](sc, out_dir)
    except Exception as exc:  # recorded per point; the sweep carries on
        code, summary = _exit_code_for(exc), {"error": str(exc)}
    return code, summary


def cmd_sweep(sc, out, workers=1):
    opts = sc.section("sweep")
    command = opts.get("command", "eigen")
    if command not in COMMAND_TABLE or command == "sweep":
        raise ConfigurationError(f"cannot sweep command '{command}'", "sweep.command")
    points = sweep_points(sc)
    jobs = [(sc.raw, str(sc.base_dir), command, str(out / f"point_{k:04d}"), a) for k, a in enumerate(points)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_point, jobs))
    else:
        results = [_run_point(j) for j in jobs]
    keys = []
    for _, summ in results:
        keys += [k for k in summ if k not in keys]
    param_keys = list(points[0]) if points else []
    with open(out / "sweep_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["point", "exit_code"] + param_keys + keys)
        for k, ((code, summ), a) in enumerate(zip(results, points)):
            w.writerow([k, code] + [output.format_value(a[p]) for p in param_keys]
                       + [output.format_value(summ.get(c, "")) for c in keys])
    failed = sum(1 for code, _ in results if code != 0)
    summary = {"scenario": sc.name, "command": command, "points": len(points), "failed_points": failed}
    output.write_summary(out / "summary.txt", summary)
    return EXIT_OK, summary


COMMAND_TABLE = {
    "check": cmd_check,
    "eigen": cmd_eigen,
    "simulate": cmd_simulate,
    "periodic": cmd_periodic,
    "steady": cmd_steady,
    "classify": cmd_classify,
    "stability": cmd_stability,
    "profile": cmd_profile,
}


def _exit_code_for(exc):
    if isinstance(exc, ConfigurationError):
        return EXIT_CONFIG
    if isinstance(exc, (HypothesisFailure, PreconditionError)):
        return EXIT_HYPOTHESIS
    if isinstance(exc, (ConvergenceError, NumericalResolutionError)):
        return EXIT_SOLVER
    return EXIT_SOLVER


def run(command, scenario, out=None, workers=1):
    """Run one command; returns ``(exit_code, summary)``."""
    if command not in COMMANDS:
        raise ConfigurationError(f"unknown command '{command}'", "command")
    sc = load_scenario(resolve_scenario_path(scenario))
    out = Path(out or sc.output or Path("out") / sc.name / command)
    out.mkdir(parents=True, exist_ok=True)
    if command == "sweep":
        return cmd_sweep(sc, out, workers)
    return COMMAND_TABLE[command](sc, out)


def build_parser():
    parser = argparse.ArgumentParser(prog="stagepop", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--scenario", required=True, help="scenario TOML file or name under scenarios/")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--workers", type=int, default=1, help="worker processes for sweep")
    parser.add_argument("--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    scenario_label = Path(args.scenario).stem
    try:
        code, summary = run(args.command, args.scenario, args.out, args.workers)
    except Exception as exc:
        code = _exit_code_for(exc)
        field = getattr(exc, "field", None)
        where = f" [{field}]" if field and field not in str(exc) else ""
        print(f"stagepop {args.command}: scenario {scenario_label}: {exc}{where}", file=sys.stderr)
        if args.verbose:
            logger.exception("details")
        return code
    for key, value in summary.items():
        print(f"{key}={output.format_value(value)}")
    return code


if __name__ == "__main__":
    sys.exit(main())
