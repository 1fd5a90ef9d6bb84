"""Command-line interface: solve, sweep, length, approx, transport, validate.

Every command writes canonical JSON (floats at 17 significant digits) plus
a run manifest with input digests, the resolved configuration, and wall
time, so a run can be reproduced from its output directory alone. Exit
codes: 0 success, 2 bad flags or values, 3 unreadable input, 4 infeasible
problem.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._serialize import dump_json
from .errors import InfeasibleError, InputFormatError
from .graph import graph_to_svg, save_graph, total_length
from .length import (
    CurveMeasure,
    approximate_uniform,
    length_of,
    load_curve_measure,
    save_curve_measure,
)
from .measures import DiscreteMeasure, load_measure
from .solver import (
    SolverConfig,
    SolveResult,
    energy,
    lambda_star_bounds,
    solve,
    sweep_lambda,
)
from .transport import save_plan_csv, solve_ot
from .validation import (
    ahlfors_profile,
    check_excess_projection,
    check_plan_decomposition,
    two_dirac_solution,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_INFEASIBLE = 4


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _resolve_threads(flag_value) -> int:
    env = os.environ.get("CURVEMEAS_THREADS")
    if env is not None:
        try:
            n = int(env)
        except ValueError as exc:
            raise ValueError(f"CURVEMEAS_THREADS={env!r} is not an integer") from exc
    elif flag_value is not None:
        n = int(flag_value)
    else:
        n = os.cpu_count() or 1
    if n < 1:
        raise ValueError("thread count must be >= 1")
    return n


def _apply_thread_cap(n: int) -> None:
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=n)
    except ImportError:
        pass


def _write_manifest(
    out_dir: Path, command: list, config: dict, inputs: dict, seed, outputs, t0: float
) -> None:
    manifest = {
        "command": command,
        "config": config,
        "inputs": {str(k): _sha256(Path(k)) for k in inputs},
        "seed": seed,
        "tool_version": __version__,
        "wall_time_s": time.monotonic() - t0,
        "outputs": [str(p) for p in outputs],
    }
    dump_json(manifest, out_dir / "manifest.json")


def load_manifest(path, verify: bool = True) -> dict:
    """Read a manifest; with verify, recompute input digests and fail on
    mismatch."""
    import json

    with open(path) as fh:
        manifest = json.load(fh)
    if verify:
        for name, digest in manifest.get("inputs", {}).items():
            actual = _sha256(Path(name))
            if actual != digest:
                raise InputFormatError(
                    f"digest mismatch for {name}: stored {digest}, actual {actual}"
                )
    return manifest


def _config_from_args(args) -> SolverConfig:
    return SolverConfig(
        p=args.p,
        lam=args.lam,
        mode=args.mode,
        n_vertices=args.vertices,
        quadrature_per_edge=args.quadrature,
        max_outer_iters=args.iters,
        tol_rel_energy=args.tol,
        seed=args.seed,
        topology_moves=not args.no_topology,
        collapse_length_eps=args.collapse_eps,
    )


def _config_echo(config: SolverConfig) -> dict:
    return {
        "p": config.p,
        "lambda": config.lam,
        "mode": config.mode,
        "n_vertices": config.n_vertices,
        "quadrature_per_edge": config.quadrature_per_edge,
        "max_outer_iters": config.max_outer_iters,
        "tol_rel_energy": config.tol_rel_energy,
        "seed": config.seed,
        "topology_moves": config.topology_moves,
        "collapse_length_eps": config.collapse_length_eps,
        "alpha_bracket_factor": config.alpha_bracket_factor,
    }


def _result_payload(result: SolveResult, config: SolverConfig) -> dict:
    nu = result.nu
    payload = {
        "config": _config_echo(config),
        "seed": config.seed,
        "energy": result.energy,
        "w_term": result.w_term,
        "l_term": result.l_term,
        "iterations": result.iterations,
        "collapsed": result.collapsed,
        "collapse_point": (
            None
            if result.collapse_point is None
            else np.asarray(result.collapse_point).tolist()
        ),
        "energy_trace": list(result.energy_trace),
        "support_length": total_length(nu.graph),
        "alpha": result.details.get("alpha"),
        "nu": {
            "dimension": nu.graph.dimension,
            "vertices": nu.graph.vertices.tolist(),
            "edges": nu.graph.edges.tolist(),
            "edge_density": nu.edge_density.tolist(),
            "vertex_atoms": nu.vertex_atoms.tolist(),
            "singleton": nu.graph.singleton,
        },
    }
    return payload


def _maybe_svg(graph, rho0, out_path: Path, wanted: bool) -> list:
    if not wanted:
        return []
    if graph.dimension != 2:
        print(
            f"svg skipped: drawing needs dimension 2, input has {graph.dimension}",
            file=sys.stderr,
        )
        return []
    svg = graph_to_svg(graph, rho0.points, rho0.weights)
    out_path.write_text(svg)
    return [out_path]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--threads", type=int, default=None, help="parallelism cap")


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="source measure file (JSON or CSV)")
    p.add_argument("--p", type=float, default=2.0, help="transport exponent")
    p.add_argument("--mode", choices=("uniform", "relaxed"), default="relaxed")
    p.add_argument("--vertices", type=int, default=12, help="initial vertex count")
    p.add_argument(
        "--quadrature", type=int, default=200, help="sites per unit edge length"
    )
    p.add_argument("--iters", type=int, default=60, help="outer iteration cap")
    p.add_argument("--tol", type=float, default=1e-4, help="relative energy tolerance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-topology", action="store_true", help="freeze the edge set")
    p.add_argument("--collapse-eps", type=float, default=None)
    p.add_argument("--svg", action="store_true", help="draw the support (2D only)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curvemeas",
        description="Transport-plus-length solvers for measures on embedded graphs",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_solve = sub.add_parser("solve", help="minimize for one penalty value")
    _add_solver_flags(p_solve)
    p_solve.add_argument("--lambda", dest="lam", type=float, required=True)
    _add_common(p_solve)

    p_sweep = sub.add_parser("sweep", help="minimize along a penalty schedule")
    _add_solver_flags(p_sweep)
    group = p_sweep.add_mutually_exclusive_group(required=True)
    group.add_argument("--lambdas", help="comma-separated penalty values")
    group.add_argument(
        "--lambda-range", help="lo:hi:n geometric grid of penalty values"
    )
    _add_common(p_sweep)

    p_len = sub.add_parser("length", help="evaluate the length functional")
    p_len.add_argument("--input", required=True, help="curve measure file (JSON)")
    _add_common(p_len)

    p_apx = sub.add_parser("approx", help="uniformizing support enlargement")
    p_apx.add_argument("--input", required=True, help="curve measure file (JSON)")
    p_apx.add_argument("--n", type=int, required=True, help="grid resolution")
    p_apx.add_argument("--p", type=float, default=2.0)
    p_apx.add_argument("--wp-sites", type=float, default=20.0)
    p_apx.add_argument("--svg", action="store_true")
    _add_common(p_apx)

    p_tr = sub.add_parser("transport", help="optimal coupling of two measures")
    p_tr.add_argument("--source", required=True)
    p_tr.add_argument("--target", required=True)
    p_tr.add_argument("--p", type=float, default=2.0)
    _add_common(p_tr)

    p_val = sub.add_parser("validate", help="run the built-in check suites")
    p_val.add_argument(
        "--suite", choices=("two-dirac", "invariants", "all"), default="all"
    )
    p_val.add_argument("--seed", type=int, default=0)
    _add_common(p_val)
    return parser


def _cmd_solve(args, argv) -> int:
    t0 = time.monotonic()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.lam <= 0:
        print("--lambda must be > 0", file=sys.stderr)
        return EXIT_USAGE
    config = _config_from_args(args)
    rho0 = load_measure(args.input)
    result = solve(rho0, config)
    payload = _result_payload(result, config)
    result_path = out_dir / "result.json"
    dump_json(payload, result_path)
    outputs = [result_path]
    outputs += _maybe_svg(result.nu.graph, rho0, out_dir / "solve.svg", args.svg)
    _write_manifest(
        out_dir, argv, _config_echo(config), {args.input: None}, args.seed, outputs, t0
    )
    print(f"energy {result.energy:.17g} collapsed {str(result.collapsed).lower()}")
    return EXIT_OK


def _parse_lambdas(args) -> list:
    if args.lambdas:
        try:
            lams = [float(x) for x in args.lambdas.split(",") if x.strip()]
        except ValueError as exc:
            raise ValueError(f"bad --lambdas: {exc}") from exc
    else:
        parts = args.lambda_range.split(":")
        if len(parts) != 3:
            raise ValueError("--lambda-range must be lo:hi:n")
        lo, hi = float(parts[0]), float(parts[1])
        n = int(parts[2])
        if lo <= 0 or hi <= lo or n < 2:
            raise ValueError("--lambda-range needs 0 < lo < hi and n >= 2")
        lams = list(np.geomspace(lo, hi, n))
    if any(x <= 0 for x in lams):
        raise ValueError("penalty values must be positive")
    return sorted(set(lams), reverse=True)


def _cmd_sweep(args, argv) -> int:
    t0 = time.monotonic()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    lams = _parse_lambdas(args)
    args.lam = lams[0]  # placeholder for config construction
    config = _config_from_args(args)
    rho0 = load_measure(args.input)
    results, lambda_star = sweep_lambda(rho0, lams, config)
    csv_path = out_dir / "sweep.csv"
    with open(csv_path, "w", newline="") as fh:
        fh.write("lambda,w_term,l_term,energy,collapsed,support_length\n")
        for lam, res in zip(lams, results):
            fh.write(
                f"{lam:.17g},{res.w_term:.17g},{res.l_term:.17g},"
                f"{res.energy:.17g},{str(res.collapsed).lower()},"
                f"{total_length(res.nu.graph):.17g}\n"
            )
    bounds = lambda_star_bounds(rho0, config.p)
    summary = {
        "lambdas": lams,
        "lambda_star_empirical": lambda_star,
        "in_sweep_range": lambda_star is not None,
        "bounds": bounds,
        "collapsed_flags": [r.collapsed for r in results],
    }
    summary_path = out_dir / "summary.json"
    dump_json(summary, summary_path)
    _write_manifest(
        out_dir,
        argv,
        _config_echo(config),
        {args.input: None},
        args.seed,
        [csv_path, summary_path],
        t0,
    )
    star = "none" if lambda_star is None else format(lambda_star, ".17g")
    print(f"lambda_star_empirical {star}")
    return EXIT_OK


def _cmd_length(args, argv) -> int:
    t0 = time.monotonic()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    nu = load_curve_measure(args.input)
    value = length_of(nu)
    report_path = out_dir / "length.json"
    dump_json(
        {
            "length": value,
            "support_length": total_length(nu.graph),
            "is_dirac": nu.is_dirac(),
        },
        report_path,
    )
    _write_manifest(out_dir, argv, {}, {args.input: None}, None, [report_path], t0)
    print(format(value, ".17g"))
    return EXIT_OK


def _cmd_approx(args, argv) -> int:
    t0 = time.monotonic()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.n < 1:
        print("--n must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    nu = load_curve_measure(args.input)
    sigma_n, report = approximate_uniform(
        nu, args.n, p=args.p, wp_sites_per_unit=args.wp_sites
    )
    graph_path = out_dir / "approx_graph.json"
    save_graph(sigma_n, graph_path)
    report_path = out_dir / "approx.json"
    dump_json(report, report_path)
    outputs = [graph_path, report_path]
    if args.svg:
        if sigma_n.dimension == 2:
            svg_path = out_dir / "approx.svg"
            svg_path.write_text(graph_to_svg(sigma_n))
            outputs.append(svg_path)
        else:
            print("svg skipped: drawing needs dimension 2", file=sys.stderr)
    _write_manifest(
        out_dir, argv, {"n": args.n, "p": args.p}, {args.input: None}, None, outputs, t0
    )
    print(
        f"added_length {report['added_length']:.17g} "
        f"w_p {report['w_p']:.17g}"
    )
    return EXIT_OK


def _cmd_transport(args, argv) -> int:
    t0 = time.monotonic()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    mu = load_measure(args.source)
    nu = load_measure(args.target)
    plan = solve_ot(mu, nu, args.p)
    plan_path = out_dir / "plan.csv"
    save_plan_csv(plan, plan_path)
    report_path = out_dir / "transport.json"
    dump_json(
        {
            "p": args.p,
            "cost": plan.cost,
            "wasserstein": plan.cost ** (1.0 / args.p),
            "entries": len(plan),
            "support_bound": len(mu) + len(nu) - 1,
        },
        report_path,
    )
    _write_manifest(
        out_dir,
        argv,
        {"p": args.p},
        {args.source: None, args.target: None},
        None,
        [plan_path, report_path],
        t0,
    )
    print(f"cost {plan.cost:.17g}")
    return EXIT_OK


def _two_dirac_source() -> DiscreteMeasure:
    return DiscreteMeasure(np.array([[-1.0], [1.0]]), np.array([0.5, 0.5]))


def _suite_two_dirac() -> dict:
    """Closed-form family: regime boundaries, continuity, and agreement of
    the quadrature energy with the exact energy."""
    checks = []

    sol = two_dirac_solution(1.0 / 6.0)
    mix_at_boundary = 1.0 / 6.0 * 2.0 + 2.0 / (3.0 * 2.0)
    checks.append(
        {
            "name": "continuity_mixture_uniform",
            "pass": bool(
                sol.regime == "uniform"
                and abs(sol.energy - mix_at_boundary) <= 1e-12
            ),
            "detail": {"uniform_energy": sol.energy, "mixture_limit": mix_at_boundary},
        }
    )
    near_half = two_dirac_solution(0.5 - 1e-9)
    checks.append(
        {
            "name": "continuity_uniform_dirac",
            "pass": bool(abs(near_half.energy - 1.0) <= 1e-6),
            "detail": {"energy": near_half.energy},
        }
    )
    rho0 = _two_dirac_source()
    for lam in (0.05, 0.1, 1.0 / 6.0, 0.3, 0.45, 0.6):
        sol = two_dirac_solution(lam)
        _, _, total = energy(rho0, sol.nu, 2.0, lam, 500)
        rel = abs(total - sol.energy) / sol.energy
        checks.append(
            {
                "name": f"quadrature_energy_lam_{lam:.6g}",
                "pass": bool(rel <= 0.01),
                "detail": {
                    "closed_form": sol.energy,
                    "quadrature": total,
                    "rel_error": rel,
                    "regime": sol.regime,
                },
            }
        )
    return {"suite": "two-dirac", "checks": checks}


def _suite_invariants(seed: int) -> dict:
    """Solver-output structure on the two-point source: hull containment,
    monotone trace, ball-ratio lower bound, excess projection, and plan
    decomposition."""
    from .measures import convex_hull_margin

    checks = []
    rho0 = _two_dirac_source()
    config = SolverConfig(
        p=2.0, lam=0.1, mode="relaxed", n_vertices=2,
        quadrature_per_edge=120, max_outer_iters=25, seed=seed,
    )
    result = solve(rho0, config)
    trace = np.asarray(result.energy_trace)
    checks.append(
        {
            "name": "energy_trace_monotone",
            "pass": bool(np.all(np.diff(trace) <= 1e-9)),
            "detail": {"trace": trace.tolist()},
        }
    )
    margin = float(
        np.max(convex_hull_margin(rho0, result.nu.graph.vertices))
    )
    checks.append(
        {
            "name": "hull_containment",
            "pass": bool(margin <= 1e-6),
            "detail": {"margin": margin},
        }
    )
    if not result.collapsed and not result.nu.graph.singleton:
        profile = ahlfors_profile(
            result.nu.graph, 5, [0.1 * result.nu.graph.diameter_upper()]
        )
        checks.append(
            {
                "name": "ball_ratio_lower_bound",
                "pass": bool(
                    profile["min_ratio"] is None or profile["min_ratio"] >= 1.0 - 1e-12
                ),
                "detail": {"min_ratio": profile["min_ratio"]},
            }
        )
        excess = check_excess_projection(rho0, result, result.plan, tol=0.05)
        checks.append(
            {
                "name": "excess_projection",
                "pass": bool(excess["violation_mass"] < 1e-4),
                "detail": {
                    "violation_mass": excess["violation_mass"],
                    "excess_mass": excess["excess_mass"],
                },
            }
        )
        n_t = len(result.plan.target)
        part = [range(n_t // 2), range(n_t // 2, n_t)]
        decomp = check_plan_decomposition(result.plan, part)
        checks.append(
            {
                "name": "plan_decomposition",
                "pass": bool(decomp["additive"] and decomp["pieces_optimal"]),
                "detail": {
                    "additivity_gap": decomp["additivity_gap"],
                },
            }
        )
    return {"suite": "invariants", "checks": checks}


def _cmd_validate(args, argv) -> int:
    t0 = time.monotonic()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    suites = []
    if args.suite in ("two-dirac", "all"):
        suites.append(_suite_two_dirac())
    if args.suite in ("invariants", "all"):
        suites.append(_suite_invariants(args.seed))
    all_pass = all(c["pass"] for s in suites for c in s["checks"])
    report = {"pass": all_pass, "suites": suites}
    report_path = out_dir / "validation.json"
    dump_json(report, report_path)
    _write_manifest(
        out_dir, argv, {"suite": args.suite}, {}, args.seed, [report_path], t0
    )
    print("pass" if all_pass else "FAIL")
    return EXIT_OK if all_pass else 1


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help
        return int(exc.code or 0)
    try:
        threads = _resolve_threads(getattr(args, "threads", None))
        _apply_thread_cap(threads)
        if args.cmd == "solve":
            return _cmd_solve(args, ["curvemeas"] + argv)
        if args.cmd == "sweep":
            return _cmd_sweep(args, ["curvemeas"] + argv)
        if args.cmd == "length":
            return _cmd_length(args, ["curvemeas"] + argv)
        if args.cmd == "approx":
            return _cmd_approx(args, ["curvemeas"] + argv)
        if args.cmd == "transport":
            return _cmd_transport(args, ["curvemeas"] + argv)
        if args.cmd == "validate":
            return _cmd_validate(args, ["curvemeas"] + argv)
        parser.error(f"unknown command {args.cmd!r}")
    except InputFormatError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as exc:
        print(f"invalid value: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
