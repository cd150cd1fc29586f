"""Command-line surface: validate, inspect, round-trip, and integrate.

Exit codes: 0 all requested checks pass, 1 a check failed, 2 usage
errors, 3 scenario errors (unreadable, malformed, or numerically
unusable files).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import dynamics, verify
from .connection import build_connection, connection_from_exprs, observable_map
from .errors import NewcartError, ScenarioError
from .scenario import load_scenario

USAGE_ERROR = 2
SCENARIO_ERROR = 3
CHECK_FAILED = 1


def _point(text, m, parser, flag):
    parts = text.split(",")
    if len(parts) != m:
        parser.error(f"{flag} needs {m} comma-separated numbers")
    try:
        return np.array([float(x) for x in parts])
    except ValueError:
        parser.error(f"{flag} needs numbers, got {text!r}")


def _connection_for(scn):
    if scn.has_user_connection:
        return connection_from_exprs(scn.structure, scn.observer, scn.christoffel)
    return build_connection(scn.structure, scn.observer, scn.data)


def cmd_check(scn, args):
    if scn.has_user_connection:
        conn = connection_from_exprs(scn.structure, scn.observer, scn.christoffel)
        report = verify.run_all(scn.structure, scn.observer, connection=conn,
                                scenario_name=scn.name,
                                expect_torsion_free=args.expect_torsion_free)
    else:
        report = verify.run_all(scn.structure, scn.observer, data=scn.data,
                                scenario_name=scn.name,
                                expect_torsion_free=args.expect_torsion_free)
    print(report.render_table())
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
    return 0 if report.passed else CHECK_FAILED


def cmd_connection(scn, args, parser):
    p = _point(args.at, scn.structure.dim, parser, "--at")
    conn = _connection_for(scn)
    gamma = conn.christoffel(p)
    names = scn.structure.coord_names
    print(f"coefficients at ({', '.join(repr(float(c)) for c in p)}):")
    for k in range(scn.structure.dim):
        for i in range(scn.structure.dim):
            for j in range(scn.structure.dim):
                print(f"Gamma^{names[k]}_{names[i]}{names[j]} = {float(gamma[k, i, j])!r}")
    return 0


def cmd_observables(scn, args, parser):
    S = scn.structure
    p = _point(args.at, S.dim, parser, "--at")
    conn = _connection_for(scn)
    image = observable_map(conn, scn.observer, points=[p])
    names = S.coord_names
    for a in range(S.n):
        print(f"gravity^{a + 1} = {float(image.gravity[0, a])!r}")
    for a in range(S.n):
        for b in range(a + 1, S.n):
            print(f"coriolis_{a + 1}{b + 1} = {float(image.coriolis[0, a, b])!r}")
    for a in range(S.n):
        for i in range(S.dim):
            for j in range(i + 1, S.dim):
                value = float(image.torsion_spatial[0, a, i, j])
                print(f"torsion^{a + 1}_{names[i]}{names[j]} = {value!r}")
    return 0


def cmd_roundtrip(scn, args):
    if scn.has_user_connection:
        print("scenario supplies raw coefficients; no data triple to round-trip",
              file=sys.stderr)
        return SCENARIO_ERROR
    entry = verify.check_roundtrip(scn.structure, scn.observer, scn.data)
    print(f"max round-trip deviation = {float(entry.max_residual)!r} "
          f"(tolerance {entry.tolerance!r})")
    return 0 if entry.passed else CHECK_FAILED


def cmd_geodesic(scn, args, parser):
    S = scn.structure
    x0 = _point(args.start, S.dim, parser, "--from")
    v0 = _point(args.vel, S.dim, parser, "--vel")
    conn = _connection_for(scn)
    traj = dynamics.integrate_geodesic(conn, x0, v0, args.t0, args.t1, args.dt)
    dynamics.write_trajectory(traj, S.dim, args.out)
    final = traj.final
    print(f"{len(traj.states)} states, termination: {traj.termination}")
    print("final position: " + ", ".join(repr(float(c)) for c in final.position))
    return 0 if traj.termination != dynamics.NUMERIC_FAILURE else CHECK_FAILED


def cmd_flow(scn, args, parser):
    S = scn.structure
    x0 = _point(args.start, S.dim, parser, "--from")
    traj = dynamics.integrate_observer_flow(S, scn.observer, x0, args.t0, args.t1, args.dt)
    dynamics.write_trajectory(traj, S.dim, args.out)
    final = traj.final
    print(f"{len(traj.states)} states, termination: {traj.termination}")
    print("final position: " + ", ".join(repr(float(c)) for c in final.position))
    return 0 if traj.termination != dynamics.NUMERIC_FAILURE else CHECK_FAILED


def make_parser():
    parser = argparse.ArgumentParser(
        prog="newcart",
        description="Build, verify, and exercise compatible connections on "
                    "clock-form space-time structures.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="run the full verification report")
    p.add_argument("scenario")
    p.add_argument("--json", help="write the JSON report to this path")
    p.add_argument("--expect-torsion-free", action="store_true",
                   help="additionally require that a symmetric connection is feasible")

    p = sub.add_parser("connection", help="print coefficients at a point")
    p.add_argument("scenario")
    p.add_argument("--at", required=True)

    p = sub.add_parser("observables", help="print the observable triple at a point")
    p.add_argument("scenario")
    p.add_argument("--at", required=True)

    p = sub.add_parser("roundtrip", help="rebuild the data from the connection")
    p.add_argument("scenario")

    p = sub.add_parser("geodesic", help="integrate an auto-parallel curve")
    p.add_argument("scenario")
    p.add_argument("--from", dest="start", required=True)
    p.add_argument("--vel", required=True)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t1", type=float, required=True)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("flow", help="integrate an observer flow line")
    p.add_argument("scenario")
    p.add_argument("--from", dest="start", required=True)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t1", type=float, required=True)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--out", required=True)

    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        scn = load_scenario(args.scenario)
        if args.command == "check":
            return cmd_check(scn, args)
        if args.command == "connection":
            return cmd_connection(scn, args, parser)
        if args.command == "observables":
            return cmd_observables(scn, args, parser)
        if args.command == "roundtrip":
            return cmd_roundtrip(scn, args)
        if args.command == "geodesic":
            return cmd_geodesic(scn, args, parser)
        if args.command == "flow":
            return cmd_flow(scn, args, parser)
        parser.error(f"unknown command {args.command!r}")
    except ScenarioError as err:
        print(f"scenario error: {err}", file=sys.stderr)
        return SCENARIO_ERROR
    except NewcartError as err:
        print(f"error: {err}", file=sys.stderr)
        return SCENARIO_ERROR
    return USAGE_ERROR


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
