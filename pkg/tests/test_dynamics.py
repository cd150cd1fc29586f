"""Integrators: free-fall oracles, flows, order behavior, terminations."""

import numpy as np
import pytest

from conftest import (NAMES2, exprs, flat_observer, flat_structure,
                      curvedh_structure, gravity_data, rot_observer,
                      rot_structure)
from newcart.connection import (ConnectionData, build_connection,
                                connection_from_exprs)
from newcart.dynamics import (COMPLETED, LEFT_DOMAIN, NUMERIC_FAILURE,
                              integrate_geodesic, integrate_observer_flow,
                              trajectory_csv)
from newcart.expr import Const, ZERO, parse_expr
from newcart.geometry import (ObserverField, SpacetimeStructure,
                              frame_decompose, metric_matrix, omega_apply,
                              project_spatial)


def test_flat_geodesic_is_straight():
    S, z = flat_structure(), flat_observer()
    C = build_connection(S, z, ConnectionData.zero(1))
    traj = integrate_geodesic(C, np.array([0.0, 0.0]), np.array([1.0, 0.5]),
                              0.0, 1.0, 1e-3)
    assert traj.termination == COMPLETED
    assert np.max(np.abs(traj.final.position - [1.0, 0.5])) <= 1e-12
    assert np.max(np.abs(traj.final.velocity - [1.0, 0.5])) <= 1e-12


def test_gravity_parabola_both_sign_conventions():
    S, z = flat_structure(box=((-0.5, 1.5), (-6.0, 6.0))), flat_observer()
    # observer acceleration +9.8 -> free fall drifts to -4.9
    C = build_connection(S, z, gravity_data(9.8))
    traj = integrate_geodesic(C, np.array([0.0, 0.0]), np.array([1.0, 0.0]),
                              0.0, 1.0, 1e-3)
    assert abs(traj.final.position[1] - (-4.9)) <= 1e-6
    # observer acceleration -9.8 -> free fall drifts to +4.9
    C2 = build_connection(S, z, gravity_data(-9.8))
    traj2 = integrate_geodesic(C2, np.array([0.0, 0.0]), np.array([1.0, 0.0]),
                               0.0, 1.0, 1e-3)
    assert abs(traj2.final.position[1] - 4.9) <= 1e-6


def test_gravity_reversibility():
    S, z = flat_structure(box=((-0.5, 1.5), (-6.0, 1.0))), flat_observer()
    C = build_connection(S, z, gravity_data(9.8))
    fwd = integrate_geodesic(C, np.array([0.0, 0.0]), np.array([1.0, 0.0]),
                             0.0, 1.0, 1e-3)
    assert fwd.termination == COMPLETED
    back = integrate_geodesic(C, fwd.final.position, -fwd.final.velocity,
                              0.0, 1.0, 1e-3)
    assert np.max(np.abs(back.final.position - [0.0, 0.0])) <= 1e-8


def test_flat_observer_flow():
    S, z = flat_structure(), flat_observer()
    traj = integrate_observer_flow(S, z, np.array([0.0, 0.3]), 0.0, 1.0, 1e-2)
    assert traj.termination == COMPLETED
    for st in traj.states:
        assert st.position[1] == 0.3
        assert abs(st.position[0] - st.tau) <= 1e-12


def test_flow_clock_pairing_is_one():
    names = ("t", "x", "y")
    S = SpacetimeStructure(
        coord_names=names,
        omega=exprs(names, "1", "0", "x"),
        frame=(exprs(names, "0", "1", "0"), exprs(names, "-x", "0", "1")),
        metric=((parse_expr("1", names), parse_expr("0", names)),
                (parse_expr("0", names), parse_expr("1", names))),
        domain_box=((0.0, 1.2), (-1.0, 1.0), (-1.0, 1.0)),
        sample_count=5, rng_seed=1)
    z = ObserverField(exprs(names, "1 - 0.25*x^2", "0.3*y", "0.25*x"))
    traj = integrate_observer_flow(S, z, np.array([0.0, 0.2, 0.1]), 0.0, 1.0, 1e-2)
    pairings = [omega_apply(S, st.velocity, st.position) for st in traj.states]
    assert max(abs(v - 1.0) for v in pairings) <= 1e-9
    drift = max(abs(a - b) for a, b in zip(pairings, pairings[1:]))
    assert drift <= 1e-9


def test_exponential_flow_oracle():
    S = flat_structure(box=((-0.1, 1.2), (0.0, 3.0)))
    z = ObserverField(exprs(NAMES2, "1", "x"))
    traj = integrate_observer_flow(S, z, np.array([0.0, 1.0]), 0.0, 1.0, 1e-3)
    assert abs(traj.final.position[1] - np.e) <= 1e-7


def test_rk4_order_on_exponential_flow():
    S = flat_structure(box=((-0.1, 1.2), (0.0, 3.0)))
    z = ObserverField(exprs(NAMES2, "1", "x"))

    def err(dt):
        traj = integrate_observer_flow(S, z, np.array([0.0, 1.0]), 0.0, 1.0, dt)
        return abs(traj.final.position[1] - np.e)

    assert err(0.05) / err(0.025) >= 12.0


def test_rk4_order_on_curved_geodesic():
    S, z = curvedh_structure(), flat_observer()
    C = build_connection(S, z, ConnectionData.zero(1))
    x0 = np.array([0.0, -0.5])
    v0 = np.array([1.0, 0.9])

    def endpoint(dt):
        traj = integrate_geodesic(C, x0, v0, 0.0, 0.8, dt)
        assert traj.termination == COMPLETED
        return traj.final.position

    truth = endpoint(0.0025)
    e1 = np.max(np.abs(endpoint(0.04) - truth))
    e2 = np.max(np.abs(endpoint(0.02) - truth))
    assert e1 / e2 >= 12.0


def test_geodesic_clock_pairing_constant():
    S, z = curvedh_structure(), flat_observer()
    C = build_connection(S, z, ConnectionData.zero(1))
    traj = integrate_geodesic(C, np.array([0.0, -0.5]), np.array([1.0, 0.7]),
                              0.0, 1.0, 1e-2)
    vals = [omega_apply(S, st.velocity, st.position) for st in traj.states]
    assert max(abs(v - vals[0]) for v in vals) <= 1e-7


def test_geodesic_clock_pairing_constant_nonconstant_clock_form():
    # clock form with a position-dependent component: conservation couples
    # the velocity components through the coefficients
    from conftest import twist_structure
    S = twist_structure()
    z = ObserverField(exprs(("t", "x", "y"), "1", "0", "0"))
    C = build_connection(S, z, ConnectionData.zero(2))
    traj = integrate_geodesic(C, np.array([0.1, 0.0, 0.0]),
                              np.array([1.0, 0.3, 0.2]), 0.0, 0.5, 1e-2)
    assert traj.termination == COMPLETED
    vals = [omega_apply(S, st.velocity, st.position) for st in traj.states]
    assert max(abs(v - vals[0]) for v in vals) <= 1e-7


def test_spatial_speed_constant_under_pure_rotation():
    S, z = rot_structure(), rot_observer()
    D = ConnectionData((ZERO, ZERO), {(0, 1): Const(0.5)}, {})
    C = build_connection(S, z, D)
    x0 = np.array([0.0, 0.3, 0.2])
    v0 = np.array([1.0, 0.4, -0.2])

    def speeds(dt):
        traj = integrate_geodesic(C, x0, v0, 0.0, 0.9, dt)
        out = []
        for st in traj.states:
            sp = project_spatial(S, z, st.velocity, st.position)
            coeffs = frame_decompose(S, sp, st.position)
            h = metric_matrix(S, st.position)
            out.append(float(coeffs @ h @ coeffs))
        return np.array(out), traj

    vals, traj = speeds(1e-2)
    assert traj.termination == COMPLETED
    assert np.max(np.abs(vals - vals[0])) <= 1e-6
    dense, _ = speeds(2.5e-3)
    assert abs(vals[-1] - dense[-1]) <= 1e-6


def test_left_domain_termination():
    S, z = flat_structure(box=((0.0, 1.5), (-0.2, 0.2))), flat_observer()
    C = build_connection(S, z, ConnectionData.zero(1))
    traj = integrate_geodesic(C, np.array([0.0, 0.0]), np.array([1.0, 1.0]),
                              0.0, 1.0, 1e-2)
    assert traj.termination == LEFT_DOMAIN
    inside = traj.states[:-1]
    for st in inside:
        assert -0.2 <= st.position[1] <= 0.2
    assert traj.final.position[1] > 0.2


def test_numeric_failure_keeps_states_finite():
    # box large enough that overflow happens before the domain exit
    S, z = flat_structure(box=((-0.5, 3.0), (-1e300, 1e300))), flat_observer()
    m = 2
    table = [[[ZERO] * m for _ in range(m)] for _ in range(m)]
    table[1][1][1] = Const(-1.0)   # vdot^x = (v^x)^2, finite-time blowup
    C = connection_from_exprs(S, z, tuple(tuple(tuple(r) for r in pl) for pl in table))
    traj = integrate_geodesic(C, np.array([0.0, 0.0]), np.array([0.0, 1.0]),
                              0.0, 2.0, 1e-2)
    assert traj.termination == NUMERIC_FAILURE
    for st in traj.states:
        assert np.all(np.isfinite(st.position)) and np.all(np.isfinite(st.velocity))


def test_invalid_integration_arguments():
    S, z = flat_structure(), flat_observer()
    C = build_connection(S, z, ConnectionData.zero(1))
    with pytest.raises(ValueError):
        integrate_geodesic(C, np.zeros(2), np.ones(2), 0.0, 1.0, -1e-3)
    with pytest.raises(ValueError):
        integrate_geodesic(C, np.zeros(2), np.ones(2), 1.0, 0.5, 1e-3)


def test_trajectory_csv_format():
    S, z = flat_structure(), flat_observer()
    C = build_connection(S, z, gravity_data(9.8))
    traj = integrate_geodesic(C, np.array([0.0, 0.0]), np.array([1.0, 0.0]),
                              0.0, 0.01, 1e-3)
    text = trajectory_csv(traj, 2)
    lines = text.strip().split("\n")
    assert lines[0] == "tau, x0, x1, v0, v1"
    assert len(lines) == len(traj.states) + 1
    last = [float(v) for v in lines[-1].split(",")]
    assert last[0] == traj.final.tau
    assert last[1] == traj.final.position[0]
    assert last[2] == traj.final.position[1]   # %.17g round-trips doubles
    assert last[4] == traj.final.velocity[1]
