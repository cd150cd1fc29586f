"""Scenario file format: loading, arity rules, serialization round trip."""

import numpy as np
import pytest

from newcart.errors import (DimensionMismatch, MissingSection,
                            ScenarioParseError)
from newcart.expr import evaluate
from newcart.geometry import eval_fields, metric_matrix
from newcart.scenario import (bundled_scenario_path, load_scenario,
                              load_scenario_text, serialize_scenario)

MINIMAL = """
[spacetime]
dim = 2
coords = t, x
[omega]
O = 1, 0
[observer]
z = 1, 0
[frame]
E1 = 0, 1
[metric]
h11 = 1
[domain]
box = 0 1, -1 1
"""


def test_load_bundled_flat():
    scn = load_scenario(bundled_scenario_path("flat"))
    assert scn.name == "flat"
    assert scn.structure.dim == 2
    assert scn.structure.sample_count == 100
    assert scn.data is not None
    assert all(evaluate(g, (0.0, 0.0)) == 0.0 for g in scn.data.gravity)
    assert not scn.has_user_connection


def test_load_bundled_twist_has_full_data():
    scn = load_scenario(bundled_scenario_path("twist"))
    assert scn.structure.dim == 3
    assert scn.data.coriolis[(0, 1)] is not None
    assert (0, 1, 2) in scn.data.theta
    assert (1, 0, 1) in scn.data.theta


def test_minimal_scenario_defaults():
    scn = load_scenario_text(MINIMAL, name="minimal")
    assert scn.structure.sample_count == 50
    assert scn.structure.rng_seed == 0
    assert scn.data is not None and not scn.data.coriolis and not scn.data.theta


def test_comments_and_blank_lines_ignored():
    scn = load_scenario_text(MINIMAL.replace("[omega]", "# a comment\n\n[omega]"))
    assert scn.structure.dim == 2


def test_dim_coords_mismatch():
    with pytest.raises(DimensionMismatch):
        load_scenario_text(MINIMAL.replace("coords = t, x", "coords = t, x, y"))


def test_omega_arity():
    with pytest.raises(DimensionMismatch):
        load_scenario_text(MINIMAL.replace("O = 1, 0", "O = 1, 0, 0"))


def test_gravity_arity_rule():
    bad = MINIMAL + "\n[gravity]\nG = 0, -9.8\n"
    with pytest.raises(DimensionMismatch):
        load_scenario_text(bad)


def test_metric_shape_rule():
    # two frame fields would be required for a 3x3 metric; on a 2-dim chart
    # the only legal key is h11
    bad = MINIMAL.replace("h11 = 1", "h11 = 1\nh22 = 1\nh33 = 1")
    with pytest.raises(DimensionMismatch):
        load_scenario_text(bad)


def test_metric_diagonal_required():
    bad = MINIMAL.replace("h11 = 1", "")
    with pytest.raises(DimensionMismatch):
        load_scenario_text(bad)


def test_frame_field_count():
    bad = MINIMAL.replace("E1 = 0, 1", "E1 = 0, 1\nE2 = 0, 1")
    with pytest.raises(DimensionMismatch):
        load_scenario_text(bad)


def test_missing_section():
    bad = MINIMAL.replace("[observer]\nz = 1, 0\n", "")
    with pytest.raises(MissingSection) as err:
        load_scenario_text(bad)
    assert "observer" in err.value.names


def test_unknown_section_and_bad_expression():
    with pytest.raises(ScenarioParseError):
        load_scenario_text(MINIMAL + "\n[unknown]\nk = 1\n")
    with pytest.raises(ScenarioParseError) as err:
        load_scenario_text(MINIMAL.replace("O = 1, 0", "O = 1 +, 0"))
    assert err.value.section == "omega"
    assert err.value.key == "O"


def test_duplicate_key_rejected():
    with pytest.raises(ScenarioParseError):
        load_scenario_text(MINIMAL.replace("h11 = 1", "h11 = 1\nh11 = 2"))


def test_coordinate_name_function_collision():
    bad = MINIMAL.replace("coords = t, x", "coords = t, sin")
    with pytest.raises(ScenarioParseError):
        load_scenario_text(bad)


def test_box_arity():
    with pytest.raises(DimensionMismatch):
        load_scenario_text(MINIMAL.replace("box = 0 1, -1 1", "box = 0 1"))


def test_christoffel_section():
    scn = load_scenario_text(MINIMAL + "\n[christoffel]\nC1_00 = -9.8\n")
    assert scn.has_user_connection
    assert scn.data is None
    assert evaluate(scn.christoffel[1][0][0], (0.0, 0.0)) == -9.8
    assert evaluate(scn.christoffel[0][0][0], (0.0, 0.0)) == 0.0


def test_christoffel_conflicts_with_data():
    bad = MINIMAL + "\n[gravity]\nG = 1\n[christoffel]\nC1_00 = 0\n"
    with pytest.raises(ScenarioParseError):
        load_scenario_text(bad)


def test_empty_christoffel_section_is_zero_table():
    scn = load_scenario_text(MINIMAL + "\n[christoffel]\n")
    assert scn.has_user_connection
    assert all(evaluate(scn.christoffel[k][i][j], (0.3, 0.2)) == 0.0
               for k in range(2) for i in range(2) for j in range(2))


@pytest.mark.parametrize("name", ["flat", "grav", "rot", "twist", "curvedh",
                                  "bad_observer", "bad_frame",
                                  "zero_connection_curvedh"])
def test_serialize_load_roundtrip_evaluates_identically(name):
    scn = load_scenario(bundled_scenario_path(name))
    back = load_scenario_text(serialize_scenario(scn), name=scn.name)
    S, T = scn.structure, back.structure
    assert T.sample_count == S.sample_count and T.rng_seed == S.rng_seed
    for p, q in zip(S.sample_points(), T.sample_points()):
        assert np.array_equal(p, q)
        assert np.array_equal(eval_fields(S.omega, p), eval_fields(T.omega, p))
        assert np.array_equal(eval_fields(scn.observer.components, p),
                              eval_fields(back.observer.components, p))
        for a in range(S.n):
            assert np.array_equal(eval_fields(S.frame[a], p), eval_fields(T.frame[a], p))
        assert np.array_equal(metric_matrix(S, p), metric_matrix(T, p))
        if scn.data is not None:
            assert np.array_equal(eval_fields(scn.data.gravity, p),
                                  eval_fields(back.data.gravity, p))
            for key, e in scn.data.coriolis.items():
                assert evaluate(e, p) == evaluate(back.data.coriolis[key], p)
            for key, e in scn.data.theta.items():
                assert evaluate(e, p) == evaluate(back.data.theta[key], p)
        if scn.christoffel is not None:
            for k in range(S.dim):
                for i in range(S.dim):
                    for j in range(S.dim):
                        assert (evaluate(scn.christoffel[k][i][j], p)
                                == evaluate(back.christoffel[k][i][j], p))


def test_unreadable_file():
    with pytest.raises(ScenarioParseError):
        load_scenario("/nonexistent/path/to/scenario.scn")
