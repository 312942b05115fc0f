import json

import numpy as np
import pytest

from pshglue.errors import ConfigError, ParseError, UnknownExprNode, ValidationError
from pshglue.scenario import (BUNDLED, Scenario, bundled_scenario, dump_scenario,
                              load_scenario, loads_scenario, scenario_from_dict)
from scenarios_util import bundled_dict, edited, single_chart


@pytest.mark.parametrize("name", sorted(BUNDLED))
def test_round_trip_is_byte_identical(name, tmp_path):
    text = bundled_scenario(name).read_text()
    s = loads_scenario(text)
    assert dump_scenario(s) == text
    out = tmp_path / "s.json"
    dump_scenario(s, out)
    assert out.read_text() == text


def test_bundled_glue_1d_shape():
    s = load_scenario(bundled_scenario("GLUE-1D"))
    assert s.n == 1
    assert [c.label for c in s.charts] == ["U1", "U2"]
    assert [p.label for p in s.probes] == ["radial", "spiral", "ray"]


def test_bundled_glue_2d_shape():
    s = load_scenario(bundled_scenario("glue_2d"))
    assert s.n == 2 and len(s.charts) == 2


def test_unknown_bundled_name():
    with pytest.raises(ConfigError):
        bundled_scenario("GLUE-3D")


def test_defaults_fill_in():
    s = scenario_from_dict(single_chart())
    assert s.tolerances.rho_min == 1e-8
    assert s.sampling.chart_samples == 500
    assert s.settings.reduction_T == 1000


def test_misspelled_key_names_the_key():
    d = edited(bundled_dict(), lambda d: d.__setitem__("chrts", d.pop("charts")))
    with pytest.raises(ValidationError) as err:
        scenario_from_dict(d)
    assert "chrts" in str(err.value)


def test_misspelled_nested_key_has_path():
    d = edited(bundled_dict(), lambda d: d["charts"][1].__setitem__("bonds", [0, 1]))
    with pytest.raises(ValidationError) as err:
        scenario_from_dict(d)
    assert err.value.path == ("charts", 1)
    assert "bonds" in str(err.value)


@pytest.mark.parametrize("edit, where", [
    (lambda d: d["charts"][0].__setitem__("inner", [[-1.0, 1.0], [-0.8, 0.8]]), "inner"),
    (lambda d: d.__setitem__("region", [[-0.5, 3.0], [-0.5, 0.5]]), "cover"),
    (lambda d: d["charts"][0].__setitem__("bounds", [2.0, 1.0]), "m < M"),
    (lambda d: d["charts"][0].__setitem__("box", [[-1.0, 1.0]] * 4), "dimensions"),
    (lambda d: d.__setitem__("n", 0), "minimum"),
    (lambda d: d["charts"][0].__setitem__("routing", "sideways"), "sideways"),
])
def test_consistency_errors(edit, where):
    with pytest.raises(ValidationError) as err:
        scenario_from_dict(edited(single_chart(), edit))
    assert where in str(err.value)


def test_duplicate_chart_labels():
    def dup(d):
        d["charts"].append(dict(d["charts"][0]))
    with pytest.raises(ValidationError, match="duplicate"):
        scenario_from_dict(edited(single_chart(), dup))


def test_probe_dimension_checked():
    probe = {"kind": "segment", "label": "p", "start": [[0.1, 0], [0, 0]], "end": [[0, 0], [0, 0]]}
    with pytest.raises(ValidationError, match="dimension"):
        scenario_from_dict(single_chart(probes=[probe]))


def test_zero_ray_direction():
    probe = {"kind": "ray", "label": "r", "start": [[0.1, 0]], "direction": [[0, 0]]}
    with pytest.raises(ValidationError, match="nonzero"):
        scenario_from_dict(single_chart(probes=[probe]))


def test_parse_error():
    with pytest.raises(ParseError):
        loads_scenario("{ not json")
    with pytest.raises(ParseError):
        loads_scenario("[1, 2]")


def test_unknown_node():
    d = single_chart()
    d["charts"][0]["potential"] = {"node": "mystery"}
    with pytest.raises((UnknownExprNode, ValidationError)):
        scenario_from_dict(d)


def test_missing_file():
    with pytest.raises(ConfigError):
        load_scenario("/nonexistent/scenario.json")


def test_overrides():
    s = scenario_from_dict(single_chart()).with_overrides(seed=5, samples=42, tol=1e-3)
    assert s.sampling.seed == 5 and s.sampling.chart_samples == 42
    assert s.tolerances.psh_rel == s.tolerances.domination_rel == 1e-3


def test_exceptional_points_round_trip():
    s = load_scenario(bundled_scenario("GLUE-1D"))
    assert np.array_equal(s.exceptional.points, np.array([[0j]]))
    assert isinstance(s, Scenario)
    assert json.loads(dump_scenario(s))["exceptional"]["kind"] == "points"
