import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pshglue.box import Box
from pshglue.errors import DomainViolation, SingularPoint, UnknownExprNode, ValidationError
from pshglue.holo import Poly, coord
from pshglue.jets import (Affine, Bump, Const, LogModSq, ModSq, Prod, RealComp, RePart, Sum,
                          cone, euclidean, eval_jet, expr_from_dict, finite_diff_jet, poincare,
                          real_to_wirtinger)
from pshglue.psh import DomainSpec, PointSet
from pshglue.scalar import Exp, Square

from trees import jet_rel_error, random_points, random_tree


def test_mod_sq_at_one_plus_i():
    j = eval_jet(ModSq(coord(0)), [1 + 1j])
    assert j.value == pytest.approx(2.0)
    assert j.grad[0] == pytest.approx(1 - 1j)
    assert j.levi[0, 0] == pytest.approx(1.0)


def test_poincare_levi_density():
    r = math.exp(-2)
    j = eval_jet(poincare(), [r])
    expected = 1.0 / (r**2 * math.log(r**2) ** 2)     # e^4 / 16
    assert j.levi[0, 0].real == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(math.exp(4) / 16)


def test_cone_density():
    z = 0.3 - 0.1j
    j = eval_jet(cone(), [z])
    assert j.levi[0, 0].real == pytest.approx(2 / abs(z) ** 2, rel=1e-12)


def test_fd_of_quartic():
    u = RealComp(Square(), ModSq(coord(0)))
    fd = finite_diff_jet(u, [math.sqrt(2)])
    assert fd.levi[0, 0].real == pytest.approx(8.0, rel=1e-7)


def test_pluriharmonic_part_has_zero_levi():
    h = Poly(((1 + 2j, (2, 1)), (0.5, (0, 3))))
    j = eval_jet(RePart(h), random_points(np.random.default_rng(0), 2, 20))
    assert np.max(np.abs(j.levi)) == 0.0


def test_log_mod_sq_on_zero_set_raises():
    with pytest.raises(SingularPoint):
        eval_jet(LogModSq(coord(0)), [0.0])


def test_domain_guard():
    d = DomainSpec(Box.square(1, 1.0), PointSet([[0.0]]))
    with pytest.raises(DomainViolation):
        eval_jet(ModSq(coord(0)), [2.0], domain=d)
    with pytest.raises(SingularPoint):
        eval_jet(ModSq(coord(0)), [1e-9], domain=d, delta=1e-6)


def test_batch_matches_single():
    rng = np.random.default_rng(3)
    e = random_tree(rng, 2)
    pts = random_points(rng, 2, 7)
    batch = eval_jet(e, pts)
    for k in range(7):
        one = eval_jet(e, pts[k])
        assert one.value == pytest.approx(batch.value[k])
        assert np.allclose(one.levi, batch.levi[k])


@pytest.mark.parametrize("seed", range(5))
def test_random_trees_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    for _ in range(100):
        n = int(rng.integers(1, 4))
        e = random_tree(rng, n)
        assert e.depth <= 5
        p = random_points(rng, n)[0]
        assert jet_rel_error(eval_jet(e, p), finite_diff_jet(e, p, step=1e-3)) <= 1e-6


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_levi_is_hermitian(seed, n):
    rng = np.random.default_rng(seed)
    e = random_tree(rng, n)
    j = eval_jet(e, random_points(rng, n, 5))
    assert np.all(j.hermitian_defect() <= 1e-12 * (1 + np.max(np.abs(j.levi))))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sum_and_scaling_are_linear(seed):
    rng = np.random.default_rng(seed)
    a, b = random_tree(rng, 2, 3), random_tree(rng, 2, 3)
    p = random_points(rng, 2, 4)
    ja, jb, js = eval_jet(a, p), eval_jet(b, p), eval_jet(Sum((a, b)), p)
    assert np.allclose(js.levi, ja.levi + jb.levi)
    jc = eval_jet(Affine(-2.5, 1.0, a), p)
    assert np.allclose(jc.levi, -2.5 * ja.levi)
    assert np.allclose(jc.value, -2.5 * ja.value + 1.0)


def test_product_rule_against_fd():
    rng = np.random.default_rng(11)
    e = Prod(ModSq(random_poly2 := Poly(((1.0, (1, 0)), (0.5j, (0, 2))))), RePart(random_poly2))
    p = random_points(rng, 2)[0]
    assert jet_rel_error(eval_jet(e, p), finite_diff_jet(e, p)) < 1e-7


def test_prod_skips_right_factor_off_support():
    bump = Bump(Box.square(1, 0.2), Box.square(1, 0.3))
    # the right factor is singular at 1, where the bump vanishes
    e = Prod(bump, poincare())
    j = eval_jet(e, [[1.0 + 0j], [0.05]])
    assert j.value[0] == 0.0
    assert j.value[1] == pytest.approx(eval_jet(poincare(), [0.05]).value)


def test_bump_jet_matches_fd():
    bump = Bump(Box.square(2, 0.3), Box.square(2, 0.6))
    rng = np.random.default_rng(5)
    for p in random_points(rng, 2, 10, half=0.55):
        assert jet_rel_error(eval_jet(bump, p), finite_diff_jet(bump, p, step=1e-4)) < 1e-6


def test_real_to_wirtinger_on_quadratic():
    # phi = x^2 + 3 y^2 on C: Levi = (2 + 6) / 4 = 2
    g, L = real_to_wirtinger(np.array([[2.0, 0.0]]), np.array([[[2.0, 0.0], [0.0, 6.0]]]))
    assert L[0, 0, 0] == pytest.approx(2.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_serialization_round_trip(seed):
    rng = np.random.default_rng(seed)
    e = random_tree(rng, 2)
    text = json.dumps(e.to_dict())
    back = expr_from_dict(json.loads(text))
    assert json.dumps(back.to_dict()) == text
    p = random_points(rng, 2, 3)
    assert np.array_equal(eval_jet(back, p).levi, eval_jet(e, p).levi)


def test_named_potentials_round_trip():
    for e in (euclidean(3), poincare(radius_sq=math.e**2), cone(coord(1, 2.0)),
              Bump(Box.square(1, 0.5), Box.square(1, 1.0)), RealComp(Exp(), Const(1.0))):
        assert expr_from_dict(e.to_dict()).to_dict() == e.to_dict()


def test_unknown_node_rejected():
    with pytest.raises(UnknownExprNode):
        expr_from_dict({"node": "tanh", "child": {"node": "const", "value": 1.0}})


def test_bad_keys_name_the_path():
    bad = {"node": "sum", "children": [{"node": "const", "valu": 1.0}]}
    with pytest.raises(ValidationError) as err:
        expr_from_dict(bad)
    assert "children/0" in str(err.value)
    assert "valu" in str(err.value)
