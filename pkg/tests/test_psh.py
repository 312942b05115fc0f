import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pshglue.box import Box
from pshglue.errors import EmptyDomain
from pshglue.holo import coord
from pshglue.jets import Affine, ModSq, Sum, cone, euclidean, poincare
from pshglue.psh import (DomainSpec, EmptySet, PointSet, ZeroSet, bound_scan, check_psh,
                         exceptional_from_dict, sample_domain, worst_index)

SQUARE = Box.square(1, 1.0)
ORIGIN = PointSet(np.array([[0j]]))


def test_grid_sampling_counts():
    pts = sample_domain(DomainSpec(SQUARE), "grid", count=10)
    assert pts.shape == (100, 1)
    assert np.all(SQUARE.contains(pts))


def test_grid_excludes_points_near_A():
    d = DomainSpec(SQUARE, ORIGIN)
    pts = sample_domain(d, "grid", count=11, delta=0.05)
    # the centre cell lies on A and is dropped
    assert len(pts) == 120
    assert np.all(np.abs(pts[:, 0]) >= 0.05)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-6, 1e-2), st.floats(0.0, 0.5))
def test_uniform_samples_are_admissible(seed, delta, frac):
    d = DomainSpec(Box.square(2, 0.5), ZeroSet(coord(0)))
    pts = sample_domain(d, count=200, delta=delta, near_A_fraction=frac, seed=seed)
    assert len(pts) == 200
    assert np.all(d.box.contains(pts))
    assert np.all(np.abs(pts[:, 0]) >= delta * (1 - 1e-12))


def test_near_fraction_lands_in_thin_shell():
    d = DomainSpec(SQUARE, ORIGIN)
    pts = sample_domain(d, count=1000, delta=1e-3, near_A_fraction=0.1, seed=3)
    near = np.abs(pts[:, 0]) <= 1e-2
    assert near.sum() >= 100


def test_same_seed_same_samples():
    d = DomainSpec(SQUARE, ORIGIN)
    a = sample_domain(d, count=50, seed=7)
    b = sample_domain(d, count=50, seed=7)
    assert np.array_equal(a, b)


def test_empty_domain():
    d = DomainSpec(Box.square(1, 1e-9), ORIGIN)
    with pytest.raises(EmptyDomain):
        sample_domain(d, "grid", count=4, delta=0.1)


def test_zero_set_distance_of_linear_function():
    zs = ZeroSet(coord(0))
    z = np.array([[0.3 + 0.4j, 2.0], [0.0, 1.0]])
    assert zs.distance(z, Box.square(2, 1.0)) == pytest.approx([0.5, 0.0])


def test_exceptional_round_trip():
    for a in (EmptySet(), ORIGIN, ZeroSet(coord(1))):
        assert exceptional_from_dict(a.to_dict()).to_dict() == a.to_dict()


def test_check_psh_euclidean():
    rep = check_psh(euclidean(1), DomainSpec(SQUARE), count=500)
    assert rep.passed and rep.min_margin == pytest.approx(1.0)


def test_check_psh_negative_euclidean_fails():
    rep = check_psh(Affine(-1.0, 0.0, ModSq(coord(0))), DomainSpec(SQUARE), count=500)
    assert not rep.passed and rep.min_margin == pytest.approx(-1.0)
    assert SQUARE.contains(rep.worst_point[None])[0]


def test_check_psh_poincare_near_origin():
    d = DomainSpec(Box.square(1, 0.5), ORIGIN)
    rep = check_psh(poincare(), d, count=2000)
    assert rep.passed and rep.min_margin > 0


def test_check_psh_cone():
    d = DomainSpec(Box.square(1, 0.5), ORIGIN)
    assert check_psh(cone(), d, count=500).passed


def test_tolerance_scales_with_levi_size():
    # a tiny negative eigenvalue next to a huge positive one is round-off
    expr = Sum((Affine(1e9, 0.0, ModSq(coord(0))), Affine(-1e-3, 0.0, ModSq(coord(1)))))
    rep = check_psh(expr, DomainSpec(Box.square(2, 1.0)), count=50, rel_tol=1e-9)
    assert rep.min_margin == pytest.approx(-1e-3)
    assert rep.scale == pytest.approx(1.0 + 1e9)
    assert rep.passed and rep.tol == pytest.approx(1e-9 * (1.0 + 1e9))
    rep = check_psh(expr, DomainSpec(Box.square(2, 1.0)), count=50, rel_tol=1e-13)
    assert not rep.passed


def test_strict_rejects_zero_margin():
    flat = Sum((ModSq(coord(0)), Affine(0.0, 0.0, ModSq(coord(1)))))
    d = DomainSpec(Box.square(2, 1.0))
    assert check_psh(flat, d, count=50).passed
    assert not check_psh(flat, d, count=50, strict=True).passed


def test_worst_index_tie_break():
    pts = np.array([[1.0 + 0j], [0.5 + 1j], [0.5 - 1j], [2.0]])
    margins = np.array([-1.0, -1.0, -1.0, 0.0])
    assert worst_index(margins, pts) == 2


def test_bound_scan_poincare_is_unbounded():
    d = DomainSpec(Box.square(1, 0.5), ORIGIN)
    scan = bound_scan(poincare(), d, shrink_schedule=np.exp(-2.0 * np.arange(1, 5)), count=200)
    assert scan.unbounded_below
    assert scan.inf_est < scan.sup_est
    assert scan.level_minima == sorted(scan.level_minima, reverse=True)


def test_bound_scan_euclidean_is_bounded():
    d = DomainSpec(Box.square(1, 0.5), ORIGIN)
    scan = bound_scan(euclidean(1), d, count=200)
    assert not scan.unbounded_below
    assert 0.0 <= scan.inf_est <= scan.sup_est <= 0.5


def test_bound_scan_default_schedule_on_poincare():
    d = DomainSpec(Box.square(1, 0.5), ORIGIN)
    scan = bound_scan(poincare(), d, count=200)
    # -log(2 * 2^k log 10) decreases by log 2 per level
    assert scan.unbounded_below
    assert scan.inf_est < -math.log(2 * 64 * math.log(10)) + 0.5
