import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from pshglue.box import Box
from pshglue.errors import BelowRhoMin, DegenerateBounds, DimensionMismatch, NoMargin, RangeViolation
from pshglue.glue import (PreparedChart, assemble_global, build_convex_reparam, choose_K,
                          estimate_shell_negativity, profile_check, make_bump,
                          mixed_lower_bound_check, mixed_margins, normalize_to_1_2,
                          reduce_unbounded, reparam_margins, scaling_bound_check,
                          square_estimate, square_potential)
from pshglue.holo import coord
from pshglue.jets import Affine, Const, ModSq, RealComp, Sum, eval_jet, euclidean, poincare
from pshglue.levi import Segment, Spiral, curve_length, dominates, levi_form
from pshglue.psh import DomainSpec, PointSet, check_psh
from pshglue.runner import run_scenario
from pshglue.scalar import Exp
from pshglue.scenario import bundled_scenario, load_scenario


def pts1(*zs):
    return np.array([[complex(z)] for z in zs])


# ----------------------------------------------------------------- normalize


@pytest.mark.parametrize("m, M, z2, expected", [
    (0.0, 4.0, 2.0, 1.5),
    (0.0, 4.0, 0.0, 1.0),
    (1.0, 3.0, 3.0, 2.0),
    (-2.0, 2.0, 0.0, 1.5),
])
def test_normalize_values(m, M, z2, expected):
    phi = normalize_to_1_2(ModSq(coord(0)), m, M)
    assert eval_jet(phi, pts1(math.sqrt(z2))).value[0] == pytest.approx(expected)


def test_normalize_scales_lengths():
    m, M = 0.5, 9.0
    curve = Spiral([0.0], 0.5, 0.0, 2.0)
    base = curve_length(levi_form(euclidean(1)), curve, 0.0, 0.9)
    got = curve_length(levi_form(normalize_to_1_2(euclidean(1), m, M)), curve, 0.0, 0.9)
    assert got / base == pytest.approx(math.sqrt(1.0 / (M - m)), rel=1e-10)


def test_normalize_degenerate():
    with pytest.raises(DegenerateBounds):
        normalize_to_1_2(euclidean(1), 1.0, 1.0)


# ----------------------------------------------------------------- square


def test_square_of_constant():
    margins, resid, _ = square_estimate(Const(1.5), pts1(0.1, 0.7j))
    assert margins == pytest.approx([0.0, 0.0], abs=1e-15)
    assert resid == 0.0


def test_square_of_modsq_at_radius_sqrt2():
    margins, _, norms = square_estimate(ModSq(coord(0)), pts1(math.sqrt(2)))
    # Levi(|z|^4) = 4|z|^2 = 8; (1/8)|d u|^2 = (1/8) 4 |z|^6 = 4
    assert norms[0] == pytest.approx(8.0)
    assert margins[0] == pytest.approx(4.0)


def test_square_identity_on_random_points():
    rng = np.random.default_rng(4)
    phi = normalize_to_1_2(Sum((euclidean(2), RealComp(Exp(), ModSq(coord(1))))), 0.0, 2.0 * math.e + 2)
    z = rng.uniform(-0.7, 0.7, (100, 2)) + 1j * rng.uniform(-0.7, 0.7, (100, 2))
    margins, resid, norms = square_estimate(phi, z)
    assert resid <= 1e-9
    assert np.all(margins >= -1e-9 * (1 + norms))


def test_square_range_violation():
    with pytest.raises(RangeViolation):
        square_estimate(ModSq(coord(0)), pts1(0.2))


# ----------------------------------------------------------------- bump


INNER = Box.square(1, 0.5)
OUTER = Box.square(1, 1.0)


def test_bump_equals_one_inside_and_zero_outside():
    rho = make_bump(INNER, OUTER)
    assert eval_jet(rho, pts1(0.1, 0.4 + 0.4j)).value == pytest.approx([1.0, 1.0])
    assert eval_jet(rho, pts1(0.96, 0.99j, 1.5)).value == pytest.approx([0.0, 0.0, 0.0])


def test_bump_gradient_ratio_is_bounded():
    rho = make_bump(INNER, OUTER)
    x = np.linspace(-0.999, 0.999, 401)
    z = (x[:, None] + 1j * x[None, :]).reshape(-1, 1)
    jet = eval_jet(rho, z)
    eta, g_eta, _ = rho.eta_jet(z)
    live = jet.value > 1e-12
    ratio = np.sum(np.abs(jet.grad[live]) ** 2, axis=1) / jet.value[live]
    sup_eta = np.max(np.sum(np.abs(g_eta) ** 2, axis=1))
    assert ratio.max() == pytest.approx(4.0 * sup_eta, rel=0.05)


def test_bump_errors():
    with pytest.raises(NoMargin):
        make_bump(Box.square(1, 1.0), OUTER)
    with pytest.raises(DimensionMismatch):
        make_bump(Box.square(2, 0.5), OUTER)


# ----------------------------------------------------------------- mixed term


def test_mixed_term_statuses():
    rho = make_bump(INNER, OUTER)
    u = square_potential(normalize_to_1_2(euclidean(1), 0.0, 2.0))
    margins, status, _ = mixed_margins(rho, u, pts1(0.0, 0.8, 0.93, 0.99))
    assert status[0] == "checked" and status[-1] == "outside"
    assert np.all(margins[status == "checked"] >= -1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.94, 0.94), st.floats(-0.94, 0.94))
def test_mixed_term_lower_bound_holds(x, y):
    rho = make_bump(INNER, OUTER)
    u = square_potential(normalize_to_1_2(euclidean(1), 0.0, 2.0))
    try:
        margin = mixed_lower_bound_check(rho, u, [complex(x, y)])
    except BelowRhoMin:
        return
    assert margin >= -1e-8


def test_below_rho_min():
    rho = make_bump(INNER, OUTER)
    u = square_potential(normalize_to_1_2(euclidean(1), 0.0, 2.0))
    with pytest.raises(BelowRhoMin):
        mixed_lower_bound_check(rho, u, [0.99])


# ----------------------------------------------------------------- shells


def test_shell_constant_cutoff_needs_no_slope():
    u = square_potential(normalize_to_1_2(euclidean(1), 0.0, 2.0))
    chart = PreparedChart(0, "c", DomainSpec(OUTER), INNER, euclidean(1), u=u, rho=Const(1.0))
    est = estimate_shell_negativity([chart], euclidean(1), 1, pts1(0.5, 0.9, 1.2))
    assert est.C == 0.0


@pytest.fixture(scope="module")
def glue_1d_context():
    report = run_scenario(load_scenario(bundled_scenario("GLUE-1D")))
    assert report.passed
    return report.context


def brute_force_shift(charts, psi, z):
    from pshglue.glue import negativity
    neg = sum(negativity(ch.rho, ch.u, z) for ch in charts)
    lp = eval_jet(psi, z).levi
    out = []
    for n, l in zip(neg, lp):
        lam = scipy.linalg.eigh(n, l, eigvals_only=True)[0]
        out.append(max(0.0, -lam))
    return np.array(out)


def test_shell_estimate_covers_dense_grid(glue_1d_context):
    ctx = glue_1d_context
    psi = ctx.s.psi
    hull = ctx.s.hull()
    z = hull.grid(300)
    z = z[ctx.s.exceptional.distance(z, hull) >= ctx.delta]
    v = eval_jet(psi, z).value
    for shell in ctx.shells:
        c = shell["c"]
        inside = z[(v >= c - 1) & (v <= c + 1)]
        if len(inside) == 0:
            continue
        brute = brute_force_shift(ctx.charts, psi, inside)
        assert shell["C"] >= brute.max() * (1 - 1e-9), f"shell {c}"
        assert shell["raw_max"] >= 0.5 * brute.max()


def test_shell_estimates_are_nonnegative(glue_1d_context):
    assert all(s["C"] >= 0 for s in glue_1d_context.shells)


# ----------------------------------------------------------------- reparam


def test_convex_reparam_slopes():
    r = build_convex_reparam([(0, 3.0), (1, 3.0), (1, 2.0), (2, 1.0), (4, 10.0)])
    assert r.knots == (0.0, 1.0, 2.0, 3.0, 4.0)
    assert r.slopes == (3.0, 3.0, 3.0, 3.0, 10.0)
    _, d1, d2 = r.derivs(np.linspace(-3, 7, 5001))
    assert d1.min() >= 0 and d2.min() >= 0


def test_convex_reparam_floor():
    r = build_convex_reparam([(0, 0.0), (1, -5.0)])
    assert r.slopes == (1.0, 1.0)
    assert build_convex_reparam([]).slopes == (1.0,)


def test_reparam_meets_requests():
    req = [(0, 2.0), (1, 5.0), (2, 5.0)]
    r = build_convex_reparam(req)
    rng = np.random.default_rng(2)
    z = rng.uniform(-1.7, 1.7, (500, 1)) + 1j * rng.uniform(-1.7, 1.7, (500, 1))
    margins, norms = reparam_margins(r, euclidean(1), req, z)
    assert np.all(margins >= -1e-9 * (1 + norms))


def test_assemble_single_chart():
    u = square_potential(normalize_to_1_2(euclidean(1), 0.0, 2.0))
    rho = make_bump(INNER, OUTER)
    chart = PreparedChart(0, "c", DomainSpec(OUTER), INNER, euclidean(1), u=u, rho=rho)
    r = build_convex_reparam([(0, 1.0)])
    glob = assemble_global([chart], euclidean(1), r)
    z = pts1(0.2, 0.3j)
    expect = eval_jet(u, z).value + r.derivs(eval_jet(euclidean(1), z).value)[0]
    assert eval_jet(glob, z).value == pytest.approx(expect)


# ----------------------------------------------------------------- unbounded


def test_choose_K_default():
    assert choose_K() == 32.0
    d1, d2 = profile_check(32.0)
    assert d1 >= 0 and d2 >= 0


def test_choose_K_is_stable_on_shorter_ranges():
    k = choose_K(50.0)
    assert choose_K(50.0) == k
    d1, d2 = profile_check(k, 25.0)
    assert d1 >= 0 and d2 >= 0


def test_reduce_unbounded_is_bounded_below_and_psh():
    phit, K = reduce_unbounded(poincare(), K=32.0)
    d = DomainSpec(Box.square(1, 0.5), PointSet(np.array([[0j]])))
    z = np.geomspace(1e-12, 0.5, 200)[:, None].astype(complex)
    assert eval_jet(phit, z).value.min() >= 0
    assert check_psh(phit, d, count=2000).passed


def test_reduce_keeps_poincare_length_within_scaling_bound():
    margin, C, l_exp, l_phi = scaling_bound_check(poincare(), Segment([0.5], [0.0]))
    assert margin >= 0
    assert l_exp > 0 and l_phi > 0


@pytest.mark.parametrize("z", [0.3, 0.05 + 0.02j, 1e-4])
def test_exp_dominates_scaled_form(z):
    phi = poincare()
    p = pts1(z)
    c = eval_jet(phi, p).value[0]
    lexp = eval_jet(RealComp(Exp(), phi), p).levi[0]
    lphi = eval_jet(phi, p).levi[0]
    ok, margin = dominates(lexp, lphi, math.exp(c))
    assert ok and margin >= -1e-12 * abs(lexp).max()


def test_negative_affine_fails_bounded_check():
    phi = Affine(-1.0, 0.0, ModSq(coord(0)))
    assert not check_psh(phi, DomainSpec(OUTER), count=100).passed
