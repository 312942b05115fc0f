"""Gluing local potentials into one global plurisubharmonic potential.

Bounded branch, per chart ``i``:

1. affine normalization so that ``1 <= phi_i <= 2``;
2. ``u_i = phi_i^2``, which satisfies ``Levi(u) >= (1/8) du (x) dbar u``;
3. cutoff ``rho_i = eta_i^2`` equal to 1 on the shrunken chart ``U'_i``;
4. ``Levi(rho u) >= u Levi(rho) - (16/rho) drho (x) dbar rho + (rho/2) Levi(u)``.

The negative part ``sum_i u_i Levi(rho_i) - (16/rho_i) drho_i (x) dbar rho_i`` is
absorbed shell by shell by ``r'(psi) Levi(psi)`` for an increasing convex ``r``,
and ``phi = r(psi) + sum_i rho_i u_i`` dominates ``(1/2) Levi(phi_i)`` on each
``U'_i``.

Unbounded branch: ``phi -> exp(phi) + h(phi)`` (see :class:`~pshglue.scalar.CompletionProfile`)
is bounded below and keeps completeness along A.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .box import Box
from .errors import (BelowRhoMin, DegenerateBounds, DimensionMismatch, EmptyDomain,
                     DominationFailure, ExhaustionDegenerate, KSearchFailed, NoMargin,
                     RangeViolation)
from .jets import Affine, Bump, ConvexReparam, FieldExpr, Prod, RealComp, Sum, _outer, eval_jet
from .levi import eigvals_batch, length_tail, levi_form, psd_shift
from .psh import DomainSpec
from .scalar import Exp, CompletionProfile, PiecewiseConvexFn, Square

__all__ = [
    "normalize_to_1_2", "square_potential", "square_estimate", "make_bump",
    "mixed_lower_bound_check", "mixed_margins", "negativity", "PreparedChart",
    "ShellEstimate", "estimate_shell_negativity", "build_convex_reparam",
    "reparam_margins", "assemble_global", "domination_margins", "require_domination",
    "scaling_bound_check", "choose_K",
    "profile_check", "reduce_unbounded", "RHO_MIN",
]

RHO_MIN = 1e-8
BUMP_SHRINK = 0.1


def normalize_to_1_2(phi: FieldExpr, m: float, M: float) -> Affine:
    """Affine map of ``phi`` sending ``[m, M]`` onto ``[1, 2]``."""
    if not M - m >= 1e-12:
        raise DegenerateBounds(f"bounds ({m}, {M}) leave no room for normalization")
    a = 1.0 / (M - m)
    return Affine(a, 1.0 - m * a, phi)


def square_potential(phi: FieldExpr) -> RealComp:
    return RealComp(Square(), phi)


def square_estimate(phi: FieldExpr, points, tol: float = 1e-9):
    """Verify ``u = phi^2`` at ``points``.

    Returns ``(margins, identity_residual, norms)``: the least eigenvalue of
    ``Levi(u) - (1/8) g_u g_u^H`` per point, the largest relative gap between
    ``eval_jet`` of ``u`` and ``2 (g g^H + phi Levi(phi))``, and ``|Levi(u)|_inf``.
    """
    jp = eval_jet(phi, points)
    out_lo = jp.value < 1.0 - tol
    out_hi = jp.value > 2.0 + tol
    if np.any(out_lo | out_hi):
        i = int(np.argmax(out_lo | out_hi))
        raise RangeViolation(f"normalized potential {jp.value[i]:.6g} outside [1, 2] "
                             f"at {points[i].tolist()}")
    ju = eval_jet(square_potential(phi), points)
    assembled = 2.0 * (_outer(jp.grad, jp.grad) + jp.value[:, None, None] * jp.levi)
    norms = np.max(np.abs(ju.levi), axis=(1, 2))
    resid = np.max(np.abs(ju.levi - assembled), axis=(1, 2)) / (1.0 + norms)
    margins = eigvals_batch(ju.levi - _outer(ju.grad, ju.grad) / 8.0)[:, 0]
    return margins, float(resid.max()), norms


def make_bump(inner: Box, outer: Box, shrink: float = BUMP_SHRINK) -> Bump:
    """Cutoff equal to 1 on ``inner`` whose support stays inside ``outer``.

    The support is ``outer`` moved a fraction ``shrink`` toward ``inner``.
    """
    if len(inner.bounds) != len(outer.bounds):
        raise DimensionMismatch("inner and outer boxes live in different dimensions")
    if np.any(inner.margins_inside(outer) <= 0):
        raise NoMargin("the inner box touches or leaves the outer box")
    return Bump(inner, outer.shrink_toward(inner, shrink))


def _rho_terms(rho_jet):
    """``(16/rho) g g^H`` with the 0/0 limit set to 0 where ``rho == 0``."""
    rho = rho_jet.value
    safe = np.where(rho > 0, rho, 1.0)
    term = 16.0 * _outer(rho_jet.grad, rho_jet.grad) / safe[:, None, None]
    return np.where((rho > 0)[:, None, None], term, 0.0)


def mixed_margins(rho: FieldExpr, u: FieldExpr, points, rho_min: float = RHO_MIN):
    """Mixed-term lower bound at a batch of points.

    Returns ``(margins, status, norms)`` where ``status`` is ``"checked"``,
    ``"skipped"`` (``0 < rho <= rho_min``) or ``"outside"`` (``rho == 0``, where
    the inequality is vacuous); margins and the norms ``|Levi(rho u)|_inf`` are
    NaN unless checked.
    """
    jr = eval_jet(rho, points)
    status = np.where(jr.value > rho_min, "checked",
                      np.where(jr.value > 0, "skipped", "outside")).astype(object)
    margins = np.full(len(points), np.nan)
    norms = np.full(len(points), np.nan)
    live = status == "checked"
    if np.any(live):
        pts = points[live]
        jr_l = jr[live]
        ju = eval_jet(u, pts)
        jprod = eval_jet(Prod(rho, u), pts)
        lower = (ju.value[:, None, None] * jr_l.levi - _rho_terms(jr_l)
                 + 0.5 * jr_l.value[:, None, None] * ju.levi)
        margins[live] = eigvals_batch(jprod.levi - lower)[:, 0]
        norms[live] = np.max(np.abs(jprod.levi), axis=(1, 2))
    return margins, status, norms


def mixed_lower_bound_check(rho: FieldExpr, u: FieldExpr, p, tol: float = 0.0,
                            rho_min: float = RHO_MIN) -> float:
    """Margin of the mixed-term inequality at one point.

    Raises :class:`BelowRhoMin` where ``rho <= rho_min``.
    """
    z = np.atleast_2d(np.asarray(p, dtype=complex))
    margins, status, _ = mixed_margins(rho, u, z, rho_min)
    if status[0] != "checked":
        raise BelowRhoMin(f"rho <= {rho_min:g} at {z[0].tolist()}")
    return float(margins[0])


def negativity(rho: FieldExpr, u: FieldExpr, points) -> np.ndarray:
    """``u Levi(rho) - (16/rho) g_rho g_rho^H`` per point (zero off the support)."""
    jr = eval_jet(rho, points)
    out = np.zeros_like(jr.levi)
    live = jr.value > 0
    if np.any(live):
        ju = eval_jet(u, points[live])
        jl = jr[live]
        out[live] = ju.value[:, None, None] * jl.levi - _rho_terms(jl)
    return out


@dataclass
class PreparedChart:
    """One chart after routing, normalization, squaring and cutoff."""

    index: int
    label: str
    domain: DomainSpec
    inner: Box
    phi: FieldExpr                 # input potential
    route: str = "bounded"
    bounded: FieldExpr | None = None   # after reduction (or phi itself)
    K: float | None = None
    bounds: tuple[float, float] | None = None
    normalized: FieldExpr | None = None
    u: FieldExpr | None = None
    rho: Bump | None = None


@dataclass
class ShellEstimate:
    c: int
    C: float
    worst_point: np.ndarray | None
    sample_count: int = 0
    raw_max: float = 0.0

    def to_dict(self):
        wp = None if self.worst_point is None else [
            [float(x.real), float(x.imag)] for x in self.worst_point]
        return {"c": int(self.c), "C": float(self.C), "raw_max": float(self.raw_max),
                "sample_count": int(self.sample_count), "worst_point": wp}


def estimate_shell_negativity(charts, psi: FieldExpr, c: int, points,
                              safety: float = 1.0) -> ShellEstimate:
    """Slope ``C_c`` of ``r`` needed on the shell ``c-1 <= psi <= c+1``.

    ``C_c`` is the largest (over shell samples) least ``t >= 0`` with
    ``t Levi(psi) + sum_i negativity_i >= 0``, multiplied by ``safety``.
    """
    jpsi = eval_jet(psi, points)
    shell = (jpsi.value >= c - 1) & (jpsi.value <= c + 1)
    if not np.any(shell):
        raise EmptyDomain(f"no samples in shell {c}")
    pts = points[shell]
    neg = np.zeros((len(pts), pts.shape[1], pts.shape[1]), dtype=complex)
    for ch in charts:
        neg += negativity(ch.rho, ch.u, pts)
    try:
        t = psd_shift(neg, jpsi.levi[shell])
    except np.linalg.LinAlgError:
        raise ExhaustionDegenerate(f"Levi(psi) not positive definite in shell {c}") from None
    i = int(np.argmax(t))
    raw = float(t[i])
    return ShellEstimate(c, safety * raw, pts[i], int(len(pts)), raw)


def build_convex_reparam(slope_requests, floor: float = 1.0,
                         radius: float = 0.1) -> PiecewiseConvexFn:
    """Increasing convex ``r`` with ``r' >= max(C_k, previous slopes, floor)`` on ``[k, k+1]``.

    ``slope_requests`` is a list of ``(k, C_k)`` with integer ``k``; repeated
    ``k`` take the maximum, negative requests are clamped to 0.
    """
    req: dict[int, float] = {}
    for k, ck in slope_requests:
        req[int(k)] = max(req.get(int(k), 0.0), max(float(ck), 0.0))
    if not req:
        return PiecewiseConvexFn((0.0,), (floor,), radius, 0.0)
    ks = list(range(min(req), max(req) + 1))
    slopes = []
    cur = floor
    for k in ks:
        cur = max(cur, req.get(k, 0.0))
        slopes.append(cur)
    return PiecewiseConvexFn(tuple(float(k) for k in ks), tuple(slopes), radius, 0.0)


def reparam_margins(r: PiecewiseConvexFn, psi: FieldExpr, slope_requests, points):
    """Least eigenvalue of ``Levi(r o psi) - C_k Levi(psi)`` for samples with psi in [k, k+1].

    Returns ``(margins, norms)`` with ``norms = |Levi(r o psi)|_inf``.
    """
    jr = eval_jet(ConvexReparam(r, psi), points)
    jpsi = eval_jet(psi, points)
    need = np.zeros(len(points))
    for k, ck in slope_requests:
        inside = (jpsi.value >= k) & (jpsi.value <= k + 1)
        need = np.where(inside, np.maximum(need, ck), need)
    margins = eigvals_batch(jr.levi - need[:, None, None] * jpsi.levi)[:, 0]
    return margins, np.max(np.abs(jr.levi), axis=(1, 2))


def assemble_global(charts, psi: FieldExpr, r: PiecewiseConvexFn) -> FieldExpr:
    """``r(psi) + sum_i rho_i u_i``."""
    return Sum((ConvexReparam(r, psi),) + tuple(Prod(ch.rho, ch.u) for ch in charts))


def domination_margins(phi_glob: FieldExpr, chart_potential: FieldExpr, points,
                       c: float = 0.5) -> np.ndarray:
    """Least eigenvalue of ``Levi(phi_glob) - c Levi(chart_potential)`` per point.

    Returns ``(margins, norms)`` with ``norms = |Levi(phi_glob)|_inf``.
    """
    jg = eval_jet(phi_glob, points)
    jc = eval_jet(chart_potential, points)
    margins = eigvals_batch(jg.levi - c * jc.levi)[:, 0]
    return margins, np.max(np.abs(jg.levi), axis=(1, 2))


def require_domination(label, margins, points, tol: float):
    """Raise :class:`DominationFailure` unless ``min(margins) >= -tol``."""
    i = int(np.argmin(margins))
    if margins[i] < -tol:
        raise DominationFailure(
            f"chart {label}: global Levi form fails to dominate half the chart form "
            f"(margin {margins[i]:.3e} at {points[i].tolist()})",
            chart=label, point=points[i], margin=float(margins[i]))


# --------------------------------------------------------------------------
# unbounded potentials


def profile_check(K: float, T: float = 1000.0, grid_step: float = 0.01):
    """Minimum of ``h'`` and ``h''`` on the grid ``[-T, 10]``."""
    grid = np.arange(-T, 10.0 + grid_step / 2, grid_step)
    _, h1, h2 = CompletionProfile(K).derivs(grid)
    return float(h1.min()), float(h2.min())


def choose_K(T: float = 1000.0, grid_step: float = 0.01, K_max: float = 2.0**40) -> float:
    """Smallest power of two ``K`` making ``h`` increasing and convex on ``[-T, 10]``."""
    if T <= 4:
        raise ValueError("T must exceed 4")
    K = 1.0
    while K <= K_max:
        d1, d2 = profile_check(K, T, grid_step)
        if d1 >= 0 and d2 >= 0:
            return K
        K *= 2.0
    raise KSearchFailed(f"no K <= {K_max:g} makes h increasing and convex on [-{T}, 10]")


def reduce_unbounded(phi: FieldExpr, K: float | None = None, T: float = 1000.0):
    """``exp(phi) + h(phi)``: nonnegative, bounded below, still complete along A.

    Returns ``(phi_tilde, K)``.
    """
    if K is None:
        K = choose_K(T)
    return Sum((RealComp(Exp(), phi), RealComp(CompletionProfile(K), phi))), K


def scaling_bound_check(phi: FieldExpr, curve, tau_lo: float = 1e-6, tau_hi: float = 1.0,
                        grid: int = 2001, tol: float = 1e-10):
    """Length under ``Levi(exp(phi))`` against ``e^(C/2)`` times length under ``Levi(phi)``.

    ``C`` is the minimum of ``phi`` on the piece ``tau_lo <= tau <= tau_hi`` of
    the curve (sampled on a log grid, lowered by a relative 1e-6 for the gaps
    between grid points).  Returns ``(margin, C, L_exp, L)`` with
    ``margin = L_exp - e^(C/2) L``.
    """
    taus = np.geomspace(tau_lo, tau_hi, grid)
    vals = eval_jet(phi, curve.point(taus)).value
    c = float(vals.min())
    c -= 1e-6 * (1.0 + abs(c))
    l_exp = length_tail(levi_form(RealComp(Exp(), phi)), curve, tau_lo, tau_hi, tol=tol)
    l_phi = length_tail(levi_form(phi), curve, tau_lo, tau_hi, tol=tol)
    return l_exp - np.exp(c / 2.0) * l_phi, c, l_exp, l_phi
