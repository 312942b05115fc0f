"""Smooth functions of one real variable with first and second derivatives.

Every function here is used as the outer map of a composition ``f(u)`` with a
real field ``u``; the jet engine only ever needs ``(f, f', f'')`` at the values
of ``u``, so that is the whole interface (:meth:`ScalarFn.derivs`).

The module also houses the concrete cutoff ``chi``, the ramp ``alpha`` and the
function ``h = chi(t+3)/log(-t) + K*alpha(t)`` used to make an unbounded
potential bounded from below, plus :class:`PiecewiseConvexFn`, the increasing
convex reparametrization applied to the exhaustion.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar

import numpy as np
from scipy.special import exp1

from .errors import DomainViolation, UnknownExprNode

__all__ = [
    "ScalarFn", "Exp", "Log", "NegLogNeg", "Square", "Softplus", "Sin",
    "InvLogNeg", "Cutoff", "Ramp", "CompletionProfile", "PiecewiseConvexFn",
    "flat_exp", "transition", "cutoff_chi", "ramp_alpha", "scalar_from_dict",
]


# --------------------------------------------------------------------------
# building blocks


def flat_exp(t):
    """``exp(-1/t)`` for ``t > 0`` and 0 otherwise, with two derivatives."""
    t = np.asarray(t, dtype=float)
    pos = t > 0
    ts = np.where(pos, t, 1.0)
    with np.errstate(over="ignore", under="ignore"):
        b = np.where(pos, np.exp(-1.0 / ts), 0.0)
        b1 = b / ts**2
        b2 = b * (1.0 - 2.0 * ts) / ts**4
    return b, np.where(pos, b1, 0.0), np.where(pos, b2, 0.0)


def transition(t):
    """Smooth monotone step, 0 for ``t <= 0`` and 1 for ``t >= 1``.

    ``T = B(t) / (B(t) + B(1-t))`` with ``B = flat_exp``.  Returns
    ``(T, T', T'')``.
    """
    p, p1, p2 = flat_exp(t)
    q, q1, q2 = flat_exp(1.0 - np.asarray(t, dtype=float))
    q1 = -q1
    d = p + q
    d1 = p1 + q1
    num = p1 * q - p * q1
    num1 = p2 * q - p * q2
    val = p / d
    der1 = num / d**2
    der2 = (num1 * d - 2.0 * num * d1) / d**3
    return val, der1, der2


def cutoff_chi(t):
    """``chi = 1 - T``: identically 1 on ``(-inf, 0]``, 0 on ``[1, inf)``."""
    v, d1, d2 = transition(t)
    return 1.0 - v, -d1, -d2


def ramp_alpha(t):
    """``alpha(t) = int_{-4}^t int_{-4}^s exp(-1/(w+4)) dw ds``.

    Zero on ``(-inf, -4]`` with ``alpha'' = exp(-1/(t+4)) > 0`` beyond.  The
    double integral is in closed form through the exponential integral E1:
    with ``v = t + 4``, ``int_0^v e^{-1/x} dx = v e^{-1/v} - E1(1/v)``.
    """
    v = np.asarray(t, dtype=float) + 4.0
    pos = v > 0
    vs = np.where(pos, v, 1.0)
    with np.errstate(over="ignore", under="ignore"):
        beta = np.exp(-1.0 / vs)
        first = vs * beta - exp1(1.0 / vs)
        val = (vs + 0.5) * first - 0.5 * vs**2 * beta
    return (np.where(pos, val, 0.0), np.where(pos, first, 0.0),
            np.where(pos, beta, 0.0))


def _inv_log_neg(t):
    s = -t
    ls = np.log(s)
    return 1.0 / ls, 1.0 / (s * ls**2), (ls + 2.0) / (s**2 * ls**3)


# --------------------------------------------------------------------------
# registry of named functions


_REGISTRY: dict[str, type] = {}


class ScalarFn:
    """Interface: ``derivs(t) -> (f, f', f'')`` on float arrays."""

    name: ClassVar[str] = ""

    def __init_subclass__(cls, **kw):
        super().__init_subclass__(**kw)
        if cls.name:
            _REGISTRY[cls.name] = cls

    def derivs(self, t):
        raise NotImplementedError

    def __call__(self, t):
        return self.derivs(np.asarray(t, dtype=float))[0]

    def to_dict(self) -> dict:
        return {"fn": self.name}

    def _require(self, ok, t):
        if not np.all(ok):
            bad = np.asarray(t)[~np.asarray(ok)]
            raise DomainViolation(
                f"{self.name}: argument {bad.flat[0]!r} outside the function's domain")


@dataclass(frozen=True)
class Exp(ScalarFn):
    name: ClassVar[str] = "exp"

    def derivs(self, t):
        with np.errstate(over="ignore"):
            e = np.exp(t)
        return e, e, e


@dataclass(frozen=True)
class Log(ScalarFn):
    name: ClassVar[str] = "log"

    def derivs(self, t):
        self._require(t > 0, t)
        return np.log(t), 1.0 / t, -1.0 / t**2


@dataclass(frozen=True)
class NegLogNeg(ScalarFn):
    """``t -> -log(-t)`` on ``t < 0``; turns ``log|z|^2`` into the Poincare potential."""

    name: ClassVar[str] = "neg_log_neg"

    def derivs(self, t):
        self._require(t < 0, t)
        return -np.log(-t), -1.0 / t, 1.0 / t**2


@dataclass(frozen=True)
class Square(ScalarFn):
    name: ClassVar[str] = "square"

    def derivs(self, t):
        return t * t, 2.0 * t, np.full_like(t, 2.0)


@dataclass(frozen=True)
class Softplus(ScalarFn):
    name: ClassVar[str] = "softplus"

    def derivs(self, t):
        sig = 0.5 * (1.0 + np.tanh(0.5 * t))
        return np.logaddexp(0.0, t), sig, sig * (1.0 - sig)


@dataclass(frozen=True)
class Sin(ScalarFn):
    name: ClassVar[str] = "sin"

    def derivs(self, t):
        s = np.sin(t)
        return s, np.cos(t), -s


@dataclass(frozen=True)
class InvLogNeg(ScalarFn):
    """``t -> 1/log(-t)`` on ``t < -1``."""

    name: ClassVar[str] = "inv_log_neg"

    def derivs(self, t):
        self._require(t < -1, t)
        return _inv_log_neg(t)


@dataclass(frozen=True)
class Cutoff(ScalarFn):
    name: ClassVar[str] = "cutoff"

    def derivs(self, t):
        return cutoff_chi(t)


@dataclass(frozen=True)
class Ramp(ScalarFn):
    name: ClassVar[str] = "ramp"

    def derivs(self, t):
        return ramp_alpha(t)


@dataclass(frozen=True)
class CompletionProfile(ScalarFn):
    """``h(t) = chi(t+3) / log(-t) + K * alpha(t)``.

    The first term is supported on ``t <= -2`` where ``log(-t) >= log 2``, so
    ``h`` is defined on the whole real line.
    """

    K: float = 1.0
    name: ClassVar[str] = "completion_profile"

    def derivs(self, t):
        t = np.asarray(t, dtype=float)
        a0, a1, a2 = ramp_alpha(t)
        h0, h1, h2 = self.K * a0, self.K * a1, self.K * a2
        left = t < -2.0
        if np.any(left):
            tl = np.where(left, t, -3.0)
            c0, c1, c2 = cutoff_chi(tl + 3.0)
            q0, q1, q2 = _inv_log_neg(tl)
            h0 = h0 + np.where(left, c0 * q0, 0.0)
            h1 = h1 + np.where(left, c1 * q0 + c0 * q1, 0.0)
            h2 = h2 + np.where(left, c2 * q0 + 2.0 * c1 * q1 + c0 * q2, 0.0)
        return h0, h1, h2

    def to_dict(self) -> dict:
        return {"fn": self.name, "K": float(self.K)}


# --------------------------------------------------------------------------


_SMOOTHSTEP_INT = 0.5  # int_0^1 (3u^2 - 2u^3) du


@dataclass(frozen=True)
class PiecewiseConvexFn(ScalarFn):
    """Increasing convex function assembled from a slope table.

    ``slopes[j]`` is the slope on ``[knots[j], knots[j+1]]`` (and beyond the last
    knot); left of ``knots[0]`` the slope is ``slopes[0]``.  Each slope change at
    ``knots[j]`` is blended over ``[knots[j] - 2*radius, knots[j]]`` with a
    smoothstep in the derivative, so the function is C^2 and reaches the new
    slope exactly at the knot.
    """

    knots: tuple[float, ...]
    slopes: tuple[float, ...]
    radius: float = 0.1
    value0: float = 0.0
    name: ClassVar[str] = "piecewise_convex"

    def __post_init__(self):
        if len(self.knots) != len(self.slopes) or not self.knots:
            raise ValueError("knots and slopes must be nonempty and equally long")
        k = np.asarray(self.knots)
        w = 2.0 * self.radius
        if np.any(np.diff(k) < w - 1e-12):
            raise ValueError("knot spacing must be at least twice the blend radius")
        if np.any(np.diff(self.slopes) < 0) or self.slopes[0] < 0:
            raise ValueError("slopes must be nonnegative and nondecreasing")

    def _knot_values(self):
        k = np.asarray(self.knots)
        s = np.asarray(self.slopes)
        w = 2.0 * self.radius
        vals = [self.value0]
        for j in range(1, len(k)):
            vals.append(vals[-1] + s[j - 1] * (k[j] - k[j - 1])
                        + (s[j] - s[j - 1]) * w * _SMOOTHSTEP_INT)
        return np.asarray(vals)

    def derivs(self, t):
        t = np.asarray(t, dtype=float)
        k = np.asarray(self.knots)
        s = np.asarray(self.slopes)
        fk = self._knot_values()
        w = 2.0 * self.radius
        m = len(k)

        j = np.clip(np.searchsorted(k, t, side="right") - 1, 0, m - 1)
        f = fk[j] + s[j] * (t - k[j])
        f1 = s[j].copy()
        f2 = np.zeros_like(t)

        # blend toward the next knot
        nxt = np.minimum(j + 1, m - 1)
        has_next = (j + 1 < m)
        start = k[nxt] - w
        # points left of knots[0] also sit in "interval 0" but never in a blend
        u = np.where(has_next, (t - start) / w, -1.0)
        inb = has_next & (u > 0) & (t >= k[0])
        if np.any(inb):
            ub = np.clip(u, 0.0, 1.0)
            d = s[nxt] - s[j]
            f = np.where(inb, f + d * w * (ub**3 - 0.5 * ub**4), f)
            f1 = np.where(inb, f1 + d * (3 * ub**2 - 2 * ub**3), f1)
            f2 = np.where(inb, d * 6.0 * ub * (1.0 - ub) / w, f2)
        return f, f1, f2

    def to_dict(self) -> dict:
        return {"fn": self.name, "knots": [float(x) for x in self.knots],
                "slopes": [float(x) for x in self.slopes],
                "radius": float(self.radius), "value0": float(self.value0)}


def scalar_from_dict(d: dict) -> ScalarFn:
    try:
        name = d["fn"]
    except (KeyError, TypeError):
        raise UnknownExprNode(f"function spec without 'fn': {d!r}") from None
    cls = _REGISTRY.get(name)
    if cls is None:
        raise UnknownExprNode(f"unknown scalar function {name!r}")
    extra = {k: v for k, v in d.items() if k != "fn"}
    if cls is PiecewiseConvexFn:
        return PiecewiseConvexFn(knots=tuple(extra["knots"]), slopes=tuple(extra["slopes"]),
                                 radius=extra.get("radius", 0.1),
                                 value0=extra.get("value0", 0.0))
    try:
        return cls(**extra)
    except TypeError as exc:
        raise UnknownExprNode(f"bad parameters for {name!r}: {exc}") from None
