"""Second-order Wirtinger jets of real scalar fields on C^n.

A real field ``phi`` is represented by an immutable expression tree
(:class:`FieldExpr`).  Evaluating the tree at a batch of points returns a
:class:`Jet2` holding, per point,

* ``value``  -- ``phi(z)``,
* ``grad``   -- ``d phi / d z_i`` (the anti-holomorphic gradient is its conjugate),
* ``levi``   -- the Hermitian matrix ``d^2 phi / dz_i dzbar_j``.

Chain rules (``g`` = grad, ``L`` = levi)::

    Prod(u, v):      L = u L_v + v L_u + g_u g_v^H + g_v g_u^H
    RealComp(f, u):  L = f''(u) g_u g_u^H + f'(u) L_u
    ModSq(h):        L = h' h'^H
    LogModSq(h):     L = 0            (off the zeros of h)

Everything is evaluated on whole batches with numpy broadcasting; a single
point gives unbatched arrays back.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from .box import Box, to_complex, to_real
from .errors import DomainViolation, SingularPoint, StepTooLarge, UnknownExprNode, ValidationError
from .holo import Poly, as_points, coord, holo_from_dict
from .scalar import NegLogNeg, ScalarFn, Square, scalar_from_dict, transition

__all__ = [
    "Jet2", "FieldExpr", "Const", "RePart", "ModSq", "LogModSq", "Affine", "Sum",
    "Prod", "RealComp", "Bump", "ConvexReparam", "eval_jet", "finite_diff_jet",
    "real_to_wirtinger", "expr_from_dict", "euclidean", "poincare", "cone",
    "DEFAULT_DELTA", "DEFAULT_FD_STEP",
]

DEFAULT_DELTA = 1e-6
DEFAULT_FD_STEP = 1e-4


@dataclass(frozen=True)
class Jet2:
    value: np.ndarray
    grad: np.ndarray
    levi: np.ndarray

    def hermitian_defect(self):
        """``max|L - L^H|`` per point."""
        d = self.levi - np.conj(np.swapaxes(self.levi, -1, -2))
        return np.max(np.abs(d), axis=(-1, -2))

    def __getitem__(self, idx) -> "Jet2":
        return Jet2(self.value[idx], self.grad[idx], self.levi[idx])


def _outer(a, b):
    """Batched ``a b^H``."""
    return a[:, :, None] * np.conj(b)[:, None, :]


# --------------------------------------------------------------------------
# expression nodes


_NODES: dict[str, type] = {}


class FieldExpr:
    tag: ClassVar[str] = ""

    def __init_subclass__(cls, **kw):
        super().__init_subclass__(**kw)
        if cls.tag:
            _NODES[cls.tag] = cls

    def _jet(self, z):
        raise NotImplementedError

    @property
    def children(self) -> tuple["FieldExpr", ...]:
        return ()

    @property
    def depth(self) -> int:
        return 1 + max((c.depth for c in self.children), default=0)

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)

    def to_dict(self) -> dict:
        raise NotImplementedError

    # algebra sugar
    def __add__(self, other):
        if isinstance(other, (int, float)):
            return Affine(1.0, float(other), self)
        left = self.terms if isinstance(self, Sum) else (self,)
        right = other.terms if isinstance(other, Sum) else (other,)
        return Sum(left + right)

    def __radd__(self, other):
        return self.__add__(other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Affine(float(other), 0.0, self)
        return Prod(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return Affine(-1.0, 0.0, self)


@dataclass(frozen=True)
class Const(FieldExpr):
    c: float
    tag: ClassVar[str] = "const"

    def _jet(self, z):
        nb, n = z.shape
        return (np.full(nb, float(self.c)), np.zeros((nb, n), complex),
                np.zeros((nb, n, n), complex))

    def to_dict(self):
        return {"node": self.tag, "value": float(self.c)}


@dataclass(frozen=True)
class RePart(FieldExpr):
    """``Re h`` for a holomorphic atom ``h``; pluriharmonic."""

    holo: Poly
    tag: ClassVar[str] = "re"

    def _jet(self, z):
        v, g = self.holo.jet(z)
        nb, n = z.shape
        return v.real.copy(), 0.5 * g, np.zeros((nb, n, n), complex)

    def to_dict(self):
        return {"node": self.tag, "holo": self.holo.to_dict()}


@dataclass(frozen=True)
class ModSq(FieldExpr):
    holo: Poly
    tag: ClassVar[str] = "mod_sq"

    def _jet(self, z):
        v, g = self.holo.jet(z)
        return np.abs(v) ** 2, g * np.conj(v)[:, None], _outer(g, g)

    def to_dict(self):
        return {"node": self.tag, "holo": self.holo.to_dict()}


@dataclass(frozen=True)
class LogModSq(FieldExpr):
    holo: Poly
    tag: ClassVar[str] = "log_mod_sq"

    def _jet(self, z):
        v, g = self.holo.jet(z)
        a = np.abs(v)
        if np.any(a == 0):
            bad = z[np.argmax(a == 0)]
            raise SingularPoint(f"log|h|^2 evaluated on the zero set of h at {bad.tolist()}")
        nb, n = z.shape
        # 2 log|h| rather than log|h|^2, which underflows for |h| < 1e-154
        return 2.0 * np.log(a), g / v[:, None], np.zeros((nb, n, n), complex)

    def to_dict(self):
        return {"node": self.tag, "holo": self.holo.to_dict()}


@dataclass(frozen=True)
class Affine(FieldExpr):
    a: float
    b: float
    child: FieldExpr
    tag: ClassVar[str] = "affine"

    @property
    def children(self):
        return (self.child,)

    def _jet(self, z):
        v, g, L = self.child._jet(z)
        return self.a * v + self.b, self.a * g, self.a * L

    def to_dict(self):
        return {"node": self.tag, "a": float(self.a), "b": float(self.b),
                "child": self.child.to_dict()}


@dataclass(frozen=True)
class Sum(FieldExpr):
    terms: tuple[FieldExpr, ...]
    tag: ClassVar[str] = "sum"

    def __post_init__(self):
        if not self.terms:
            raise ValueError("Sum needs at least one term")

    @property
    def children(self):
        return self.terms

    def _jet(self, z):
        v, g, L = self.terms[0]._jet(z)
        v, g, L = v.copy(), g.copy(), L.copy()
        for t in self.terms[1:]:
            tv, tg, tL = t._jet(z)
            v += tv
            g += tg
            L += tL
        return v, g, L

    def to_dict(self):
        return {"node": self.tag, "children": [t.to_dict() for t in self.terms]}


@dataclass(frozen=True)
class Prod(FieldExpr):
    """Product of two fields.

    Where the left factor's 2-jet vanishes identically the right factor is not
    evaluated; this is what lets ``Prod(bump, u)`` extend a chart potential by
    zero outside its chart.
    """

    left: FieldExpr
    right: FieldExpr
    tag: ClassVar[str] = "prod"

    @property
    def children(self):
        return (self.left, self.right)

    def _jet(self, z):
        uv, ug, uL = self.left._jet(z)
        live = (uv != 0) | np.any(ug != 0, axis=1) | np.any(uL != 0, axis=(1, 2))
        nb, n = z.shape
        if not np.any(live):
            return np.zeros(nb), np.zeros((nb, n), complex), np.zeros((nb, n, n), complex)
        if np.all(live):
            vv, vg, vL = self.right._jet(z)
        else:
            sv, sg, sL = self.right._jet(z[live])
            vv = np.zeros(nb)
            vg = np.zeros((nb, n), complex)
            vL = np.zeros((nb, n, n), complex)
            vv[live], vg[live], vL[live] = sv, sg, sL
        value = uv * vv
        grad = uv[:, None] * vg + vv[:, None] * ug
        levi = (uv[:, None, None] * vL + vv[:, None, None] * uL
                + _outer(ug, vg) + _outer(vg, ug))
        return value, grad, levi

    def to_dict(self):
        return {"node": self.tag, "left": self.left.to_dict(), "right": self.right.to_dict()}


def _compose(fn: ScalarFn, child: FieldExpr, z):
    v, g, L = child._jet(z)
    f0, f1, f2 = fn.derivs(v)
    return (np.asarray(f0, float), f1[:, None] * g,
            f2[:, None, None] * _outer(g, g) + f1[:, None, None] * L)


@dataclass(frozen=True)
class RealComp(FieldExpr):
    fn: ScalarFn
    child: FieldExpr
    tag: ClassVar[str] = "compose"

    @property
    def children(self):
        return (self.child,)

    def _jet(self, z):
        return _compose(self.fn, self.child, z)

    def to_dict(self):
        return {"node": self.tag, "fn": self.fn.to_dict(), "child": self.child.to_dict()}


@dataclass(frozen=True)
class ConvexReparam(FieldExpr):
    """``r(child)`` for an increasing convex ``r``; kept apart from RealComp for reporting."""

    r: ScalarFn
    child: FieldExpr
    tag: ClassVar[str] = "convex_reparam"

    @property
    def children(self):
        return (self.child,)

    def _jet(self, z):
        return _compose(self.r, self.child, z)

    def to_dict(self):
        return {"node": self.tag, "r": self.r.to_dict(), "child": self.child.to_dict()}


def _axis_profile(x, a, a_in, b_in, b):
    """1 on ``[a_in, b_in]``, smooth descent to 0 at ``a`` and ``b``."""
    s = np.ones_like(x)
    s1 = np.zeros_like(x)
    s2 = np.zeros_like(x)
    left = x < a_in
    if np.any(left):
        w = a_in - a
        t0, t1, t2 = transition((x[left] - a) / w)
        s[left], s1[left], s2[left] = t0, t1 / w, t2 / w**2
    right = x > b_in
    if np.any(right):
        w = b - b_in
        t0, t1, t2 = transition((b - x[right]) / w)
        s[right], s1[right], s2[right] = t0, -t1 / w, t2 / w**2
    return s, s1, s2


def real_to_wirtinger(grad_real, hess_real):
    """Convert real gradient/Hessian on ``(Re z1, Im z1, ...)`` to Wirtinger form."""
    gx, gy = grad_real[..., 0::2], grad_real[..., 1::2]
    hxx = hess_real[..., 0::2, 0::2]
    hyy = hess_real[..., 1::2, 1::2]
    hxy = hess_real[..., 0::2, 1::2]
    hyx = hess_real[..., 1::2, 0::2]
    grad = 0.5 * (gx - 1j * gy)
    levi = 0.25 * (hxx + hyy + 1j * (hxy - hyx))
    return grad, levi


@dataclass(frozen=True)
class Bump(FieldExpr):
    """``eta^2`` with ``eta`` a tensor product of smooth 1-D profiles.

    ``eta == 1`` on ``inner`` and ``eta == 0`` outside ``outer``.  Squaring keeps
    ``|d rho|^2 / rho = 4 |d eta|^2`` bounded as ``rho -> 0``.
    """

    inner: Box
    outer: Box
    tag: ClassVar[str] = "bump"

    def eta_jet(self, z):
        x = to_real(z)
        nb, m = x.shape
        if m != len(self.outer.bounds):
            raise ValueError("bump dimension does not match the evaluation points")
        s = np.empty_like(x)
        s1 = np.empty_like(x)
        s2 = np.empty_like(x)
        for k, ((a, b), (ai, bi)) in enumerate(zip(self.outer.bounds, self.inner.bounds)):
            s[:, k], s1[:, k], s2[:, k] = _axis_profile(x[:, k], a, ai, bi, b)
        eta = np.prod(s, axis=1)
        grad = np.empty((nb, m))
        hess = np.empty((nb, m, m))
        for k in range(m):
            rest_k = np.prod(np.delete(s, k, axis=1), axis=1)
            grad[:, k] = s1[:, k] * rest_k
            hess[:, k, k] = s2[:, k] * rest_k
            for l in range(k + 1, m):
                rest = np.prod(np.delete(s, [k, l], axis=1), axis=1)
                hess[:, k, l] = hess[:, l, k] = s1[:, k] * s1[:, l] * rest
        g, L = real_to_wirtinger(grad, hess)
        return eta, g, L

    def _jet(self, z):
        eta, g, L = self.eta_jet(z)
        return eta**2, 2.0 * eta[:, None] * g, 2.0 * _outer(g, g) + 2.0 * eta[:, None, None] * L

    def to_dict(self):
        return {"node": self.tag, "inner": self.inner.to_list(), "outer": self.outer.to_list()}


# --------------------------------------------------------------------------
# evaluation


def _guard(z, domain, delta):
    if domain is None:
        return
    inside = domain.box.contains(z)
    if not np.all(inside):
        bad = z[np.argmin(inside)]
        raise DomainViolation(f"point {bad.tolist()} outside box of {domain.label!r}")
    d = domain.distance(z)
    if np.any(d < delta):
        bad = z[np.argmin(d)]
        raise SingularPoint(
            f"point {bad.tolist()} within {delta:g} of the exceptional set of {domain.label!r}")


def eval_jet(expr: FieldExpr, p, domain=None, delta: float = DEFAULT_DELTA) -> Jet2:
    """Exact jet of ``expr`` at one point or a ``(B, n)`` batch of points.

    With ``domain`` (anything exposing ``box``, ``distance`` and ``label``) the
    points are first checked to lie in the box and at distance at least
    ``delta`` from the exceptional set.
    """
    z, single = as_points(p)
    _guard(z, domain, delta)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        v, g, L = expr._jet(z)
    finite = np.isfinite(v) & np.all(np.isfinite(g), axis=1) & np.all(np.isfinite(L), axis=(1, 2))
    if not np.all(finite):
        bad = z[np.argmin(finite)]
        raise SingularPoint(f"non-finite jet at {bad.tolist()}")
    jet = Jet2(np.asarray(v, float), g, L)
    return jet[0] if single else jet


def _stencil(m):
    """Offsets (in units of the step) for value, gradient and Hessian stencils."""
    offs = [np.zeros(m)]
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        offs += [e, -e]
    for i in range(m):
        for j in range(i + 1, m):
            for si in (1, -1):
                for sj in (1, -1):
                    e = np.zeros(m)
                    e[i], e[j] = si, sj
                    offs.append(e)
    return np.array(offs)


def _fd_real(f, m, h):
    """Central-difference real gradient/Hessian from stencil values ``f`` (B, S)."""
    f0 = f[:, 0]
    grad = np.empty((f.shape[0], m))
    hess = np.empty((f.shape[0], m, m))
    for i in range(m):
        fp, fm = f[:, 1 + 2 * i], f[:, 2 + 2 * i]
        grad[:, i] = (fp - fm) / (2 * h)
        hess[:, i, i] = (fp - 2 * f0 + fm) / h**2
    k = 1 + 2 * m
    for i in range(m):
        for j in range(i + 1, m):
            fpp, fpm, fmp, fmm = f[:, k], f[:, k + 1], f[:, k + 2], f[:, k + 3]
            hess[:, i, j] = hess[:, j, i] = (fpp - fpm - fmp + fmm) / (4 * h * h)
            k += 4
    return f0, grad, hess


def finite_diff_jet(expr: FieldExpr, p, step: float = DEFAULT_FD_STEP,
                    rtol: float = 1e-4) -> Jet2:
    """Independent jet oracle: real central differences with one Richardson level.

    Raises :class:`StepTooLarge` when the estimates at ``step`` and ``step/2``
    disagree by more than ``rtol`` times the jet's magnitude.
    """
    z, single = as_points(p)
    nb, n = z.shape
    m = 2 * n
    x = to_real(z)
    offs = _stencil(m)
    results = []
    for h in (step, step / 2):
        pts = x[:, None, :] + h * offs[None, :, :]
        vals = eval_jet(expr, to_complex(pts.reshape(-1, m))).value.reshape(nb, len(offs))
        results.append(_fd_real(vals, m, h))
    (f0, g1, h1), (_, g2, h2) = results
    grad = (4 * g2 - g1) / 3
    hess = (4 * h2 - h1) / 3
    scale = np.maximum.reduce([np.ones(nb), np.abs(f0), np.max(np.abs(grad), axis=1),
                               np.max(np.abs(hess), axis=(1, 2))])
    gap = np.maximum(np.max(np.abs(g1 - g2), axis=1), np.max(np.abs(h1 - h2), axis=(1, 2)))
    if np.any(gap > rtol * scale):
        i = int(np.argmax(gap / scale))
        raise StepTooLarge(
            f"Richardson levels disagree by {gap[i]:.3g} (scale {scale[i]:.3g}) at {z[i].tolist()}")
    g, L = real_to_wirtinger(grad, hess)
    jet = Jet2(f0, g, L)
    return jet[0] if single else jet


# --------------------------------------------------------------------------
# common fields


def euclidean(n: int) -> FieldExpr:
    """``|z|^2 = sum_k |z_k|^2``."""
    terms = tuple(ModSq(coord(k)) for k in range(n))
    return terms[0] if n == 1 else Sum(terms)


def poincare(holo: Poly | None = None, radius_sq: float = 1.0) -> FieldExpr:
    """``-log(-log(|h|^2 / radius_sq))``, complete along ``{h = 0}``."""
    h = coord(0) if holo is None else holo
    inner = LogModSq(h)
    if radius_sq != 1.0:
        inner = Affine(1.0, -float(np.log(radius_sq)), inner)
    return RealComp(NegLogNeg(), inner)


def cone(holo: Poly | None = None) -> FieldExpr:
    """``(log|h|^2)^2``; Levi density ``2/|z|^2`` for ``h = z``."""
    h = coord(0) if holo is None else holo
    return RealComp(Square(), LogModSq(h))


# --------------------------------------------------------------------------
# serialization


_FIELDS = {
    "const": {"value"},
    "re": {"holo"}, "mod_sq": {"holo"}, "log_mod_sq": {"holo"},
    "affine": {"a", "b", "child"},
    "sum": {"children"},
    "prod": {"left", "right"},
    "compose": {"fn", "child"},
    "bump": {"inner", "outer"},
    "convex_reparam": {"r", "child"},
}


def expr_from_dict(d, path=()) -> FieldExpr:
    """Inverse of ``FieldExpr.to_dict``; ``path`` prefixes validation messages."""
    if not isinstance(d, dict):
        raise ValidationError(path, f"expected an expression object, got {type(d).__name__}")
    tag = d.get("node")
    if tag not in _FIELDS:
        raise UnknownExprNode(f"{'/'.join(map(str, path)) or '<root>'}: unknown node {tag!r}")
    keys = set(d) - {"node"}
    if keys != _FIELDS[tag]:
        extra = sorted(keys - _FIELDS[tag])
        missing = sorted(_FIELDS[tag] - keys)
        raise ValidationError(path, f"node {tag!r}: unexpected keys {extra}, missing {missing}")
    try:
        if tag == "const":
            return Const(float(d["value"]))
        if tag in ("re", "mod_sq", "log_mod_sq"):
            return _NODES[tag](holo_from_dict(d["holo"]))
        if tag == "affine":
            return Affine(float(d["a"]), float(d["b"]), expr_from_dict(d["child"], path + ("child",)))
        if tag == "sum":
            return Sum(tuple(expr_from_dict(c, path + ("children", i))
                             for i, c in enumerate(d["children"])))
        if tag == "prod":
            return Prod(expr_from_dict(d["left"], path + ("left",)),
                        expr_from_dict(d["right"], path + ("right",)))
        if tag == "compose":
            return RealComp(scalar_from_dict(d["fn"]), expr_from_dict(d["child"], path + ("child",)))
        if tag == "bump":
            return Bump(Box.from_list(d["inner"]), Box.from_list(d["outer"]))
        return ConvexReparam(scalar_from_dict(d["r"]), expr_from_dict(d["child"], path + ("child",)))
    except (TypeError, ValueError, KeyError) as exc:
        raise ValidationError(path, f"node {tag!r}: {exc}") from None
