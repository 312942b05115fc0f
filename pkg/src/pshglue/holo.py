"""Holomorphic polynomial atoms and their first-order jets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnknownExprNode

__all__ = ["HoloJet", "Poly", "coord", "eval_holo_jet", "as_points", "holo_from_dict"]


def as_points(p):
    """Coerce a point or a batch of points to a complex ``(B, n)`` array.

    Returns the array and whether the input was a single point.
    """
    z = np.asarray(p, dtype=complex)
    if z.ndim == 0:
        z = z.reshape(1, 1)
        return z, True
    if z.ndim == 1:
        if not np.all(np.isfinite(z)):
            raise ValueError("point coordinates must be finite")
        return z[None, :], True
    if z.ndim != 2 or z.shape[1] < 1:
        raise ValueError(f"expected points of shape (B, n), got {z.shape}")
    return z, False


@dataclass(frozen=True)
class HoloJet:
    value: np.ndarray   # (B,) complex
    grad: np.ndarray    # (B, n) complex, dh/dz_i


@dataclass(frozen=True)
class Poly:
    """``sum_k c_k z^{e_k}`` with complex coefficients and multi-exponents.

    Exponent tuples shorter than the ambient dimension are padded with zeros.
    """

    terms: tuple[tuple[complex, tuple[int, ...]], ...]

    def __post_init__(self):
        for c, e in self.terms:
            if any(int(k) != k or k < 0 for k in e):
                raise ValueError(f"bad exponent tuple {e!r}")

    @property
    def nvars(self) -> int:
        return max((len(e) for _, e in self.terms), default=0)

    @property
    def degree(self) -> int:
        return max((sum(e) for _, e in self.terms), default=0)

    def jet(self, z):
        nb, n = z.shape
        if self.nvars > n:
            raise ValueError(f"polynomial in {self.nvars} variables evaluated in C^{n}")
        val = np.zeros(nb, dtype=complex)
        grad = np.zeros((nb, n), dtype=complex)
        for c, e in self.terms:
            e = tuple(e) + (0,) * (n - len(e))
            powers = [z[:, k] ** e[k] if e[k] else np.ones(nb, dtype=complex)
                      for k in range(n)]
            val += c * np.prod(powers, axis=0)
            for k in range(n):
                if e[k] == 0:
                    continue
                others = [powers[j] for j in range(n) if j != k]
                rest = np.prod(others, axis=0) if others else 1.0
                grad[:, k] += c * e[k] * z[:, k] ** (e[k] - 1) * rest
        return val, grad

    def is_linear(self) -> bool:
        return self.degree <= 1

    def to_dict(self) -> dict:
        return {"holo": "poly",
                "terms": [[[float(complex(c).real), float(complex(c).imag)], list(e)]
                          for c, e in self.terms]}


def coord(k: int, coef: complex = 1.0) -> Poly:
    """The coordinate function ``coef * z_k`` (0-based)."""
    return Poly(((complex(coef), (0,) * k + (1,)),))


def eval_holo_jet(holo: Poly, p) -> HoloJet:
    z, single = as_points(p)
    v, g = holo.jet(z)
    if single:
        return HoloJet(v[0], g[0])
    return HoloJet(v, g)


def holo_from_dict(d) -> Poly:
    if not isinstance(d, dict) or "holo" not in d:
        raise UnknownExprNode(f"holomorphic atom without 'holo' tag: {d!r}")
    kind = d["holo"]
    if kind == "coord":
        return coord(int(d["index"]), complex(*d.get("coef", [1.0, 0.0])))
    if kind == "const":
        return Poly(((complex(*d["value"]), ()),))
    if kind == "poly":
        return Poly(tuple((complex(c[0], c[1]), tuple(int(k) for k in e))
                          for c, e in d["terms"]))
    raise UnknownExprNode(f"unknown holomorphic atom {kind!r}")
