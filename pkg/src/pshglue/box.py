"""Axis-aligned boxes in C^n, stored as bounds per real axis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Box"]


@dataclass(frozen=True)
class Box:
    """Bounds ``(lo, hi)`` for the real axes ``Re z1, Im z1, Re z2, ...``."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.bounds) == 0 or len(self.bounds) % 2:
            raise ValueError("a box needs two real intervals per complex coordinate")
        for lo, hi in self.bounds:
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"empty or unbounded interval ({lo}, {hi})")

    @classmethod
    def from_list(cls, rows) -> "Box":
        return cls(tuple((float(lo), float(hi)) for lo, hi in rows))

    @classmethod
    def square(cls, n: int, half: float, center=None) -> "Box":
        c = np.zeros(n, dtype=complex) if center is None else np.asarray(center, dtype=complex)
        rows = []
        for k in range(n):
            rows += [(c[k].real - half, c[k].real + half), (c[k].imag - half, c[k].imag + half)]
        return cls(tuple(rows))

    def to_list(self):
        return [[lo, hi] for lo, hi in self.bounds]

    @property
    def n(self) -> int:
        return len(self.bounds) // 2

    @property
    def lo(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    @property
    def hi(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])

    @property
    def center(self) -> np.ndarray:
        return to_complex(0.5 * (self.lo + self.hi))

    def contains(self, z, closed: bool = True) -> np.ndarray:
        x = to_real(np.atleast_2d(z))
        if closed:
            return np.all((x >= self.lo) & (x <= self.hi), axis=1)
        return np.all((x > self.lo) & (x < self.hi), axis=1)

    def margins_inside(self, outer: "Box") -> np.ndarray:
        """Per-axis distance from this box to the faces of ``outer`` (min of both sides)."""
        return np.minimum(self.lo - outer.lo, outer.hi - self.hi)

    def shrink_toward(self, inner: "Box", frac: float) -> "Box":
        """Move each face a fraction ``frac`` of the way toward ``inner``."""
        lo = self.lo + frac * (inner.lo - self.lo)
        hi = self.hi + frac * (inner.hi - self.hi)
        return Box(tuple(zip(lo.tolist(), hi.tolist())))

    def hull(self, other: "Box") -> "Box":
        lo = np.minimum(self.lo, other.lo)
        hi = np.maximum(self.hi, other.hi)
        return Box(tuple(zip(lo.tolist(), hi.tolist())))

    def uniform(self, rng: np.random.Generator, count: int) -> np.ndarray:
        x = rng.uniform(self.lo, self.hi, size=(count, len(self.bounds)))
        return to_complex(x)

    def grid(self, per_axis: int) -> np.ndarray:
        """Cell-centred tensor grid with ``per_axis`` points on every real axis."""
        axes = [lo + (np.arange(per_axis) + 0.5) * (hi - lo) / per_axis
                for lo, hi in self.bounds]
        mesh = np.meshgrid(*axes, indexing="ij")
        x = np.stack([m.ravel() for m in mesh], axis=1)
        return to_complex(x)


def to_real(z) -> np.ndarray:
    """``(B, n)`` complex -> ``(B, 2n)`` real, interleaving real and imaginary parts."""
    z = np.asarray(z, dtype=complex)
    x = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    x[..., 0::2] = z.real
    x[..., 1::2] = z.imag
    return x


def to_complex(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]
