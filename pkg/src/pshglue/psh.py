"""Sampling-based plurisubharmonicity checks and boundedness scans."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .box import Box, to_complex, to_real
from .errors import EmptyDomain
from .holo import Poly, holo_from_dict
from .jets import DEFAULT_DELTA, FieldExpr, eval_jet
from .levi import eigvals_batch

__all__ = [
    "EmptySet", "PointSet", "ZeroSet", "DomainSpec", "MarginReport", "BoundScan",
    "sample_domain", "check_psh", "bound_scan", "levi_margins", "default_shrink_schedule",
    "exceptional_from_dict",
]


# --------------------------------------------------------------------------
# exceptional sets


@dataclass(frozen=True)
class EmptySet:
    def distance(self, z, box=None):
        return np.full(len(z), np.inf)

    def meets(self, box: Box) -> bool:
        return False

    def near(self, rng, box, count, delta):
        return np.empty((0, box.n), dtype=complex)

    def to_dict(self):
        return {"kind": "empty"}


@dataclass(frozen=True, eq=False)
class PointSet:
    points: np.ndarray   # (k, n) complex

    def __post_init__(self):
        object.__setattr__(self, "points", np.atleast_2d(np.asarray(self.points, dtype=complex)))

    def distance(self, z, box=None):
        diff = np.asarray(z)[:, None, :] - self.points[None, :, :]
        return np.min(np.sqrt(np.sum(np.abs(diff) ** 2, axis=2)), axis=1)

    def meets(self, box: Box) -> bool:
        return bool(np.any(box.contains(self.points)))

    def near(self, rng, box, count, delta):
        m = 2 * self.points.shape[1]
        base = self.points[rng.integers(len(self.points), size=count)]
        u = rng.normal(size=(count, m))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        r = delta * 10.0 ** rng.uniform(0.0, 1.0, size=count)
        return base + to_complex(u * r[:, None])

    def to_dict(self):
        return {"kind": "points",
                "points": [[[float(c.real), float(c.imag)] for c in p] for p in self.points]}


@dataclass(frozen=True)
class ZeroSet:
    """``{h = 0}`` for a holomorphic polynomial ``h``.

    For affine ``h`` the distance is exact, ``|h| / |grad h|``.  Otherwise the
    returned value is ``|h| / G`` with ``G`` a bound for ``|grad h|`` on the
    enlarged ball containing the box, which is a lower bound for points whose
    nearest zero lies in that ball.
    """

    holo: Poly

    def _grad_bound(self, box):
        r = float(np.max(np.abs(np.concatenate([box.lo, box.hi])))) * np.sqrt(2 * box.n) * 2.0 + 1.0
        n = box.n
        comp = np.zeros(n)
        for c, e in self.holo.terms:
            e = tuple(e) + (0,) * (n - len(e))
            deg = sum(e)
            for k in range(n):
                if e[k]:
                    comp[k] += abs(c) * e[k] * r ** (deg - 1)
        return float(np.linalg.norm(comp))

    def distance(self, z, box=None):
        v, g = self.holo.jet(np.asarray(z))
        if self.holo.is_linear():
            gn = np.linalg.norm(g[0])
        else:
            if box is None:
                raise ValueError("nonlinear zero sets need a box for the distance bound")
            gn = self._grad_bound(box)
        if gn == 0:
            return np.where(np.abs(v) == 0, 0.0, np.inf)
        return np.abs(v) / gn

    def _project(self, z, iters=30):
        for _ in range(iters):
            v, g = self.holo.jet(z)
            gg = np.sum(np.abs(g) ** 2, axis=1)
            gg = np.where(gg == 0, 1.0, gg)
            z = z - (v / gg)[:, None] * np.conj(g)
        return z

    def meets(self, box: Box) -> bool:
        pts = self._project(box.grid(4 if box.n <= 2 else 2))
        v, _ = self.holo.jet(pts)
        return bool(np.any(box.contains(pts) & (np.abs(v) < 1e-9)))

    def near(self, rng, box, count, delta):
        base = self._project(box.uniform(rng, count))
        _, g = self.holo.jet(base)
        gn = np.linalg.norm(g, axis=1, keepdims=True)
        gn = np.where(gn == 0, 1.0, gn)
        normal = np.conj(g) / gn
        phase = np.exp(2j * np.pi * rng.uniform(size=count))
        r = delta * 10.0 ** rng.uniform(0.0, 1.0, size=count)
        return base + (r * phase)[:, None] * normal

    def to_dict(self):
        return {"kind": "zero_set", "holo": self.holo.to_dict()}


def exceptional_from_dict(d):
    kind = d["kind"]
    if kind == "empty":
        return EmptySet()
    if kind == "points":
        return PointSet(np.array([[complex(c[0], c[1]) for c in p] for p in d["points"]]))
    if kind == "zero_set":
        return ZeroSet(holo_from_dict(d["holo"]))
    raise ValueError(f"unknown exceptional-set kind {kind!r}")


@dataclass(frozen=True)
class DomainSpec:
    box: Box
    exceptional: object = field(default_factory=EmptySet)
    label: str = "domain"

    def distance(self, z):
        return self.exceptional.distance(np.atleast_2d(z), self.box)

    @property
    def meets_exceptional(self) -> bool:
        return self.exceptional.meets(self.box)

    def to_dict(self):
        return {"label": self.label, "box": self.box.to_list(),
                "exceptional": self.exceptional.to_dict()}


# --------------------------------------------------------------------------
# sampling


def sample_domain(d: DomainSpec, strategy: str = "seeded-uniform", count: int = 1000,
                  delta: float = DEFAULT_DELTA, near_A_fraction: float = 0.0,
                  seed=0, max_rounds: int = 50) -> np.ndarray:
    """Admissible sample points: inside ``d.box`` and at distance >= ``delta`` from A.

    ``grid`` takes ``count`` cell-centred points per real axis (``near_A_fraction``
    is ignored); ``seeded-uniform`` draws ``count`` points, a fraction
    ``near_A_fraction`` of them in the shell ``delta <= dist <= 10 delta``.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if not 0.0 <= near_A_fraction <= 1.0:
        raise ValueError("near_A_fraction must lie in [0, 1]")

    def admissible(z):
        return d.box.contains(z) & (d.distance(z) >= delta)

    if strategy == "grid":
        pts = d.box.grid(int(count))
        pts = pts[admissible(pts)]
        if len(pts) == 0:
            raise EmptyDomain(f"no grid point of {d.label!r} is admissible at delta={delta:g}")
        return pts
    if strategy != "seeded-uniform":
        raise ValueError(f"unknown sampling strategy {strategy!r}")

    rng = np.random.default_rng(seed)
    n_near = int(round(near_A_fraction * count)) if d.meets_exceptional else 0
    chunks = []
    got = 0
    for _ in range(max_rounds):
        if got >= n_near:
            break
        cand = d.exceptional.near(rng, d.box, 2 * (n_near - got) + 8, delta)
        cand = cand[admissible(cand)][: n_near - got]
        chunks.append(cand)
        got += len(cand)
    near = np.concatenate(chunks) if chunks else np.empty((0, d.box.n), dtype=complex)

    chunks = []
    need = count - len(near)
    got = 0
    for _ in range(max_rounds):
        if got >= need:
            break
        cand = d.box.uniform(rng, 2 * (need - got) + 8)
        cand = cand[admissible(cand)][: need - got]
        chunks.append(cand)
        got += len(cand)
    far = np.concatenate(chunks) if chunks else np.empty((0, d.box.n), dtype=complex)
    pts = np.concatenate([far, near])
    if len(pts) == 0:
        raise EmptyDomain(f"no admissible sample in {d.label!r} at delta={delta:g}")
    return pts


# --------------------------------------------------------------------------
# psh margins


def levi_margins(levi) -> np.ndarray:
    """Least Levi eigenvalue per sample."""
    return eigvals_batch(levi)[:, 0]


@dataclass
class MarginReport:
    sample_count: int
    min_margin: float
    worst_point: np.ndarray
    passed: bool
    tol: float
    scale: float
    margins: np.ndarray | None = field(default=None, repr=False)
    points: np.ndarray | None = field(default=None, repr=False)

    @property
    def pass_(self) -> bool:
        return self.passed

    def to_dict(self):
        return {"sample_count": int(self.sample_count), "min_margin": float(self.min_margin),
                "worst_point": [[float(c.real), float(c.imag)] for c in self.worst_point],
                "pass": bool(self.passed), "tol": float(self.tol), "scale": float(self.scale)}


def worst_index(margins, points) -> int:
    """Index of the smallest margin; ties broken lexicographically on the point."""
    m = np.asarray(margins)
    low = np.flatnonzero(m == m.min())
    if len(low) == 1:
        return int(low[0])
    x = to_real(points[low])
    order = np.lexsort(x.T[::-1])
    return int(low[order[0]])


def summarize(margins, points, levi_norms, rel_tol, tol=None, strict=False) -> MarginReport:
    i = worst_index(margins, points)
    scale = 1.0 + float(np.max(levi_norms))
    tol_used = rel_tol * scale if tol is None else tol
    mn = float(margins[i])
    ok = mn > 0 if strict else mn >= -tol_used
    return MarginReport(len(margins), mn, points[i], bool(ok), tol_used, scale,
                        margins=np.asarray(margins), points=points)


def check_psh(expr: FieldExpr, d: DomainSpec, tol: float | None = None, *, points=None,
              count: int = 10_000, seed=0, delta: float = DEFAULT_DELTA,
              near_A_fraction: float = 0.1, rel_tol: float = 1e-9,
              strict: bool = False) -> MarginReport:
    """Least Levi eigenvalue of ``expr`` over samples of ``d`` minus A.

    Passes iff the minimum is ``>= -tol``; by default ``tol`` is ``rel_tol``
    times ``1 + max |Levi|_inf`` over the samples.  ``strict`` demands a strictly
    positive minimum instead (charts that do not meet A).
    """
    if points is None:
        points = sample_domain(d, "seeded-uniform", count, delta, near_A_fraction, seed)
    jet = eval_jet(expr, points, domain=d, delta=delta)
    margins = levi_margins(jet.levi)
    norms = np.max(np.abs(jet.levi), axis=(1, 2))
    return summarize(margins, points, norms, rel_tol, tol=tol, strict=strict)


# --------------------------------------------------------------------------
# boundedness


def default_shrink_schedule(levels: int = 6) -> np.ndarray:
    """``delta_k = 10^(-2^k)``, k = 1..levels."""
    return 10.0 ** -(2.0 ** np.arange(1, levels + 1))


@dataclass
class BoundScan:
    inf_est: float
    sup_est: float
    unbounded_below: bool
    level_minima: list

    def to_dict(self):
        return {"inf_est": float(self.inf_est), "sup_est": float(self.sup_est),
                "unbounded_below": bool(self.unbounded_below),
                "level_minima": [float(x) for x in self.level_minima]}


def bound_scan(expr: FieldExpr, d: DomainSpec, shrink_schedule=None, count: int = 2000,
               seed=0, near_A_fraction: float = 0.5) -> BoundScan:
    """Value range of ``expr`` over samples approaching A along ``shrink_schedule``.

    ``unbounded_below`` flags a blow-down trend: the per-level minima strictly
    decrease over the last three steps of the schedule and drop by at least 1
    in total over those steps.  This is a heuristic, never a proof.
    """
    deltas = default_shrink_schedule() if shrink_schedule is None else np.asarray(shrink_schedule)
    if len(deltas) < 4:
        raise ValueError("shrink schedule needs at least 4 levels")
    lo, hi = np.inf, -np.inf
    minima = []
    for k, delta in enumerate(deltas):
        pts = sample_domain(d, "seeded-uniform", count, float(delta), near_A_fraction,
                            seed=np.random.SeedSequence([_seed_int(seed), k]))
        v = eval_jet(expr, pts).value
        minima.append(float(v.min()))
        lo = min(lo, float(v.min()))
        hi = max(hi, float(v.max()))
    m = minima[-4:]
    trend = all(m[i + 1] < m[i] for i in range(3)) and (m[0] - m[-1] >= 1.0)
    return BoundScan(lo, hi, bool(trend), minima)


def _seed_int(seed):
    if isinstance(seed, np.random.SeedSequence):
        return int(seed.generate_state(1)[0])
    if isinstance(seed, (list, tuple)):
        return int(np.random.SeedSequence(list(seed)).generate_state(1)[0])
    return int(seed)
