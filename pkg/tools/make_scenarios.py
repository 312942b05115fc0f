"""Regenerate the bundled scenario files in canonical form.

Run from the repository root:  python3 tools/make_scenarios.py
"""

from __future__ import annotations

import math
from pathlib import Path

from pshglue.box import Box
from pshglue.glue import choose_K
from pshglue.holo import coord
from pshglue.jets import RealComp, Sum, euclidean, poincare
from pshglue.levi import Ray, Segment, Spiral
from pshglue.psh import PointSet, ZeroSet
from pshglue.scalar import Exp, CompletionProfile
from pshglue.scenario import ChartSpec, Scenario, dump_scenario

OUT = Path(__file__).resolve().parents[1] / "src" / "pshglue" / "scenarios"


def inset(bounds, m):
    return Box(tuple((lo + m, hi - m) for lo, hi in bounds))


def glue_1d() -> Scenario:
    u1 = Box.square(1, 1.0)
    u2 = Box(((0.5, 2.6), (-1.0, 1.0)))
    charts = (
        ChartSpec("U1", u1, inset(u1.bounds, 0.04), poincare(radius_sq=math.e**2), "auto"),
        ChartSpec("U2", u2, inset(u2.bounds, 0.04), euclidean(1), "bounded",
                  bounds=(0.25, 7.76)),
    )
    probes = (
        Segment([0.5], [0.0], label="radial"),
        Spiral([0.0], 0.5, 0.0, 3.0, label="spiral"),
        Ray([1 + 0.2j], [1.0], label="ray"),
    )
    return Scenario("GLUE-1D", 1, Box(((-0.9, 2.4), (-0.9, 0.9))), PointSet([[0.0]]),
                    charts, probes)


def glue_2d() -> Scenario:
    K = choose_K()
    phi_a = poincare(coord(0), radius_sq=math.e**2)
    reduced = Sum((RealComp(Exp(), phi_a), RealComp(CompletionProfile(K), phi_a)))
    u1 = Box.square(2, 1.0)
    u2 = Box(((0.5, 2.6), (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)))
    charts = (
        ChartSpec("U1", u1, inset(u1.bounds, 0.02), Sum((euclidean(2), reduced)), "bounded"),
        ChartSpec("U2", u2, inset(u2.bounds, 0.02), euclidean(2), "bounded",
                  bounds=(0.25, 9.76)),
    )
    probes = (
        Segment([0.5, 0.1], [0.0, 0.1], label="normal"),
        Spiral([0.0, -0.2], 0.5, 0.5, 3.0, axis=0, label="spiral"),
        Ray([1.0, 0.2j], [1.0, 0.5], label="ray"),
    )
    region = Box(((-0.9, 2.4), (-0.9, 0.9), (-0.9, 0.9), (-0.9, 0.9)))
    return Scenario("GLUE-2D", 2, region, ZeroSet(coord(0)), charts, probes)


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    dump_scenario(glue_1d(), OUT / "glue_1d.json")
    dump_scenario(glue_2d(), OUT / "glue_2d.json")
    print("wrote", OUT)
