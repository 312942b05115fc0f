"""Acceptance criteria, one test each.

Every test prints a ``PASS`` or ``FAIL`` line.  Run as a script for the lines
alone: ``python3 tests/test_acceptance.py``.
"""

import functools
import math
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from acceptance_log import record  # noqa: E402
from pshglue.glue import reduce_unbounded  # noqa: E402
from pshglue.jets import Affine, cone, euclidean, eval_jet, finite_diff_jet, poincare  # noqa: E402
from pshglue.levi import (Segment, Spiral, classify_divergence, curve_length,  # noqa: E402
                          eigvals_batch, levi_form)
from pshglue.report import canonical_json  # noqa: E402
from pshglue.runner import reduce_chart, run_scenario  # noqa: E402
from pshglue.scenario import bundled_scenario, load_scenario  # noqa: E402
from trees import jet_rel_error, random_points, random_tree  # noqa: E402

SCENARIOS = ("GLUE-1D", "GLUE-2D")


@functools.lru_cache(maxsize=None)
def timed_run(name):
    t0 = time.perf_counter()
    rep = run_scenario(load_scenario(bundled_scenario(name)))
    return rep, time.perf_counter() - t0


def test_autodiff_matches_finite_differences():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst, deepest = 0.0, 0
    for _ in range(500):
        n = int(rng.integers(1, 4))
        e = random_tree(rng, n)
        deepest = max(deepest, e.depth)
        p = random_points(rng, n)[0]
        worst = max(worst, jet_rel_error(eval_jet(e, p), finite_diff_jet(e, p, step=1e-3)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 10.0 and deepest <= 5
    assert record("autodiff vs finite differences (500 trees)", ok,
                  f"max rel err {worst:.2e}, {elapsed:.2f} s")


def _closed_form(m):
    if len(m) == 2:
        a, d = m[0, 0].real, m[1, 1].real
        r = math.hypot((a - d) / 2, abs(m[0, 1]))
        return np.array([(a + d) / 2 - r, (a + d) / 2 + r])
    q = np.trace(m).real / 3
    p2 = np.sum((np.diag(m).real - q) ** 2) + 2 * (abs(m[0, 1]) ** 2 + abs(m[0, 2]) ** 2
                                                   + abs(m[1, 2]) ** 2)
    p = math.sqrt(p2 / 6)
    r = np.clip(np.linalg.det((m - q * np.eye(3)) / p).real / 2, -1, 1)
    phi = math.acos(r) / 3
    l1, l3 = q + 2 * p * math.cos(phi), q + 2 * p * math.cos(phi + 2 * math.pi / 3)
    return np.sort([l1, 3 * q - l1 - l3, l3])


def test_eigensolver_oracle():
    rng = np.random.default_rng(7)
    worst = 0.0
    for n in (2, 3):
        a = rng.normal(size=(100, n, n)) + 1j * rng.normal(size=(100, n, n))
        mats = 0.5 * (a + np.conj(np.swapaxes(a, 1, 2)))
        got = eigvals_batch(mats)
        worst = max(worst, max(np.max(np.abs(g - _closed_form(m))) for g, m in zip(got, mats)))
    assert record("eigenvalues vs closed form (200 matrices)", worst <= 1e-10,
                  f"max err {worst:.1e}")


def test_poincare_length():
    r0, r1 = math.exp(-2), math.exp(-8)
    length = curve_length(levi_form(poincare()), Segment([r0], [0.0]), 0.0, 1.0 - r1 / r0)
    oracle = 0.5 * math.log(math.log(1 / r1)) - 0.5 * math.log(math.log(1 / r0))
    ok = abs(length - math.log(2)) <= 1e-4 and abs(oracle - math.log(2)) < 1e-12
    assert record("Poincare radial length = ln 2", ok, f"{length:.10f}")


def test_divergence_classifier():
    radial = Segment([0.5], [0.0])
    reduced, _ = reduce_unbounded(poincare(), K=32.0)
    cases = [
        (classify_divergence(levi_form(poincare()), radial), "divergent", "loglog"),
        (classify_divergence(levi_form(cone()), radial), "divergent", "log"),
        (classify_divergence(levi_form(euclidean(1)), Segment([1.0], [0.0])), "finite", None),
        (classify_divergence(levi_form(reduced), radial), "divergent", "any"),
    ]
    right = 0
    for v, kind, rate in cases:
        good = v.kind == kind
        if kind == "finite":
            good = good and abs(v.length - 1.0) <= 1e-6
        elif rate != "any":
            good = good and v.rate == rate
        right += good
    assert record("divergence verdicts", right == 4,
                  f"{right}/4: " + ", ".join(str(v) for v, _, _ in cases))


def test_local_estimates():
    details, ok = [], True
    for name in SCENARIOS:
        rep, _ = timed_run(name)
        sq, bump = rep.stage("square"), rep.stage("bump")
        for label, summ in sq.summary.items():
            ok &= summ["sample_count"] >= 10_000
            ok &= summ["min_margin"] >= -1e-9 * summ["scale"]
            b = bump.summary[label]
            total = b["checked"] + b["skipped"] + b["outside_support"]
            ok &= total >= 10_000 and b["skipped_fraction"] <= 0.01
            if b["checked"]:
                ok &= b["min_margin"] >= -1e-9 * b["scale"]
            details.append(f"{name}/{label}: sq {summ['min_margin']:.2g}, "
                           f"mixed {b.get('min_margin', float('nan')):.2g}, "
                           f"skipped {100 * b['skipped_fraction']:.2f}%")
    assert record("squared-potential and mixed-term estimates", ok, "; ".join(details))


def test_unbounded_reduction():
    s = load_scenario(bundled_scenario("GLUE-1D"))
    info = reduce_chart(s, 0)
    ok = info["min_value"] >= 0 and info["h_min_d1"] >= 0 and info["h_min_d2"] >= 0
    ok &= info["T"] == 1000.0 and len(info["probes"]) >= 2
    for p in info["probes"]:
        ok &= p["preserved"] and p["scaling"]["pass"]
    ok &= info["pass"]
    verdicts = ", ".join(f"{p['probe']}: {p['input_verdict']} -> {p['reduced_verdict']}"
                         for p in info["probes"])
    assert record("unbounded reduction of the Poincare potential", ok,
                  f"K={info['K']:g}, min {info['min_value']:.3g}; {verdicts}")


def test_end_to_end():
    details, ok = [], True
    for name in SCENARIOS:
        rep, elapsed = timed_run(name)
        g = rep.stage("global_psh").summary
        ok &= g["min_margin"] >= -1e-8 * g["scale"]
        dom = rep.stage("domination").summary
        ok &= bool(dom) and all(d["min_margin"] >= -1e-8 * d["scale"] for d in dom.values())
        a_probes = [p for p in rep.probes if p["target"] == "A"]
        ok &= bool(a_probes) and all(p["kind"] == "divergent" for p in a_probes)
        ok &= rep.passed and elapsed < 60.0
        details.append(f"{name}: {'pass' if rep.passed else 'FAIL'} in {elapsed:.1f} s, "
                       + ", ".join(f"{p['probe']} {p['verdict']}" for p in rep.probes))
    assert record("end-to-end glue on bundled scenarios", ok, "; ".join(details))


def test_affine_scaling_law():
    curve = Spiral([0.0], 0.4, 0.3, 2.0)
    base = curve_length(levi_form(poincare()), curve, 0.0, 0.99)
    worst = 0.0
    for a in (0.25, 4.0):
        for metric in (levi_form(poincare(), scale=a), levi_form(Affine(a, 1.0, poincare()))):
            scaled = curve_length(metric, curve, 0.0, 0.99)
            worst = max(worst, abs(scaled / (math.sqrt(a) * base) - 1.0))
    assert record("affine scaling of lengths", worst <= 1e-6, f"max rel err {worst:.1e}")


def test_determinism():
    s = load_scenario(bundled_scenario("GLUE-1D"))
    first = canonical_json(timed_run("GLUE-1D")[0])
    second = canonical_json(run_scenario(s))
    assert record("seeded runs give identical reports", first == second,
                  f"{len(first)} bytes")


if __name__ == "__main__":
    failed = 0
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
