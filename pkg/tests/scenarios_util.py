"""Small scenario dictionaries for tests."""

import copy
import json

from pshglue.holo import coord
from pshglue.jets import Affine, ModSq
from pshglue.scenario import bundled_scenario


def bundled_dict(name="GLUE-1D"):
    return json.loads(bundled_scenario(name).read_text())


def single_chart(potential=None, bounds=(0.0, 2.0), probes=(), samples=500):
    pot = ModSq(coord(0)) if potential is None else potential
    return {
        "schema_version": 1, "name": "single", "n": 1,
        "region": [[-0.5, 0.5], [-0.5, 0.5]],
        "charts": [{"label": "U1", "box": [[-1.0, 1.0], [-1.0, 1.0]],
                    "inner": [[-0.96, 0.96], [-0.96, 0.96]], "potential": pot.to_dict(),
                    "routing": "bounded", "bounds": list(bounds)}],
        "probes": list(probes),
        "sampling": {"chart_samples": samples, "shell_samples": 200, "scan_samples": 200},
    }


def non_psh():
    return single_chart(Affine(-1.0, 0.0, ModSq(coord(0))), bounds=(-2.0, 0.0))


def edited(d, fn):
    d = copy.deepcopy(d)
    fn(d)
    return d
