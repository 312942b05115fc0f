"""Numerical toolkit for gluing local plurisubharmonic potentials.

Second-order Wirtinger jets of expression trees (:mod:`pshglue.jets`), Levi
forms, curve lengths and divergence classification (:mod:`pshglue.levi`),
sampled psh checks (:mod:`pshglue.psh`), the gluing constructions
(:mod:`pshglue.glue`) and a scenario-driven runner with a CLI.
"""

from .errors import *  # noqa: F401,F403
from .glue import (assemble_global, build_convex_reparam, choose_K, make_bump,
                   mixed_lower_bound_check, normalize_to_1_2, reduce_unbounded,
                   square_potential, estimate_shell_negativity)
from .jets import (Affine, Bump, Const, ConvexReparam, FieldExpr, Jet2, LogModSq, ModSq, Prod,
                   RealComp, RePart, Sum, cone, euclidean, eval_jet, finite_diff_jet, poincare)
from .levi import (Ray, Segment, Spiral, classify_divergence, curve_length, dominates,
                   eigvals_hermitian, levi_form, levi_metric)
from .psh import DomainSpec, bound_scan, check_psh, sample_domain
from .runner import run_scenario
from .scenario import bundled_scenario, load_scenario, loads_scenario

__version__ = "0.1.0"
