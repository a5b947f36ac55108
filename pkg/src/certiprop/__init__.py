"""certiprop: certified set propagation through feedforward networks.

Three arithmetics over one rigorous rounding core: interval bound
propagation (the baseline), affine forms over shared noise symbols, and
doubleton sets x + C r + Q q, plus sampled lower bounds and experiment
harnesses for wrapping-effect studies.
"""

from .intervals import (Interval, IntervalMatrix, IntervalVector, hull,
                        iv_add, iv_matvec, iv_mul, mid, rad)
from .network import (InputRegion, NetworkSpec, eval_point, load_network,
                      load_region, lower_conv, save_network)
from .ibp import ibp_affine, ibp_forward, ibp_relu, ibp_softmax
from .affine import (AffineForm, AffineVector, SymbolContext, aa_affine,
                     aa_condense, aa_forward, aa_relu_scalar, aa_softmax)
from .doubleton import (Doubleton, db_affine, db_forward, db_from_region,
                        db_nonlinear, db_relu_linearize,
                        db_softmax_linearize)
from .oracle import exact_hull_corners, exact_hull_linear, lb_sample
from .report import BoundReport

__version__ = "0.1.0"

__all__ = [
    "Interval", "IntervalVector", "IntervalMatrix",
    "iv_add", "iv_mul", "iv_matvec", "hull", "mid", "rad",
    "NetworkSpec", "InputRegion", "load_network", "load_region",
    "save_network", "lower_conv", "eval_point",
    "ibp_affine", "ibp_relu", "ibp_softmax", "ibp_forward",
    "AffineForm", "AffineVector", "SymbolContext",
    "aa_affine", "aa_relu_scalar", "aa_softmax", "aa_condense", "aa_forward",
    "Doubleton", "db_from_region", "db_affine", "db_nonlinear",
    "db_relu_linearize", "db_softmax_linearize", "db_forward",
    "lb_sample", "exact_hull_linear", "exact_hull_corners",
    "BoundReport",
]
