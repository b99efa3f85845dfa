"""Exact jet-based tensor calculus for the ambient metrics of (3,2) conformal
structures defined by third-order ODEs z' = F(x, y, y', y'', z)."""
from .field import EXACT, Field, float_field
from .expr import Point5, diff_expr, eval_jet, parse_expr, total_diff
from .jet import Jet
from .metric import (Coframe, Example2Params, MetricJet, build_example1_metric,
                     build_example2_metric, build_general_metric, coframe_check,
                     proportionality_check, signature_of)
from .curvature import Conventions, Curvature, TensorJet
from .ambient import (AmbientMetric, StrategyReport, ambient_ricci, assemble_ambient,
                      graham_coefficients, run_strategy)

__version__ = "0.1.0"
