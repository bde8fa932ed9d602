"""Limited-memory compact representations of rank-2 quasi-Newton updates.

The package keeps a bounded history of update pairs, exposes
matrix-free products with the inverse and direct Hessian estimates in
their compact factored forms, computes implicit eigendecompositions of
those estimates, and ships line-search, trust-region and stochastic
drivers plus a benchmark CLI that verifies everything against dense
reference recursions.
"""

from .compact_direct import (CompactDirect, ShiftedSolveResult, bv_product,
                             materialize_b, shifted_solve)
from .compact_inverse import (CompactInverse, MiddleFactors, build_middle,
                              hv_product, hv_product_bfgs,
                              hv_product_greenstadt, solve_middle)
from .history import (ColumnStore, LmHistory, PairPolicy, col_update,
                      gamma_init, prod_update, push_pair)
from .linalg import sym_eig_small, thin_qr, tri_solve
from .recursions import (DenseEstimate, update_bfgs_inverse,
                         update_general_direct, update_general_inverse,
                         update_psb)
from .solvers import (SolveReport, SolverConfig, minimize_linesearch,
                      minimize_stochastic, minimize_trustregion,
                      wolfe_linesearch)
from .spectral import (ImplicitEigen, apply_complement_projection,
                       implicit_eig, min_shift)

__version__ = "0.1.0"
