"""Low-rank Sylvester solver on block rational Krylov spaces with adaptive poles."""

from . import bench, brad, matpoly, oracle, poles, sylvester
from .errors import *  # noqa: F401,F403
from .operators import (BandedOperator, CallbackOperator, DenseOperator, Operator,
                        SparseOperator, as_operator)
from .poles import FovOptions
from .sylvester import (LowRankSolution, SolveOptions, Status, SylvesterProblem,
                        SylvesterState, galerkin_state, projected_solve,
                        residual_decomposition, residual_norm_cheap, solve)

__version__ = '0.1.0'
