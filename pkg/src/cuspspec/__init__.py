"""Numerical spectral laboratory for delta wells on power-cusp curves.

The package verifies, at desk scale, the strong-coupling spectral asymptotics
of a two-dimensional Schrödinger operator with an attractive delta interaction
supported on the cusp curve |x2| = x1^p, together with the one-dimensional
model and effective operators that govern its secondary eigenvalue term.
"""

__version__ = "1.0.0"

from .numcore import (BoundaryCondition, EigensolveError, Grid1D,
                      RejectedInputError, SparseSymmetricMatrix,
                      SpectrumResult, TridiagonalOperator,
                      assemble_tridiagonal, richardson_extrapolate,
                      sparse_lowest_eigenpairs, sturm_count,
                      tridiag_lowest_eigenvalues)
from .ops1d import (CuspExponent, build_B, build_C, build_K_h, build_model_A,
                    build_Z_h, check_scaling_K_to_C, check_scaling_Z_to_B,
                    default_k, model_a_eigenvalues, rate_C_to_A,
                    scaling_factor)
from .doubledelta import (BoundState, Parity, kappa_effective, lambda1_scaled,
                          sigma, solve_even, solve_odd)
from .leaky2d import (CuspCurve, LeakyAssembly, Mesh2D, assemble, build_mesh,
                      solve_leaky, sweep_alpha)
from .asymfit import (ChainReport, FitReport, SweepRecord,
                      effective_chain_report, fit_gap, fit_power_law)
