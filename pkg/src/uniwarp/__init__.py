"""uniwarp: scalar potentials that transport 2-D densities to uniform.

Given a discretized probability density p on a regular lattice, the
solver finds the scalar potential g whose gradient field f = grad g warps
the domain so p becomes uniform, by minimizing the squared residual of
the discrete determinant equation p/u = |I + H(g)|.  The inverse warp
reconstructs the density for verification, scored by the Bhattacharyya
coefficient, and pushes uniform random points into samples of p.
"""

from .diffops import DerivativeKernel, DerivativeOperator, DerivativeSet
from .grid import (DensityError, DensityPair, Rect, ScalarGrid, VectorGrid,
                   compute_rho, normalize_density, resample_bilinear)
from .multigrid import LevelResult, PyramidConfig, SolveReport, build_pyramid, prolong, solve
from .optimizer import NcgConfig, SolveTrace, minimize
from .pde import (PdeProblem, WindowError, WindowSpec, energy,
                  energy_and_gradient, energy_gradient, h_of_g, window_rho)
from .reference import (BUILTIN_KINDS, Density1D, SeparableDensity,
                        TestDistributionSpec, cdf_transform_1d, evaluator,
                        generate, separable_cdf_transform)
from .transport import (FieldInversionError, FoldedCellError, TransportMap,
                        bhattacharyya, boundary_normal_residual, draw_samples,
                        forward_field, invert_field, jacobian_positive_fraction,
                        reconstruct_density, reconstruction_mass,
                        roundtrip_residual)

__version__ = "0.1.0"
