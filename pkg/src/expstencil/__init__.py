"""expstencil: matrix-free exponential integrators on CPU.

Stencil and CSR operators with fused (alpha A + beta I) x products, matrix
functions exp/phi1 via Newton interpolation at Leja points, the exponential
Euler method with pluggable nonlinearities, slab domain decomposition with
halo-exchange byte accounting, and a timing harness.

Hot kernels run in a compiled Cython core when available, with a numpy
fallback selected at import (see expstencil._kernels).
"""

from ._kernels import available_backends, default_backend, have_compiled
from .grid import (
    Field,
    Grid3D,
    eval_on_grid,
    linear_index,
    read_field_binary,
    read_field_csv,
    write_field_binary,
    write_field_csv,
    zeros_field,
)
from .stencil import (
    BoundaryCondition,
    StencilOperator,
    apply,
    apply_affine_split,
    fused_apply,
    homogeneous_part,
)
from .sparse import (
    CsrMatrix,
    assemble_stencil,
    csr_storage_bytes,
    fused_spmv,
    read_matrix_market,
    spmv,
    write_matrix_market,
)
from .matfunc import (
    LejaInterpolant,
    MatfuncStats,
    SpectralInterval,
    apply_matfunc,
    divided_differences,
    gershgorin_interval,
    leja_points,
    make_interpolant,
    newton_apply,
    phi1_scalar,
)
from .integrator import (
    NONLINEARITIES,
    SemilinearProblem,
    StepperConfig,
    StepStats,
    combustion_g,
    exponential_euler_step,
    get_nonlinearity,
    integrate,
)
from .decomp import (
    Partition,
    PartitionedCsr,
    PartitionedStencil,
    TransferLedger,
    make_partition,
    partitioned_apply,
    partitioned_newton_apply,
)
from . import bench, errors, expr, verify

__version__ = "0.1.0"
