"""radmom: moment-method density reconstruction from line-integral data.

Recovers a bivariate density on the unit square from (possibly noisy)
sinogram samples: offset moments of the smoothed transform are unmixed by
a triangular transfer, resolved into density moments by per-order angular
solves, and synthesized back to a density with an alternating beta-kernel
sum. All arithmetic is arbitrary-precision (MPFR via gmpy2).
"""

__version__ = "1.0.0"

from .backend import available_backends, backend_name, set_backend
from .density import (
    Density,
    MomentTriangle,
    from_registry,
    moment_triangle,
    registry_ids,
    true_moment,
)
from .errors import RadmomError
from .mollifier import MollifierSpec, mollifier_eval, mollifier_moment, mollify_sinogram
from .momentsys import (
    MomentSet,
    build_A,
    build_C,
    continuous_moments,
    hatb_to_b,
    recover_triangle,
    sinogram_moments,
    solve_order,
    synthesis_residual,
    transfer_hatb,
)
from .pipeline import PipelineConfig, run_pipeline
from .precision import working_precision
from .radon import Sinogram, add_noise, make_sinogram, radon_eval
from .reconstruct import (
    ReconstructionGrid,
    beta_kernel_value,
    choose_h,
    convergence_study,
    ml_value,
    reconstruct_grid,
    sup_error,
)

__all__ = [
    "__version__",
    "available_backends",
    "backend_name",
    "set_backend",
    "Density",
    "MomentTriangle",
    "from_registry",
    "moment_triangle",
    "registry_ids",
    "true_moment",
    "RadmomError",
    "MollifierSpec",
    "mollifier_eval",
    "mollifier_moment",
    "mollify_sinogram",
    "MomentSet",
    "build_A",
    "build_C",
    "continuous_moments",
    "hatb_to_b",
    "recover_triangle",
    "sinogram_moments",
    "solve_order",
    "synthesis_residual",
    "transfer_hatb",
    "PipelineConfig",
    "run_pipeline",
    "working_precision",
    "Sinogram",
    "add_noise",
    "make_sinogram",
    "radon_eval",
    "ReconstructionGrid",
    "beta_kernel_value",
    "choose_h",
    "convergence_study",
    "ml_value",
    "reconstruct_grid",
    "sup_error",
]
