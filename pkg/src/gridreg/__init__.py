"""gridreg: grid-based multimodal image registration.

Gridize both images into overlapping patches, score patch similarity through
L2-normalized descriptors, and recover the source-to-reference affine by
minimizing a global grid matching loss with a randomized coarse-to-fine
solver. The equiangular-basis metric-learning losses used to train learned
descriptors live in :mod:`gridreg.eubv` as a verified reference
implementation.
"""

from .config import EngineConfig
from .descriptors import (
    DescriptorSet,
    baseline_descriptor,
    compute_descriptors,
    read_descriptor_file,
    write_descriptor_file,
)
from .errors import (
    ConfigError,
    ContractError,
    DegenerateGeometryError,
    DimensionError,
    FormatError,
    GridRegError,
    InputError,
    NoOverlapError,
    NoSolutionError,
    NumericalError,
)
from .eubv import (
    EUBVBasis,
    LocalEmbeddings,
    LossConfig,
    contrastive_loss,
    contrastive_loss_with_grad,
    correlation_coeffs,
    grad_check,
    loss_cross,
    loss_cross_with_grad,
    loss_joint,
    loss_joint_with_grad,
    make_eubvs,
    patch_descriptor,
    reconstruct_embeddings,
    reconstruct_eubvs_cross,
    reconstruct_eubvs_joint,
    total_loss,
    total_loss_with_grad,
)
from .grid import GridSpec, extract_patch, gridize
from .image import ImageBuffer, load_image, save_image, to_grayscale
from .matching import CandidateSets, candidate_counts, candidate_sets, distance_matrix
from .metrics import EvalReport, evaluate, mee, success_rate
from .solver import (
    SolveResult,
    SolverConfig,
    SolverDiagnostics,
    area_constraint_ok,
    local_refine,
    matching_loss,
    solve,
    target_index,
)
from .synth import (
    DegradeOptions,
    LEVELS,
    SynthCase,
    make_textured_base,
    register_case,
    resample,
    run_benchmark,
    synth_pair,
)
from .transform import (
    AffineTransform2D,
    apply_affine,
    estimate_affine_from_3,
    estimate_affine_lstsq,
    triangle_area,
)

__version__ = "0.1.0"
