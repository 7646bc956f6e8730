"""Dictionary learning for sparse representation.

Block-alternating learners for four dictionary constraint regimes, a
constrained-fit solver built on successive convex surrogates, brute-force
densest-cut reduction oracles, and a patch-based image denoiser with a CLI.
"""

from .core import (
    CodeMatrix,
    ConstraintRegime,
    Dictionary,
    NonnegL1Atom,
    NonnegTotalNorm,
    PerAtomNorm,
    SolverConfig,
    SolverTrace,
    StopReason,
    TotalNorm,
    TrainingMatrix,
    check_feasible,
    grad_A,
    grad_X,
    objective,
)
from .proxops import (
    BisectionConfig,
    BisectionError,
    project_frobenius_ball,
    project_nonneg,
    project_nonneg_frobenius,
    project_nonneg_l1_column,
    project_per_atom_ball,
    ridge_dictionary_update,
    sigma_max_sq,
    soft_shrink,
)
from .bsum import (
    BsumProblem,
    BsumResult,
    IterationSnapshot,
    SolverDivergenceError,
    solve_case1,
    solve_case2,
    solve_case3,
    solve_case4,
    stationarity_residual,
)
from .sca import (
    ApproximationFamily,
    InfeasibleFitError,
    ScaConfig,
    ScaProblem,
    SmoothConvexPair,
    check_slater,
    check_surrogate_consistency,
    quadratic_family,
    sca_solve,
    solve_constrained_fit,
    solve_l1_over_ball,
)
from .hardness import (
    Bipartition,
    GraphInstance,
    HardnessReport,
    build_reduction,
    dcp_bruteforce_via_ls,
    dcp_objective,
    densest_cut_bruteforce,
    dict_l0_bruteforce,
    incidence_transpose,
    parse_graph,
    verify_claims,
)
from .denoise import (
    DenoiseConfig,
    DenoiseReport,
    GrayImage,
    Learner,
    PatchConfig,
    denoise_image,
    extract_patches,
    ksvd_learn,
    mu_schedule,
    omp,
    overcomplete_dct,
    psnr,
    read_pgm,
    reassemble,
    write_pgm,
)

__version__ = "0.1.0"
