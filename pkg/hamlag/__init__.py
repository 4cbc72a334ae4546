__version__ = "0.1.0"
__author__ = "refraction-ray"
__name__ = "hamlag"

import hamlag.exceptions
from hamlag.cons import set_threads, get_threads
from hamlag.spectral import (
    Grid,
    forward_transform,
    inverse_transform,
    spectral_derivative,
    inner_product,
    solve_mode_block_system,
)
from hamlag.tableau import ButcherTableau, gauss_tableau, symplecticity_defect
from hamlag.models import (
    ModelSpec,
    EnergyReport,
    energy,
    kdv_model,
    nls_model,
    sg_model,
    build,
    initial_state,
    exact_solution,
)
from hamlag.integrators import (
    SchemeConfig,
    StepRecord,
    MultiplierSolve,
    newton_scalar,
    nearest_root,
    energy_scale,
    solve_multiplier_cn,
    solve_multiplier_gauss,
    lm_cn_step,
    predict_stages,
    lm_gauss_step,
    pc_gauss_step,
    sav_cn_step,
    gauss_fp_step,
    startup_extrapolant,
    LMCN,
    LMGauss,
    SAVCN,
    GaussFP,
    PCGauss,
)
from hamlag.record import RunReport, emit_csv, read_csv
from hamlag.harness import (
    ExperimentConfig,
    run_trajectory,
    convergence_study,
    lambda_order_study,
    compare_schemes,
    grid_timing_study,
)
