"""Planar double-well diffusion with one shared noise source.

Simulation, drift-condition certificates, path costs, passage costs between
wells, and the vanishing-noise concentration verdict.
"""

from .action import (
    ActionValue,
    DegenerateDiffusion,
    ScalarPath,
    action,
    closed_form_action,
    extremal_control,
    extremal_path,
    lagrangian,
)
from .lyapunov import (
    CertificateNotFound,
    GridSpec,
    LyapunovCertificate,
    find_certificate,
    generator_on_W,
    lyapunov_W,
)
from .model import (
    EQUILIBRIA,
    Equilibrium,
    InvalidParams,
    Params,
    ScalarField,
    State,
    bracket_determinant,
    diffusion_coeff,
    drift,
    generator_apply,
    validate_params,
)
from .quasipotential import (
    ClassificationInconsistency,
    CostMatrix,
    LimitMeasure,
    PathOptimizationFailed,
    Well,
    WellCosts,
    classify_limit_measure,
    cost_matrix,
    global_costs,
    passage_cost_integral,
    passage_cost_pathopt,
)
from .simulate import (
    OccupationHistogram,
    Region,
    SimConfig,
    SimulationDiverged,
    Trajectory,
    run_ensemble,
    simulate_controlled,
    simulate_flow,
    simulate_sde,
    step_sde,
)

__version__ = "0.1.0"
