"""Dynamics of the algebraic correspondence ``(w - c)**q = z**p``.

Forward and backward images, branch continuation and monodromy, bounded
orbit trees, Misiurewicz verification, singular-weight expansion surveys and
raster renders of the parameter and dynamical planes.
"""

__version__ = "0.1.0"

from .core import (
    BranchGerm,
    CorrespondenceParams,
    backward_images,
    branch_derivative,
    continue_branch,
    cycle_notation,
    escape_radius,
    forward_images,
    monodromy_permutation,
)
from .errors import (
    BranchPointError,
    BudgetError,
    CapacityError,
    ContinuationError,
    CorrdynError,
    InvalidArgumentError,
    InvalidCycleError,
    NoConvergence,
    RefinementError,
    RefinementLost,
    SingularPointError,
)
from .misiurewicz import Candidate, MisiurewiczReport, ScanConfig, refine, scan, verify
from .orbifold import (
    ExpansionSurvey,
    RamificationData,
    SampleSpec,
    expansion_survey,
    inverse_branch_norm,
    ramification_data,
    weight,
)
from .orbits import (
    BoundedBranch,
    Cycle,
    OrbitConfig,
    Preperiodicity,
    cycle_multiplier,
    detect_preperiodicity,
    enumerate_bounded_branches,
    membership_depth,
    membership_depths,
)
from .region import Region
from .render import (
    DepthGrid,
    RenderSpec,
    render_julia_escape,
    render_julia_inverse,
    render_multibrot,
    write_pgm,
)

__all__ = [
    "BranchGerm",
    "CorrespondenceParams",
    "backward_images",
    "branch_derivative",
    "continue_branch",
    "cycle_notation",
    "escape_radius",
    "forward_images",
    "monodromy_permutation",
    "BranchPointError",
    "BudgetError",
    "CapacityError",
    "ContinuationError",
    "CorrdynError",
    "InvalidArgumentError",
    "InvalidCycleError",
    "NoConvergence",
    "RefinementError",
    "RefinementLost",
    "SingularPointError",
    "Candidate",
    "MisiurewiczReport",
    "ScanConfig",
    "refine",
    "scan",
    "verify",
    "ExpansionSurvey",
    "RamificationData",
    "SampleSpec",
    "expansion_survey",
    "inverse_branch_norm",
    "ramification_data",
    "weight",
    "BoundedBranch",
    "Cycle",
    "OrbitConfig",
    "Preperiodicity",
    "cycle_multiplier",
    "detect_preperiodicity",
    "enumerate_bounded_branches",
    "membership_depth",
    "membership_depths",
    "Region",
    "DepthGrid",
    "RenderSpec",
    "render_julia_escape",
    "render_julia_inverse",
    "render_multibrot",
    "write_pgm",
]
