from .gld import GldStep, condition_number, gld_step, radius_ladder
from .mgs import (
    MgsCandidate,
    MgsDiagnostics,
    make_candidate,
    mgs_update,
    prop1_direction_check,
    proposal_log_density,
    propose,
)
from .rs import (
    EstimatorError,
    NonFiniteLossError,
    RsEstimate,
    multi_point_estimate,
    one_point_estimate,
    phi_factor,
    rs_step,
    two_point_estimate,
)

__all__ = [
    "EstimatorError",
    "GldStep",
    "MgsCandidate",
    "MgsDiagnostics",
    "NonFiniteLossError",
    "RsEstimate",
    "condition_number",
    "gld_step",
    "make_candidate",
    "mgs_update",
    "multi_point_estimate",
    "one_point_estimate",
    "phi_factor",
    "prop1_direction_check",
    "proposal_log_density",
    "propose",
    "radius_ladder",
    "rs_step",
    "two_point_estimate",
]
