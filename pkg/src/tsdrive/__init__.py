"""Cascaded TS guidance stack: kinematic MPC, gain-scheduled LQR, MHE-UIO.

Layer map:

* models      -- TS vehicle models, membership machinery, ground-truth plant
* solvers     -- QP and LMI contracts (OSQP / cvxpy behind numpy rechecks)
* synthesis   -- offline vertex gains, terminal ellipsoid, certification
* planner     -- circuit reference generation and body-frame tracking errors
* mpc         -- outer-loop kinematic TS-MPC (rate Tc)
* lqr         -- inner-loop gain-scheduled LQR with friction feedforward (rate Td)
* mhe         -- moving-horizon estimator with unknown-input decoupling
* simulate    -- two-rate closed-loop executive, logging, metrics
* config      -- JSON run configuration with Table-1..4 defaults
* cli         -- synthesize / simulate / compare commands
"""

import logging

from .models import (
    VehicleParams,
    KinematicErrorState,
    KinematicInput,
    DynamicState,
    DynamicInput,
    SchedulingDomain,
    SchedulingPoint,
    PolytopicModel,
    KINEMATIC_DOMAIN,
    DYNAMIC_DOMAIN,
    membership_weights,
    kinematic_matrices_at,
    kinematic_polytope,
    dynamic_matrices_at,
    dynamic_polytope,
    plant_step,
)

logging.getLogger("tsdrive").addHandler(logging.NullHandler())

__all__ = [
    "VehicleParams",
    "KinematicErrorState",
    "KinematicInput",
    "DynamicState",
    "DynamicInput",
    "SchedulingDomain",
    "SchedulingPoint",
    "PolytopicModel",
    "KINEMATIC_DOMAIN",
    "DYNAMIC_DOMAIN",
    "membership_weights",
    "kinematic_matrices_at",
    "kinematic_polytope",
    "dynamic_matrices_at",
    "dynamic_polytope",
    "plant_step",
]
