//! Radial network instances, operating points, the objective, assumption checks and
//! the rotation preprocessing step.

mod instance;
mod objective;
mod rotation;
mod state;
mod validate;

pub use instance::{ComplexQuantity, DemandKind, Line, RadialInstance, Topology, User, VoltageBounds};
pub use objective::{evaluate_objective, ObjectiveSpec, PiecewiseLinear};
pub use rotation::{rotate_instance, rotate_state, rotation_angle, unrotate_state, RotationRecord};
pub use state::PowerFlowState;
pub use validate::{validate_instance, ValidationReport};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("node 0 must have exactly one child, node 1")]
    MissingFeeder,
    #[error("node 0 has {0} children, expected a single feeder edge")]
    FeederFanout(usize),
    #[error("parent {parent} of node {node} is out of range")]
    ParentOutOfRange { node: usize, parent: usize },
    #[error("parent map contains a cycle through node {node}")]
    Cycle { node: usize },
    #[error("{what}: expected {expected} entries, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{what} must be non-negative")]
    Negative { what: String },
    #[error("{what} is not finite")]
    NonFinite { what: String },
    #[error("user {user} is attached to invalid node {node}")]
    UserNode { user: usize, node: usize },
    #[error("objective: {0}")]
    Objective(String),
    #[error("demand phases too spread out: user {user} cannot be rotated into the first quadrant")]
    PhaseSpread { user: usize },
}
