//! Multi-dimensional packing of users with monotone step-function demands on a line.
//!
//! Each user has one demand per dimension of the separable form
//! `f(e) = Σ_t a_t b_t(e)` (zero before a start edge, constant after a saturation
//! edge) and a utility. The module builds the edge partition, level grid and user
//! groups the LP-rounding scheme works with, and implements the rounding step itself:
//! greedy removal under a restricted profile, vertex extraction and round-down.

mod bfs;
mod instance;
mod levels;
mod modify;
mod partition;
mod profile;
mod round;

use thiserror::Error;

pub use bfs::{fractional_support, tight_rank, to_bfs, PackingLp, BOUND_TOL};
pub use instance::{
    capacity_slack, check_gufp_feasible, Dimension, GufpInstance, GufpUser, Orientation,
    SeparableStepFunction,
};
pub use levels::{
    group_users, is_small, lattice_steps, reciprocal_eps, ClassIndex, Group, Grouping, LevelGrid,
};
pub use modify::{modify, modify_loss_bound, modify_with_profile, ModifyOutcome};
pub use partition::{build_partition, DimPartition, EdgePartition, IntervalDemands};
pub use profile::{enumerate_profiles, restricted_profile_from_fractional, RestrictedProfile};
pub use round::{gufp_round, solve_gufp_lp, GufpRounding};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GufpError {
    #[error("malformed instance: {0}")]
    Shape(String),
    #[error("{0} must be non-negative and finite")]
    Negative(String),
    #[error("{0} must be non-decreasing in its dimension's order")]
    NotMonotone(String),
    #[error("1/ε must be an integer, got ε = {0}")]
    NotReciprocal(f64),
    #[error("the instance is not a line network")]
    NotLine,
    #[error("linear relaxation failed: {0}")]
    Lp(String),
}
