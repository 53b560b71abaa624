//! Optimal power flow with discrete demands on radial distribution networks.
//!
//! The crate solves the second-order cone relaxation of the branch flow model, restores
//! exactness with a forward-backward sweep, and rounds fractional demand decisions with a
//! quasi-polynomial approximation scheme built on a multi-dimensional unsplittable flow
//! problem. A brute-force oracle is included for certifying results on small instances.

pub mod model;
pub mod sweep;
pub mod conic;
pub mod gufp;
pub mod oracle;
pub mod qptas;
pub mod io;
