use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::instance::RadialInstance;

/// One operating point `(s0, x, v, ℓ, S)`.
///
/// `v` covers every node including the root (`v[0] = v0`); `l` and `s` are indexed
/// by edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowState {
    pub s0: Complex64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub l: Vec<f64>,
    pub s: Vec<Complex64>,
}

impl PowerFlowState {
    /// No load, no flow, flat voltage.
    pub fn zeros(inst: &RadialInstance) -> Self {
        let m = inst.m();
        Self {
            s0: Complex64::new(0.0, 0.0),
            x: vec![0.0; inst.user_count()],
            v: vec![inst.v0; m + 1],
            l: vec![0.0; m],
            s: vec![Complex64::new(0.0, 0.0); m],
        }
    }

    pub fn matches(&self, inst: &RadialInstance) -> bool {
        let m = inst.m();
        self.x.len() == inst.user_count()
            && self.v.len() == m + 1
            && self.l.len() == m
            && self.s.len() == m
    }

    /// Whether every inelastic user is at 0 or 1 (within `tol`).
    pub fn is_integral(&self, inst: &RadialInstance, tol: f64) -> bool {
        inst.inelastic()
            .all(|k| self.x[k].abs() <= tol || (self.x[k] - 1.0).abs() <= tol)
    }

    pub fn total_current(&self) -> f64 {
        self.l.iter().sum()
    }

    /// Largest componentwise difference to `other`.
    pub fn max_difference(&self, other: &Self) -> f64 {
        let mut d = (self.s0 - other.s0).norm();
        for (a, b) in self.x.iter().zip(&other.x) {
            d = d.max((a - b).abs());
        }
        for (a, b) in self.v.iter().zip(&other.v) {
            d = d.max((a - b).abs());
        }
        for (a, b) in self.l.iter().zip(&other.l) {
            d = d.max((a - b).abs());
        }
        for (a, b) in self.s.iter().zip(&other.s) {
            d = d.max((a - b).norm());
        }
        d
    }
}
