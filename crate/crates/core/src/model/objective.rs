use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::instance::{Line, RadialInstance, User};
use super::state::PowerFlowState;
use super::ModelError;

/// Piecewise-linear function through the origin.
///
/// `slopes[i]` applies on `[breakpoints[i-1], breakpoints[i]]`, with the first and
/// last pieces extending to infinity, so `slopes.len() == breakpoints.len() + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    pub breakpoints: Vec<f64>,
    pub slopes: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn zero() -> Self {
        Self::linear(0.0)
    }

    pub fn linear(slope: f64) -> Self {
        Self {
            breakpoints: Vec::new(),
            slopes: vec![slope],
        }
    }

    pub fn is_well_formed(&self) -> bool {
        self.slopes.len() == self.breakpoints.len() + 1
            && self.breakpoints.windows(2).all(|w| w[0] < w[1])
            && self.breakpoints.iter().all(|b| b.is_finite())
            && self.slopes.iter().all(|s| s.is_finite())
    }

    /// Non-increasing slopes.
    pub fn is_concave(&self) -> bool {
        self.slopes.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.slopes.iter().all(|&s| s >= 0.0)
    }

    fn segment(&self, y: f64) -> usize {
        self.breakpoints.iter().take_while(|&&b| b <= y).count()
    }

    pub fn value(&self, y: f64) -> f64 {
        // integrate the slope from 0 to y
        let (lo, hi, sign) = if y >= 0.0 { (0.0, y, 1.0) } else { (y, 0.0, -1.0) };
        let mut acc = 0.0;
        let mut cursor = lo;
        for (i, &b) in self.breakpoints.iter().enumerate() {
            if b <= cursor {
                continue;
            }
            if b >= hi {
                break;
            }
            acc += self.slopes[i] * (b - cursor);
            cursor = b;
        }
        acc += self.slopes[self.segment(cursor)] * (hi - cursor);
        sign * acc
    }

    /// `(slope, intercept)` of each piece; for a concave function the value is the
    /// pointwise minimum of these affine functions.
    pub fn affine_pieces(&self) -> Vec<(f64, f64)> {
        (0..self.slopes.len())
            .map(|i| {
                let lo = if i == 0 {
                    f64::NEG_INFINITY
                } else {
                    self.breakpoints[i - 1]
                };
                let hi = self
                    .breakpoints
                    .get(i)
                    .copied()
                    .unwrap_or(f64::INFINITY);
                let anchor = 0.0f64.clamp(lo, hi);
                let slope = self.slopes[i];
                (slope, self.value(anchor) - slope * anchor)
            })
            .collect()
    }
}

/// Objective `f(s0, x) = f0(generation) + f1 + Σ_{k inelastic} u_k x_k`.
///
/// `f0(y) = m_shift + generation(y)` where `y` is the real part of `s0` measured in the
/// frame of the original (unrotated) instance, i.e. `Re(s0 e^{-i·generation_angle})`.
/// `f1` is linear: `Σ_{k elastic} w_k Re(s_k) x_k`, again in the original frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub generation: PiecewiseLinear,
    pub elastic_weights: BTreeMap<usize, f64>,
    pub m_shift: f64,
    /// Rotation applied to the instance this objective belongs to.
    #[serde(default)]
    pub generation_angle: f64,
}

impl ObjectiveSpec {
    /// Utilities only.
    pub fn utility_only() -> Self {
        Self {
            generation: PiecewiseLinear::zero(),
            elastic_weights: BTreeMap::new(),
            m_shift: 0.0,
            generation_angle: 0.0,
        }
    }

    /// Linear generation cost `c(w) = slope · w`, shifted by `m_shift`.
    pub fn linear_cost(slope: f64, m_shift: f64) -> Self {
        Self {
            generation: PiecewiseLinear::linear(slope),
            m_shift,
            ..Self::utility_only()
        }
    }

    /// `c(Σ_k |s_k| + Σ_e S̄_e)` with `c(w) = -generation(-w)`; infinite caps are skipped.
    pub fn default_shift(generation: &PiecewiseLinear, users: &[User], lines: &[Line]) -> f64 {
        let reach: f64 = users.iter().map(|u| u.demand.norm()).sum::<f64>()
            + lines
                .iter()
                .filter(|l| l.s_cap.is_finite())
                .map(|l| l.s_cap)
                .sum::<f64>();
        -generation.value(-reach)
    }

    pub fn check(&self, users: usize) -> Result<(), ModelError> {
        if !self.generation.is_well_formed() {
            return Err(ModelError::Objective(
                "generation term needs sorted finite breakpoints and one more slope".into(),
            ));
        }
        if !self.m_shift.is_finite() || !self.generation_angle.is_finite() {
            return Err(ModelError::Objective("non-finite shift or angle".into()));
        }
        for (&k, &w) in &self.elastic_weights {
            if k >= users {
                return Err(ModelError::Objective(format!(
                    "elastic weight for unknown user {k}"
                )));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(ModelError::Objective(format!(
                    "elastic weight of user {k} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }

    pub fn frame(&self) -> Complex64 {
        Complex64::from_polar(1.0, -self.generation_angle)
    }

    /// The generation coordinate `Re(s0 e^{-iφ})`.
    pub fn generation_coordinate(&self, s0: Complex64) -> f64 {
        (s0 * self.frame()).re
    }

    /// Per-user linear coefficient of `x_k` in the objective.
    pub fn user_coefficient(&self, k: usize, user: &User) -> f64 {
        if user.is_inelastic() {
            user.utility
        } else {
            let w = self.elastic_weights.get(&k).copied().unwrap_or(0.0);
            w * (user.demand * self.frame()).re
        }
    }
}

pub fn evaluate_objective(inst: &RadialInstance, state: &PowerFlowState) -> f64 {
    let obj = &inst.objective;
    let f0 = obj.m_shift + obj.generation.value(obj.generation_coordinate(state.s0));
    let rest: f64 = inst
        .users
        .iter()
        .enumerate()
        .map(|(k, u)| obj.user_coefficient(k, u) * state.x[k])
        .sum();
    f0 + rest
}
