//! Rotating all impedances and demands by a common angle so that every demand lies
//! in the closed first quadrant. The rotated problem has the same optimal value and
//! feasible states map back by counter-rotating branch powers.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::instance::RadialInstance;
use super::state::PowerFlowState;
use super::ModelError;

/// Rotated components this close to zero (relative to the magnitude) are snapped to zero.
const SNAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationRecord {
    /// Radians in `[0, π/2]`.
    pub phi: f64,
}

impl RotationRecord {
    pub const IDENTITY: Self = Self { phi: 0.0 };

    pub fn factor(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.phi)
    }
}

/// `φ = max{max_k −arg(s_k), 0}` over non-zero demands.
pub fn rotation_angle(inst: &RadialInstance) -> Result<RotationRecord, ModelError> {
    let demands: Vec<Complex64> = inst
        .users
        .iter()
        .map(|u| u.demand)
        .filter(|s| s.norm() > 0.0)
        .collect();
    let phi = demands
        .iter()
        .map(|s| -s.arg())
        .fold(0.0f64, f64::max)
        .clamp(0.0, FRAC_PI_2);
    let rot = Complex64::from_polar(1.0, phi);
    for (k, u) in inst.users.iter().enumerate() {
        let r = snap(u.demand * rot);
        if r.re < 0.0 || r.im < 0.0 {
            return Err(ModelError::PhaseSpread { user: k });
        }
    }
    Ok(RotationRecord { phi })
}

fn snap(c: Complex64) -> Complex64 {
    let tol = SNAP * c.norm();
    Complex64::new(
        if c.re.abs() <= tol { 0.0 } else { c.re },
        if c.im.abs() <= tol { 0.0 } else { c.im },
    )
}

/// Multiplies every impedance and demand by `e^{iφ}` and records the angle in the
/// objective so the generation term is still evaluated in the original frame.
pub fn rotate_instance(inst: &RadialInstance, r: RotationRecord) -> RadialInstance {
    if r.phi == 0.0 {
        return inst.clone();
    }
    let rot = r.factor();
    let mut out = inst.clone();
    for line in &mut out.lines {
        line.z = snap(line.z * rot);
    }
    for user in &mut out.users {
        user.demand = snap(user.demand * rot);
    }
    out.objective.generation_angle += r.phi;
    out
}

/// Maps a state of the rotated instance back to the original one.
pub fn unrotate_state(state: &PowerFlowState, r: RotationRecord) -> PowerFlowState {
    rotate_state(state, -r.phi)
}

/// Maps a state of the original instance into the rotated frame.
pub fn rotate_state(state: &PowerFlowState, phi: f64) -> PowerFlowState {
    let rot = Complex64::from_polar(1.0, phi);
    PowerFlowState {
        s0: state.s0 * rot,
        x: state.x.clone(),
        v: state.v.clone(),
        l: state.l.clone(),
        s: state.s.iter().map(|s| s * rot).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{evaluate_objective, Line, ObjectiveSpec, User, VoltageBounds};
    use num_complex::Complex64 as C;
    use std::f64::consts::FRAC_PI_4;

    fn inst(demands: &[C]) -> RadialInstance {
        let users = demands
            .iter()
            .map(|&s| User::inelastic(1, s, 1.0))
            .collect();
        RadialInstance::line(
            1.0,
            vec![Line::uncapped(C::new(0.01, 0.0))],
            vec![VoltageBounds::nominal()],
            users,
            ObjectiveSpec::linear_cost(1.0, 5.0),
        )
        .unwrap()
    }

    #[test]
    fn nonnegative_angles_need_no_rotation() {
        let r = rotation_angle(&inst(&[C::new(1.0, 0.0), C::new(1.0, 0.7)])).unwrap();
        assert_eq!(r.phi, 0.0);
    }

    #[test]
    fn single_negative_demand() {
        let r = rotation_angle(&inst(&[C::new(1.0, -1.0)])).unwrap();
        assert!((r.phi - FRAC_PI_4).abs() < 1e-15);
        let rotated = rotate_instance(&inst(&[C::new(1.0, -1.0)]), r);
        let s = rotated.users[0].demand;
        assert!((s.re - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.im, 0.0);
        assert!((s.norm() - C::new(1.0, -1.0).norm()).abs() < 1e-15);
    }

    #[test]
    fn symmetric_pair_lands_in_first_quadrant() {
        let base = inst(&[C::new(1.0, -0.5), C::new(1.0, 0.5)]);
        let r = rotation_angle(&base).unwrap();
        assert!((r.phi - 0.5f64.atan()).abs() < 1e-15);
        for u in &rotate_instance(&base, r).users {
            assert!(u.demand.re >= 0.0 && u.demand.im >= 0.0);
        }
    }

    #[test]
    fn quarter_turn_of_impedance() {
        let base = inst(&[C::new(1.0, 0.0)]);
        let rotated = rotate_instance(&base, RotationRecord { phi: FRAC_PI_2 });
        assert_eq!(rotated.lines[0].z, C::new(0.0, 0.01));
    }

    #[test]
    fn wide_spread_is_rejected() {
        let err = rotation_angle(&inst(&[C::new(1.0, -1.0), C::new(0.1, 1.0)]));
        assert!(matches!(err, Err(ModelError::PhaseSpread { .. })));
    }

    #[test]
    fn identity_rotation_and_objective_invariance() {
        let base = inst(&[C::new(1.0, -0.3)]);
        assert_eq!(rotate_instance(&base, RotationRecord::IDENTITY), base);
        let r = rotation_angle(&base).unwrap();
        let rotated = rotate_instance(&base, r);
        let mut st = PowerFlowState::zeros(&base);
        st.x[0] = 1.0;
        st.s0 = C::new(-1.01, 0.29);
        st.s[0] = -st.s0;
        let st_rot = rotate_state(&st, r.phi);
        assert!(
            (evaluate_objective(&base, &st) - evaluate_objective(&rotated, &st_rot)).abs() < 1e-12
        );
        assert!(unrotate_state(&st_rot, r).max_difference(&st) < 1e-12);
        assert!((unrotate_state(&st_rot, r).s[0].norm() - st.s[0].norm()).abs() < 1e-15);
    }
}
