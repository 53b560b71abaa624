//! Forward-backward sweep over a radial network, its closed-form counterparts, and a
//! constraint-by-constraint feasibility checker.

mod feasibility;

pub use feasibility::{check_feasibility, FeasibilityReport, DEFAULT_TOL};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{PowerFlowState, RadialInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepMode {
    /// Currents recomputed from the baseline as `|S'|² / v'_i`.
    ExactCurrent,
    /// Currents copied from the baseline.
    KeepCurrent,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("baseline voltage at node {node} is {value}, must be positive")]
    NonPositiveVoltage { node: usize, value: f64 },
    #[error("baseline or assignment does not match the instance dimensions")]
    Dimension,
}

/// Recomputes branch powers leaf-to-root for assignment `x` and then voltages
/// root-to-leaf. Every equality of the branch flow model holds by construction.
pub fn forward_backward_sweep(
    inst: &RadialInstance,
    x: &[f64],
    baseline: &PowerFlowState,
    mode: SweepMode,
) -> Result<PowerFlowState, SweepError> {
    if x.len() != inst.user_count() || !baseline.matches(inst) {
        return Err(SweepError::Dimension);
    }
    let topo = inst.topology();
    let m = inst.m();
    let l: Vec<f64> = match mode {
        SweepMode::KeepCurrent => baseline.l.clone(),
        SweepMode::ExactCurrent => (0..m)
            .map(|e| {
                let i = inst.tail(e);
                let vi = baseline.v[i];
                if vi > 0.0 {
                    Ok(baseline.s[e].norm_sqr() / vi)
                } else {
                    Err(SweepError::NonPositiveVoltage { node: i, value: vi })
                }
            })
            .collect::<Result<_, _>>()?,
    };

    let at = inst.users_at();
    let mut s = vec![Complex64::new(0.0, 0.0); m];
    for &j in topo.bfs_order().iter().rev() {
        if j == 0 {
            continue;
        }
        let e = j - 1;
        let load: Complex64 = at[j].iter().map(|&k| inst.users[k].demand * x[k]).sum();
        let below: Complex64 = topo.children(j).iter().map(|&c| s[c - 1]).sum();
        s[e] = load + below + inst.lines[e].z * l[e];
    }

    let mut v = vec![0.0; m + 1];
    v[0] = inst.v0;
    for &j in topo.bfs_order().iter().skip(1) {
        let e = j - 1;
        let z = inst.lines[e].z;
        v[j] = v[inst.tail(e)] + z.norm_sqr() * l[e] - 2.0 * (z.conj() * s[e]).re;
    }

    Ok(PowerFlowState {
        s0: -s[0],
        x: x.to_vec(),
        v,
        l,
        s,
    })
}

/// `S_e = Σ_{k below e} s_k x_k + Σ_{e' in the subtree of e, including e} z_{e'} ℓ_{e'}`.
pub fn aggregate_power(inst: &RadialInstance, x: &[f64], l: &[f64]) -> Vec<Complex64> {
    let topo = inst.topology();
    (1..=inst.m())
        .map(|j| {
            let load: Complex64 = inst
                .users
                .iter()
                .enumerate()
                .filter(|(_, u)| topo.in_subtree(u.node, j))
                .map(|(k, u)| u.demand * x[k])
                .sum();
            let losses: Complex64 = (1..=inst.m())
                .filter(|&t| topo.in_subtree(t, j))
                .map(|t| inst.lines[t - 1].z * l[t - 1])
                .sum();
            load + losses
        })
        .collect()
}

/// Voltages obtained by substituting the branch powers into the voltage recursion:
///
/// `v_j = v0 − 2 Σ_k Re(Σ_{P_k ∩ P_j} z* s_k) x_k
///        − 2 Σ_{(h,t) ∈ P_j} Re(z*_{h,t} Σ_{e strictly below t} z_e ℓ_e) − Σ_{P_j} |z|² ℓ`.
///
/// Index 0 holds `v0`.
pub fn closed_form_voltage(inst: &RadialInstance, x: &[f64], l: &[f64]) -> Vec<f64> {
    let topo = inst.topology();
    let m = inst.m();
    let mut v = vec![inst.v0; m + 1];
    for j in 1..=m {
        let mut drop = 0.0;
        for (k, u) in inst.users.iter().enumerate() {
            let z: Complex64 = topo
                .common_path(u.node, j)
                .iter()
                .map(|&t| inst.lines[t - 1].z.conj())
                .sum();
            drop += 2.0 * (z * u.demand).re * x[k];
        }
        for &t in topo.path(j) {
            let z = inst.lines[t - 1].z;
            let below: Complex64 = (1..=m)
                .filter(|&c| c != t && topo.in_subtree(c, t))
                .map(|c| inst.lines[c - 1].z * l[c - 1])
                .sum();
            drop += 2.0 * (z.conj() * below).re + z.norm_sqr() * l[t - 1];
        }
        v[j] = inst.v0 - drop;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Line, ObjectiveSpec, User, VoltageBounds};
    use num_complex::Complex64 as C;

    fn line_inst(zs: &[C], users: Vec<User>) -> RadialInstance {
        RadialInstance::line(
            1.0,
            zs.iter().map(|&z| Line::uncapped(z)).collect(),
            vec![VoltageBounds::nominal(); zs.len()],
            users,
            ObjectiveSpec::utility_only(),
        )
        .unwrap()
    }

    #[test]
    fn lossless_single_edge() {
        let inst = line_inst(&[C::new(0.0, 0.0)], vec![User::inelastic(1, C::new(1.0, 0.0), 1.0)]);
        let base = PowerFlowState::zeros(&inst);
        let out = forward_backward_sweep(&inst, &[1.0], &base, SweepMode::ExactCurrent).unwrap();
        assert_eq!(out.s[0], C::new(1.0, 0.0));
        assert_eq!(out.s0, C::new(-1.0, 0.0));
        assert_eq!(out.v[1], 1.0);
    }

    #[test]
    fn exact_state_is_a_fixed_point() {
        let z = C::new(0.01, 0.01);
        let inst = line_inst(&[z, z], vec![User::inelastic(2, C::new(1.0, 0.3), 1.0)]);
        // iterate the sweep to convergence, then one more pass must not move it
        let mut st = PowerFlowState::zeros(&inst);
        for _ in 0..60 {
            st = forward_backward_sweep(&inst, &[1.0], &st, SweepMode::ExactCurrent).unwrap();
        }
        let again = forward_backward_sweep(&inst, &[1.0], &st, SweepMode::ExactCurrent).unwrap();
        assert!(again.max_difference(&st) < 1e-10);
    }

    #[test]
    fn zero_tail_voltage_is_an_error() {
        let inst = line_inst(&[C::new(0.01, 0.0)], vec![]);
        let mut base = PowerFlowState::zeros(&inst);
        base.v[0] = 0.0;
        assert!(matches!(
            forward_backward_sweep(&inst, &[], &base, SweepMode::ExactCurrent),
            Err(SweepError::NonPositiveVoltage { node: 0, .. })
        ));
    }

    #[test]
    fn aggregate_without_losses_telescopes() {
        let z = C::new(0.01, 0.02);
        let inst = line_inst(&[z, z, z], vec![User::inelastic(3, C::new(2.0, 1.0), 1.0)]);
        assert!(aggregate_power(&inst, &[0.0], &[0.0; 3])
            .iter()
            .all(|s| *s == C::new(0.0, 0.0)));
        for s in aggregate_power(&inst, &[1.0], &[0.0; 3]) {
            assert_eq!(s, C::new(2.0, 1.0));
        }
    }

    #[test]
    fn closed_form_voltage_single_edge() {
        let inst = line_inst(&[C::new(0.01, 0.01)], vec![User::inelastic(1, C::new(1.0, 0.0), 1.0)]);
        assert_eq!(closed_form_voltage(&inst, &[0.0], &[0.0]), vec![1.0, 1.0]);
        let v = closed_form_voltage(&inst, &[1.0], &[0.0]);
        assert!((v[1] - 0.98).abs() < 1e-15);
    }
}
