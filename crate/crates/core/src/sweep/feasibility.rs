use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::{PowerFlowState, RadialInstance};

pub const DEFAULT_TOL: f64 = 1e-6;

/// Worst absolute violation of each constraint family, plus verdicts.
///
/// A residual `r` against a quantity of magnitude `b` counts as satisfied when
/// `r ≤ tol · (1 + |b|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub power_balance: f64,
    /// `|s0 + S_{0,1}|`, together with any deviation of `v[0]` from `v0`.
    pub root_balance: f64,
    pub voltage_drop: f64,
    pub voltage_bounds: f64,
    pub forward_capacity: f64,
    pub reverse_capacity: f64,
    pub current_cap: f64,
    /// `max_e (|S_e|² − ℓ_e v_i)⁺`.
    pub cone: f64,
    /// `max_e |ℓ_e v_i − |S_e|²|`.
    pub exactness: f64,
    /// Assignments outside `[0, 1]` and negative `v` or `ℓ`.
    pub bounds: f64,
    /// Distance of inelastic assignments from `{0, 1}`.
    pub integrality: f64,
    pub tol: f64,
    /// Every constraint of the cone relaxation holds.
    pub relaxed_feasible: bool,
    /// Relaxed feasibility plus exact currents.
    pub feasible: bool,
    pub integral: bool,
}

impl FeasibilityReport {
    /// Exact, feasible and integral.
    pub fn fully_feasible(&self) -> bool {
        self.feasible && self.integral
    }
}

struct Tally {
    tol: f64,
    ok: bool,
}

impl Tally {
    fn add(&mut self, worst: &mut f64, residual: f64, scale: f64) {
        let r = residual.max(0.0);
        if r.is_nan() || residual.is_nan() {
            *worst = f64::NAN;
            self.ok = false;
            return;
        }
        *worst = worst.max(r);
        if r > self.tol * (1.0 + scale.abs()) {
            self.ok = false;
        }
    }
}

pub fn check_feasibility(inst: &RadialInstance, st: &PowerFlowState, tol: f64) -> FeasibilityReport {
    assert!(st.matches(inst), "state does not match the instance");
    let topo = inst.topology();
    let at = inst.users_at();
    let m = inst.m();

    let mut rep = FeasibilityReport {
        power_balance: 0.0,
        root_balance: 0.0,
        voltage_drop: 0.0,
        voltage_bounds: 0.0,
        forward_capacity: 0.0,
        reverse_capacity: 0.0,
        current_cap: 0.0,
        cone: 0.0,
        exactness: 0.0,
        bounds: 0.0,
        integrality: 0.0,
        tol,
        relaxed_feasible: false,
        feasible: false,
        integral: false,
    };
    let mut relaxed = Tally { tol, ok: true };

    for j in 1..=m {
        let e = j - 1;
        let line = &inst.lines[e];
        let i = inst.tail(e);
        let (s, l) = (st.s[e], st.l[e]);

        let load: Complex64 = at[j].iter().map(|&k| inst.users[k].demand * st.x[k]).sum();
        let below: Complex64 = topo.children(j).iter().map(|&c| st.s[c - 1]).sum();
        relaxed.add(
            &mut rep.power_balance,
            (s - load - below - line.z * l).norm(),
            s.norm(),
        );

        let drop = st.v[i] + line.z.norm_sqr() * l - 2.0 * (line.z.conj() * s).re;
        relaxed.add(&mut rep.voltage_drop, (st.v[j] - drop).abs(), st.v[j]);

        let b = &inst.bounds[e];
        relaxed.add(&mut rep.voltage_bounds, b.min - st.v[j], b.min);
        relaxed.add(&mut rep.voltage_bounds, st.v[j] - b.max, b.max);

        if line.s_cap.is_finite() {
            relaxed.add(&mut rep.forward_capacity, s.norm() - line.s_cap, line.s_cap);
            relaxed.add(
                &mut rep.reverse_capacity,
                (line.z * l - s).norm() - line.s_cap,
                line.s_cap,
            );
        }
        if line.l_cap.is_finite() {
            relaxed.add(&mut rep.current_cap, l - line.l_cap, line.l_cap);
        }

        let sq = s.norm_sqr();
        relaxed.add(&mut rep.cone, sq - l * st.v[i], sq);
        relaxed.add(&mut rep.bounds, -l, 0.0);
        relaxed.add(&mut rep.bounds, -st.v[j], 0.0);
    }
    relaxed.add(&mut rep.root_balance, (st.s0 + st.s[0]).norm(), st.s0.norm());
    relaxed.add(&mut rep.root_balance, (st.v[0] - inst.v0).abs(), inst.v0);
    for &x in &st.x {
        relaxed.add(&mut rep.bounds, -x, 0.0);
        relaxed.add(&mut rep.bounds, x - 1.0, 0.0);
    }

    let mut exact = Tally { tol, ok: true };
    for e in 0..m {
        let sq = st.s[e].norm_sqr();
        let lv = st.l[e] * st.v[inst.tail(e)];
        exact.add(&mut rep.exactness, (lv - sq).abs(), sq);
    }

    let mut integral = Tally { tol, ok: true };
    for k in inst.inelastic() {
        let x = st.x[k];
        integral.add(&mut rep.integrality, x.abs().min((1.0 - x).abs()), 0.0);
    }

    rep.relaxed_feasible = relaxed.ok;
    rep.feasible = relaxed.ok && exact.ok;
    rep.integral = integral.ok;
    rep
}
