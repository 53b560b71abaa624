use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::instance::RadialInstance;

/// Angle slack when comparing demand phases.
const ANGLE_TOL: f64 = 1e-12;

/// Which modelling assumptions an instance satisfies.
///
/// - `a0`: generation term concave and non-decreasing.
/// - `a0_prime`: additionally non-decreasing in both parts of `s0` after the recorded rotation.
/// - `a1`: every line has non-negative resistance.
/// - `a2`: `v_min ≤ v0 ≤ v_max` at every node.
/// - `a3`: `Re(z_e* s_k) ≥ 0` for every line and user.
/// - `a4`: pairwise demand phase differences at most π/2 and non-negative real parts.
/// - `a4_prime`: every demand lies in the closed first quadrant.
/// - `a5`: the data range is at most quasi-polynomial, see [`ValidationReport::data_range`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub a0: bool,
    pub a0_prime: bool,
    pub a1: bool,
    pub a2: bool,
    pub a3: bool,
    pub a4: bool,
    pub a4_prime: bool,
    pub a5: bool,
    /// Largest of the max/min-positive ratios of resistances, reactances, real demands and
    /// reactive demands (1 when a ratio has no positive entries).
    pub data_range: f64,
    /// `data_range` widened with the impedance scales and the voltage-drop coefficients
    /// `Re(Σ_{P_k ∩ P_j} z* s_k)` of inelastic users, which drive the rounding's running time.
    pub rounding_range: f64,
    pub is_line: bool,
    pub violations: Vec<String>,
}

impl ValidationReport {
    /// Assumptions needed for the relaxation and sweep to be exact.
    pub fn relaxation_ready(&self) -> bool {
        self.a0 && self.a1 && self.a2 && self.a3
    }

    /// Everything the approximation scheme relies on.
    pub fn qptas_ready(&self) -> bool {
        self.relaxation_ready() && self.a4 && self.a5 && self.is_line
    }
}

fn range_ratio(values: impl Iterator<Item = f64>) -> f64 {
    let (mut max, mut min) = (0.0f64, f64::INFINITY);
    for v in values {
        max = max.max(v);
        if v > 0.0 {
            min = min.min(v);
        }
    }
    if min.is_finite() {
        max / min
    } else {
        1.0
    }
}

/// Threshold for "quasi-polynomial": `log2 M ≤ (log2(m + n + 1) + 1)²`.
fn quasi_polynomial(range: f64, m: usize, n: usize) -> bool {
    let size = ((m + n + 1) as f64).log2() + 1.0;
    range.log2() <= size * size
}

pub fn validate_instance(inst: &RadialInstance) -> ValidationReport {
    let mut violations = Vec::new();
    let obj = &inst.objective;

    let concave = obj.generation.is_concave();
    let monotone = obj.generation.is_nondecreasing();
    if !concave {
        violations.push("generation term is not concave".to_string());
    }
    if !monotone {
        violations.push("generation term has a negative slope".to_string());
    }
    let a0 = concave && monotone;
    let angle_ok = (-ANGLE_TOL..=FRAC_PI_2 + ANGLE_TOL).contains(&obj.generation_angle);
    let a0_prime = a0 && angle_ok;

    let mut a1 = true;
    for (e, line) in inst.lines.iter().enumerate() {
        if line.z.re < 0.0 {
            a1 = false;
            violations.push(format!("edge {e} has negative resistance {}", line.z.re));
        }
    }

    let mut a2 = true;
    for (e, b) in inst.bounds.iter().enumerate() {
        if !(b.min <= inst.v0 && inst.v0 <= b.max) {
            a2 = false;
            violations.push(format!(
                "node {}: v0 = {} outside [{}, {}]",
                e + 1,
                inst.v0,
                b.min,
                b.max
            ));
        }
    }

    let mut a3 = true;
    'outer: for (k, u) in inst.users.iter().enumerate() {
        for (e, line) in inst.lines.iter().enumerate() {
            let val = (line.z.conj() * u.demand).re;
            if val < -1e-15 * (line.z.norm() * u.demand.norm()) {
                a3 = false;
                violations.push(format!("Re(z* s) < 0 for edge {e} and user {k}"));
                break 'outer;
            }
        }
    }

    let nonzero: Vec<_> = inst
        .users
        .iter()
        .enumerate()
        .filter(|(_, u)| u.demand.norm() > 0.0)
        .collect();
    let mut a4 = true;
    for &(k, u) in &nonzero {
        if u.demand.re < 0.0 {
            a4 = false;
            violations.push(format!("user {k} has negative real demand"));
        }
    }
    'pairs: for (i, &(k, a)) in nonzero.iter().enumerate() {
        for &(k2, b) in &nonzero[i + 1..] {
            let diff = (a.demand * b.demand.conj()).arg().abs();
            if diff > FRAC_PI_2 + ANGLE_TOL {
                a4 = false;
                violations.push(format!("users {k} and {k2} differ in phase by {diff:.4} rad"));
                break 'pairs;
            }
        }
    }
    let a4_prime = inst
        .users
        .iter()
        .all(|u| u.demand.re >= 0.0 && u.demand.im >= 0.0);

    let data_range = [
        range_ratio(inst.lines.iter().map(|l| l.z.re)),
        range_ratio(inst.lines.iter().map(|l| l.z.im)),
        range_ratio(inst.users.iter().map(|u| u.demand.re)),
        range_ratio(inst.users.iter().map(|u| u.demand.im)),
    ]
    .into_iter()
    .fold(1.0, f64::max);

    let rounding_range = data_range.max(impedance_scale(inst)).max(drop_range(inst));

    let n = inst.user_count();
    let a5 = quasi_polynomial(data_range, inst.m(), n);
    if !a5 {
        violations.push(format!("data range {data_range:.3e} is too wide"));
    }

    let is_line = inst.topology().is_line();

    ValidationReport {
        a0,
        a0_prime,
        a1,
        a2,
        a3,
        a4,
        a4_prime,
        a5,
        data_range,
        rounding_range,
        is_line,
        violations,
    }
}

/// Largest impedance part over the smallest positive one.
fn impedance_scale(inst: &RadialInstance) -> f64 {
    range_ratio(inst.lines.iter().flat_map(|l| [l.z.re, l.z.im]))
}

fn drop_range(inst: &RadialInstance) -> f64 {
    let topo = inst.topology();
    let mut values = Vec::new();
    for k in inst.inelastic() {
        let u = &inst.users[k];
        for j in 1..=inst.m() {
            let z: num_complex::Complex64 = topo
                .common_path(u.node, j)
                .iter()
                .map(|&t| inst.lines[t - 1].z.conj())
                .sum();
            values.push((z * u.demand).re);
        }
    }
    range_ratio(values.into_iter())
}
