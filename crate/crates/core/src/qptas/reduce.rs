use serde::{Deserialize, Serialize};

use crate::gufp::{Dimension, GufpError, GufpInstance, GufpUser, Orientation, SeparableStepFunction};
use crate::model::{PowerFlowState, RadialInstance};

/// A line instance rewritten as a 3-dimensional packing problem over its inelastic
/// users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineReduction {
    pub gufp: GufpInstance,
    /// Instance index of each packing user.
    pub users: Vec<usize>,
}

impl LineReduction {
    /// Packing assignment read off an instance assignment.
    pub fn restrict(&self, x: &[f64]) -> Vec<f64> {
        self.users.iter().map(|&k| x[k]).collect()
    }
}

/// Builds the packing instance whose feasible sets are the inelastic selections that
/// keep the voltage-drop and subtree-load expressions below those of `x_prime`.
///
/// Dimension 0 is `Re(Σ_{P_k ∩ P_j} z* s_k)` in root-outward order with the cumulative
/// resistance and reactance as bases. Dimensions 1 and 2 are the real and imaginary
/// parts of `s_k` on every edge above the user, in reversed order. Capacities are the
/// loads of `x_prime`. Edge `e` is the edge into node `e + 1`.
pub fn reduce_to_gufp(inst: &RadialInstance, x_prime: &[f64]) -> Result<LineReduction, GufpError> {
    if !inst.topology().is_line() {
        return Err(GufpError::NotLine);
    }
    let m = inst.m();
    let mut resistance = Vec::with_capacity(m);
    let mut reactance = Vec::with_capacity(m);
    let (mut re, mut im) = (0.0, 0.0);
    for line in &inst.lines {
        re += line.z.re;
        im += line.z.im;
        resistance.push(re);
        reactance.push(im);
    }
    let users: Vec<usize> = inst.inelastic().collect();
    let gusers = users
        .iter()
        .map(|&k| {
            let u = &inst.users[k];
            let s = u.demand;
            if u.node == 0 {
                // served at the feeder bus: loads no edge
                let zero = |terms: usize| SeparableStepFunction {
                    coefficients: vec![0.0; terms],
                    start: 0,
                    saturation: 0,
                };
                return GufpUser {
                    utility: u.utility,
                    demands: vec![zero(2), zero(1), zero(1)],
                };
            }
            let below = m - u.node;
            GufpUser {
                utility: u.utility,
                demands: vec![
                    SeparableStepFunction {
                        coefficients: vec![s.re, s.im],
                        start: 0,
                        saturation: u.node - 1,
                    },
                    SeparableStepFunction {
                        coefficients: vec![s.re],
                        start: below,
                        saturation: below,
                    },
                    SeparableStepFunction {
                        coefficients: vec![s.im],
                        start: below,
                        saturation: below,
                    },
                ],
            }
        })
        .collect();
    let dims = vec![
        Dimension {
            orientation: Orientation::Forward,
            bases: vec![resistance, reactance],
            capacity: vec![0.0; m],
        },
        Dimension {
            orientation: Orientation::Reversed,
            bases: vec![vec![1.0; m]],
            capacity: vec![0.0; m],
        },
        Dimension {
            orientation: Orientation::Reversed,
            bases: vec![vec![1.0; m]],
            capacity: vec![0.0; m],
        },
    ];
    let mut gufp = GufpInstance::new(m, dims, gusers)?;
    gufp.population = inst.user_count();
    let xs: Vec<f64> = users.iter().map(|&k| x_prime[k]).collect();
    for r in 0..gufp.d() {
        gufp.dims[r].capacity = gufp.load(r, &xs);
    }
    gufp.check()?;
    Ok(LineReduction { gufp, users })
}

/// One leaf's voltage floor written as a knapsack row over the inelastic users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafSlack {
    pub leaf: usize,
    /// `2 Σ_{k∈I} ρ_{k,j} x̄_k`.
    pub load: f64,
    /// `c_j`: what is left of `v0 − v̲_j` after losses and elastic users.
    pub capacity: f64,
    /// `load − capacity`; non-positive exactly when the floor at the leaf holds.
    pub slack: f64,
}

/// Evaluates the voltage floor at every leaf for assignment `x_bar` with the currents
/// of `baseline` held fixed.
///
/// `ρ_{k,j} = Re(Σ_{P_k ∩ P_j} z* s_k)` and
/// `c_j = v0 − v̲_j − (2 Σ_{t∈P_j} Re(z_t* Σ_{c below t} z_c ℓ_c) + Σ_{P_j} |z|² ℓ) − 2 Σ_{k∈F} ρ_{k,j} x̄_k`.
/// The slack equals `v̲_j` minus the leaf voltage of the current-preserving sweep.
pub fn leaf_knapsack_bound(
    inst: &RadialInstance,
    x_bar: &[f64],
    baseline: &PowerFlowState,
) -> Vec<LeafSlack> {
    let topo = inst.topology();
    let m = inst.m();
    let l = &baseline.l;
    topo.leaves()
        .into_iter()
        .map(|j| {
            let mut losses = 0.0;
            for &t in topo.path(j) {
                let z = inst.lines[t - 1].z;
                let below: num_complex::Complex64 = (1..=m)
                    .filter(|&c| c != t && topo.in_subtree(c, t))
                    .map(|c| inst.lines[c - 1].z * l[c - 1])
                    .sum();
                losses += 2.0 * (z.conj() * below).re + z.norm_sqr() * l[t - 1];
            }
            let (mut load, mut elastic) = (0.0, 0.0);
            for (k, u) in inst.users.iter().enumerate() {
                let z: num_complex::Complex64 = topo
                    .common_path(u.node, j)
                    .iter()
                    .map(|&t| inst.lines[t - 1].z.conj())
                    .sum();
                let rho = (z * u.demand).re;
                if u.is_inelastic() {
                    load += 2.0 * rho * x_bar[k];
                } else {
                    elastic += 2.0 * rho * x_bar[k];
                }
            }
            let capacity = inst.v0 - inst.bounds[j - 1].min - losses - elastic;
            LeafSlack {
                leaf: j,
                load,
                capacity,
                slack: load - capacity,
            }
        })
        .collect()
}
