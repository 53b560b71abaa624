//! Exhaustive reference solvers for small instances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::{
    restore_exactness_with, solve_relaxation_with, ConicSolver, EmbeddedSolver, IpmSettings,
    Relaxation, RelaxationSpec, Restored, SolveStatus,
};
use crate::gufp::{capacity_slack, check_gufp_feasible, GufpInstance};
use crate::model::RadialInstance;
use crate::sweep::DEFAULT_TOL;

/// Default cap on the number of inelastic users for [`brute_force_opf`].
pub const OPF_LIMIT: usize = 14;
/// Default cap on the number of users for [`brute_force_gufp`].
pub const GUFP_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{count} candidates to enumerate exceeds the limit of {limit}")]
    TooLarge { count: usize, limit: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Best assignment over all users; `NaN`-free, zero when nothing is feasible.
    pub assignment: Vec<f64>,
    /// Best objective (power flow) or utility (packing); `−∞` when nothing is feasible.
    pub value: f64,
    pub subproblems: usize,
    /// Status of each subproblem, indexed by the subset bit mask.
    pub statuses: Vec<SolveStatus>,
    /// Exact power flow state for the best assignment (power flow oracle only).
    pub restored: Option<Restored>,
}

impl OracleResult {
    pub fn is_feasible(&self) -> bool {
        self.value.is_finite()
    }
}

/// Optimum over every binary choice of the inelastic users.
///
/// Each subset is solved as the relaxation with inelastic users fixed and elastic ones
/// free; the relaxation is exact, so its optimum is the optimum of that subset. The
/// best subset is then restored to an exact state.
pub fn brute_force_opf(inst: &RadialInstance, limit: usize) -> Result<OracleResult, OracleError> {
    brute_force_opf_with(inst, limit, &EmbeddedSolver, IpmSettings::default())
}

pub fn brute_force_opf_with(
    inst: &RadialInstance,
    limit: usize,
    solver: &dyn ConicSolver,
    settings: IpmSettings,
) -> Result<OracleResult, OracleError> {
    let inelastic: Vec<usize> = inst.inelastic().collect();
    if inelastic.len() > limit {
        return Err(OracleError::TooLarge {
            count: inelastic.len(),
            limit,
        });
    }
    let masks = 1usize << inelastic.len();
    let assignment = |mask: usize| {
        let mut x = vec![0.0; inst.user_count()];
        for (bit, &k) in inelastic.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                x[k] = 1.0;
            }
        }
        x
    };
    let outcomes: Vec<_> = (0..masks)
        .into_par_iter()
        .map(|mask| {
            let spec = RelaxationSpec {
                relaxation: Relaxation::CopfInelastic(assignment(mask)),
                settings,
            };
            solve_relaxation_with(inst, &spec, solver)
        })
        .collect();

    let mut best: Option<usize> = None;
    for (mask, out) in outcomes.iter().enumerate() {
        if out.is_optimal() && best.is_none_or(|b| out.objective > outcomes[b].objective) {
            best = Some(mask);
        }
    }
    let statuses = outcomes.iter().map(|o| o.status).collect();
    let Some(mask) = best else {
        return Ok(OracleResult {
            assignment: vec![0.0; inst.user_count()],
            value: f64::NEG_INFINITY,
            subproblems: masks,
            statuses,
            restored: None,
        });
    };
    let relaxed = outcomes[mask].state.as_ref().expect("optimal outcome carries a state");
    let mut x = assignment(mask);
    for k in inst.elastic() {
        x[k] = relaxed.x[k].clamp(0.0, 1.0);
    }
    let restored = restore_exactness_with(inst, &x, DEFAULT_TOL, solver, settings);
    Ok(OracleResult {
        assignment: x,
        value: outcomes[mask].objective,
        subproblems: masks,
        statuses,
        restored: Some(restored),
    })
}

/// Maximum-utility feasible subset, enumerated in Gray-code order so each step updates
/// the loads of a single user.
///
/// The subsets are split by their top bits across workers. Loads near a capacity are
/// re-checked from scratch so verdicts do not depend on accumulated rounding.
pub fn brute_force_gufp(g: &GufpInstance, limit: usize) -> Result<OracleResult, OracleError> {
    let n = g.user_count();
    if n > limit {
        return Err(OracleError::TooLarge { count: n, limit });
    }
    let high = n.min(6);
    let low = n - high;
    // demand table: demand[k][r * edges + pos]
    let width = g.d() * g.edges;
    let demand: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            (0..g.d())
                .flat_map(|r| (0..g.edges).map(move |pos| (r, pos)))
                .map(|(r, pos)| g.demand(k, r, pos))
                .collect()
        })
        .collect();
    let caps: Vec<f64> = (0..g.d())
        .flat_map(|r| g.dims[r].capacity.iter().copied())
        .collect();
    let subset = |mask: usize| -> Vec<f64> {
        (0..n).map(|k| f64::from((mask >> k & 1) as u32)).collect()
    };

    let chunks: Vec<Vec<(usize, bool)>> = (0..1usize << high)
        .into_par_iter()
        .map(|top| {
            let base = top << low;
            let mut load = vec![0.0; width];
            for k in 0..n {
                if base >> k & 1 == 1 {
                    for (l, d) in load.iter_mut().zip(&demand[k]) {
                        *l += d;
                    }
                }
            }
            let mut mask = base;
            let mut out = Vec::with_capacity(1 << low);
            for step in 0..1usize << low {
                if step > 0 {
                    let k = step.trailing_zeros() as usize;
                    mask ^= 1 << k;
                    let sign = if mask >> k & 1 == 1 { 1.0 } else { -1.0 };
                    for (l, d) in load.iter_mut().zip(&demand[k]) {
                        *l += sign * d;
                    }
                }
                let mut borderline = false;
                let mut ok = true;
                for (l, c) in load.iter().zip(&caps) {
                    let excess = l - c - capacity_slack(*c);
                    if excess.abs() <= 1e-9 * (1.0 + c.abs()) {
                        borderline = true;
                    } else if excess > 0.0 {
                        ok = false;
                        break;
                    }
                }
                if ok && borderline {
                    ok = check_gufp_feasible(g, &subset(mask));
                }
                out.push((mask, ok));
            }
            out
        })
        .collect();

    let mut statuses = vec![SolveStatus::Infeasible; 1 << n];
    let mut best: Option<(usize, f64)> = None;
    for (mask, ok) in chunks.into_iter().flatten() {
        if !ok {
            continue;
        }
        statuses[mask] = SolveStatus::Optimal;
        let value: f64 = (0..n)
            .filter(|&k| mask >> k & 1 == 1)
            .map(|k| g.users[k].utility)
            .sum();
        let better = match best {
            None => true,
            Some((m, v)) => value > v || (value == v && mask < m),
        };
        if better {
            best = Some((mask, value));
        }
    }
    let (mask, value) = best.unwrap_or((0, f64::NEG_INFINITY));
    Ok(OracleResult {
        assignment: subset(mask),
        value,
        subproblems: 1 << n,
        statuses,
        restored: None,
    })
}
