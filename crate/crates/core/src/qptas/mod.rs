//! Approximation scheme for line networks.
//!
//! The inelastic users are rewritten as a 3-dimensional packing problem. For each
//! guess of large users and small-user peaks the restricted relaxation is solved, the
//! small users of every group are rounded under a restricted profile, and the
//! assignment with the best fixed-assignment objective is restored to an exact state.

mod guess;
mod reduce;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use guess::{
    enumerate_guesses, guess_count_log10, max_large, oracle_guess, reference_peaks,
    sandwich_holds, GroupGuess, GuessConfig,
};
pub use reduce::{leaf_knapsack_bound, reduce_to_gufp, LeafSlack, LineReduction};

use crate::conic::{
    restore_exactness_with, solve_relaxation_with, ConicSolver, EmbeddedSolver, IpmSettings,
    PackingRow, Relaxation, RelaxationSpec, RestrictedProgram, SolveStatus,
};
use crate::gufp::{
    build_partition, enumerate_profiles, group_users, modify, modify_with_profile,
    reciprocal_eps, restricted_profile_from_fractional, EdgePartition, GufpError, Grouping,
    IntervalDemands, LevelGrid, ModifyOutcome,
};
use crate::model::{
    evaluate_objective, rotate_instance, rotation_angle, unrotate_state, ModelError,
    PowerFlowState, RadialInstance,
};
use crate::sweep::{check_feasibility, FeasibilityReport, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QptasError {
    #[error("target ε must lie in (0, 1), got {0}")]
    BadEps(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Gufp(#[from] GufpError),
    #[error("full enumeration needs about 10^{log10:.1} guesses, above the cap of {cap:e}; use capped or oracle mode")]
    TooManyGuesses { log10: f64, cap: f64 },
    #[error("reference assignment has {found} entries, the instance has {expected} users")]
    HintLength { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GuessMode {
    /// Every guess, refused when the estimated count exceeds the cap.
    Full,
    /// The first `n` guesses in enumeration order.
    Capped(usize),
    /// Only the guess induced by a reference assignment (indexed by instance user).
    OracleGuess(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ProfileMode {
    /// The profile obtained by rounding the fractional load down to the lattice.
    FromFractional,
    /// Additionally try up to `limit` lattice profiles below the fractional load and
    /// keep the best rounding.
    Enumerate { limit: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QptasConfig {
    /// Target approximation parameter `ε′`.
    pub eps_target: f64,
    /// Interval growth constant `C_r`, shared by all dimensions.
    pub growth: f64,
    pub mode: GuessMode,
    pub profiles: ProfileMode,
    pub settings: IpmSettings,
    /// Feasibility tolerance for the restored state.
    pub tol: f64,
    /// Largest guess count full enumeration accepts.
    pub full_cap: f64,
}

impl QptasConfig {
    pub fn new(eps_target: f64, mode: GuessMode) -> Self {
        Self {
            eps_target,
            growth: 2.0,
            mode,
            profiles: ProfileMode::FromFractional,
            settings: IpmSettings::default(),
            tol: DEFAULT_TOL,
            full_cap: 1e6,
        }
    }
}

/// Everything about an instance the guesses share: the reduction, partition,
/// grouping and level grid at the internal `ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QptasPlan {
    pub reduction: LineReduction,
    pub partition: EdgePartition,
    pub demands: IntervalDemands,
    pub grouping: Grouping,
    pub grid: LevelGrid,
    /// Internal `ε`, the reciprocal of an integer.
    pub eps: f64,
    pub beta: f64,
}

/// Rounds of `ε ← ε′/(3(2β+1))`; `β` depends on `ε` through the grouping.
const BETA_ROUNDS: usize = 32;

impl QptasPlan {
    /// Fixes the internal `ε` by iterating `ε = ε′/(3(2β+1))` (rounded down to a
    /// reciprocal) until it stops shrinking.
    pub fn new(inst: &RadialInstance, eps_target: f64, growth: f64) -> Result<Self, QptasError> {
        if !(eps_target > 0.0 && eps_target < 1.0) {
            return Err(QptasError::BadEps(eps_target));
        }
        let reduction = reduce_to_gufp(inst, &vec![0.0; inst.user_count()])?;
        let g = &reduction.gufp;
        let partition = build_partition(g, &vec![growth; g.d()]);
        let mut eps = reciprocal_eps(eps_target / 3.0);
        let mut grouping = group_users(g, &partition, eps);
        let mut beta = grouping.beta(&partition);
        for _ in 0..BETA_ROUNDS {
            let next = reciprocal_eps(eps_target / (3.0 * (2.0 * beta + 1.0)));
            if next >= eps {
                break;
            }
            eps = next;
            grouping = group_users(g, &partition, eps);
            beta = grouping.beta(&partition);
        }
        let demands = IntervalDemands::new(g, &partition);
        let grid = LevelGrid::new(g, &grouping.survivors, eps);
        Ok(Self {
            reduction,
            partition,
            demands,
            grouping,
            grid,
            eps,
            beta,
        })
    }

    /// The restricted relaxation of a guess: large users pinned to one, users outside
    /// every large and small set pinned to zero, small users with demand on an
    /// interval of zero peak pinned to zero, and one peak row per positive peak.
    pub fn restricted_program(&self, inst: &RadialInstance, guess: &GuessConfig) -> RestrictedProgram {
        let mut fixed: Vec<Option<f64>> = inst
            .users
            .iter()
            .map(|u| u.is_inelastic().then_some(0.0))
            .collect();
        let mut packing = Vec::new();
        for gg in &guess.groups {
            for &k in &gg.large {
                fixed[self.reduction.users[k]] = Some(1.0);
            }
            let free: Vec<usize> = gg
                .small
                .iter()
                .copied()
                .filter(|&k| {
                    gg.peaks.iter().enumerate().all(|(r, hs)| {
                        hs.iter()
                            .enumerate()
                            .all(|(p, &h)| h > 0.0 || self.demands.upper[k][r][p] == 0.0)
                    })
                })
                .collect();
            for &k in &free {
                fixed[self.reduction.users[k]] = None;
            }
            for (r, hs) in gg.peaks.iter().enumerate() {
                for (p, &h) in hs.iter().enumerate() {
                    if h <= 0.0 {
                        continue;
                    }
                    let coefficients: Vec<(usize, f64)> = free
                        .iter()
                        .map(|&k| (self.reduction.users[k], self.demands.upper[k][r][p]))
                        .filter(|&(_, a)| a > 0.0)
                        .collect();
                    if !coefficients.is_empty() {
                        packing.push(PackingRow { coefficients, bound: h });
                    }
                }
            }
        }
        RestrictedProgram { fixed, packing }
    }
}

/// Outcome of rounding one guess.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuessOutcome {
    /// Objective of the restricted relaxation.
    pub relaxed_value: f64,
    /// The assembled assignment.
    pub x_bar: Vec<f64>,
    /// Objective of the fixed-assignment relaxation at `x_bar`.
    pub value: f64,
    /// Users dropped by the floating-point repair inside the rounding.
    pub repaired: usize,
}

/// Solves the restricted relaxation of `guess`, rounds every group's small users and
/// evaluates the assembled assignment. `None` when either relaxation fails.
pub fn evaluate_guess(
    inst: &RadialInstance,
    plan: &QptasPlan,
    guess: &GuessConfig,
    profiles: ProfileMode,
    settings: IpmSettings,
    solver: &dyn ConicSolver,
) -> Option<GuessOutcome> {
    let restricted = solve_relaxation_with(
        inst,
        &RelaxationSpec {
            relaxation: Relaxation::RcopfRestricted(plan.restricted_program(inst, guess)),
            settings,
        },
        solver,
    );
    if !restricted.is_optimal() {
        return None;
    }
    let x_prime = &restricted.state.as_ref()?.x;
    let mut x_bar: Vec<f64> = x_prime.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let mut repaired = 0;
    for (q, gg) in guess.groups.iter().enumerate() {
        let users = &gg.small;
        if plan.grouping.groups[q].is_degenerate() {
            // no demand in any dimension
            for &k in users {
                x_bar[plan.reduction.users[k]] = 1.0;
            }
            continue;
        }
        let xt: Vec<f64> = users.iter().map(|&k| x_bar[plan.reduction.users[k]]).collect();
        let out = round_group(plan, users, &xt, &gg.peaks, profiles)?;
        repaired += out.repaired;
        for (&k, &v) in users.iter().zip(&out.x_hat) {
            x_bar[plan.reduction.users[k]] = v;
        }
    }
    let fixed = solve_relaxation_with(
        inst,
        &RelaxationSpec {
            relaxation: Relaxation::CopfFixed(x_bar.clone()),
            settings,
        },
        solver,
    );
    fixed.is_optimal().then(|| GuessOutcome {
        relaxed_value: restricted.objective,
        x_bar,
        value: fixed.objective,
        repaired,
    })
}

fn round_group(
    plan: &QptasPlan,
    users: &[usize],
    xt: &[f64],
    peaks: &[Vec<f64>],
    profiles: ProfileMode,
) -> Option<ModifyOutcome> {
    let g = &plan.reduction.gufp;
    let base = modify(g, &plan.partition, users, xt, peaks, plan.eps).ok()?;
    let ProfileMode::Enumerate { limit } = profiles else {
        return Some(base);
    };
    let ceiling = restricted_profile_from_fractional(g, &plan.partition, peaks, plan.eps, users, xt).ok()?;
    let mut best = base;
    let mut best_value = utility(g, users, &best.x_hat);
    for profile in enumerate_profiles(peaks, plan.eps, &ceiling.values, limit).ok()? {
        let out = modify_with_profile(g, &plan.partition, users, xt, peaks, plan.eps, profile);
        // the greedy removal must already fit under the profile
        let fits = (0..g.d()).all(|r| {
            (0..g.edges).all(|pos| {
                let load: f64 = users
                    .iter()
                    .zip(&out.x_removed)
                    .map(|(&k, &v)| g.demand(k, r, pos) * v)
                    .sum();
                load <= out.profile.values[r][pos] * (1.0 + 1e-12) + 1e-15
            })
        });
        let value = utility(g, users, &out.x_hat);
        if fits && value > best_value {
            best_value = value;
            best = out;
        }
    }
    Some(best)
}

fn utility(g: &crate::gufp::GufpInstance, users: &[usize], x: &[f64]) -> f64 {
    users.iter().zip(x).map(|(&k, v)| g.users[k].utility * v).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QptasResult {
    pub status: SolveStatus,
    /// Exact state in the frame of the input instance.
    pub state: Option<PowerFlowState>,
    pub value: f64,
    pub assignment: Vec<f64>,
    pub report: Option<FeasibilityReport>,
    pub guesses_evaluated: usize,
    pub guesses_feasible: usize,
    /// `log10` of the full enumeration's guess count.
    pub guess_count_log10: f64,
    /// Enumeration index of the winning guess.
    pub best_guess: Option<usize>,
    /// Restricted relaxation value of the winning guess.
    pub relaxed_value: f64,
    pub eps_internal: f64,
    pub beta: f64,
    pub groups: usize,
    /// Every guess failed and the result comes from dropping all inelastic users.
    pub fallback: bool,
    pub repaired: usize,
}

pub fn qptas_solve(inst: &RadialInstance, cfg: &QptasConfig) -> Result<QptasResult, QptasError> {
    qptas_solve_with(inst, cfg, &EmbeddedSolver)
}

/// Runs the scheme on a line instance. The instance is rotated internally so every
/// demand lies in the first quadrant; the returned state is in the input's frame.
pub fn qptas_solve_with(
    inst: &RadialInstance,
    cfg: &QptasConfig,
    solver: &dyn ConicSolver,
) -> Result<QptasResult, QptasError> {
    if !inst.topology().is_line() {
        return Err(GufpError::NotLine.into());
    }
    let rotation = rotation_angle(inst)?;
    let rotated = rotate_instance(inst, rotation);
    let plan = QptasPlan::new(&rotated, cfg.eps_target, cfg.growth)?;
    let estimate = guess_count_log10(&plan);

    let guesses = match &cfg.mode {
        GuessMode::Full => {
            if estimate > cfg.full_cap.log10() {
                return Err(QptasError::TooManyGuesses {
                    log10: estimate,
                    cap: cfg.full_cap,
                });
            }
            enumerate_guesses(&plan, cfg.full_cap as usize)
        }
        GuessMode::Capped(n) => enumerate_guesses(&plan, *n),
        GuessMode::OracleGuess(hint) => {
            if hint.len() != inst.user_count() {
                return Err(QptasError::HintLength {
                    expected: inst.user_count(),
                    found: hint.len(),
                });
            }
            vec![oracle_guess(&plan, hint)]
        }
    };

    let outcomes: Vec<Option<GuessOutcome>> = guesses
        .par_iter()
        .map(|g| evaluate_guess(&rotated, &plan, g, cfg.profiles, cfg.settings, solver))
        .collect();
    let mut best: Option<usize> = None;
    for (i, o) in outcomes.iter().enumerate() {
        if let Some(o) = o {
            if best.is_none_or(|b| o.value > outcomes[b].as_ref().map_or(f64::NEG_INFINITY, |c| c.value)) {
                best = Some(i);
            }
        }
    }
    let feasible = outcomes.iter().filter(|o| o.is_some()).count();
    let repaired = outcomes.iter().flatten().map(|o| o.repaired).sum();

    let (x_bar, relaxed_value, fallback) = match best {
        Some(i) => {
            let o = outcomes[i].as_ref().expect("best guess is feasible");
            (o.x_bar.clone(), o.relaxed_value, false)
        }
        None => {
            let zeros = vec![0.0; inst.user_count()];
            let free = solve_relaxation_with(
                &rotated,
                &RelaxationSpec {
                    relaxation: Relaxation::CopfInelastic(zeros.clone()),
                    settings: cfg.settings,
                },
                solver,
            );
            let x = free.state.map_or(zeros, |s| {
                s.x.iter()
                    .zip(&inst.users)
                    .map(|(&v, u)| if u.is_inelastic() { 0.0 } else { v.clamp(0.0, 1.0) })
                    .collect()
            });
            (x, f64::NAN, true)
        }
    };

    let restored = restore_exactness_with(&rotated, &x_bar, cfg.tol, solver, cfg.settings);
    let state = restored
        .outcome
        .state
        .as_ref()
        .map(|s| unrotate_state(s, rotation));
    let report = state.as_ref().map(|s| check_feasibility(inst, s, cfg.tol));
    let value = state.as_ref().map_or(f64::NEG_INFINITY, |s| evaluate_objective(inst, s));
    Ok(QptasResult {
        status: restored.outcome.status,
        assignment: state.as_ref().map_or(x_bar, |s| s.x.clone()),
        state,
        value,
        report,
        guesses_evaluated: guesses.len(),
        guesses_feasible: feasible,
        guess_count_log10: estimate,
        best_guess: best,
        relaxed_value,
        eps_internal: plan.eps,
        beta: plan.beta,
        groups: plan.grouping.groups.len(),
        fallback,
        repaired,
    })
}
