//! Second-order cone relaxations of the power flow problem and their solver.
//!
//! The relaxation replaces `ℓ_e = |S_e|² / v_i` by `ℓ_e v_i ≥ |S_e|²`, a rotated
//! second-order cone. [`restore_exactness`] recovers a solution that satisfies the
//! equality again without losing objective value.

pub mod cones;
pub mod ipm;
mod opf;
pub mod program;

use serde::{Deserialize, Serialize};

use crate::model::{evaluate_objective, PowerFlowState, RadialInstance};
use crate::sweep::{check_feasibility, forward_backward_sweep, FeasibilityReport, SweepMode};

pub use ipm::{IpmSettings, IpmSolution, IpmStatus};
pub use opf::FLOOR_SLACK;
pub use program::{Affine, ConeProgram};

/// `Σ_k coefficients · x_k ≤ bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingRow {
    pub coefficients: Vec<(usize, f64)>,
    pub bound: f64,
}

/// The relaxation with some assignments pinned and extra packing rows on the rest.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RestrictedProgram {
    /// `Some(v)` pins `x_k = v`; `None` leaves `x_k ∈ [0, 1]`.
    pub fixed: Vec<Option<f64>>,
    pub packing: Vec<PackingRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Relaxation {
    /// All assignments relaxed to `[0, 1]`.
    Rcopf,
    /// Every assignment fixed.
    CopfFixed(Vec<f64>),
    /// Inelastic assignments fixed; elastic ones free in `[0, 1]`. Entries for elastic
    /// users are ignored.
    CopfInelastic(Vec<f64>),
    RcopfRestricted(RestrictedProgram),
    /// Minimise total squared current with every assignment fixed and the objective
    /// held at `floor` (less [`FLOOR_SLACK`]).
    LossMin { x: Vec<f64>, floor: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationSpec {
    pub relaxation: Relaxation,
    pub settings: IpmSettings,
}

impl RelaxationSpec {
    pub fn new(relaxation: Relaxation) -> Self {
        Self {
            relaxation,
            settings: IpmSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub state: Option<PowerFlowState>,
    /// Objective of the power flow problem at `state` (NaN without a state).
    pub objective: f64,
    /// `max_e (|S_e|² − ℓ_e v_i)⁺`.
    pub cone_residual: f64,
    /// `max_e |ℓ_e v_i − |S_e|²|`.
    pub exactness_residual: f64,
    pub iterations: usize,
    /// The solver stopped short of its target accuracy.
    pub reduced_accuracy: bool,
    /// Human-readable detail on failures and warnings.
    pub message: Option<String>,
}

impl SolveOutcome {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    fn failed(status: SolveStatus, iterations: usize, message: String) -> Self {
        Self {
            status,
            state: None,
            objective: f64::NAN,
            cone_residual: f64::NAN,
            exactness_residual: f64::NAN,
            iterations,
            reduced_accuracy: false,
            message: Some(message),
        }
    }
}

/// Adapter seam for the cone program solver.
pub trait ConicSolver: Sync {
    fn solve(&self, program: &ConeProgram, settings: &IpmSettings) -> IpmSolution;
}

/// The built-in interior-point method.
#[derive(Debug, Clone, Copy, Default)]
pub struct EmbeddedSolver;

impl ConicSolver for EmbeddedSolver {
    fn solve(&self, program: &ConeProgram, settings: &IpmSettings) -> IpmSolution {
        ipm::solve(program, settings)
    }
}

pub fn solve_relaxation(inst: &RadialInstance, spec: &RelaxationSpec) -> SolveOutcome {
    solve_relaxation_with(inst, spec, &EmbeddedSolver)
}

pub fn solve_relaxation_with(
    inst: &RadialInstance,
    spec: &RelaxationSpec,
    solver: &dyn ConicSolver,
) -> SolveOutcome {
    let built = match opf::OpfProgram::build(inst, &spec.relaxation) {
        Ok(b) => b,
        Err(msg) => return SolveOutcome::failed(SolveStatus::NumericalFailure, 0, msg),
    };
    let sol = solver.solve(&built.program, &spec.settings);
    let status = opf::status_from(sol.status);
    match sol.status {
        IpmStatus::Optimal => {}
        IpmStatus::PrimalInfeasible => {
            return SolveOutcome::failed(
                status,
                sol.iterations,
                "infeasible: a dual certificate y, z with Aᵀy + Gᵀz = 0 and bᵀy + hᵀz < 0 was found"
                    .into(),
            )
        }
        IpmStatus::DualInfeasible => {
            return SolveOutcome::failed(status, sol.iterations, "objective unbounded".into())
        }
        IpmStatus::NumericalFailure => {
            return SolveOutcome::failed(
                status,
                sol.iterations,
                format!("solver failed to converge after {} iterations", sol.iterations),
            )
        }
    }
    let state = built.extract(inst, &sol.x);
    let (cone, exact) = cone_residuals(inst, &state);
    SolveOutcome {
        status,
        objective: evaluate_objective(inst, &state),
        cone_residual: cone,
        exactness_residual: exact,
        state: Some(state),
        iterations: sol.iterations,
        reduced_accuracy: sol.reduced_accuracy,
        message: sol
            .reduced_accuracy
            .then(|| "converged to reduced accuracy".to_string()),
    }
}

/// `(max_e (|S_e|² − ℓ_e v_i)⁺, max_e |ℓ_e v_i − |S_e|²|)`.
pub fn cone_residuals(inst: &RadialInstance, st: &PowerFlowState) -> (f64, f64) {
    let mut cone = 0.0f64;
    let mut exact = 0.0f64;
    for e in 0..inst.m() {
        let d = st.s[e].norm_sqr() - st.l[e] * st.v[inst.tail(e)];
        cone = cone.max(d);
        exact = exact.max(d.abs());
    }
    (cone, exact)
}

/// Result of [`restore_exactness`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Restored {
    pub outcome: SolveOutcome,
    /// Objective of the fixed-assignment relaxation the restoration started from.
    pub relaxed_objective: f64,
    pub report: Option<FeasibilityReport>,
    pub sweeps: usize,
}

/// Sweep passes allowed while driving the exactness residual down.
const MAX_SWEEPS: usize = 100;

/// Returns a state for assignment `x` that satisfies `ℓ_e v_i = |S_e|²` and keeps the
/// objective of the fixed-assignment relaxation.
///
/// Solves the relaxation with `x` fixed, then minimises total loss subject to keeping
/// that objective, then applies exact-current sweeps. The first sweep is the one the
/// exactness argument needs; further passes only polish floating-point error and stop
/// once the residual no longer improves. If the loss minimisation fails numerically
/// the sweeps start from the fixed-assignment solution instead.
pub fn restore_exactness(inst: &RadialInstance, x: &[f64], tol: f64) -> Restored {
    restore_exactness_with(inst, x, tol, &EmbeddedSolver, IpmSettings::default())
}

pub fn restore_exactness_with(
    inst: &RadialInstance,
    x: &[f64],
    tol: f64,
    solver: &dyn ConicSolver,
    settings: IpmSettings,
) -> Restored {
    let fixed = solve_relaxation_with(
        inst,
        &RelaxationSpec {
            relaxation: Relaxation::CopfFixed(x.to_vec()),
            settings,
        },
        solver,
    );
    if !fixed.is_optimal() {
        return Restored {
            relaxed_objective: f64::NAN,
            outcome: fixed,
            report: None,
            sweeps: 0,
        };
    }
    let floor = fixed.objective;
    let lossmin = solve_relaxation_with(
        inst,
        &RelaxationSpec {
            relaxation: Relaxation::LossMin {
                x: x.to_vec(),
                floor,
            },
            settings,
        },
        solver,
    );
    let mut messages = Vec::new();
    let baseline = match (&lossmin.state, lossmin.is_optimal()) {
        (Some(st), true) => st.clone(),
        _ => {
            messages.push("loss minimisation failed; sweeping the relaxed solution".to_string());
            fixed.state.clone().expect("optimal outcome carries a state")
        }
    };
    let reduced = fixed.reduced_accuracy || lossmin.reduced_accuracy;

    let mut state = baseline;
    let mut best_residual = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        let next = match forward_backward_sweep(inst, x, &state, SweepMode::ExactCurrent) {
            Ok(s) => s,
            Err(e) => {
                messages.push(format!("sweep failed: {e}"));
                break;
            }
        };
        sweeps += 1;
        let (_, residual) = cone_residuals(inst, &next);
        if residual >= best_residual {
            break;
        }
        state = next;
        best_residual = residual;
        if residual <= 1e-14 {
            break;
        }
    }

    let report = check_feasibility(inst, &state, tol);
    let loose = check_feasibility(inst, &state, 10.0 * tol);
    if !loose.feasible {
        messages.push(format!(
            "restored state fails feasibility at {:.1e}",
            10.0 * tol
        ));
    }
    let (cone, exact) = cone_residuals(inst, &state);
    let objective = evaluate_objective(inst, &state);
    Restored {
        outcome: SolveOutcome {
            status: SolveStatus::Optimal,
            objective,
            cone_residual: cone,
            exactness_residual: exact,
            state: Some(state),
            iterations: fixed.iterations + lossmin.iterations,
            reduced_accuracy: reduced,
            message: (!messages.is_empty()).then(|| messages.join("; ")),
        },
        relaxed_objective: floor,
        report: Some(report),
        sweeps,
    }
}
