#![allow(dead_code)]

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use dopf::conic::{ConeProgram, ConicSolver, IpmSettings, IpmSolution, IpmStatus};
use dopf::gufp::{Dimension, GufpInstance, GufpUser, Orientation, SeparableStepFunction};
use dopf::model::{Line, ObjectiveSpec, PiecewiseLinear, RadialInstance, User, VoltageBounds};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reference SOCP solver used to cross-check the embedded one.
pub struct Clarabel;

impl ConicSolver for Clarabel {
    fn solve(&self, prog: &ConeProgram, _settings: &IpmSettings) -> IpmSolution {
        let n = prog.num_vars;
        let mut q = vec![0.0; n];
        for &(v, c) in &prog.objective.terms {
            q[v] += c;
        }
        let (mut ii, mut jj, mut vv, mut b) = (vec![], vec![], vec![], vec![]);
        let mut row = 0;
        for e in &prog.equalities {
            for &(v, c) in &e.terms {
                ii.push(row);
                jj.push(v);
                vv.push(c);
            }
            b.push(-e.constant);
            row += 1;
        }
        for e in prog.cone_rows() {
            for &(v, c) in &e.terms {
                ii.push(row);
                jj.push(v);
                vv.push(-c);
            }
            b.push(e.constant);
            row += 1;
        }
        let a = CscMatrix::new_from_triplets(row, n, ii, jj, vv);
        let p = CscMatrix::zeros((n, n));
        let mut cones = vec![];
        if !prog.equalities.is_empty() {
            cones.push(SupportedConeT::ZeroConeT(prog.equalities.len()));
        }
        if !prog.nonneg.is_empty() {
            cones.push(SupportedConeT::NonnegativeConeT(prog.nonneg.len()));
        }
        for s in &prog.socs {
            cones.push(SupportedConeT::SecondOrderConeT(s.len()));
        }
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .tol_gap_abs(1e-10)
            .tol_gap_rel(1e-10)
            .tol_feas(1e-10)
            .build()
            .unwrap();
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings).unwrap();
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => IpmStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                IpmStatus::PrimalInfeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                IpmStatus::DualInfeasible
            }
            _ => IpmStatus::NumericalFailure,
        };
        IpmSolution {
            status,
            x: sol.x.clone(),
            y: vec![],
            z: sol.z.clone(),
            s: sol.s.clone(),
            primal_objective: sol.obj_val + prog.objective.constant,
            dual_objective: sol.obj_val_dual + prog.objective.constant,
            iterations: sol.iterations as usize,
            pres: sol.r_prim,
            dres: sol.r_dual,
            gap: 0.0,
            reduced_accuracy: sol.status == SolverStatus::AlmostSolved,
        }
    }
}

/// Random radial tree (not necessarily a line) satisfying the modelling assumptions.
pub fn random_tree(seed: u64, m: usize, n: usize) -> RadialInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parents: Vec<usize> = (1..=m)
        .map(|j| if j == 1 { 0 } else { rng.gen_range(1..j) })
        .collect();
    let lines = (0..m)
        .map(|_| {
            let z = Complex64::from_polar(rng.gen_range(0.002..0.02), rng.gen_range(0.2..1.2));
            Line::new(z, rng.gen_range(0.5..3.0), rng.gen_range(1.0..8.0))
        })
        .collect();
    let users: Vec<User> = (0..n)
        .map(|k| {
            let node = rng.gen_range(1..=m);
            let s = Complex64::from_polar(rng.gen_range(0.05..0.5), rng.gen_range(0.0..0.6));
            if k % 3 == 2 {
                User::elastic(node, s)
            } else {
                User::inelastic(node, s, rng.gen_range(1.0..10.0))
            }
        })
        .collect();
    let generation = PiecewiseLinear::linear(1.0);
    let m_shift = ObjectiveSpec::default_shift(&generation, &users, &[]);
    let mut objective = ObjectiveSpec {
        generation,
        m_shift,
        ..ObjectiveSpec::utility_only()
    };
    for (k, u) in users.iter().enumerate() {
        if !u.is_inelastic() {
            objective.elastic_weights.insert(k, 2.0);
        }
    }
    RadialInstance::new(
        1.0,
        &parents,
        lines,
        vec![VoltageBounds::nominal(); m],
        users,
        objective,
    )
    .unwrap()
}

/// Random assignment in `[0, 1]` (integral for inelastic users when `integral`).
pub fn random_assignment(inst: &RadialInstance, seed: u64, integral: bool) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    inst.users
        .iter()
        .map(|u| {
            if integral && u.is_inelastic() {
                if rng.gen_bool(0.5) {
                    1.0
                } else {
                    0.0
                }
            } else {
                rng.gen_range(0.0..1.0)
            }
        })
        .collect()
}

/// Random monotone series of length `n`, optionally starting with zeros.
fn monotone(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let zeros = if rng.gen_bool(0.3) { rng.gen_range(0..n) } else { 0 };
    let mut acc = 0.0;
    (0..n)
        .map(|i| {
            if i >= zeros {
                acc += if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..3.0) };
            }
            acc
        })
        .collect()
}

/// Random `d`-dimensional packing instance whose capacities are a random fraction of
/// the load of all users, so the linear relaxation is typically fractional.
pub fn random_gufp(seed: u64, edges: usize, d: usize, users: usize) -> GufpInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims: Vec<Dimension> = (0..d)
        .map(|_| {
            let terms = rng.gen_range(1..=2);
            Dimension {
                orientation: if rng.gen_bool(0.5) {
                    Orientation::Forward
                } else {
                    Orientation::Reversed
                },
                bases: (0..terms).map(|_| monotone(&mut rng, edges)).collect(),
                capacity: vec![0.0; edges],
            }
        })
        .collect();
    let us: Vec<GufpUser> = (0..users)
        .map(|_| GufpUser {
            utility: rng.gen_range(0.5..10.0),
            demands: dims
                .iter()
                .map(|dim| {
                    let start = rng.gen_range(0..edges);
                    SeparableStepFunction {
                        coefficients: (0..dim.terms())
                            .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.1..2.0) })
                            .collect(),
                        start,
                        saturation: rng.gen_range(start..edges),
                    }
                })
                .collect(),
        })
        .collect();
    let mut g = GufpInstance::new(edges, dims, us).unwrap();
    let all = vec![1.0; users];
    let share = rng.gen_range(0.3..0.7);
    for r in 0..d {
        g.dims[r].capacity = g.load(r, &all).iter().map(|l| l * share).collect();
    }
    g
}

/// What one group's rounding looked like against the rounding lemma.
#[derive(Debug)]
pub struct ModifyCheck {
    /// Rounded load ≤ profile ≤ fractional load on every position of every dimension.
    pub dominated: bool,
    pub loss: f64,
    pub bound: f64,
    pub support: usize,
    pub support_bound: f64,
}

/// Solves the linear relaxation of `g`, groups its users and rounds every
/// non-degenerate group with `modify`, reporting each group's conditions. The
/// smallness threshold of an interval is the largest `f̲` among the group's users,
/// the least value for which they all count as small.
pub fn modify_checks(g: &GufpInstance, eps: f64) -> Vec<ModifyCheck> {
    use dopf::gufp::*;
    let (x, _) = solve_gufp_lp(g, &IpmSettings::default()).unwrap();
    let part = build_partition(g, &vec![2.0; g.d()]);
    let grouping = group_users(g, &part, eps);
    let dem = IntervalDemands::new(g, &part);
    let grid = LevelGrid::new(g, &grouping.survivors, eps);
    let mut out = Vec::new();
    for group in grouping.groups.iter().filter(|q| !q.is_degenerate()) {
        let users = &group.users;
        let peaks: Vec<Vec<f64>> = (0..g.d())
            .map(|r| {
                (0..part.count(r))
                    .map(|p| {
                        let mass: f64 = users.iter().map(|&k| dem.upper[k][r][p] * x[k]).sum();
                        let i = grid.ceil_index(r, mass / (1.0 + eps)).unwrap_or(grid.len(r) - 1);
                        grid.levels[r][i]
                    })
                    .collect()
            })
            .collect();
        let small: Vec<Vec<f64>> = (0..g.d())
            .map(|r| {
                (0..part.count(r))
                    .map(|p| users.iter().map(|&k| dem.lower[k][r][p]).fold(0.0, f64::max))
                    .collect()
            })
            .collect();
        let xt: Vec<f64> = users.iter().map(|&k| x[k]).collect();
        let res = modify(g, &part, users, &xt, &peaks, eps).unwrap();
        let mut dominated = true;
        for r in 0..g.d() {
            for pos in 0..g.edges {
                let rounded: f64 = users
                    .iter()
                    .zip(&res.x_hat)
                    .map(|(&k, &v)| g.demand(k, r, pos) * v)
                    .sum();
                let frac: f64 = users
                    .iter()
                    .zip(&xt)
                    .map(|(&k, &v)| g.demand(k, r, pos) * v)
                    .sum();
                let cap = res.profile.values[r][pos];
                dominated &= rounded <= cap && cap <= frac;
            }
        }
        let util = |v: &[f64]| -> f64 { users.iter().zip(v).map(|(&k, a)| g.users[k].utility * a).sum() };
        out.push(ModifyCheck {
            dominated,
            loss: util(&xt) - util(&res.x_hat),
            bound: modify_loss_bound(group, &part, &peaks, &small, eps),
            support: res.fractional_support,
            support_bound: part.total() as f64 / eps,
        });
    }
    out
}
