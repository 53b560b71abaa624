//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fails.

mod common;

use std::time::Instant;

use common::{modify_checks, random_assignment, random_gufp, random_tree};
use dopf::conic::{restore_exactness, solve_relaxation, Relaxation, RelaxationSpec};
use dopf::gufp::{build_partition, GufpInstance};
use dopf::io::{generate_instance, GeneratorProfile};
use dopf::model::{
    evaluate_objective, rotate_instance, rotation_angle, unrotate_state, PowerFlowState,
    RadialInstance,
};
use dopf::oracle::{brute_force_opf, OracleResult, OPF_LIMIT};
use dopf::qptas::{qptas_solve, GuessMode, QptasConfig};
use dopf::sweep::{
    aggregate_power, check_feasibility, closed_form_voltage, forward_backward_sweep, SweepMode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn profile(seed: u64) -> GeneratorProfile {
    if seed % 2 == 0 {
        GeneratorProfile::Standard
    } else {
        GeneratorProfile::Rotated
    }
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

/// Instance and the objective of the state restored on it.
struct RestoreCase {
    inst: RadialInstance,
    value: f64,
}

fn restoration(cases: &mut Vec<RestoreCase>) -> Verdict {
    let (mut exact, mut gap, mut seed) = (0.0f64, 0.0f64, 0u64);
    let mut failures = Vec::new();
    while cases.len() < 50 && seed < 500 {
        let m = 1 + (seed % 8) as usize;
        let inst = generate_instance(seed, m, (seed % 7) as usize, 1 + (seed % 2) as usize, profile(seed));
        let x = random_assignment(&inst, seed + 10_000, true);
        seed += 1;
        let r = restore_exactness(&inst, &x, 1e-6);
        if !r.relaxed_objective.is_finite() {
            // the fixed-assignment relaxation is infeasible for this draw
            continue;
        }
        let e = r.report.as_ref().map_or(f64::INFINITY, |rep| rep.exactness);
        let g = (r.outcome.objective - r.relaxed_objective).abs();
        if !(e <= 1e-6 && g <= 1e-6) {
            failures.push(seed - 1);
        }
        exact = exact.max(e);
        gap = gap.max(g);
        cases.push(RestoreCase {
            inst,
            value: r.outcome.objective,
        });
    }
    verdict(
        cases.len() == 50 && failures.is_empty(),
        format!(
            "{} instances, max exactness residual {exact:.2e}, max objective gap {gap:.2e}, failing seeds {failures:?}",
            cases.len()
        ),
    )
}

fn rotation() -> Verdict {
    let (mut worst, mut infeasible) = (0.0f64, Vec::new());
    for seed in 0..50u64 {
        let m = 1 + (seed % 8) as usize;
        let inst = generate_instance(seed, m, (seed % 6) as usize, 1, GeneratorProfile::Rotated);
        let rot = rotation_angle(&inst).unwrap();
        let rotated = rotate_instance(&inst, rot);
        let a = solve_relaxation(&rotated, &RelaxationSpec::new(Relaxation::Rcopf));
        let b = solve_relaxation(&inst, &RelaxationSpec::new(Relaxation::Rcopf));
        let (Some(sa), true) = (a.state.as_ref(), b.is_optimal()) else {
            infeasible.push(seed);
            continue;
        };
        let back = unrotate_state(sa, rot);
        if !check_feasibility(&inst, &back, 1e-6).relaxed_feasible {
            infeasible.push(seed);
        }
        worst = worst
            .max(rel_gap(a.objective, b.objective))
            .max(rel_gap(evaluate_objective(&inst, &back), b.objective));
    }
    verdict(
        infeasible.is_empty() && worst <= 1e-7,
        format!("50 instances, max relative objective gap {worst:.2e}, infeasible seeds {infeasible:?}"),
    )
}

fn keep_current() -> Verdict {
    let (mut failures, mut worst) = (Vec::new(), 0.0f64);
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let m = rng.gen_range(1..9);
        let inst = if trial % 2 == 0 {
            random_tree(trial, m, rng.gen_range(1..8))
        } else {
            generate_instance(trial, m, rng.gen_range(1..8), 1, profile(trial / 2))
        };
        let out = solve_relaxation(&inst, &RelaxationSpec::new(Relaxation::Rcopf));
        let Some(base) = out.state else {
            failures.push(trial);
            continue;
        };
        let mut x = base.x.clone();
        for k in inst.inelastic() {
            if rng.gen_bool(0.5) {
                x[k] = 0.0;
            }
        }
        let ok = forward_backward_sweep(&inst, &x, &base, SweepMode::KeepCurrent)
            .map(|st| check_feasibility(&inst, &st, 1e-6))
            .map(|rep| {
                worst = worst.max(rep.voltage_bounds).max(rep.cone);
                rep.relaxed_feasible
            })
            .unwrap_or(false);
        if !ok {
            failures.push(trial);
        }
    }
    verdict(
        failures.is_empty(),
        format!("100 trials, worst voltage/cone residual {worst:.2e}, failing trials {failures:?}"),
    )
}

fn rounding_conditions() -> Verdict {
    let (mut groups, mut ratio, mut support) = (0usize, 0.0f64, 0.0f64);
    let mut failures = Vec::new();
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 4_000);
        let g = random_gufp(seed, rng.gen_range(2..10), 3, rng.gen_range(1..=12));
        let eps = if seed % 2 == 0 { 0.5 } else { 1.0 / 3.0 };
        let mut ok = true;
        for c in modify_checks(&g, eps) {
            groups += 1;
            ok &= c.dominated;
            ok &= c.loss <= c.bound + 1e-9 * (1.0 + c.bound);
            ok &= c.support as f64 <= c.support_bound;
            if c.bound > 0.0 {
                ratio = ratio.max(c.loss / c.bound);
            }
            support = support.max(c.support as f64 / c.support_bound);
        }
        if !ok {
            failures.push(seed);
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "100 instances, {groups} groups, max loss/bound {ratio:.3}, max support/bound {support:.3}, failing seeds {failures:?}"
        ),
    )
}

fn demand_at(g: &GufpInstance, k: usize, r: usize, pos: usize) -> f64 {
    let f = &g.users[k].demands[r];
    if pos < f.start {
        return 0.0;
    }
    let at = pos.min(f.saturation);
    (0..f.coefficients.len())
        .map(|t| f.coefficients[t] * g.dims[r].bases[t][at])
        .sum()
}

/// `(b̄, b̲)` over the positive base values of dimension `r`, if any.
fn base_range(g: &GufpInstance, r: usize) -> Option<(f64, f64)> {
    let vals = g.dims[r].bases.iter().flatten().copied().filter(|&v| v > 0.0);
    let (hi, lo) = vals.fold((0.0f64, f64::INFINITY), |(h, l), v| (h.max(v), l.min(v)));
    lo.is_finite().then_some((hi, lo))
}

fn partition() -> Verdict {
    let mut failures = Vec::new();
    let (mut intervals, mut strict, mut flat) = (0usize, 0usize, 0usize);
    for seed in 9_000..9_100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let users = rng.gen_range(1..8);
        let g = random_gufp(seed, rng.gen_range(2..16), 3, users);
        let part = build_partition(&g, &[2.0; 3]);
        let mut ok = true;
        for (r, dp) in part.dims.iter().enumerate() {
            intervals += dp.count();
            for p in 0..dp.count() {
                for k in 0..users {
                    let vals: Vec<f64> = dp.range(p).map(|pos| demand_at(&g, k, r, pos)).collect();
                    let lo = vals.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
                    let hi = vals.iter().copied().fold(0.0, f64::max);
                    ok &= !lo.is_finite() || hi <= 2.0 * lo * (1.0 + 1e-12);
                }
            }
            let t = g.dims[r].terms() as f64;
            match base_range(&g, r) {
                Some((b_max, b_min)) if b_max > b_min => {
                    strict += 1;
                    ok &= (dp.count() as f64) < t * (b_max / b_min).log2() + t;
                }
                // b̄ = b̲ (or no positive base) makes the right-hand side T_r itself
                _ => {
                    flat += 1;
                    ok &= dp.count() as f64 <= t;
                }
            }
        }
        if !ok {
            failures.push(seed);
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "100 instances, {intervals} intervals, strict count bound on {strict} dimensions, P_r <= T_r on {flat} flat ones, failing seeds {failures:?}"
        ),
    )
}

/// Line instances for the end-to-end checks together with their brute-force optimum.
fn line_suite() -> Vec<(RadialInstance, OracleResult)> {
    (0..20u64)
        .map(|seed| {
            let inst = generate_instance(
                seed,
                3 + (seed % 4) as usize,
                4 + (seed % 5) as usize,
                (seed % 2) as usize,
                profile(seed / 2),
            );
            let oracle = brute_force_opf(&inst, OPF_LIMIT).unwrap();
            (inst, oracle)
        })
        .collect()
}

/// Every pipeline value produced on the suite, as `(label, value, reference)`.
type Outputs = Vec<(String, f64, f64)>;

fn end_to_end(suite: &[(RadialInstance, OracleResult)], outputs: &mut Outputs) -> Verdict {
    let mut failures = Vec::new();
    let mut worst = f64::INFINITY;
    for (i, (inst, oracle)) in suite.iter().enumerate() {
        for eps in [0.3, 0.5] {
            let cfg = QptasConfig::new(eps, GuessMode::OracleGuess(oracle.assignment.clone()));
            let ok = match qptas_solve(inst, &cfg) {
                Ok(res) => {
                    outputs.push((format!("qptas oracle {i} eps {eps}"), res.value, oracle.value));
                    let full = res.report.as_ref().is_some_and(|r| r.fully_feasible());
                    if oracle.value.abs() > 0.0 {
                        worst = worst.min(res.value / oracle.value);
                    }
                    full && res.value >= (1.0 - eps) * oracle.value
                }
                Err(_) => false,
            };
            if !ok {
                failures.push((i, eps));
            }
        }
    }
    verdict(
        failures.is_empty(),
        format!("20 instances x 2 eps, worst value/optimum {worst:.4}, failing {failures:?}"),
    )
}

fn dominance(
    suite: &[(RadialInstance, OracleResult)],
    cases: &[RestoreCase],
    outputs: &mut Outputs,
) -> Verdict {
    for (i, (inst, oracle)) in suite.iter().enumerate() {
        if let Ok(res) = qptas_solve(inst, &QptasConfig::new(0.5, GuessMode::Capped(8))) {
            if res.report.as_ref().is_some_and(|r| r.fully_feasible()) {
                outputs.push((format!("qptas capped {i}"), res.value, oracle.value));
            }
        }
        for trial in 0..4 {
            let x = random_assignment(inst, 100 * i as u64 + trial, true);
            let r = restore_exactness(inst, &x, 1e-6);
            if r.report.as_ref().is_some_and(|rep| rep.fully_feasible()) {
                outputs.push((format!("restore {i}/{trial}"), r.outcome.objective, oracle.value));
            }
        }
    }
    for (i, c) in cases.iter().enumerate() {
        let oracle = brute_force_opf(&c.inst, OPF_LIMIT).unwrap();
        outputs.push((format!("restoration case {i}"), c.value, oracle.value));
    }
    let mut worst = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for (label, value, reference) in outputs.iter() {
        let excess = (value - reference) / (1.0 + reference.abs());
        worst = worst.max(excess);
        if excess > 1e-6 {
            failures.push(label.clone());
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "{} outputs, max relative excess over the oracle {worst:.2e}, failing {failures:?}",
            outputs.len()
        ),
    )
}

fn closed_forms() -> Verdict {
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 20_000);
        let m = rng.gen_range(1..12);
        let inst = if seed % 2 == 0 {
            random_tree(seed, m, rng.gen_range(0..9))
        } else {
            generate_instance(seed, m, rng.gen_range(0..6), rng.gen_range(0..3), profile(seed / 2))
        };
        let x = random_assignment(&inst, seed + 30_000, false);
        let mut baseline = PowerFlowState::zeros(&inst);
        baseline.l = (0..m).map(|_| rng.gen_range(0.0..2.0)).collect();
        let Ok(st) = forward_backward_sweep(&inst, &x, &baseline, SweepMode::KeepCurrent) else {
            worst = f64::INFINITY;
            continue;
        };
        let s = aggregate_power(&inst, &x, &baseline.l);
        let v = closed_form_voltage(&inst, &x, &baseline.l);
        for e in 0..m {
            worst = worst.max((s[e] - st.s[e]).norm());
        }
        for j in 0..=m {
            worst = worst.max((v[j] - st.v[j]).abs());
        }
    }
    verdict(worst <= 1e-10, format!("100 instances, max deviation {worst:.2e}"))
}

fn report(id: usize, name: &str, start: Instant, v: Verdict) -> bool {
    println!(
        "ACCEPTANCE {id} {:<4} {name} ({:.1} s): {}",
        if v.pass { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64(),
        v.detail
    );
    v.pass
}

fn main() {
    let mut all = true;
    let mut cases = Vec::new();
    let mut outputs = Outputs::new();

    let t = Instant::now();
    all &= report(1, "exactness restoration", t, restoration(&mut cases));
    let t = Instant::now();
    all &= report(2, "rotation invariance", t, rotation());
    let t = Instant::now();
    all &= report(3, "zeroed users keep the relaxed state feasible", t, keep_current());
    let t = Instant::now();
    all &= report(4, "rounding conditions", t, rounding_conditions());
    let t = Instant::now();
    all &= report(5, "partition property", t, partition());
    let t = Instant::now();
    let suite = line_suite();
    all &= report(6, "end-to-end guarantee", t, end_to_end(&suite, &mut outputs));
    let t = Instant::now();
    all &= report(7, "oracle dominance", t, dominance(&suite, &cases, &mut outputs));
    let t = Instant::now();
    all &= report(8, "closed forms match the sweep", t, closed_forms());

    if !all {
        std::process::exit(1);
    }
}
