mod common;

use common::{random_assignment, random_tree};
use dopf::conic::{solve_relaxation, Relaxation, RelaxationSpec};
use dopf::model::{Line, ObjectiveSpec, PowerFlowState, RadialInstance, User, VoltageBounds};
use dopf::sweep::{
    aggregate_power, check_feasibility, closed_form_voltage, forward_backward_sweep, SweepMode,
};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rcopf_state(inst: &RadialInstance) -> PowerFlowState {
    let out = solve_relaxation(inst, &RelaxationSpec::new(Relaxation::Rcopf));
    assert!(out.is_optimal(), "{:?}", out.message);
    out.state.unwrap()
}

#[test]
fn closed_forms_match_the_recursion() {
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.gen_range(1..10);
        let inst = random_tree(seed, m, rng.gen_range(0..8));
        let x = random_assignment(&inst, seed + 1000, false);
        let mut baseline = PowerFlowState::zeros(&inst);
        baseline.l = (0..m).map(|_| rng.gen_range(0.0..2.0)).collect();
        let st = forward_backward_sweep(&inst, &x, &baseline, SweepMode::KeepCurrent).unwrap();

        let s = aggregate_power(&inst, &x, &baseline.l);
        for e in 0..m {
            assert!((s[e] - st.s[e]).norm() <= 1e-10, "seed {seed}, edge {e}");
        }
        let v = closed_form_voltage(&inst, &x, &baseline.l);
        for j in 0..=m {
            assert!((v[j] - st.v[j]).abs() <= 1e-10, "seed {seed}, node {j}");
        }
    }
}

#[test]
fn exact_currents_never_exceed_relaxed_ones() {
    for seed in 0..20 {
        let inst = random_tree(seed, 6, 5);
        let base = rcopf_state(&inst);
        let st = forward_backward_sweep(&inst, &base.x, &base, SweepMode::ExactCurrent).unwrap();
        for e in 0..inst.m() {
            assert!(st.l[e] <= base.l[e] + 1e-12, "seed {seed}, edge {e}");
        }
    }
}

#[test]
fn dropping_inelastic_users_keeps_the_relaxed_state_feasible() {
    for seed in 0..30 {
        let inst = random_tree(seed, 6, 6);
        let base = rcopf_state(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 77);
        let mut x = base.x.clone();
        for k in inst.inelastic() {
            if rng.gen_bool(0.5) {
                x[k] = 0.0;
            }
        }
        let st = forward_backward_sweep(&inst, &x, &base, SweepMode::KeepCurrent).unwrap();
        let rep = check_feasibility(&inst, &st, 1e-6);
        assert!(rep.relaxed_feasible, "seed {seed}: {rep:?}");
        assert!(st.s0.re >= base.s0.re - 1e-9, "seed {seed}");
    }
}

#[test]
fn two_edge_line_balances_power() {
    let z = C::new(0.01, 0.01);
    let inst = RadialInstance::line(
        1.0,
        vec![Line::uncapped(z), Line::uncapped(z)],
        vec![VoltageBounds::new(0.8, 1.2); 2],
        vec![User::inelastic(2, C::new(1.0, 0.0), 5.0)],
        ObjectiveSpec::utility_only(),
    )
    .unwrap();
    let base = rcopf_state(&inst);
    let st = forward_backward_sweep(&inst, &[1.0], &base, SweepMode::ExactCurrent).unwrap();
    // S_e = demand below + z_e ℓ_e + flow into the child edge, evaluated directly
    let r2 = st.s[1] - (C::new(1.0, 0.0) + z * st.l[1]);
    let r1 = st.s[0] - (st.s[1] + z * st.l[0]);
    assert!(r1.norm() <= 1e-10 && r2.norm() <= 1e-10);
    assert!((st.s0 + st.s[0]).norm() <= 1e-15);
}
