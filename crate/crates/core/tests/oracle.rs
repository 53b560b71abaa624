mod common;

use common::random_assignment;
use dopf::conic::{restore_exactness, solve_relaxation, Relaxation, RelaxationSpec};
use dopf::io::{generate_instance, GeneratorProfile};
use dopf::model::{Line, ObjectiveSpec, RadialInstance, User, VoltageBounds};
use dopf::oracle::{brute_force_opf, OracleError, OPF_LIMIT};
use dopf::sweep::DEFAULT_TOL;
use num_complex::Complex64 as C;

#[test]
fn no_inelastic_users_is_one_solve() {
    let inst = generate_instance(1, 4, 0, 3, GeneratorProfile::Standard);
    let res = brute_force_opf(&inst, OPF_LIMIT).unwrap();
    assert_eq!(res.subproblems, 1);
    let relaxed = solve_relaxation(&inst, &RelaxationSpec::new(Relaxation::Rcopf));
    assert!((res.value - relaxed.objective).abs() <= 1e-7 * (1.0 + relaxed.objective.abs()));
    let rep = res.restored.unwrap().report.unwrap();
    assert!(rep.fully_feasible());
}

#[test]
fn user_over_capacity_is_dropped() {
    let inst = RadialInstance::line(
        1.0,
        vec![Line::new(C::new(0.01, 0.01), 0.5, 10.0)],
        vec![VoltageBounds::nominal()],
        vec![
            User::inelastic(1, C::new(0.8, 0.0), 9.0),
            User::inelastic(1, C::new(0.2, 0.0), 1.0),
        ],
        ObjectiveSpec::utility_only(),
    )
    .unwrap();
    let res = brute_force_opf(&inst, OPF_LIMIT).unwrap();
    assert_eq!(res.assignment, vec![0.0, 1.0]);
    assert!((res.value - 1.0).abs() <= 1e-7);
    assert_eq!(res.subproblems, 4);
}

#[test]
fn refuses_too_many_users() {
    let inst = generate_instance(1, 3, 5, 0, GeneratorProfile::Standard);
    assert_eq!(
        brute_force_opf(&inst, 4).unwrap_err(),
        OracleError::TooLarge { count: 5, limit: 4 }
    );
}

#[test]
fn dominates_every_integral_choice() {
    for seed in 0..4 {
        let inst = generate_instance(seed, 5, 4, 1, GeneratorProfile::Rotated);
        let res = brute_force_opf(&inst, OPF_LIMIT).unwrap();
        let rep = res.restored.as_ref().unwrap().report.as_ref().unwrap();
        assert!(rep.fully_feasible(), "seed {seed}");
        for trial in 0..6 {
            let x = random_assignment(&inst, seed * 100 + trial, true);
            let out = restore_exactness(&inst, &x, DEFAULT_TOL);
            if out.outcome.is_optimal() {
                assert!(out.outcome.objective <= res.value * (1.0 + 1e-6) + 1e-9, "seed {seed}");
            }
        }
    }
}
