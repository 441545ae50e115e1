use aidc_core::fixtures::{no_bess, reference_params};
use aidc_core::physics::CheckpointPattern;
use aidc_core::planner::{
    build_joint_milp, build_scenario_milp, commit, fleet_slot_units, max_deliverable, CommitMode, DaObjective, DayInputs, PlanError, PlannerOptions,
};
use aidc_core::plant_model::{Pwl, PwlMode};
use aidc_core::{ComputeConfig, PccLimitSeries, PlantParams};
use aidc_milp::{brute_force, solve_milp, SolverOptions, Status};

fn day(t: usize, period: usize) -> DayInputs {
    DayInputs { t_amb: vec![22.0; t], checkpoints: CheckpointPattern::periodic(period, t), price: vec![80.0; t] }
}

fn limits(p_hi: &[f64]) -> PccLimitSeries {
    let mut l = PccLimitSeries::constant(p_hi.len(), -1000.0, 0.0, 150.0);
    l.p_hi = p_hi.to_vec();
    l
}

fn serial() -> PlannerOptions {
    PlannerOptions { parallel: false, ..Default::default() }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn exact_model_size() {
    let opts = PlannerOptions { breakpoints: 3, ..serial() };
    let sm = build_scenario_milp(&limits(&[300.0; 4]), &day(4, 2), &reference_params(), &opts, PwlMode::Exact, DaObjective::MaxWorkload).unwrap();
    assert_eq!(sm.model.num_vars(), 49);
    assert_eq!(sm.model.integer_vars().len(), 16);
}

#[test]
fn horizon_mismatch_is_an_error() {
    let r = build_scenario_milp(&limits(&[300.0; 4]), &day(5, 2), &reference_params(), &serial(), PwlMode::Exact, DaObjective::MaxWorkload);
    assert!(matches!(r, Err(PlanError::Horizon(_))));
    assert!(matches!(commit(&[], &day(4, 2), &reference_params(), &serial()), Err(PlanError::Empty)));
}

#[test]
fn collapsed_day_without_battery_delivers_nothing() {
    let mut p = reference_params();
    p.bess = no_bess(&p.bess);
    let mut l = limits(&[0.0; 4]);
    l.p_lo = vec![0.0; 4];
    let w = max_deliverable(&l, &day(4, 1), &p, &serial()).unwrap();
    assert_eq!(w, 0.0);
}

fn tiny_fleet() -> PlantParams {
    let mut p = reference_params();
    p.compute = ComputeConfig { n_server: 1, ..p.compute };
    p
}

#[test]
fn unconstrained_single_server_runs_flat_out() {
    let p = tiny_fleet();
    let w = max_deliverable(&limits(&[1000.0; 4]), &day(4, 1), &p, &serial()).unwrap();
    assert!(rel(w, 7.488e7) < 1e-9, "{w}");
    assert!(rel(fleet_slot_units(&p) * 4.0, 7.488e7) < 1e-12);
}

/// Cooling-free plant with no usable battery and a free ramp.
fn cooling_free() -> PlantParams {
    let mut p = reference_params();
    p.bess = no_bess(&p.bess);
    p.thermal.t_min = -50.0;
    p.thermal.t_max = 100.0;
    p
}

#[test]
fn import_pinned_at_minimum_throughput_power() {
    // The quadratic dips below its s_min value until s = 2·vertex − s_min, so a
    // cap equal to the s_min power still admits faster operation. With nine
    // breakpoints the interpolant crosses that power inside segment 1.
    let p = cooling_free();
    let c = &p.compute;
    let cap = c.it_power(c.s_min, true).unwrap() / c.eta_ipcs;
    let mut l = limits(&[cap; 4]);
    l.r_grid = 1000.0;
    let w = max_deliverable(&l, &day(4, 1), &p, &serial()).unwrap();

    let pwl = Pwl::uniform(c, 9);
    let target = c.per_server_power(c.s_min);
    let (s0, s1) = (pwl.s[1], pwl.s[2]);
    let (w0, w1) = (pwl.watts[1], pwl.watts[2]);
    let s_cross = s0 + (target - w0) / (w1 - w0) * (s1 - s0);
    assert!((s_cross - 0.797_277_286).abs() < 1e-8, "{s_cross}");
    let expect = c.n_server as f64 * c.r_peak * s_cross * 4.0 * 900.0;
    assert!(rel(w, expect) < 1e-6, "{w} vs {expect}");
    assert!(rel(w, 6.391_871_3e13) < 1e-6);
    // the closed form that assumes s = s_min is strictly lower
    assert!(w > c.n_server as f64 * c.r_peak * c.s_min * 4.0 * 900.0 * 1.05);
}

#[test]
fn raising_the_cap_never_hurts() {
    let p = reference_params();
    let mut prev = 0.0;
    for scale in [0.4, 0.6, 0.8, 1.0, 1.5] {
        let w = max_deliverable(&limits(&[300.0 * scale, 120.0 * scale, 300.0 * scale, 300.0 * scale]), &day(4, 2), &p, &serial()).unwrap();
        assert!(w >= prev * (1.0 - 1e-9), "scale {scale}: {w} < {prev}");
        prev = w;
    }
}

#[test]
fn single_scenario_commitment() {
    let p = reference_params();
    let l = limits(&[300.0, 120.0, 300.0, 300.0]);
    let res = commit(&[l.clone()], &day(4, 2), &p, &serial()).unwrap();
    let w = max_deliverable(&l, &day(4, 2), &p, &serial()).unwrap();
    assert!(rel(res.w_da_star, w) < 1e-12);
    assert_eq!(res.binding, Some(0));
}

#[test]
fn tight_scenario_binds() {
    let p = reference_params();
    let loose = limits(&[400.0; 4]);
    let tight = limits(&[300.0, 60.0, 60.0, 300.0]);
    let d = day(4, 2);
    let res = commit(&[loose.clone(), tight.clone()], &d, &p, &serial()).unwrap();
    let w_tight = max_deliverable(&tight, &d, &p, &serial()).unwrap();
    assert!(max_deliverable(&loose, &d, &p, &serial()).unwrap() > w_tight);
    assert!(rel(res.w_da_star, w_tight) < 1e-12);
    assert_eq!(res.binding, Some(1));
    for (plan, l) in res.plans.iter().zip([&loose, &tight]) {
        assert!(plan.workload >= res.w_da_star * (1.0 - 1e-6));
        let v = plan.validate(l, &d, &p).unwrap();
        assert!(v.is_empty(), "{:?}", v.violations);
    }
}

#[test]
fn joint_oracle_matches_decomposed() {
    let p = reference_params();
    let scenarios = [limits(&[350.0, 200.0, 300.0, 300.0]), limits(&[300.0, 90.0, 250.0, 300.0])];
    let d = day(4, 2);
    let dec = commit(&scenarios, &d, &p, &serial()).unwrap();
    let joint = commit(&scenarios, &d, &p, &PlannerOptions { mode: CommitMode::Joint { lambda: 0.0 }, ..serial() }).unwrap();
    assert!(rel(dec.w_da_star, joint.w_da_star) < 1e-6, "{} vs {}", dec.w_da_star, joint.w_da_star);
    assert_eq!(joint.mode, CommitMode::Joint { lambda: 0.0 });
    let (m, blocks, _, _) = build_joint_milp(&scenarios, &d, &p, &serial(), PwlMode::Convex, 0.0).unwrap();
    assert_eq!(blocks.len(), 2);
    assert!(m.var_by_name("w1.mu[0]").is_some());
}

#[test]
fn plans_stay_on_the_interpolant() {
    let p = reference_params();
    let l = limits(&[300.0, 120.0, 300.0, 300.0]);
    let res = commit(&[l], &day(4, 2), &p, &serial()).unwrap();
    let pwl = Pwl::uniform(&p.compute, 9);
    let bound = pwl.error_bound(p.compute.alpha2);
    assert!(bound <= 0.36, "{bound}");
    for s in &res.plans[0].slots {
        if s.mu {
            let quad = p.compute.per_server_power(s.s_pwl);
            let interp = s.p_it_pwl * 1e6 / p.compute.n_server as f64;
            assert!((interp - quad).abs() <= bound + 1e-9, "{interp} vs {quad}");
            assert!((interp - pwl.eval(s.s_pwl)).abs() < 1e-6);
        }
    }
}

#[test]
fn day_ahead_models_match_enumeration() {
    let p = reference_params();
    let l = limits(&[300.0, 120.0, 300.0, 250.0]);
    let d = day(4, 2);
    let opts = SolverOptions::default();
    let cases = [
        (PlannerOptions { breakpoints: 3, ..serial() }, PwlMode::Exact, DaObjective::MaxWorkload),
        (serial(), PwlMode::Convex, DaObjective::MaxWorkload),
        (serial(), PwlMode::Convex, DaObjective::MinDeviation { fleet_slots: 2.5 }),
    ];
    for (po, mode, obj) in cases {
        let sm = build_scenario_milp(&l, &d, &p, &po, mode, obj).unwrap();
        assert!(sm.model.integer_vars().len() <= 20);
        let a = solve_milp(&sm.model, &opts).unwrap();
        let b = brute_force(&sm.model, &opts).unwrap();
        assert_eq!(a.status, Status::Optimal);
        assert_eq!(b.status, Status::Optimal);
        assert!(rel(a.objective, b.objective) < 1e-6, "{mode:?} {obj:?}: {} vs {}", a.objective, b.objective);
    }
    // these limits top out near 2.78 fleet slots
    let sm = build_scenario_milp(&l, &d, &p, &serial(), PwlMode::Convex, DaObjective::MinDeviation { fleet_slots: 3.0 }).unwrap();
    assert_eq!(solve_milp(&sm.model, &opts).unwrap().status, Status::Infeasible);
    assert_eq!(brute_force(&sm.model, &opts).unwrap().status, Status::Infeasible);
}
