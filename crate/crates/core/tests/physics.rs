use aidc_core::fixtures::{reference_bess, reference_compute, reference_params, reference_thermal};
use aidc_core::physics::{validate_trajectory, CheckpointPattern, ConstraintId, PhysicsError, ValidateOptions};
use aidc_core::{BessConfig, ComputeConfig, OperatingPoint, PccLimitSeries, SystemState};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn single_server() -> ComputeConfig {
    ComputeConfig { n_server: 1, ..reference_compute() }
}

#[test]
fn per_server_power_at_full_and_minimum_throughput() {
    let c = single_server();
    let full = c.it_power(1.0, true).unwrap() * 1e6;
    assert!(rel(full, 233.5) < 1e-6, "{full}");
    assert!((150.0..=250.0).contains(&full));
    let low = c.it_power(0.755, true).unwrap() * 1e6;
    assert!((low - 162.40).abs() < 5e-3, "{low}");
    assert_eq!(c.it_power(0.0, false).unwrap(), 0.0);
}

#[test]
fn it_power_rejects_inadmissible_throughput() {
    let c = reference_compute();
    assert!(matches!(c.it_power(0.5, true), Err(PhysicsError::Domain { .. })));
    assert!(matches!(c.it_power(1.01, true), Err(PhysicsError::Domain { .. })));
    assert!(matches!(c.it_power(0.8, false), Err(PhysicsError::Domain { .. })));
}

#[test]
fn default_fleet_size() {
    assert_eq!(reference_compute().n_server, 1_070_663);
}

#[test]
fn workload_rate_examples() {
    let c = single_server();
    assert_eq!(c.workload_rate(1.0, true).unwrap(), 20800.0);
    assert_eq!(c.workload_rate(0.0, false).unwrap(), 0.0);
    let two = ComputeConfig { n_server: 2, ..c };
    assert!(rel(two.workload_rate(0.8775, true).unwrap(), 36504.0) < 1e-12);
}

#[test]
fn efficient_throughput_matches_grid_search() {
    let c = reference_compute();
    let s_star = c.efficient_throughput();
    assert!((s_star - 0.8464).abs() < 5e-5, "{s_star}");
    let mut best = (0.0, f64::MIN);
    let mut k = 0;
    loop {
        let s = 0.755 + k as f64 * 1e-4;
        if s > 1.0 {
            break;
        }
        let ratio = s / c.per_server_power(s);
        if ratio > best.1 {
            best = (s, ratio);
        }
        k += 1;
    }
    assert!((best.0 - s_star).abs() <= 1e-4);
}

#[test]
fn efficient_throughput_clamps() {
    let base = reference_compute();
    let unit = ComputeConfig { alpha0: 1.0, alpha1: 0.0, alpha2: 1.0, s_min: 0.5, ..base };
    assert_eq!(unit.efficient_throughput(), 1.0);
    let quarter = ComputeConfig { alpha0: 0.25, alpha1: 0.0, alpha2: 1.0, s_min: 0.1, ..base };
    assert!((quarter.efficient_throughput() - 0.5).abs() < 1e-15);
}

#[test]
fn eir_correction_factor() {
    let th = reference_thermal();
    assert!(rel(th.phi(25.0), 0.929503) < 1e-6, "{}", th.phi(25.0));
    assert!(rel(th.eir(25.0), 0.229507) < 1e-6, "{}", th.eir(25.0));
    // 0.73659 is the five-decimal rounding of the exact value
    let f = 32.0;
    assert!(rel(th.phi(0.0), -0.000006 * f * f + 0.004941 * f + 0.58462) < 1e-12);
    assert!((th.phi(0.0) - 0.73659).abs() < 5e-6);
    assert!(th.phi(10.0) < th.phi(25.0));
}

#[test]
fn cooling_power_examples() {
    let th = reference_thermal();
    assert_eq!(th.cooling_power(0.0, 25.0).unwrap(), 0.0);
    assert!((th.cooling_power(100.0, 25.0).unwrap() - 22.95).abs() < 5e-3);
    assert!((th.cooling_power(250.0, 25.0).unwrap() - 57.38).abs() < 5e-3);
    assert!(th.cooling_power(251.0, 25.0).is_err());
    assert!(th.cooling_power(-1.0, 25.0).is_err());
}

#[test]
fn thermal_step_examples() {
    let th = reference_thermal();
    let t = th.thermal_step(26.0, 30.0, 172.0, 250.0, 0.25);
    assert!(rel(t, 26.0 + 0.25 / 120.0 * (172.0 + 20.0 - 250.0)) < 1e-12);
    assert!((t - 25.8792).abs() < 5e-5, "{t}");
    assert_eq!(th.thermal_step(22.0, 22.0, 0.0, 0.0, 0.25), 22.0);
    assert_eq!(th.thermal_step(22.0, 22.0, 140.0, 140.0, 0.25), 22.0);
}

#[test]
fn bess_step_examples() {
    let b = reference_bess();
    assert!(rel(b.bess_step(200.0, 100.0, 0.0, 0.25).unwrap(), 223.75) < 1e-12);
    let dis = b.bess_step(200.0, 0.0, 100.0, 0.25).unwrap();
    assert!(rel(dis, 200.0 - 25.0 / 0.95) < 1e-12);
    assert!((dis - 173.684).abs() < 5e-4);
    assert_eq!(b.bess_step(200.0, 0.0, 0.0, 0.25).unwrap(), 200.0);
    assert_eq!(b.bess_step(200.0, 10.0, 10.0, 0.25), Err(PhysicsError::Simultaneous));
}

#[test]
fn pcc_exchange_examples() {
    let p = reference_params();
    assert_eq!(p.pcc_exchange(&OperatingPoint::idle(), 25.0).unwrap(), 0.0);
    let full = OperatingPoint { mu: true, s: 1.0, ..OperatingPoint::idle() };
    let it = p.compute.it_power(1.0, true).unwrap();
    assert!(rel(p.pcc_exchange(&full, 25.0).unwrap(), it / 0.95) < 1e-12);
    assert!((p.pcc_exchange(&full, 25.0).unwrap() - 263.16).abs() < 0.01);
    let export = OperatingPoint { p_dis: 150.0, ..OperatingPoint::idle() };
    assert_eq!(p.pcc_exchange(&export, 25.0).unwrap(), -150.0);
}

fn forward(points: &[OperatingPoint], t_amb: &[f64]) -> Vec<SystemState> {
    let p = reference_params();
    let mut states = vec![p.initial_state(0.0)];
    for (t, pt) in points.iter().enumerate() {
        let next = p.advance(&states[t], pt, t_amb[t]).unwrap();
        states.push(next);
    }
    states
}

#[test]
fn hand_built_trajectory_is_clean() {
    let p = reference_params();
    let run = OperatingPoint { mu: true, s: 0.85, q_cool: 190.0, ..OperatingPoint::idle() };
    let ch = OperatingPoint { p_ch: 40.0, beta: true, ..run };
    let dis = OperatingPoint { p_dis: 38.0, ..run };
    let points = [run, ch, dis, run];
    let t_amb = [22.0; 4];
    let states = forward(&points, &t_amb);
    let limits = PccLimitSeries::constant(4, -1000.0, 1000.0, 1000.0);
    let ckpt = CheckpointPattern::periodic(4, 4);
    let report = validate_trajectory(&states, &points, &limits, &ckpt, &t_amb, &p, &ValidateOptions { check_terminal_soc: false, ramp_anchor: None, ..Default::default() }).unwrap();
    assert!(report.is_empty(), "{:?}", report.violations);
}

#[test]
fn forbidden_shutdown_is_reported() {
    let p = reference_params();
    let on = OperatingPoint { mu: true, s: 0.8, q_cool: 170.0, ..OperatingPoint::idle() };
    let points = [on, OperatingPoint::idle()];
    let t_amb = [20.0; 2];
    let states = forward(&points, &t_amb);
    let limits = PccLimitSeries::constant(2, -1000.0, 1000.0, 1000.0);
    let ckpt = CheckpointPattern { delta: vec![false, false] };
    let opts = ValidateOptions { ramp_anchor: None, ..Default::default() };
    let report = validate_trajectory(&states, &points, &limits, &ckpt, &t_amb, &p, &opts).unwrap();
    assert_eq!(report.count(ConstraintId::Checkpoint), 1);
    assert_eq!(report.violations.iter().find(|v| v.constraint == ConstraintId::Checkpoint).unwrap().slot, 2);
}

#[test]
fn ramp_violation_is_reported() {
    let p = reference_params();
    let points = [OperatingPoint::idle(), OperatingPoint { p_ch: 160.0, beta: true, ..OperatingPoint::idle() }];
    let t_amb = [20.0; 2];
    let states = forward(&points, &t_amb);
    let limits = PccLimitSeries::constant(2, -1000.0, 1000.0, 150.0);
    let ckpt = CheckpointPattern::periodic(1, 2);
    let opts = ValidateOptions { check_terminal_soc: false, ..Default::default() };
    let report = validate_trajectory(&states, &points, &limits, &ckpt, &t_amb, &p, &opts).unwrap();
    assert_eq!(report.count(ConstraintId::Ramp), 1, "{:?}", report.violations);
}

#[test]
fn validator_rejects_length_mismatch() {
    let p = reference_params();
    let points = [OperatingPoint::idle(); 3];
    let states = forward(&points, &[20.0; 3]);
    let limits = PccLimitSeries::constant(2, 0.0, 100.0, 150.0);
    let r = validate_trajectory(&states, &points, &limits, &CheckpointPattern::periodic(1, 3), &[20.0; 3], &p, &ValidateOptions::default());
    assert!(matches!(r, Err(PhysicsError::Length(_))));
}

#[test]
fn single_precision_path() {
    let th = aidc_core::physics::ThermalConfig::<f32> {
        c_th: 120.0,
        r_th: 0.2,
        t_min: 18.0,
        t_max: 26.0,
        q_cool_max: 250.0,
        eir_nom: 1.0 / 4.05,
        eir_warn_range: (-10.0, 45.0),
    };
    let t = th.thermal_step(26.0f32, 30.0, 172.0, 250.0, 0.25);
    assert!((t - 25.8792).abs() < 1e-4);
    let b = aidc_core::physics::BessConfig::<f32> { p_max: 400.0, eta_ch: 0.95, eta_dis: 0.95, e_min: 40.0, e_max: 400.0, e_init: 200.0, c_deg: 30.0 };
    assert!((b.bess_step(200.0, 100.0, 0.0, 0.25).unwrap() - 223.75).abs() < 1e-4);
    assert!((th.phi(25.0) - 0.929503).abs() < 1e-5);
}

proptest! {
    #[test]
    fn it_power_is_strictly_convex(a in 0.755f64..1.0, b in 0.755f64..1.0) {
        let c = reference_compute();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-3);
        let mid = 0.5 * (lo + hi);
        let f = |s| c.it_power(s, true).unwrap();
        prop_assert!(f(lo) + f(hi) - 2.0 * f(mid) > 0.0);
    }

    #[test]
    fn thermal_step_superposition(
        t_in in 15.0f64..30.0, t_amb in -5.0f64..40.0, p_it in 0.0f64..250.0, q in 0.0f64..250.0,
        d_in in -3.0f64..3.0, d_amb in -3.0f64..3.0, d_it in -50.0f64..50.0, d_q in -50.0f64..50.0,
    ) {
        let th = reference_thermal();
        let base = th.thermal_step(t_in, t_amb, p_it, q, 0.25);
        let zero = th.thermal_step(0.0, 0.0, 0.0, 0.0, 0.25);
        let moved = th.thermal_step(t_in + d_in, t_amb + d_amb, p_it + d_it, q + d_q, 0.25);
        let delta = th.thermal_step(d_in, d_amb, d_it, d_q, 0.25) - zero;
        prop_assert!((moved - (base + delta)).abs() < 1e-9);
    }

    #[test]
    fn battery_round_trip_loses_energy(e in 100.0f64..300.0, p in 1.0f64..400.0) {
        let b = reference_bess();
        let charged = b.bess_step(e, p, 0.0, 0.25).unwrap();
        let stored = charged - e;
        let back = b.bess_step(charged, 0.0, stored / 0.25, 0.25).unwrap();
        prop_assert!(back < e);
        let ideal = BessConfig { eta_ch: 1.0, eta_dis: 1.0, ..b };
        let c2 = ideal.bess_step(e, p, 0.0, 0.25).unwrap();
        let b2 = ideal.bess_step(c2, 0.0, p, 0.25).unwrap();
        prop_assert!((b2 - e).abs() < 1e-9);
    }
}
