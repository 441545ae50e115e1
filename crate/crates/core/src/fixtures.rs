//! Reference parameter set and small synthetic days used by tests, examples
//! and the CLI's built-in fixture.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Bus, Line};
use crate::physics::CheckpointPattern;
use crate::planner::DayInputs;
use crate::scenario::{FeatureVector, HistoryDay};
use crate::{BessConfig, ComputeConfig, NetworkCase, PlantParams, ThermalConfig};

pub fn reference_compute() -> ComputeConfig {
    let (a0, a1, a2) = (1052.7, -2288.6, 1469.4);
    ComputeConfig {
        n_server: ComputeConfig::servers_for_capacity(250.0, a0, a1, a2),
        r_peak: 20800.0,
        s_min: 0.755,
        alpha0: a0,
        alpha1: a1,
        alpha2: a2,
        eta_ipcs: 0.95,
        p_it_cap: 250.0,
    }
}

pub fn reference_thermal() -> ThermalConfig {
    ThermalConfig {
        c_th: 120.0,
        r_th: 0.2,
        t_min: 18.0,
        t_max: 26.0,
        q_cool_max: 250.0,
        eir_nom: 1.0 / 4.05,
        eir_warn_range: (-10.0, 45.0),
    }
}

pub fn reference_bess() -> BessConfig {
    BessConfig { p_max: 400.0, eta_ch: 0.95, eta_dis: 0.95, e_min: 40.0, e_max: 400.0, e_init: 200.0, c_deg: 30.0 }
}

/// 250 MW cluster, 400 MW / 400 MWh battery, 15-minute slots.
pub fn reference_params() -> PlantParams {
    PlantParams { compute: reference_compute(), thermal: reference_thermal(), bess: reference_bess(), dt_h: 0.25 }
}

/// Battery with no usable energy.
pub fn no_bess(b: &BessConfig) -> BessConfig {
    BessConfig { e_min: b.e_init, e_max: b.e_init, ..*b }
}

fn line(from: usize, to: usize, f_max: f64) -> Line<f64> {
    Line { from, to, b: 1.0, f_max }
}

/// Triangle with the slack generator at bus 1, a 100 MW load at bus 2, the
/// data center at bus 3 and 80 MW on every line.
pub fn three_bus() -> NetworkCase {
    NetworkCase {
        base_mva: 100.0,
        buses: vec![
            Bus { id: 1, load_mw: 0.0, gen_mw: 100.0 },
            Bus { id: 2, load_mw: 100.0, gen_mw: 0.0 },
            Bus { id: 3, load_mw: 0.0, gen_mw: 0.0 },
        ],
        lines: vec![line(1, 2, 80.0), line(1, 3, 80.0), line(2, 3, 80.0)],
        slack: 1,
        loc: Some(3),
    }
}

/// Same triangle sized so that line 1-2 binds the import: `P_hi = 900 − 2L`
/// for a load `L` at bus 2.
pub fn congestion_case() -> NetworkCase {
    NetworkCase {
        base_mva: 100.0,
        buses: vec![
            Bus { id: 1, load_mw: 0.0, gen_mw: 300.0 },
            Bus { id: 2, load_mw: 300.0, gen_mw: 0.0 },
            Bus { id: 3, load_mw: 0.0, gen_mw: 0.0 },
        ],
        lines: vec![line(1, 2, 300.0), line(1, 3, 500.0), line(2, 3, 500.0)],
        slack: 1,
        loc: Some(3),
    }
}

/// A day of exogenous data plus history for the analog ensemble.
#[derive(Debug, Clone)]
pub struct FixtureDay {
    pub case: NetworkCase,
    /// Realized system demand, MW.
    pub demand: Vec<f64>,
    pub price: Vec<f64>,
    pub t_amb: Vec<f64>,
    pub checkpoints: CheckpointPattern,
    pub history: Vec<HistoryDay>,
    pub today: FeatureVector,
}

impl FixtureDay {
    pub fn day_inputs(&self) -> DayInputs {
        DayInputs { t_amb: self.t_amb.clone(), checkpoints: self.checkpoints.clone(), price: self.price.clone() }
    }

    pub fn len(&self) -> usize {
        self.demand.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demand.is_empty()
    }
}

/// Demand at bus 2 over the 24-slot day; slots 11-15 push line 1-2 to its limit.
pub const CI_DEMAND: [f64; 24] = [
    260.0, 250.0, 245.0, 250.0, 260.0, 280.0, 300.0, 330.0, 370.0, 410.0, 440.0, 450.0, 450.0, 445.0, 430.0, 400.0, 360.0, 320.0,
    290.0, 270.0, 260.0, 255.0, 250.0, 250.0,
];

/// Cheap morning, moderate during congestion, a peak in slots 19-21.
pub const CI_PRICE: [f64; 24] = [
    60.0, 55.0, 50.0, 48.0, 50.0, 55.0, 65.0, 75.0, 85.0, 90.0, 95.0, 100.0, 105.0, 98.0, 92.0, 88.0, 110.0, 150.0, 280.0, 320.0,
    300.0, 160.0, 120.0, 100.0,
];

fn ambient(slots: usize) -> Vec<f64> {
    (0..slots).map(|t| 20.5 + 5.0 * (PI * t as f64 / (slots as f64 + 4.0)).sin()).collect()
}

fn hours(slots: usize, dt_h: f64) -> Vec<f64> {
    (0..slots).map(|t| (t as f64 * dt_h) % 24.0).collect()
}

/// History of `n` days around a base profile: each day scales demand, shifts
/// prices and offsets ambient by a seeded random amount.
pub fn synthetic_history(demand: &[f64], price: &[f64], t_amb: &[f64], dt_h: f64, n: usize, seed: u64) -> Vec<HistoryDay> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|id| {
            let f = rng.random_range(0.94..1.06);
            let wiggle = rng.random_range(-0.01..0.01);
            let p_scale = rng.random_range(0.8..1.2);
            let dt_offset = rng.random_range(-2.0..2.0);
            let d: Vec<f64> = demand.iter().enumerate().map(|(t, &x)| x * (f + wiggle * (t as f64 / 3.0).sin())).collect();
            let features = FeatureVector {
                price: price.iter().map(|p| p * p_scale).collect(),
                demand: d.clone(),
                t_amb: t_amb.iter().map(|x| x + dt_offset).collect(),
                hour: hours(demand.len(), dt_h),
                weekday: (id % 7) as u8,
            };
            HistoryDay { id, features, demand: d }
        })
        .collect()
}

/// The 24-slot congestion day on [`congestion_case`], checkpoints every 4 slots.
pub fn ci_day() -> FixtureDay {
    let demand = CI_DEMAND.to_vec();
    let price = CI_PRICE.to_vec();
    let t_amb = ambient(demand.len());
    let history = synthetic_history(&demand, &price, &t_amb, 0.25, 20, 7);
    let today = FeatureVector { price: price.clone(), demand: demand.clone(), t_amb: t_amb.clone(), hour: hours(demand.len(), 0.25), weekday: 2 };
    FixtureDay { case: congestion_case(), checkpoints: CheckpointPattern::periodic(4, demand.len()), demand, price, t_amb, history, today }
}

/// Slots (0-based) in which [`precool_day`] collapses the import limit.
pub const PRECOOL_CONGESTION: std::ops::Range<usize> = 6..10;

/// Plant for [`precool_day`]: the reference set with a 450 MW chiller, so
/// cooling has headroom over IT heat and can bank thermal margin ahead of a
/// collapse.
pub fn precool_params() -> PlantParams {
    let mut p = reference_params();
    p.thermal.q_cool_max = 450.0;
    p
}

/// 16 slots at a flat price; import drops to zero in [`PRECOOL_CONGESTION`].
/// Checkpoints every 2 slots.
pub fn precool_day() -> FixtureDay {
    let n = 16;
    let demand: Vec<f64> = (0..n).map(|t| if PRECOOL_CONGESTION.contains(&t) { 450.0 } else { 250.0 }).collect();
    let price = vec![80.0; n];
    let t_amb = ambient(24)[..n].to_vec();
    let history = synthetic_history(&demand, &price, &t_amb, 0.25, 20, 11);
    let today = FeatureVector { price: price.clone(), demand: demand.clone(), t_amb: t_amb.clone(), hour: hours(n, 0.25), weekday: 4 };
    FixtureDay { case: congestion_case(), checkpoints: CheckpointPattern::periodic(2, n), demand, price, t_amb, history, today }
}
