//! Day-ahead ensemble of limit trajectories.
//!
//! Each member picks one of the `k` historical days closest to today's
//! features, perturbs its demand profile with multiplicative AR(1) noise and
//! pushes the result through the network to get a limit trajectory. Members
//! draw from their own ChaCha stream, so generation order does not matter.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{derive_pcc_limits, GridError};
use crate::{DcNetwork, PccLimitSeries};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("history is empty")]
    EmptyHistory,
    #[error("need at least two ensemble members, got {0}")]
    TooFew(usize),
    #[error("alpha must lie in [0, 1), got {0}")]
    Alpha(f64),
    #[error("feature length mismatch: {0}")]
    Length(String),
    #[error("trim would remove every scenario")]
    NothingLeft,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Observable features of one day, one entry per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub price: Vec<f64>,
    pub demand: Vec<f64>,
    pub t_amb: Vec<f64>,
    /// Hour of day at the start of each slot.
    pub hour: Vec<f64>,
    /// 0 = Monday.
    pub weekday: u8,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.demand.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demand.is_empty()
    }

    fn channels(&self) -> [&[f64]; 4] {
        [&self.price, &self.demand, &self.t_amb, &self.hour]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryDay {
    pub id: usize,
    pub features: FeatureVector,
    /// System demand profile to perturb, MW.
    pub demand: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// Member index; also the tie-breaker when ranking.
    pub member: usize,
    /// Id of the analog day.
    pub analog: usize,
    /// Base seed; the member's stream is `member`.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitScenario {
    pub limits: PccLimitSeries,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trim {
    /// Drop `ceil(αN/2)` from each end of the tightness ranking.
    TwoSided,
    /// Drop the `ceil(αN)` tightest.
    Tightest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub raw: Vec<LimitScenario>,
    /// Tightness of each raw member, MWh.
    pub tightness: Vec<f64>,
    /// Indices into `raw`, in rank order.
    pub retained: Vec<usize>,
    pub dt_h: f64,
}

impl ScenarioSet {
    pub fn retained_limits(&self) -> Vec<PccLimitSeries> {
        self.retained.iter().map(|&i| self.raw[i].limits.clone()).collect()
    }

    /// Rank of every raw member by ascending tightness (ties by member index).
    pub fn ranks(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.raw.len()).collect();
        order.sort_by(|&a, &b| self.tightness[a].total_cmp(&self.tightness[b]).then(a.cmp(&b)));
        let mut rank = vec![0; order.len()];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r;
        }
        rank
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub k: usize,
    pub ar_coeff: f64,
    /// Innovation standard deviation as a fraction of demand.
    pub noise_std: f64,
    pub import_cap: f64,
    pub export_floor: f64,
    pub r_grid: f64,
    pub dt_h: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { k: 5, ar_coeff: 0.9, noise_std: 0.03, import_cap: 1000.0, export_floor: -1000.0, r_grid: 150.0, dt_h: 0.25 }
    }
}

/// Admissible import energy, MWh; smaller is tighter.
pub fn tightness(limits: &PccLimitSeries, dt_h: f64) -> f64 {
    limits.p_hi.iter().map(|p| p.max(0.0) * dt_h).sum()
}

/// Indices of the `k` history days nearest to `today` (z-scored per channel).
pub fn nearest_analogs(history: &[HistoryDay], today: &FeatureVector, k: usize) -> Result<Vec<usize>, ScenarioError> {
    if history.is_empty() {
        return Err(ScenarioError::EmptyHistory);
    }
    for h in history {
        if h.features.len() != today.len() || h.features.channels().iter().any(|c| c.len() != today.len()) {
            return Err(ScenarioError::Length(format!("history day {} vs today {}", h.id, today.len())));
        }
    }
    let mut stats = Vec::with_capacity(4);
    for c in 0..4 {
        let vals: Vec<f64> = history.iter().flat_map(|h| h.features.channels()[c].iter().copied()).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        stats.push((mean, if var > 0.0 { var.sqrt() } else { 1.0 }));
    }
    let today_ch = today.channels();
    let mut dist: Vec<(f64, usize)> = history
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let mut d = 0.0;
            for (c, ch) in h.features.channels().iter().enumerate() {
                let (_, sd) = stats[c];
                d += ch.iter().zip(today_ch[c]).map(|(a, b)| ((a - b) / sd).powi(2)).sum::<f64>();
            }
            if h.features.weekday != today.weekday {
                d += 1.0;
            }
            (d, i)
        })
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(dist.into_iter().take(k.max(1)).map(|(_, i)| i).collect())
}

/// Multiplicative AR(1) perturbation `d·(1 + e)`, with `e` starting at zero.
pub fn perturb_demand(demand: &[f64], ar: f64, std: f64, rng: &mut impl Rng) -> Vec<f64> {
    let normal = (std > 0.0).then(|| Normal::new(0.0, std).expect("finite std"));
    let mut e = 0.0;
    demand
        .iter()
        .map(|&d| {
            if let Some(n) = &normal {
                e = ar * e + n.sample(rng);
            }
            d * (1.0 + e)
        })
        .collect()
}

fn member_rng(seed: u64, member: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(member as u64);
    rng
}

pub fn generate_ensemble(
    history: &[HistoryDay],
    today: &FeatureVector,
    net: &DcNetwork,
    n_raw: usize,
    seed: u64,
    cfg: &EnsembleConfig,
) -> Result<ScenarioSet, ScenarioError> {
    if n_raw < 2 {
        return Err(ScenarioError::TooFew(n_raw));
    }
    let analogs = nearest_analogs(history, today, cfg.k)?;
    let raw: Vec<LimitScenario> = (0..n_raw)
        .into_par_iter()
        .map(|member| {
            let mut rng = member_rng(seed, member);
            let pick = analogs[rng.random_range(0..analogs.len())];
            let day = &history[pick];
            let demand = perturb_demand(&day.demand, cfg.ar_coeff, cfg.noise_std, &mut rng);
            let inj = net.case.proportional_injections(&demand);
            let limits = derive_pcc_limits(net, &inj, cfg.import_cap, cfg.export_floor, cfg.r_grid)?;
            Ok(LimitScenario { limits, provenance: Provenance { member, analog: day.id, seed } })
        })
        .collect::<Result<_, ScenarioError>>()?;
    let tight = raw.iter().map(|s| tightness(&s.limits, cfg.dt_h)).collect();
    let all = (0..n_raw).collect();
    Ok(ScenarioSet { raw, tightness: tight, retained: all, dt_h: cfg.dt_h })
}

/// Keeps the central part of the tightness ranking.
pub fn filter_coverage(raw: &ScenarioSet, alpha: f64, trim: Trim) -> Result<ScenarioSet, ScenarioError> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(ScenarioError::Alpha(alpha));
    }
    let n = raw.raw.len();
    let ranks = raw.ranks();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| ranks[i]);
    let (lo, hi) = match trim {
        Trim::TwoSided => {
            let m = (alpha * n as f64 / 2.0 - 1e-12).ceil().max(0.0) as usize;
            (m, n.saturating_sub(m))
        }
        Trim::Tightest => ((alpha * n as f64 - 1e-12).ceil().max(0.0) as usize, n),
    };
    if lo >= hi {
        return Err(ScenarioError::NothingLeft);
    }
    Ok(ScenarioSet { retained: order[lo..hi].to_vec(), ..raw.clone() })
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    dt_h: f64,
    r_grid: f64,
    import_cap: f64,
    export_floor: f64,
    members: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    file: String,
    #[serde(flatten)]
    provenance: Provenance,
    tightness: f64,
    rank: usize,
    retained: bool,
}

/// One CSV per member plus `manifest.json`.
pub fn write_scenario_dir(set: &ScenarioSet, dir: &Path) -> Result<(), ScenarioError> {
    fs::create_dir_all(dir)?;
    let ranks = set.ranks();
    let mut members = Vec::with_capacity(set.raw.len());
    for (i, sc) in set.raw.iter().enumerate() {
        let file = format!("scenario_{i:04}.csv");
        sc.limits.write_csv(fs::File::create(dir.join(&file))?)?;
        members.push(ManifestEntry { file, provenance: sc.provenance, tightness: set.tightness[i], rank: ranks[i], retained: set.retained.contains(&i) });
    }
    let first = set.raw.first().map(|s| &s.limits);
    let manifest = Manifest {
        dt_h: set.dt_h,
        r_grid: first.map_or(0.0, |l| l.r_grid),
        import_cap: first.map_or(0.0, |l| l.import_cap),
        export_floor: first.map_or(0.0, |l| l.export_floor),
        members,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

pub fn read_scenario_dir(dir: &Path) -> Result<ScenarioSet, ScenarioError> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let mut raw = Vec::with_capacity(manifest.members.len());
    let mut tight = Vec::with_capacity(manifest.members.len());
    let mut retained: Vec<(usize, usize)> = Vec::new();
    for (i, m) in manifest.members.iter().enumerate() {
        let limits = PccLimitSeries::read_csv(fs::File::open(dir.join(&m.file))?, manifest.r_grid, manifest.import_cap, manifest.export_floor)?;
        raw.push(LimitScenario { limits, provenance: m.provenance });
        tight.push(m.tightness);
        if m.retained {
            retained.push((m.rank, i));
        }
    }
    retained.sort();
    Ok(ScenarioSet { raw, tightness: tight, retained: retained.into_iter().map(|(_, i)| i).collect(), dt_h: manifest.dt_h })
}
