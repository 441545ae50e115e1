//! Experiment configuration: TOML file, defaults, and `--section.key value` overrides.

use std::path::{Path, PathBuf};

use aidc_core::dispatch::{PriceView, RtOptions};
use aidc_core::fixtures::reference_params;
use aidc_core::planner::{CommitMode, PlannerOptions};
use aidc_core::plant_model::PwlMode;
use aidc_core::scenario::{EnsembleConfig, Trim};
use aidc_core::{BessConfig, ComputeConfig, PlantParams, ThermalConfig};
use aidc_milp::SolverOptions;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Value;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Prefix of the run directory name.
    pub name: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub data: DataConfig,
    pub plant: PlantSection,
    pub grid: GridConfig,
    pub scenarios: ScenarioConfig,
    pub planner: PlannerConfig,
    pub dispatch: DispatchConfig,
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// A bundled test day (`fixture` picks which).
    Fixture,
    Csv,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub source: Source,
    /// `ci` or `precool`.
    pub fixture: String,
    /// MATPOWER-subset file, or `builtin:three_bus` / `builtin:congestion`.
    /// Empty means the fixture's own case (congestion case otherwise).
    pub case: String,
    pub price: PathBuf,
    pub temperature: PathBuf,
    pub demand: PathBuf,
    /// 0-based day within the loaded series.
    pub day: usize,
    pub dt_minutes: u32,
    pub slots_per_day: usize,
    /// Checkpoint every this many slots.
    pub checkpoint_period: usize,
    /// Synthetic analog days generated when the series has no other days.
    pub history_days: usize,
    pub synth: SynthConfig,
}

/// Sinusoid-plus-noise profiles. Price and demand peak at `peak_hour`,
/// ambient two hours later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub days: usize,
    pub peak_hour: f64,
    pub demand_base: f64,
    pub demand_amp: f64,
    pub price_base: f64,
    pub price_amp: f64,
    pub temp_base: f64,
    pub temp_amp: f64,
    /// Relative noise on demand and price, absolute °C on ambient.
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    /// Multiplies e_min, e_max and e_init.
    pub bess_scale: f64,
    pub compute: ComputeConfig,
    pub thermal: ThermalConfig,
    pub bess: BessConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Line-rating scale.
    pub kappa: f64,
    pub import_cap: f64,
    pub export_floor: f64,
    pub r_grid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_raw: usize,
    pub alpha: f64,
    pub trim: Trim,
    pub k: usize,
    pub ar_coeff: f64,
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    pub breakpoints: usize,
    pub pwl: PwlMode,
    /// `decomposed` or `joint`.
    pub mode: String,
    pub lambda: f64,
    pub mip_gap: f64,
    pub node_limit: usize,
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispatchConfig {
    pub horizon: usize,
    pub m_rt: f64,
    pub price_view: PriceView,
    /// `actual` (limits from the day's demand) or `scenario:N` (N-th retained scenario).
    pub realization: String,
    pub mip_gap: f64,
    pub node_limit: usize,
    /// Import limit (MW) at or below which a slot counts as collapsed.
    pub collapse_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub kappa: Vec<f64>,
    pub bess_scale: Vec<f64>,
    pub checkpoint_period: Vec<usize>,
    pub days: Vec<usize>,
    /// Simulate each cell's day as well as committing it.
    pub dispatch: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let p = reference_params();
        let ens = EnsembleConfig::default();
        let plan = PlannerOptions::default();
        let rt = RtOptions::default();
        Self {
            name: "run".into(),
            seed: 42,
            out_dir: "runs".into(),
            data: DataConfig {
                source: Source::Fixture,
                fixture: "ci".into(),
                case: String::new(),
                price: PathBuf::new(),
                temperature: PathBuf::new(),
                demand: PathBuf::new(),
                day: 0,
                dt_minutes: 15,
                slots_per_day: 96,
                checkpoint_period: 4,
                history_days: 20,
                synth: SynthConfig {
                    days: 8,
                    peak_hour: 17.0,
                    demand_base: 330.0,
                    demand_amp: 110.0,
                    price_base: 90.0,
                    price_amp: 60.0,
                    temp_base: 21.0,
                    temp_amp: 5.0,
                    noise: 0.03,
                },
            },
            plant: PlantSection { bess_scale: 1.0, compute: p.compute, thermal: p.thermal, bess: p.bess },
            grid: GridConfig { kappa: 1.0, import_cap: ens.import_cap, export_floor: ens.export_floor, r_grid: ens.r_grid },
            scenarios: ScenarioConfig { n_raw: 10, alpha: 0.2, trim: Trim::TwoSided, k: ens.k, ar_coeff: ens.ar_coeff, noise_std: ens.noise_std },
            planner: PlannerConfig {
                breakpoints: plan.breakpoints,
                pwl: plan.pwl,
                mode: "decomposed".into(),
                lambda: 0.0,
                mip_gap: plan.solver.mip_gap,
                node_limit: plan.solver.node_limit,
                parallel: true,
            },
            dispatch: DispatchConfig {
                horizon: 24,
                m_rt: 1e6,
                price_view: PriceView::Realized,
                realization: "actual".into(),
                mip_gap: rt.solver.mip_gap,
                node_limit: rt.solver.node_limit,
                collapse_threshold: 50.0,
            },
            sweep: SweepConfig { kappa: vec![1.0], bess_scale: vec![1.0], checkpoint_period: vec![4], days: vec![0], dispatch: true },
        }
    }
}

/// Which scenario the real-time stage sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Realization {
    Actual,
    Retained(usize),
}

impl ExperimentConfig {
    /// Defaults, then `path` (if any), then overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut merged = Value::try_from(Self::default()).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            let file: Value = text.parse::<toml::Table>().map(Value::Table).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            merge(&mut merged, file, "")?;
            // relative data paths are relative to the config file
            if let Some(dir) = p.parent() {
                rebase_paths(&mut merged, dir);
            }
        }
        for (key, raw) in overrides {
            set_path(&mut merged, key, raw)?;
        }
        let cfg: Self = merged.try_into().map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let sw = &self.sweep;
        if sw.kappa.is_empty() || sw.bess_scale.is_empty() || sw.checkpoint_period.is_empty() || sw.days.is_empty() {
            return bad("sweep lists must be non-empty".into());
        }
        if self.grid.kappa <= 0.0 || sw.kappa.iter().any(|&k| k <= 0.0) {
            return bad("kappa must be positive".into());
        }
        if self.plant.bess_scale < 0.0 || sw.bess_scale.iter().any(|&b| b < 0.0) {
            return bad("bess_scale must be non-negative".into());
        }
        if self.data.checkpoint_period == 0 || sw.checkpoint_period.contains(&0) {
            return bad("checkpoint period must be at least one slot".into());
        }
        if self.data.dt_minutes == 0 || 1440 % self.data.dt_minutes != 0 {
            return bad(format!("dt_minutes {} does not divide a day", self.data.dt_minutes));
        }
        if self.data.slots_per_day != (1440 / self.data.dt_minutes) as usize {
            return bad(format!("slots_per_day {} does not match dt_minutes {}", self.data.slots_per_day, self.data.dt_minutes));
        }
        if self.dispatch.horizon == 0 {
            return bad("dispatch horizon must be positive".into());
        }
        if !matches!(self.planner.mode.as_str(), "decomposed" | "joint") {
            return bad(format!("planner.mode `{}` is neither decomposed nor joint", self.planner.mode));
        }
        self.realization()?;
        if self.data.source == Source::Fixture && !matches!(self.data.fixture.as_str(), "ci" | "precool") {
            return bad(format!("unknown fixture `{}`", self.data.fixture));
        }
        if self.data.source == Source::Csv {
            for (what, p) in [("price", &self.data.price), ("temperature", &self.data.temperature), ("demand", &self.data.demand)] {
                if !p.is_file() {
                    return bad(format!("data.{what}: {} does not exist", p.display()));
                }
            }
        }
        let c = &self.data.case;
        if !c.is_empty() && !c.starts_with("builtin:") && !Path::new(c).is_file() {
            return bad(format!("data.case: {c} does not exist"));
        }
        self.params().validate().map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn realization(&self) -> Result<Realization, CliError> {
        let r = self.dispatch.realization.as_str();
        if r == "actual" {
            return Ok(Realization::Actual);
        }
        r.strip_prefix("scenario:")
            .and_then(|n| n.parse().ok())
            .map(Realization::Retained)
            .ok_or_else(|| CliError::Config(format!("dispatch.realization `{r}` is neither `actual` nor `scenario:N`")))
    }

    pub fn dt_h(&self) -> f64 {
        self.data.dt_minutes as f64 / 60.0
    }

    pub fn params(&self) -> PlantParams {
        let pl = &self.plant;
        PlantParams { compute: pl.compute, thermal: pl.thermal, bess: pl.bess.scaled_energy(pl.bess_scale), dt_h: self.dt_h() }
    }

    pub fn ensemble(&self) -> EnsembleConfig {
        let s = &self.scenarios;
        let g = &self.grid;
        EnsembleConfig { k: s.k, ar_coeff: s.ar_coeff, noise_std: s.noise_std, import_cap: g.import_cap, export_floor: g.export_floor, r_grid: g.r_grid, dt_h: self.dt_h() }
    }

    pub fn planner_options(&self) -> PlannerOptions {
        let p = &self.planner;
        let mode = if p.mode == "joint" { CommitMode::Joint { lambda: p.lambda } } else { CommitMode::Decomposed };
        PlannerOptions {
            breakpoints: p.breakpoints,
            pwl: p.pwl,
            mode,
            solver: SolverOptions { mip_gap: p.mip_gap, node_limit: p.node_limit, ..Default::default() },
            parallel: p.parallel,
            ..Default::default()
        }
    }

    pub fn rt_options(&self) -> RtOptions {
        let d = &self.dispatch;
        RtOptions {
            breakpoints: self.planner.breakpoints,
            pwl: self.planner.pwl,
            solver: SolverOptions { mip_gap: d.mip_gap, node_limit: d.node_limit, ..Default::default() },
            ..Default::default()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the resolved TOML. `out_dir` is left out: where a run
    /// is stored does not change what it computes.
    pub fn hash(&self) -> String {
        let keyed = Self { out_dir: PathBuf::new(), ..self.clone() };
        format!("{:x}", Sha256::digest(keyed.to_toml().as_bytes()))
    }

    /// `out_dir/name-<12 hex>`.
    pub fn run_dir(&self) -> PathBuf {
        self.out_dir.join(format!("{}-{}", self.name, &self.hash()[..12]))
    }
}

/// Recursively overlays `src` on `dst`; every key must already exist.
fn merge(dst: &mut Value, src: Value, prefix: &str) -> Result<(), CliError> {
    match (dst, src) {
        (Value::Table(d), Value::Table(s)) => {
            for (k, v) in s {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                let slot = d.get_mut(&k).ok_or_else(|| CliError::Config(format!("unknown key `{key}`")))?;
                merge(slot, v, &key)?;
            }
            Ok(())
        }
        (d, s) => {
            *d = coerce(d, s, prefix)?;
            Ok(())
        }
    }
}

/// Integers are accepted where floats are expected, so `kappa = 1` works.
fn coerce(old: &Value, new: Value, key: &str) -> Result<Value, CliError> {
    match (old, new) {
        (Value::Float(_), Value::Integer(i)) => Ok(Value::Float(i as f64)),
        (Value::Array(a), Value::Array(items)) => {
            let proto = a.first().cloned();
            items.into_iter().map(|v| match &proto { Some(p) => coerce(p, v, key), None => Ok(v) }).collect::<Result<_, _>>().map(Value::Array)
        }
        (o, n) if std::mem::discriminant(o) == std::mem::discriminant(&n) => Ok(n),
        (o, n) => Err(CliError::Config(format!("`{key}` expects a {}, got {}", o.type_str(), n.type_str()))),
    }
}

fn rebase_paths(v: &mut Value, dir: &Path) {
    let Some(data) = v.get_mut("data").and_then(Value::as_table_mut) else { return };
    for key in ["price", "temperature", "demand", "case"] {
        if let Some(Value::String(s)) = data.get_mut(key) {
            if !s.is_empty() && !s.starts_with("builtin:") && Path::new(s.as_str()).is_relative() {
                *s = dir.join(&*s).to_string_lossy().into_owned();
            }
        }
    }
}

/// Sets a dotted key from its command-line text. The text is read as a TOML
/// value when it parses as one and as a bare string otherwise.
fn set_path(root: &mut Value, key: &str, raw: &str) -> Result<(), CliError> {
    let parsed = format!("v = {raw}").parse::<toml::Table>().ok().and_then(|mut t| t.remove("v")).unwrap_or_else(|| Value::String(raw.to_string()));
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = cur.as_table_mut().ok_or_else(|| CliError::Config(format!("`{}` is not a table", parts[..i].join("."))))?;
        cur = table.get_mut(*part).ok_or_else(|| CliError::Config(format!("unknown key `{key}`")))?;
    }
    // a bare word that happens to be valid TOML of the wrong type, e.g. a file named `true`
    let value = match (&*cur, parsed) {
        (Value::String(_), v) if !v.is_str() => Value::String(raw.to_string()),
        (_, v) => v,
    };
    *cur = coerce(cur, value, key)?;
    Ok(())
}

/// Top-level names that start a config override on the command line.
pub fn override_roots() -> Vec<String> {
    match Value::try_from(ExperimentConfig::default()) {
        Ok(Value::Table(t)) => t.keys().cloned().collect(),
        _ => Vec::new(),
    }
}
