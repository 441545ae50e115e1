//! The day pipeline: limits, ensemble, filter, commit, simulate, metrics.

use std::fs;
use std::path::{Path, PathBuf};

use aidc_core::dispatch::{simulate_day, DayMetrics, DispatchRecord, RtInputs};
use aidc_core::fixtures::{ci_day, congestion_case, precool_day, synthetic_history, three_bus, FixtureDay};
use aidc_core::grid::{derive_pcc_limits, load_case};
use aidc_core::physics::CheckpointPattern;
use aidc_core::planner::{commit, CommitMode, CommitmentResult, DayInputs};
use aidc_core::scenario::{filter_coverage, generate_ensemble, write_scenario_dir, FeatureVector, HistoryDay, ScenarioSet};
use aidc_core::{DcNetwork, NetworkCase, PccLimitSeries, PlantParams};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Realization, Source};
use crate::ingest::{ingest_csv, synthesize};
use crate::CliError;

/// Everything the stages need for one day.
#[derive(Debug, Clone)]
pub struct DayContext {
    /// With line ratings already scaled by κ.
    pub case: NetworkCase,
    pub demand: Vec<f64>,
    pub price: Vec<f64>,
    pub t_amb: Vec<f64>,
    pub hour: Vec<f64>,
    pub checkpoints: CheckpointPattern,
    pub history: Vec<HistoryDay>,
    pub today: FeatureVector,
}

impl DayContext {
    pub fn len(&self) -> usize {
        self.demand.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demand.is_empty()
    }

    pub fn day_inputs(&self) -> DayInputs {
        DayInputs { t_amb: self.t_amb.clone(), checkpoints: self.checkpoints.clone(), price: self.price.clone() }
    }
}

fn stage(name: &'static str) -> impl Fn(String) -> CliError {
    move |msg| CliError::Stage { stage: name, msg }
}

fn case_for(cfg: &ExperimentConfig, fixture: Option<&FixtureDay>) -> Result<NetworkCase, CliError> {
    let spec = cfg.data.case.as_str();
    let base = match spec {
        "" => fixture.map(|f| f.case.clone()).unwrap_or_else(congestion_case),
        "builtin:three_bus" => three_bus(),
        "builtin:congestion" => congestion_case(),
        s if s.starts_with("builtin:") => return Err(CliError::Config(format!("unknown builtin case `{s}`"))),
        path => load_case(Path::new(path)).map_err(|e| stage("ingest")(format!("{path}: {e}")))?,
    };
    Ok(base.with_line_scale(cfg.grid.kappa))
}

/// Loads or generates the configured day.
pub fn load_day(cfg: &ExperimentConfig) -> Result<DayContext, CliError> {
    let d = &cfg.data;
    match d.source {
        Source::Fixture => {
            if d.dt_minutes != 15 {
                return Err(CliError::Config("bundled fixtures use 15-minute slots".into()));
            }
            let fx = if d.fixture == "precool" { precool_day() } else { ci_day() };
            let n = fx.len();
            Ok(DayContext {
                case: case_for(cfg, Some(&fx))?,
                checkpoints: CheckpointPattern::periodic(d.checkpoint_period, n),
                hour: fx.today.hour.clone(),
                demand: fx.demand,
                price: fx.price,
                t_amb: fx.t_amb,
                history: fx.history,
                today: fx.today,
            })
        }
        Source::Csv | Source::Synthetic => {
            let series = if d.source == Source::Csv {
                ingest_csv(&d.price, &d.temperature, &d.demand, d.dt_minutes, d.slots_per_day).map_err(|e| stage("ingest")(e.to_string()))?
            } else {
                synthesize(&d.synth, d.dt_minutes, d.slots_per_day, cfg.seed)
            };
            let day = series.day(d.day).map_err(|e| stage("ingest")(e.to_string()))?;
            let feat = |s: &crate::ingest::DaySeries| FeatureVector {
                price: s.price.clone(),
                demand: s.demand.clone(),
                t_amb: s.t_amb.clone(),
                hour: s.hour.clone(),
                weekday: s.weekday,
            };
            let mut history: Vec<HistoryDay> = (0..series.days())
                .filter(|&i| i != d.day)
                .map(|i| {
                    let s = series.day(i).expect("index in range");
                    HistoryDay { id: i, features: feat(&s), demand: s.demand.clone() }
                })
                .collect();
            if history.is_empty() {
                history = synthetic_history(&day.demand, &day.price, &day.t_amb, cfg.dt_h(), d.history_days, cfg.seed);
            }
            Ok(DayContext {
                case: case_for(cfg, None)?,
                checkpoints: CheckpointPattern::periodic(d.checkpoint_period, day.demand.len()),
                today: feat(&day),
                hour: day.hour,
                demand: day.demand,
                price: day.price,
                t_amb: day.t_amb,
                history,
            })
        }
    }
}

fn network(ctx: &DayContext) -> Result<DcNetwork, CliError> {
    DcNetwork::new(ctx.case.clone()).map_err(|e| stage("limits")(e.to_string()))
}

/// Limits implied by the day's own demand.
pub fn actual_limits(cfg: &ExperimentConfig, ctx: &DayContext) -> Result<PccLimitSeries, CliError> {
    let net = network(ctx)?;
    let inj = net.case.proportional_injections(&ctx.demand);
    let g = &cfg.grid;
    derive_pcc_limits(&net, &inj, g.import_cap, g.export_floor, g.r_grid).map_err(|e| stage("limits")(e.to_string()))
}

/// Raw ensemble with its coverage-filtered retained subset.
pub fn scenario_set(cfg: &ExperimentConfig, ctx: &DayContext) -> Result<ScenarioSet, CliError> {
    let net = network(ctx)?;
    let s = &cfg.scenarios;
    let raw = generate_ensemble(&ctx.history, &ctx.today, &net, s.n_raw, cfg.seed, &cfg.ensemble()).map_err(|e| stage("scenarios")(e.to_string()))?;
    filter_coverage(&raw, s.alpha, s.trim).map_err(|e| stage("scenarios")(e.to_string()))
}

pub fn commitment(cfg: &ExperimentConfig, ctx: &DayContext, set: &ScenarioSet) -> Result<CommitmentResult, CliError> {
    commit(&set.retained_limits(), &ctx.day_inputs(), &cfg.params(), &cfg.planner_options()).map_err(|e| stage("commit")(e.to_string()))
}

/// The limits the real-time stage runs against.
pub fn realization(cfg: &ExperimentConfig, actual: &PccLimitSeries, set: &ScenarioSet) -> Result<PccLimitSeries, CliError> {
    match cfg.realization()? {
        Realization::Actual => Ok(actual.clone()),
        Realization::Retained(i) => set
            .retained_limits()
            .get(i)
            .cloned()
            .ok_or_else(|| stage("dispatch")(format!("realization scenario:{i} but only {} retained", set.retained.len()))),
    }
}

pub fn rt_inputs(cfg: &ExperimentConfig, ctx: &DayContext, limits: PccLimitSeries) -> RtInputs {
    let d = &cfg.dispatch;
    RtInputs {
        limits,
        price: ctx.price.clone(),
        t_amb: ctx.t_amb.clone(),
        checkpoints: ctx.checkpoints.clone(),
        horizon: d.horizon,
        m_rt: d.m_rt,
        price_view: d.price_view,
    }
}

pub fn dispatch(cfg: &ExperimentConfig, inputs: &RtInputs, w_da: f64) -> Result<(DispatchRecord, DayMetrics), CliError> {
    simulate_day(w_da, inputs, &cfg.params(), &cfg.rt_options()).map_err(|e| stage("dispatch")(e.to_string()))
}

/// Battery discharge energy (MWh) in slots that are both locked (no
/// checkpoint) and collapsed (import limit at or below `threshold`).
pub fn locked_discharge(record: &DispatchRecord, inputs: &RtInputs, params: &PlantParams, threshold: f64) -> f64 {
    record
        .slots
        .iter()
        .filter(|s| !inputs.checkpoints.delta[s.slot - 1] && inputs.limits.p_hi[s.slot - 1] <= threshold)
        .fold(0.0, |acc, s| acc + s.point.p_dis * params.dt_h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl Provenance {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        Self { config_hash: cfg.hash(), seed: cfg.seed, version: env!("CARGO_PKG_VERSION").to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitmentSummary {
    pub mode: CommitMode,
    pub w_da_star: f64,
    pub w_max: Vec<f64>,
    pub binding: Option<usize>,
    /// Raw ensemble indices of the retained scenarios, in rank order.
    pub retained: Vec<usize>,
    pub nodes: usize,
    pub lp_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSummary {
    pub realization: String,
    pub metrics: DayMetrics,
    pub violations: usize,
    pub locked_discharge_mwh: f64,
}

/// Contents of `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub provenance: Provenance,
    pub day: usize,
    pub slots: usize,
    pub commitment: CommitmentSummary,
    /// Absent when the run stopped after commitment.
    pub dispatch: Option<DispatchSummary>,
}

pub mod files {
    pub const CONFIG: &str = "config.toml";
    pub const INPUTS: &str = "inputs.csv";
    pub const LIMITS: &str = "limits.csv";
    pub const REALIZATION: &str = "realization.csv";
    pub const SCENARIOS: &str = "scenarios";
    pub const COMMITMENT: &str = "commitment.json";
    pub const DISPATCH_JSON: &str = "dispatch.json";
    pub const DISPATCH_CSV: &str = "dispatch.csv";
    pub const RUN: &str = "run.json";
    pub const ERROR: &str = "error.json";
    pub const REPORT: &str = "report";
}

fn io<'a>(stage_name: &'static str, path: &'a Path) -> impl Fn(std::io::Error) -> CliError + 'a {
    move |e| CliError::Stage { stage: stage_name, msg: format!("{}: {e}", path.display()) }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| stage("write")(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(io("write", path))
}

pub fn write_inputs(path: &Path, ctx: &DayContext) -> Result<(), CliError> {
    let err = |e: csv::Error| stage("write")(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["slot", "hour", "price", "t_amb", "demand", "checkpoint"]).map_err(err)?;
    for t in 0..ctx.len() {
        w.serialize((t + 1, ctx.hour[t], ctx.price[t], ctx.t_amb[t], ctx.demand[t], u8::from(ctx.checkpoints.delta[t]))).map_err(err)?;
    }
    w.flush().map_err(io("write", path))
}

pub fn write_limits(path: &Path, l: &PccLimitSeries) -> Result<(), CliError> {
    let f = fs::File::create(path).map_err(io("write", path))?;
    l.write_csv(f).map_err(|e| stage("write")(format!("{}: {e}", path.display())))
}

/// One `dispatch.csv` row; `t_in` and `e_bess` are the state at the start of the slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispatchRow {
    pub slot: usize,
    pub mu: u8,
    pub s: f64,
    pub q_cool: f64,
    pub p_ch: f64,
    pub p_dis: f64,
    pub beta: u8,
    pub p_exc: f64,
    pub p_lo: f64,
    pub p_hi: f64,
    pub price: f64,
    pub energy_cost: f64,
    pub degradation_cost: f64,
    pub workload: f64,
    pub shed: f64,
    pub r_before: f64,
    pub r_after: f64,
    pub t_in: f64,
    pub e_bess: f64,
    pub nodes: usize,
    pub flagged: u8,
}

pub fn write_dispatch(dir: &Path, record: &DispatchRecord) -> Result<(), CliError> {
    write_json(&dir.join(files::DISPATCH_JSON), record)?;
    let path = dir.join(files::DISPATCH_CSV);
    let err = |e: csv::Error| stage("write")(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(&path).map_err(err)?;
    for s in &record.slots {
        let p = &s.point;
        w.serialize(DispatchRow {
            slot: s.slot,
            mu: u8::from(p.mu),
            s: p.s,
            q_cool: p.q_cool,
            p_ch: p.p_ch,
            p_dis: p.p_dis,
            beta: u8::from(p.beta),
            p_exc: s.p_exc,
            p_lo: s.p_lo,
            p_hi: s.p_hi,
            price: s.price,
            energy_cost: s.energy_cost,
            degradation_cost: s.degradation_cost,
            workload: s.workload,
            shed: s.shed,
            r_before: s.r_before,
            r_after: s.r_after,
            t_in: s.t_in,
            e_bess: s.e_bess,
            nodes: s.nodes,
            flagged: u8::from(s.flagged),
        })
        .map_err(err)?;
    }
    w.flush().map_err(io("write", &path))
}

pub fn summarize(res: &CommitmentResult, set: &ScenarioSet) -> CommitmentSummary {
    CommitmentSummary {
        mode: res.mode,
        w_da_star: res.w_da_star,
        w_max: res.w_max.clone(),
        binding: res.binding,
        retained: set.retained.clone(),
        nodes: res.nodes,
        lp_iterations: res.lp_iterations,
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub report: RunReport,
    /// The directory already held a finished run with this config.
    pub reused: bool,
}

/// Runs every stage into `cfg.run_dir()`; with `simulate` false it stops after commitment.
pub fn run_day(cfg: &ExperimentConfig, simulate: bool) -> Result<RunOutcome, CliError> {
    let dir = cfg.run_dir();
    let run_file = dir.join(files::RUN);
    if run_file.is_file() {
        let text = fs::read_to_string(&run_file).map_err(io("setup", &run_file))?;
        let report: RunReport = serde_json::from_str(&text).map_err(|e| stage("setup")(format!("{}: {e}", run_file.display())))?;
        if report.dispatch.is_some() || !simulate {
            return Ok(RunOutcome { dir, report, reused: true });
        }
    }
    if dir.exists() && !run_file.is_file() {
        return Err(stage("setup")(format!("{} holds a partial run; remove it to start over", dir.display())));
    }
    fs::create_dir_all(&dir).map_err(io("setup", &dir))?;
    let result = stages(cfg, &dir, simulate);
    if let Err(CliError::Stage { stage, msg }) = &result {
        let _ = write_json(&dir.join(files::ERROR), &serde_json::json!({ "stage": stage, "message": msg }));
    }
    result.map(|report| RunOutcome { dir, report, reused: false })
}

fn stages(cfg: &ExperimentConfig, dir: &Path, simulate: bool) -> Result<RunReport, CliError> {
    let cfg_path = dir.join(files::CONFIG);
    if !cfg_path.is_file() {
        fs::write(&cfg_path, cfg.to_toml()).map_err(io("setup", &cfg_path))?;
    }
    let ctx = load_day(cfg)?;
    write_inputs(&dir.join(files::INPUTS), &ctx)?;
    let actual = actual_limits(cfg, &ctx)?;
    write_limits(&dir.join(files::LIMITS), &actual)?;
    let set = scenario_set(cfg, &ctx)?;
    write_scenario_dir(&set, &dir.join(files::SCENARIOS)).map_err(|e| stage("scenarios")(e.to_string()))?;
    let res = commitment(cfg, &ctx, &set)?;
    write_json(&dir.join(files::COMMITMENT), &res)?;
    let mut report = RunReport { provenance: Provenance::of(cfg), day: cfg.data.day, slots: ctx.len(), commitment: summarize(&res, &set), dispatch: None };
    if simulate {
        let limits = realization(cfg, &actual, &set)?;
        write_limits(&dir.join(files::REALIZATION), &limits)?;
        let inputs = rt_inputs(cfg, &ctx, limits);
        let (record, m) = dispatch(cfg, &inputs, res.w_da_star)?;
        write_dispatch(dir, &record)?;
        let params = cfg.params();
        let v = record.validate(&inputs, &params).map_err(|e| stage("dispatch")(e.to_string()))?;
        report.dispatch = Some(DispatchSummary {
            realization: cfg.dispatch.realization.clone(),
            metrics: m,
            violations: v.violations.len(),
            locked_discharge_mwh: locked_discharge(&record, &inputs, &params, cfg.dispatch.collapse_threshold),
        });
    }
    write_json(&dir.join(files::RUN), &report)?;
    Ok(report)
}

