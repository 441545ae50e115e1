//! Plot-ready CSVs and a JSON summary derived from a finished run directory.
//! Everything goes under `report/`; the run's own records are only read.

use std::fs;
use std::path::Path;

use aidc_core::dispatch::DispatchRecord;
use aidc_core::scenario::read_scenario_dir;
use aidc_core::PccLimitSeries;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::pipeline::{files, RunReport};
use crate::CliError;

pub const REPORT_FILES: [&str; 6] = ["envelopes.csv", "exchange.csv", "soc.csv", "temperature.csv", "remaining.csv", "summary.json"];

fn incomplete(dir: &Path, msg: String) -> CliError {
    CliError::Stage { stage: "report", msg: format!("{}: {msg}", dir.display()) }
}

/// The resolved config stored in a run directory.
pub fn stored_config(dir: &Path) -> Result<ExperimentConfig, CliError> {
    let path = dir.join(files::CONFIG);
    let text = fs::read_to_string(&path).map_err(|e| incomplete(dir, format!("{}: {e}", files::CONFIG)))?;
    toml::from_str(&text).map_err(|e| incomplete(dir, format!("{}: {e}", files::CONFIG)))
}

pub fn read_json<T: serde::de::DeserializeOwned>(dir: &Path, name: &str) -> Result<T, CliError> {
    let text = fs::read_to_string(dir.join(name)).map_err(|e| incomplete(dir, format!("{name}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| incomplete(dir, format!("{name}: {e}")))
}

pub fn read_limits(dir: &Path, name: &str, cfg: &ExperimentConfig) -> Result<PccLimitSeries, CliError> {
    let f = fs::File::open(dir.join(name)).map_err(|e| incomplete(dir, format!("{name}: {e}")))?;
    let g = &cfg.grid;
    PccLimitSeries::read_csv(f, g.r_grid, g.import_cap, g.export_floor).map_err(|e| incomplete(dir, format!("{name}: {e}")))
}

/// `inputs.csv` columns.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct InputRow {
    pub slot: usize,
    pub hour: f64,
    pub price: f64,
    pub t_amb: f64,
    pub demand: f64,
    pub checkpoint: u8,
}

pub fn read_inputs(dir: &Path) -> Result<Vec<InputRow>, CliError> {
    let mut rdr = csv::Reader::from_path(dir.join(files::INPUTS)).map_err(|e| incomplete(dir, format!("{}: {e}", files::INPUTS)))?;
    rdr.deserialize().collect::<Result<_, _>>().map_err(|e| incomplete(dir, format!("{}: {e}", files::INPUTS)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub seed: u64,
    pub day: usize,
    pub slots: usize,
    pub w_da_star: f64,
    pub binding: Option<usize>,
    pub retained: usize,
    pub delivered: f64,
    pub shed: f64,
    pub energy_cost: f64,
    pub export_revenue: f64,
    pub degradation_cost: f64,
    pub violations: usize,
    pub locked_discharge_mwh: f64,
    pub min_headroom_mw: f64,
}

fn table<R: Serialize>(header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<String, CliError> {
    let err = |e: csv::Error| CliError::Stage { stage: "report", msg: e.to_string() };
    // the header is explicit, so struct rows must not add their own
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Stage { stage: "report", msg: e.to_string() })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Contents of every report file, in [`REPORT_FILES`] order.
pub fn render(dir: &Path) -> Result<Vec<(&'static str, String)>, CliError> {
    let cfg = stored_config(dir)?;
    let run: RunReport = read_json(dir, files::RUN)?;
    let Some(ds) = run.dispatch.clone() else {
        return Err(incomplete(dir, "run stopped after commitment; nothing to report".into()));
    };
    let record: DispatchRecord = read_json(dir, files::DISPATCH_JSON)?;
    let actual = read_limits(dir, files::LIMITS, &cfg)?;
    let real = read_limits(dir, files::REALIZATION, &cfg)?;
    let inputs = read_inputs(dir)?;
    let set = read_scenario_dir(&dir.join(files::SCENARIOS)).map_err(|e| incomplete(dir, format!("scenarios: {e}")))?;
    let retained = set.retained_limits();
    let n = record.slots.len();
    if inputs.len() != n || real.len() != n || actual.len() != n || retained.iter().any(|l| l.len() != n) {
        return Err(incomplete(dir, "records disagree on the number of slots".into()));
    }
    let params = cfg.params();
    let (th, b) = (&params.thermal, &params.bess);

    let band = |t: usize, f: fn(&PccLimitSeries, usize) -> f64| {
        let vals = retained.iter().map(|l| f(l, t));
        (vals.clone().fold(f64::INFINITY, f64::min), vals.fold(f64::NEG_INFINITY, f64::max))
    };
    let envelopes = table(
        &["slot", "actual_p_lo", "actual_p_hi", "retained_p_lo_min", "retained_p_lo_max", "retained_p_hi_min", "retained_p_hi_max"],
        (0..n).map(|t| {
            let lo = band(t, |l, t| l.p_lo[t]);
            let hi = band(t, |l, t| l.p_hi[t]);
            (t + 1, actual.p_lo[t], actual.p_hi[t], lo.0, lo.1, hi.0, hi.1)
        }),
    )?;
    let exchange = table(&["slot", "p_exc", "p_lo", "p_hi", "price"], record.slots.iter().map(|s| (s.slot, s.p_exc, real.p_lo[s.slot - 1], real.p_hi[s.slot - 1], s.price)))?;
    let soc = table(
        &["slot", "e_start", "e_end", "p_ch", "p_dis", "e_min", "e_max"],
        record.slots.iter().map(|s| (s.slot, s.e_bess, record.states[s.slot].e_bess, s.point.p_ch, s.point.p_dis, b.e_min, b.e_max)),
    )?;
    let temperature = table(
        &["slot", "t_in_start", "t_in_end", "t_amb", "q_cool", "t_min", "t_max"],
        record.slots.iter().map(|s| (s.slot, s.t_in, record.states[s.slot].t_in, inputs[s.slot - 1].t_amb, s.point.q_cool, th.t_min, th.t_max)),
    )?;
    let remaining = table(
        &["slot", "r_before", "workload", "shed", "r_after", "mu", "checkpoint"],
        record.slots.iter().map(|s| (s.slot, s.r_before, s.workload, s.shed, s.r_after, u8::from(s.point.mu), inputs[s.slot - 1].checkpoint)),
    )?;
    let headroom = record.slots.iter().map(|s| (s.p_hi - s.p_exc).min(s.p_exc - s.p_lo)).fold(f64::INFINITY, f64::min);
    let m = ds.metrics;
    let summary = Summary {
        config_hash: run.provenance.config_hash.clone(),
        seed: run.provenance.seed,
        day: run.day,
        slots: n,
        w_da_star: run.commitment.w_da_star,
        binding: run.commitment.binding,
        retained: run.commitment.retained.len(),
        delivered: m.delivered,
        shed: m.shed,
        energy_cost: m.energy_cost,
        export_revenue: m.export_revenue,
        degradation_cost: m.degradation_cost,
        violations: ds.violations,
        locked_discharge_mwh: ds.locked_discharge_mwh,
        min_headroom_mw: headroom,
    };
    let mut summary_text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Stage { stage: "report", msg: e.to_string() })?;
    summary_text.push('\n');
    Ok(REPORT_FILES.into_iter().zip([envelopes, exchange, soc, temperature, remaining, summary_text]).collect())
}

/// Writes `report/` inside the run directory; rerunning rewrites identical bytes.
pub fn report(dir: &Path) -> Result<Vec<std::path::PathBuf>, CliError> {
    let out = dir.join(files::REPORT);
    let rendered = render(dir)?;
    fs::create_dir_all(&out).map_err(|e| incomplete(dir, e.to_string()))?;
    let mut written = Vec::new();
    for (name, text) in rendered {
        let p = out.join(name);
        fs::write(&p, text).map_err(|e| incomplete(dir, format!("{name}: {e}")))?;
        written.push(p);
    }
    Ok(written)
}

/// Used by sweeps to store their tables next to the cells.
pub fn write_table<R: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<(), CliError> {
    let text = table(header, rows)?;
    fs::write(path, text).map_err(|e| CliError::Stage { stage: "write", msg: format!("{}: {e}", path.display()) })
}
