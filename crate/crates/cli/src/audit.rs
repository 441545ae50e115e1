//! Re-derives every reported number from the stored record files.

use std::fmt;
use std::fs;
use std::path::Path;

use aidc_core::dispatch::{metrics, DayMetrics, DispatchRecord, RtInputs};
use aidc_core::physics::CheckpointPattern;
use aidc_core::scenario::read_scenario_dir;

use crate::pipeline::{files, locked_discharge, RunReport};
use crate::report::{read_inputs, read_json, read_limits, render, stored_config};
use crate::sweep::{SweepReport, SWEEP_JSON};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.ok { "ok  " } else { "FAIL" };
        if self.detail.is_empty() {
            write!(f, "{tag} {}", self.name)
        } else {
            write!(f, "{tag} {}: {}", self.name, self.detail)
        }
    }
}

fn check(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), ok, detail: if ok { String::new() } else { detail.into() } }
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

fn same_metrics(a: &DayMetrics, b: &DayMetrics) -> bool {
    close(a.delivered, b.delivered)
        && close(a.processed, b.processed)
        && close(a.shed, b.shed)
        && close(a.energy_cost, b.energy_cost)
        && close(a.export_revenue, b.export_revenue)
        && close(a.degradation_cost, b.degradation_cost)
        && a.flagged_steps == b.flagged_steps
}

/// Audits a run directory or a sweep directory.
pub fn audit(dir: &Path) -> Result<Vec<Check>, CliError> {
    if dir.join(SWEEP_JSON).is_file() {
        audit_sweep(dir)
    } else {
        audit_run(dir)
    }
}

fn audit_sweep(dir: &Path) -> Result<Vec<Check>, CliError> {
    let sw: SweepReport = read_json(dir, SWEEP_JSON)?;
    let mut out = Vec::new();
    let mut rdr = csv::Reader::from_path(dir.join(crate::sweep::SWEEP_CSV)).map_err(|e| CliError::Stage { stage: "audit", msg: e.to_string() })?;
    let csv_rows: Vec<crate::sweep::SweepRow> = rdr.deserialize().collect::<Result<_, _>>().map_err(|e| CliError::Stage { stage: "audit", msg: e.to_string() })?;
    out.push(check("sweep.csv matches sweep.json", csv_rows == sw.rows, format!("{} csv rows vs {} json rows", csv_rows.len(), sw.rows.len())));
    for row in &sw.rows {
        let cell = dir.join(&row.run);
        let run: RunReport = read_json(&cell, files::RUN)?;
        let d = run.dispatch.as_ref();
        let ok = close(run.commitment.w_da_star, row.w_da_star)
            && run.commitment.binding == row.binding
            && run.day == row.day
            && match (d, row.delivered) {
                (Some(d), Some(del)) => {
                    close(d.metrics.delivered, del)
                        && row.shed.is_some_and(|s| close(s, d.metrics.shed))
                        && row.energy_cost.is_some_and(|c| close(c, d.metrics.energy_cost))
                        && row.locked_discharge_mwh.is_some_and(|x| close(x, d.locked_discharge_mwh))
                        && row.violations == Some(d.violations)
                }
                (_, None) => row.shed.is_none() && row.violations.is_none(),
                (None, Some(_)) => false,
            };
        out.push(check(format!("row {} traces to its run", row.run), ok, "table cell differs from run.json"));
        for c in audit_run(&cell)? {
            out.push(Check { name: format!("{}: {}", row.run, c.name), ..c });
        }
    }
    Ok(out)
}

fn audit_run(dir: &Path) -> Result<Vec<Check>, CliError> {
    let cfg = stored_config(dir)?;
    let run: RunReport = read_json(dir, files::RUN)?;
    let mut out = Vec::new();

    let hash = cfg.hash();
    out.push(check("config hash", hash == run.provenance.config_hash, format!("{hash} vs {}", run.provenance.config_hash)));
    out.push(check("seed", cfg.seed == run.provenance.seed, format!("{} vs {}", cfg.seed, run.provenance.seed)));

    let set = read_scenario_dir(&dir.join(files::SCENARIOS)).map_err(|e| CliError::Stage { stage: "audit", msg: format!("scenarios: {e}") })?;
    out.push(check("retained scenarios", set.retained == run.commitment.retained, format!("{:?} vs {:?}", set.retained, run.commitment.retained)));

    let commitment: serde_json::Value = read_json(dir, files::COMMITMENT)?;
    let stored_w = commitment["w_da_star"].as_f64().unwrap_or(f64::NAN);
    out.push(check("commitment.json w_da_star", close(stored_w, run.commitment.w_da_star), format!("{stored_w} vs {}", run.commitment.w_da_star)));
    let w_max = &run.commitment.w_max;
    if !w_max.is_empty() {
        let (arg, min) = w_max.iter().enumerate().fold((0, f64::INFINITY), |(ai, am), (i, &w)| if w < am { (i, w) } else { (ai, am) });
        out.push(check("w_da_star is the scenario minimum", close(min, run.commitment.w_da_star), format!("min {min} vs {}", run.commitment.w_da_star)));
        out.push(check("binding scenario", run.commitment.binding == Some(arg), format!("{arg} vs {:?}", run.commitment.binding)));
    }

    let Some(ds) = &run.dispatch else {
        return Ok(out);
    };
    let record: DispatchRecord = read_json(dir, files::DISPATCH_JSON)?;
    let m = metrics(&record);
    out.push(check("metrics", same_metrics(&m, &ds.metrics), format!("recomputed {m:?}")));
    out.push(check("record starts at the commitment", close(record.r_initial, run.commitment.w_da_star), format!("{} vs {}", record.r_initial, run.commitment.w_da_star)));

    let limits = read_limits(dir, files::REALIZATION, &cfg)?;
    let rows = read_inputs(dir)?;
    let inputs = RtInputs {
        limits,
        price: rows.iter().map(|r| r.price).collect(),
        t_amb: rows.iter().map(|r| r.t_amb).collect(),
        checkpoints: CheckpointPattern { delta: rows.iter().map(|r| r.checkpoint != 0).collect() },
        horizon: cfg.dispatch.horizon,
        m_rt: cfg.dispatch.m_rt,
        price_view: cfg.dispatch.price_view,
    };
    let params = cfg.params();
    let v = record.validate(&inputs, &params).map_err(|e| CliError::Stage { stage: "audit", msg: e.to_string() })?;
    out.push(check("violations", v.violations.len() == ds.violations, format!("{} found vs {} reported", v.violations.len(), ds.violations)));

    let outside: Vec<usize> =
        record.slots.iter().filter(|s| s.p_exc > inputs.limits.p_hi[s.slot - 1] + 1e-6 || s.p_exc < inputs.limits.p_lo[s.slot - 1] - 1e-6).map(|s| s.slot).collect();
    out.push(check("exchange inside limits", outside.is_empty(), format!("slots {outside:?}")));
    let broken: Vec<usize> =
        record.slots.iter().filter(|s| (s.r_before - s.workload - s.shed - s.r_after).abs() > 1e-9 * s.r_before.abs().max(1.0)).map(|s| s.slot).collect();
    out.push(check("remaining work chain", broken.is_empty(), format!("slots {broken:?}")));
    let ld = locked_discharge(&record, &inputs, &params, cfg.dispatch.collapse_threshold);
    out.push(check("locked discharge", close(ld, ds.locked_discharge_mwh), format!("{ld} vs {}", ds.locked_discharge_mwh)));

    let report_dir = dir.join(files::REPORT);
    if report_dir.is_dir() {
        for (name, text) in render(dir)? {
            let stored = fs::read_to_string(report_dir.join(name)).unwrap_or_default();
            out.push(check(format!("report/{name}"), stored == text, "differs from the records"));
        }
    }
    Ok(out)
}
