//! Cross-product sweeps over κ, battery energy, checkpoint period and day.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::pipeline::{run_day, write_json, Provenance};
use crate::report::write_table;
use crate::CliError;

pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_JSON: &str = "sweep.json";
pub const CELLS: &str = "cells";

/// One cell; dispatch columns are empty when the sweep only commits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kappa: f64,
    pub bess_scale: f64,
    pub checkpoint_period: usize,
    pub day: usize,
    pub w_da_star: f64,
    pub binding: Option<usize>,
    pub delivered: Option<f64>,
    pub shed: Option<f64>,
    pub energy_cost: Option<f64>,
    pub locked_discharge_mwh: Option<f64>,
    pub violations: Option<usize>,
    /// Cell run directory, relative to the sweep directory.
    pub run: String,
}

pub const SWEEP_HEADER: [&str; 12] =
    ["kappa", "bess_scale", "checkpoint_period", "day", "w_da_star", "binding", "delivered", "shed", "energy_cost", "locked_discharge_mwh", "violations", "run"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub provenance: Provenance,
    pub rows: Vec<SweepRow>,
}

/// Configs of every cell, κ slowest and day fastest.
pub fn cells(cfg: &ExperimentConfig, dir: &std::path::Path) -> Vec<ExperimentConfig> {
    let s = &cfg.sweep;
    let mut out = Vec::new();
    for &kappa in &s.kappa {
        for &bess in &s.bess_scale {
            for &period in &s.checkpoint_period {
                for &day in &s.days {
                    let mut c = cfg.clone();
                    c.name = format!("k{kappa}-b{bess}-p{period}-d{day}");
                    c.out_dir = dir.join(CELLS);
                    c.grid.kappa = kappa;
                    c.plant.bess_scale = bess;
                    c.data.checkpoint_period = period;
                    c.data.day = day;
                    c.sweep.kappa = vec![kappa];
                    c.sweep.bess_scale = vec![bess];
                    c.sweep.checkpoint_period = vec![period];
                    c.sweep.days = vec![day];
                    out.push(c);
                }
            }
        }
    }
    out
}

pub fn sweep_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out_dir.join(format!("{}-sweep-{}", cfg.name, &cfg.hash()[..12]))
}

/// Runs every cell (in parallel) and writes the sweep tables.
pub fn sweep(cfg: &ExperimentConfig) -> Result<(PathBuf, SweepReport), CliError> {
    let dir = sweep_dir(cfg);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Stage { stage: "setup", msg: format!("{}: {e}", dir.display()) })?;
    let simulate = cfg.sweep.dispatch;
    let rows = cells(cfg, &dir)
        .into_par_iter()
        .map(|c| {
            let out = run_day(&c, simulate)?;
            let r = &out.report;
            let d = r.dispatch.as_ref().filter(|_| simulate);
            let rel = out.dir.strip_prefix(&dir).unwrap_or(&out.dir).to_string_lossy().into_owned();
            Ok(SweepRow {
                kappa: c.grid.kappa,
                bess_scale: c.plant.bess_scale,
                checkpoint_period: c.data.checkpoint_period,
                day: c.data.day,
                w_da_star: r.commitment.w_da_star,
                binding: r.commitment.binding,
                delivered: d.map(|d| d.metrics.delivered),
                shed: d.map(|d| d.metrics.shed),
                energy_cost: d.map(|d| d.metrics.energy_cost),
                locked_discharge_mwh: d.map(|d| d.locked_discharge_mwh),
                violations: d.map(|d| d.violations),
                run: rel,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    write_table(&dir.join(SWEEP_CSV), &SWEEP_HEADER, &rows)?;
    let report = SweepReport { provenance: Provenance::of(cfg), rows };
    write_json(&dir.join(SWEEP_JSON), &report)?;
    Ok((dir, report))
}
