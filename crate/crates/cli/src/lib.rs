//! `aidc`: each stage of the day pipeline as a subcommand, plus sweeps,
//! reports and audits over the run directories they leave behind.
//!
//! Any config key can be overridden on the command line as
//! `--section.key value` (or `--section.key=value`), applied after the file.

pub mod audit;
pub mod config;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod sweep;

use std::path::PathBuf;

use aidc_core::planner::{build_scenario_milp, DaObjective};
use aidc_core::scenario::{read_scenario_dir, write_scenario_dir};
use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::pipeline::{files, write_dispatch, write_json, write_limits, DispatchSummary};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{stage} failed: {msg}")]
    Stage { stage: &'static str, msg: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage { .. } => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "aidc", version, about = "Grid-constrained AI data center: limits, commitment, dispatch")]
struct Cli {
    /// TOML experiment config; defaults are used for anything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Exchange limits implied by the day's demand (CSV).
    Limits {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate and filter the limit ensemble into a directory.
    Scenarios {
        #[arg(long)]
        out: PathBuf,
    },
    /// Day-ahead commitment over the retained scenarios.
    Commit {
        /// Scenario directory from `aidc scenarios`; generated when absent.
        #[arg(long)]
        scenario_dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write each scenario's max-workload model as MPS into this directory.
        #[arg(long)]
        mps: Option<PathBuf>,
    },
    /// Real-time delivery of a commitment.
    Dispatch {
        #[arg(long, conflicts_with = "commitment", required_unless_present = "commitment")]
        w_da: Option<f64>,
        /// commitment.json from `aidc commit`.
        #[arg(long)]
        commitment: Option<PathBuf>,
        /// Realized limits CSV; otherwise `dispatch.realization` decides.
        #[arg(long)]
        limits: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Every stage for one day, into a run directory.
    RunDay {
        /// Stop after the commitment.
        #[arg(long)]
        no_dispatch: bool,
    },
    /// Cross-product of the sweep axes.
    Sweep,
    /// Plot-ready CSVs and a summary for a finished run.
    Report { dir: PathBuf },
    /// Re-derive reported numbers from the records; exit 3 on any mismatch.
    Audit { dir: PathBuf },
}

/// Pulls `--<config key> value` pairs out of the arguments.
pub fn split_overrides(args: &[String]) -> Result<(Vec<String>, Vec<(String, String)>), CliError> {
    let roots = config::override_roots();
    let (mut rest, mut overrides) = (Vec::new(), Vec::new());
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let Some(flag) = a.strip_prefix("--") else {
            rest.push(a.clone());
            continue;
        };
        let (key, inline) = match flag.split_once('=') {
            Some((k, v)) => (k, Some(v.to_string())),
            None => (flag, None),
        };
        let root = key.split('.').next().unwrap_or("");
        if !roots.iter().any(|r| r == root) {
            rest.push(a.clone());
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it.next().cloned().ok_or_else(|| CliError::Config(format!("--{key} needs a value")))?,
        };
        overrides.push((key.to_string(), value));
    }
    Ok((rest, overrides))
}

/// Runs the command line (program name first) and returns the exit code.
pub fn run(args: Vec<String>) -> i32 {
    let (rest, overrides) = match split_overrides(&args) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(&rest) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, &overrides) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn stage_io(stage: &'static str) -> impl Fn(std::io::Error) -> CliError {
    move |e| CliError::Stage { stage, msg: e.to_string() }
}

fn execute(cli: Cli, overrides: &[(String, String)]) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Report { dir } => {
            for p in report::report(&dir)? {
                println!("{}", p.display());
            }
            return Ok(());
        }
        Cmd::Audit { dir } => {
            let checks = audit::audit(&dir)?;
            let failed = checks.iter().filter(|c| !c.ok).count();
            for c in &checks {
                println!("{c}");
            }
            println!("{} checks, {failed} failed", checks.len());
            return if failed == 0 { Ok(()) } else { Err(CliError::Stage { stage: "audit", msg: format!("{failed} checks failed") }) };
        }
        _ => {}
    }
    let cfg = ExperimentConfig::load(cli.config.as_deref(), overrides)?;
    match cli.cmd {
        Cmd::Limits { out } => {
            let ctx = pipeline::load_day(&cfg)?;
            let l = pipeline::actual_limits(&cfg, &ctx)?;
            match out {
                Some(p) => write_limits(&p, &l)?,
                None => l.write_csv(std::io::stdout()).map_err(|e| CliError::Stage { stage: "limits", msg: e.to_string() })?,
            }
        }
        Cmd::Scenarios { out } => {
            let ctx = pipeline::load_day(&cfg)?;
            let set = pipeline::scenario_set(&cfg, &ctx)?;
            write_scenario_dir(&set, &out).map_err(|e| CliError::Stage { stage: "scenarios", msg: e.to_string() })?;
            println!("{} scenarios, {} retained -> {}", set.raw.len(), set.retained.len(), out.display());
        }
        Cmd::Commit { scenario_dir, out, mps } => {
            let ctx = pipeline::load_day(&cfg)?;
            let set = match scenario_dir {
                Some(dir) => read_scenario_dir(&dir).map_err(|e| CliError::Stage { stage: "scenarios", msg: e.to_string() })?,
                None => pipeline::scenario_set(&cfg, &ctx)?,
            };
            if let Some(dir) = mps {
                std::fs::create_dir_all(&dir).map_err(stage_io("commit"))?;
                let opts = cfg.planner_options();
                for (i, l) in set.retained_limits().iter().enumerate() {
                    let sm = build_scenario_milp(l, &ctx.day_inputs(), &cfg.params(), &opts, opts.pwl, DaObjective::MaxWorkload)
                        .map_err(|e| CliError::Stage { stage: "commit", msg: e.to_string() })?;
                    aidc_milp::mps::write_mps_file(&sm.model, &dir.join(format!("scenario_{i:04}.mps"))).map_err(|e| CliError::Stage { stage: "commit", msg: e.to_string() })?;
                }
            }
            let res = pipeline::commitment(&cfg, &ctx, &set)?;
            println!("w_da_star {:.6e} binding {:?}", res.w_da_star, res.binding);
            if let Some(p) = out {
                write_json(&p, &res)?;
            }
        }
        Cmd::Dispatch { w_da, commitment, limits, out } => {
            let w = match (w_da, commitment) {
                (Some(w), _) => w,
                (None, Some(p)) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                    v["w_da_star"].as_f64().ok_or_else(|| CliError::Config(format!("{}: no w_da_star", p.display())))?
                }
                (None, None) => unreachable!("clap requires one of them"),
            };
            let ctx = pipeline::load_day(&cfg)?;
            let real = match limits {
                Some(p) => {
                    let f = std::fs::File::open(&p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                    let g = &cfg.grid;
                    aidc_core::PccLimitSeries::read_csv(f, g.r_grid, g.import_cap, g.export_floor)
                        .map_err(|e| CliError::Stage { stage: "dispatch", msg: format!("{}: {e}", p.display()) })?
                }
                None => {
                    let actual = pipeline::actual_limits(&cfg, &ctx)?;
                    match cfg.realization()? {
                        config::Realization::Actual => actual,
                        config::Realization::Retained(_) => pipeline::realization(&cfg, &actual, &pipeline::scenario_set(&cfg, &ctx)?)?,
                    }
                }
            };
            let inputs = pipeline::rt_inputs(&cfg, &ctx, real);
            let (record, m) = pipeline::dispatch(&cfg, &inputs, w)?;
            std::fs::create_dir_all(&out).map_err(stage_io("dispatch"))?;
            write_limits(&out.join(files::REALIZATION), &inputs.limits)?;
            write_dispatch(&out, &record)?;
            let params = cfg.params();
            let v = record.validate(&inputs, &params).map_err(|e| CliError::Stage { stage: "dispatch", msg: e.to_string() })?;
            let summary = DispatchSummary {
                realization: cfg.dispatch.realization.clone(),
                metrics: m,
                violations: v.violations.len(),
                locked_discharge_mwh: pipeline::locked_discharge(&record, &inputs, &params, cfg.dispatch.collapse_threshold),
            };
            write_json(&out.join("metrics.json"), &summary)?;
            println!("delivered {:.6e} shed {:.3e} cost {:.2} violations {}", m.delivered, m.shed, m.energy_cost, summary.violations);
        }
        Cmd::RunDay { no_dispatch } => {
            let o = pipeline::run_day(&cfg, !no_dispatch)?;
            let r = &o.report;
            print!("{}{}: w_da_star {:.6e}", o.dir.display(), if o.reused { " (existing)" } else { "" }, r.commitment.w_da_star);
            if let Some(d) = &r.dispatch {
                print!(" shed {:.3e} cost {:.2} violations {}", d.metrics.shed, d.metrics.energy_cost, d.violations);
            }
            println!();
        }
        Cmd::Sweep => {
            let (dir, rep) = sweep::sweep(&cfg)?;
            println!("{} cells -> {}", rep.rows.len(), dir.join(sweep::SWEEP_CSV).display());
        }
        Cmd::Report { .. } | Cmd::Audit { .. } => unreachable!("handled above"),
    }
    Ok(())
}
