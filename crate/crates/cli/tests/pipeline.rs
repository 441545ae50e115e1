use std::path::Path;

use aidc_cli::audit::audit;
use aidc_cli::config::ExperimentConfig;
use aidc_cli::pipeline::{self, files, run_day, RunReport};
use aidc_cli::report::{read_json, report, REPORT_FILES};
use aidc_cli::sweep::{sweep, SweepRow};
use aidc_core::planner::{fleet_slot_units, max_deliverable};
use aidc_core::PccLimitSeries;

/// CI fixture with a small ensemble so each commitment is quick.
fn small(out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig { out_dir: out.to_path_buf(), ..Default::default() };
    c.scenarios.n_raw = 4;
    c.scenarios.alpha = 0.5;
    c
}

fn clean(dir: &Path) {
    let checks = audit(dir).unwrap();
    let bad: Vec<String> = checks.iter().filter(|c| !c.ok).map(|c| c.to_string()).collect();
    assert!(bad.is_empty(), "{bad:#?}");
}

#[test]
fn commit_only_sweep_is_monotone_and_audits() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.sweep.kappa = vec![1.0, 1.25, 1.5];
    cfg.sweep.bess_scale = vec![0.5, 1.0, 2.0];
    cfg.sweep.dispatch = false;
    let (dir, rep) = sweep(&cfg).unwrap();
    assert_eq!(rep.rows.len(), 9);
    let w = |k: f64, b: f64| rep.rows.iter().find(|r| r.kappa == k && r.bess_scale == b).unwrap().w_da_star;
    let tol = 1e-6;
    for b in [0.5, 1.0, 2.0] {
        assert!(w(1.0, b) <= w(1.25, b) * (1.0 + tol) && w(1.25, b) <= w(1.5, b) * (1.0 + tol), "kappa axis at bess {b}");
    }
    for k in [1.0, 1.25, 1.5] {
        assert!(w(k, 0.5) <= w(k, 1.0) * (1.0 + tol) && w(k, 1.0) <= w(k, 2.0) * (1.0 + tol), "bess axis at kappa {k}");
    }
    assert!(rep.rows.iter().all(|r| r.shed.is_none() && r.delivered.is_none()));
    let rows: Vec<SweepRow> = csv::Reader::from_path(dir.join("sweep.csv")).unwrap().deserialize().collect::<Result<_, _>>().unwrap();
    assert_eq!(rows, rep.rows);
    clean(&dir);
    // second invocation reuses every cell
    let (_, again) = sweep(&cfg).unwrap();
    assert_eq!(again, rep);
}

#[test]
fn single_point_sweep_matches_run_day() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    let (dir, rep) = sweep(&cfg).unwrap();
    let direct = run_day(&small(&tmp.path().join("direct")), true).unwrap();
    let d = direct.report.dispatch.as_ref().unwrap();
    let row = &rep.rows[0];
    assert_eq!(row.w_da_star, direct.report.commitment.w_da_star);
    assert_eq!(row.binding, direct.report.commitment.binding);
    assert_eq!(row.delivered, Some(d.metrics.delivered));
    assert_eq!(row.shed, Some(d.metrics.shed));
    assert_eq!(row.energy_cost, Some(d.metrics.energy_cost));
    let cell: RunReport = read_json(&dir.join(&row.run), files::RUN).unwrap();
    assert_eq!(cell.commitment, direct.report.commitment);
    assert_eq!(cell.dispatch, direct.report.dispatch);
}

#[test]
fn report_is_idempotent_and_exchange_stays_inside_limits() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_day(&small(tmp.path()), true).unwrap();
    assert!(!out.reused);
    assert_eq!(out.report.dispatch.as_ref().unwrap().violations, 0);
    let first = report(&out.dir).unwrap();
    assert_eq!(first.len(), REPORT_FILES.len());
    let bytes: Vec<Vec<u8>> = first.iter().map(|p| std::fs::read(p).unwrap()).collect();
    report(&out.dir).unwrap();
    let again: Vec<Vec<u8>> = first.iter().map(|p| std::fs::read(p).unwrap()).collect();
    assert_eq!(bytes, again);

    let mut rdr = csv::Reader::from_path(out.dir.join("report/exchange.csv")).unwrap();
    let h = rdr.headers().unwrap().clone();
    let col = |name: &str| h.iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name} in {h:?}"));
    let (pe, lo, hi) = (col("p_exc"), col("p_lo"), col("p_hi"));
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let v = |i: usize| rec[i].parse::<f64>().unwrap();
        assert!(v(pe) <= v(hi) + 1e-6 && v(pe) >= v(lo) - 1e-6, "{rec:?}");
        n += 1;
    }
    assert_eq!(n, out.report.slots);
    clean(&out.dir);
    assert!(run_day(&small(tmp.path()), true).unwrap().reused);
}

#[test]
fn removing_the_battery_never_raises_the_commitment() {
    let tmp = tempfile::tempdir().unwrap();
    let mut with = small(tmp.path());
    with.grid.kappa = 1.25;
    let mut without = with.clone();
    without.plant.bess_scale = 0.0;
    let w_with = run_day(&with, false).unwrap().report.commitment.w_da_star;
    let w_without = run_day(&without, false).unwrap().report.commitment.w_da_star;
    assert!(w_without <= w_with * (1.0 + 1e-9), "{w_without} > {w_with}");
    assert!(w_without > 0.0);
    // at the nominal ratings the collapsed slots sit below the idle draw, so
    // only the battery makes the day committable at all
    with.grid.kappa = 1.0;
    without.grid.kappa = 1.0;
    assert!(run_day(&with, false).is_ok());
    match run_day(&without, false) {
        Err(e @ aidc_cli::CliError::Stage { stage: "commit", .. }) => assert_eq!(e.exit_code(), 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn loose_lines_commit_the_plant_maximum() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.grid.kappa = 10.0;
    let ctx = pipeline::load_day(&cfg).unwrap();
    let actual = pipeline::actual_limits(&cfg, &ctx).unwrap();
    let g = &cfg.grid;
    let loose = PccLimitSeries::constant(ctx.len(), g.export_floor, g.import_cap, g.r_grid);
    assert_eq!(actual, loose);
    let set = pipeline::scenario_set(&cfg, &ctx).unwrap();
    let res = pipeline::commitment(&cfg, &ctx, &set).unwrap();
    let cap = max_deliverable(&loose, &ctx.day_inputs(), &cfg.params(), &cfg.planner_options()).unwrap();
    assert!((res.w_da_star - cap).abs() <= 1e-6 * cap, "{} vs {cap}", res.w_da_star);
    // every server at full throughput in every slot
    let ceiling = fleet_slot_units(&cfg.params()) * ctx.len() as f64;
    assert!((cap - ceiling).abs() <= 1e-6 * ceiling, "{cap} vs {ceiling}");
}

#[test]
fn retained_realizations_are_delivered_in_full() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    let ctx = pipeline::load_day(&cfg).unwrap();
    let set = pipeline::scenario_set(&cfg, &ctx).unwrap();
    let res = pipeline::commitment(&cfg, &ctx, &set).unwrap();
    let actual = pipeline::actual_limits(&cfg, &ctx).unwrap();
    for i in [0, set.retained.len() - 1] {
        let mut c = cfg.clone();
        c.dispatch.realization = format!("scenario:{i}");
        let limits = pipeline::realization(&c, &actual, &set).unwrap();
        let inputs = pipeline::rt_inputs(&c, &ctx, limits);
        let (record, m) = pipeline::dispatch(&c, &inputs, res.w_da_star).unwrap();
        assert!(m.shed <= 1e-6 * res.w_da_star, "scenario {i} shed {}", m.shed);
        assert!(record.validate(&inputs, &c.params()).unwrap().violations.is_empty());
    }
}
