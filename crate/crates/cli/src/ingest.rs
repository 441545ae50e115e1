//! Price, ambient temperature and system demand series.
//!
//! CSV schema: a header `timestamp,<column>` and one row per interval, with
//! `timestamp` as `YYYY-MM-DDTHH:MM[:SS]` marking the start of the interval.
//! Series must start at midnight and have no gaps. Finer resolutions that
//! divide the slot length are averaged down; nothing is ever imputed.

use std::f64::consts::PI;
use std::path::Path;

use chrono::{Datelike, NaiveDate, NaiveDateTime, TimeDelta, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::config::SynthConfig;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{file}: {msg}")]
    Format { file: String, msg: String },
    #[error("{file}: missing slot {slot} ({expected})")]
    MissingSlot { file: String, slot: usize, expected: NaiveDateTime },
    #[error("{file}: misaligned with {other}: {msg}")]
    Misaligned { file: String, other: String, msg: String },
    #[error("day {day} outside the {days} loaded")]
    Day { day: usize, days: usize },
}

/// Three aligned series at the slot resolution, whole days only.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub start: NaiveDateTime,
    pub dt_minutes: u32,
    pub slots_per_day: usize,
    /// $/MWh.
    pub price: Vec<f64>,
    /// °C.
    pub t_amb: Vec<f64>,
    /// System demand, MW.
    pub demand: Vec<f64>,
}

/// One day cut out of a [`Series`].
#[derive(Debug, Clone, PartialEq)]
pub struct DaySeries {
    pub price: Vec<f64>,
    pub t_amb: Vec<f64>,
    pub demand: Vec<f64>,
    pub hour: Vec<f64>,
    /// 0 = Monday.
    pub weekday: u8,
}

impl Series {
    pub fn days(&self) -> usize {
        self.price.len() / self.slots_per_day
    }

    pub fn day(&self, d: usize) -> Result<DaySeries, IngestError> {
        if d >= self.days() {
            return Err(IngestError::Day { day: d, days: self.days() });
        }
        let r = d * self.slots_per_day..(d + 1) * self.slots_per_day;
        let date = self.start.date() + TimeDelta::days(d as i64);
        Ok(DaySeries {
            price: self.price[r.clone()].to_vec(),
            t_amb: self.t_amb[r.clone()].to_vec(),
            demand: self.demand[r].to_vec(),
            hour: (0..self.slots_per_day).map(|t| t as f64 * self.dt_minutes as f64 / 60.0).collect(),
            weekday: date.weekday().num_days_from_monday() as u8,
        })
    }
}

fn parse_time(s: &str) -> Option<NaiveDateTime> {
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"].iter().find_map(|f| NaiveDateTime::parse_from_str(s.trim(), f).ok())
}

/// One column at its native resolution.
fn read_raw(path: &Path, column: &str) -> Result<(Vec<NaiveDateTime>, Vec<f64>), IngestError> {
    let file = path.display().to_string();
    let fmt = |msg: String| IngestError::Format { file: file.clone(), msg };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| fmt(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| fmt(e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "timestamp" || &headers[1] != column {
        return Err(fmt(format!("expected header `timestamp,{column}`, found `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let (mut ts, mut vals) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| fmt(e.to_string()))?;
        let line = i + 2;
        let t = parse_time(&rec[0]).ok_or_else(|| fmt(format!("line {line}: bad timestamp `{}`", &rec[0])))?;
        let v: f64 = rec[1].parse().map_err(|_| fmt(format!("line {line}: bad value `{}`", &rec[1])))?;
        if !v.is_finite() {
            return Err(fmt(format!("line {line}: non-finite value")));
        }
        ts.push(t);
        vals.push(v);
    }
    if ts.len() < 2 {
        return Err(fmt("need at least two rows".into()));
    }
    Ok((ts, vals))
}

/// Reads one column and averages it down to `dt_minutes` slots.
pub fn read_column(path: &Path, column: &str, dt_minutes: u32, slots_per_day: usize) -> Result<(NaiveDateTime, Vec<f64>), IngestError> {
    let file = path.display().to_string();
    let (ts, vals) = read_raw(path, column)?;
    let step = (ts[1] - ts[0]).num_minutes();
    if step <= 0 || dt_minutes as i64 % step != 0 {
        return Err(IngestError::Format { file, msg: format!("resolution of {step} min cannot be resampled to {dt_minutes} min") });
    }
    let per = (dt_minutes as i64 / step) as usize;
    let start = ts[0];
    if start.time().num_seconds_from_midnight() != 0 {
        return Err(IngestError::Format { file, msg: format!("series starts at {start}, not at midnight") });
    }
    let at = |i: usize| start + TimeDelta::minutes(step * i as i64);
    for (i, &t) in ts.iter().enumerate() {
        if t > at(i) {
            return Err(IngestError::MissingSlot { file, slot: i / per, expected: at(i - i % per) });
        }
        if t < at(i) {
            return Err(IngestError::Format { file, msg: format!("row {} at {t} is out of order or duplicated", i + 2) });
        }
    }
    let per_day = per * slots_per_day;
    if ts.len() % per_day != 0 {
        let slot = ts.len() / per;
        return Err(IngestError::MissingSlot { file, slot, expected: at(slot * per) });
    }
    let slots = vals.chunks(per).map(|c| c.iter().sum::<f64>() / per as f64).collect();
    Ok((start, slots))
}

/// Loads the three series and checks they cover the same slots.
pub fn ingest_csv(price: &Path, temperature: &Path, demand: &Path, dt_minutes: u32, slots_per_day: usize) -> Result<Series, IngestError> {
    let (s0, p) = read_column(price, "price", dt_minutes, slots_per_day)?;
    let mut out = Series { start: s0, dt_minutes, slots_per_day, price: p, t_amb: Vec::new(), demand: Vec::new() };
    for (path, col) in [(temperature, "t_amb"), (demand, "demand")] {
        let (s, v) = read_column(path, col, dt_minutes, slots_per_day)?;
        let other = price.display().to_string();
        let file = path.display().to_string();
        if s != s0 {
            return Err(IngestError::Misaligned { file, other, msg: format!("starts at {s}, not {s0}") });
        }
        if v.len() != out.price.len() {
            return Err(IngestError::Misaligned { file, other, msg: format!("{} slots, not {}", v.len(), out.price.len()) });
        }
        if col == "t_amb" {
            out.t_amb = v;
        } else {
            out.demand = v;
        }
    }
    Ok(out)
}

/// Seeded sinusoid-plus-noise series starting Monday 2024-01-01.
///
/// Each day draws a demand scale in [0.95, 1.05], a price scale in
/// [0.85, 1.15] and an ambient offset in [-2, 2] °C; each slot then adds
/// Gaussian noise of relative size `noise` to demand and price and `noise`
/// °C to ambient.
pub fn synthesize(cfg: &SynthConfig, dt_minutes: u32, slots_per_day: usize, seed: u64) -> Series {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let (mut price, mut t_amb, mut demand) = (Vec::new(), Vec::new(), Vec::new());
    let shape = |h: f64, lag: f64| (2.0 * PI * (h - cfg.peak_hour - lag) / 24.0).cos();
    for _ in 0..cfg.days {
        let d_scale = rng.random_range(0.95..1.05);
        let p_scale = rng.random_range(0.85..1.15);
        let t_off = rng.random_range(-2.0..2.0);
        for t in 0..slots_per_day {
            let h = t as f64 * dt_minutes as f64 / 60.0;
            let mut z = || cfg.noise * normal.sample(&mut rng);
            demand.push((cfg.demand_base + cfg.demand_amp * shape(h, 0.0)) * d_scale * (1.0 + z()));
            price.push((cfg.price_base + cfg.price_amp * shape(h, 0.0)) * p_scale * (1.0 + z()));
            t_amb.push(cfg.temp_base + cfg.temp_amp * shape(h, 2.0) + t_off + z());
        }
    }
    let start = NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date").and_hms_opt(0, 0, 0).expect("valid time");
    Series { start, dt_minutes, slots_per_day, price, t_amb, demand }
}

/// Writes the three files in the schema [`ingest_csv`] reads.
pub fn write_series(series: &Series, price: &Path, temperature: &Path, demand: &Path) -> std::io::Result<()> {
    for (path, col, vals) in [(price, "price", &series.price), (temperature, "t_amb", &series.t_amb), (demand, "demand", &series.demand)] {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["timestamp", col])?;
        for (i, v) in vals.iter().enumerate() {
            let t = series.start + TimeDelta::minutes(series.dt_minutes as i64 * i as i64);
            w.write_record([t.format("%Y-%m-%dT%H:%M").to_string(), v.to_string()])?;
        }
        w.flush()?;
    }
    Ok(())
}
