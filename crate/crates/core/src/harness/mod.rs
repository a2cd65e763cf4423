//! Benchmark driver: seeded episodes across shapes and controllers, CSV
//! metrics, JSONL trajectories and cost/success summary tables.

mod config;
mod trajectory;

use std::fmt::Write as _;
use std::fs::{self, File};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::BenchmarkConfig;
pub use trajectory::{dump_trajectory, load_trajectory, read_jsonl, write_jsonl, TrajectoryRecord};

use crate::controller::{run_episode, ControllerKind, EpisodeProbe, EpisodeResult, NoProbe};
use crate::cost::{aggregate, Aggregate, EpisodeMetrics, Termination};
use crate::error::{Error, Result};
use crate::geometry::{sample_curve_with, ShapeKind, SurfaceCurve};

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of episode `index` of `shape`: `base_seed` xor a hash of both.
pub fn episode_seed(base_seed: u64, shape: ShapeKind, index: usize) -> u64 {
    let tag = (shape as u64 + 1) << 48 | index as u64;
    base_seed ^ splitmix64(tag)
}

/// Curve of an episode; shared by every controller run on that episode.
pub fn episode_curve(cfg: &BenchmarkConfig, shape: ShapeKind, seed: u64) -> Result<SurfaceCurve> {
    sample_curve_with(shape, &cfg.sampling, seed)
}

/// One CSV row per (shape, episode, controller).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub shape: ShapeKind,
    pub episode_index: usize,
    pub seed: u64,
    pub controller: ControllerKind,
    pub success: bool,
    pub terminal_event: Termination,
    pub total_cost: f64,
    pub steps: usize,
    pub wall_ms: f64,
}

impl EpisodeRow {
    pub fn metrics(&self) -> EpisodeMetrics {
        EpisodeMetrics {
            total_cost: self.total_cost,
            success: self.success,
            steps: self.steps,
            terminal_event: self.terminal_event,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub shape: ShapeKind,
    pub controller: ControllerKind,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub rows: Vec<EpisodeRow>,
    pub summaries: Vec<Summary>,
}

impl BenchmarkReport {
    pub fn summary(&self, shape: ShapeKind, controller: ControllerKind) -> Option<&Aggregate> {
        self.summaries
            .iter()
            .find(|s| s.shape == shape && s.controller == controller)
            .map(|s| &s.aggregate)
    }
}

/// Runs a single benchmark episode exactly as the full benchmark would.
pub fn run_single<P: EpisodeProbe + ?Sized>(
    cfg: &BenchmarkConfig,
    shape: ShapeKind,
    controller: ControllerKind,
    index: usize,
    record: bool,
    probe: &mut P,
) -> Result<(EpisodeRow, EpisodeResult)> {
    let seed = episode_seed(cfg.base_seed, shape, index);
    let curve = episode_curve(cfg, shape, seed)?;
    let start = Instant::now();
    let result = run_episode(curve, controller, &cfg.episode, splitmix64(seed), record, probe)?;
    let wall_ms = if cfg.record_wall_time { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
    let m = result.metrics;
    let row = EpisodeRow {
        shape,
        episode_index: index,
        seed,
        controller,
        success: m.success,
        terminal_event: m.terminal_event,
        total_cost: m.total_cost,
        steps: m.steps,
        wall_ms,
    };
    Ok((row, result))
}

/// Groups rows by (shape, controller) in the order they first appear.
pub fn summarize(rows: &[EpisodeRow]) -> Result<Vec<Summary>> {
    let mut keys: Vec<(ShapeKind, ControllerKind)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.shape, r.controller)) {
            keys.push((r.shape, r.controller));
        }
    }
    keys.into_iter()
        .map(|(shape, controller)| {
            let metrics: Vec<EpisodeMetrics> = rows
                .iter()
                .filter(|r| r.shape == shape && r.controller == controller)
                .map(EpisodeRow::metrics)
                .collect();
            Ok(Summary { shape, controller, aggregate: aggregate(&metrics)? })
        })
        .collect()
}

pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    run_benchmark_with(cfg, || NoProbe).map(|(report, _)| report)
}

/// Runs the benchmark with one fresh probe per episode, returning the probes
/// in row order alongside the report. Writes the CSV and trajectory files
/// named in `cfg` once all episodes are done.
pub fn run_benchmark_with<P, F>(cfg: &BenchmarkConfig, make_probe: F) -> Result<(BenchmarkReport, Vec<P>)>
where
    P: EpisodeProbe + Send,
    F: Fn() -> P + Sync,
{
    cfg.validate()?;
    let jobs: Vec<(ShapeKind, usize, ControllerKind)> = cfg
        .shapes
        .iter()
        .flat_map(|&s| {
            (0..cfg.episodes_per_shape).flat_map(move |i| cfg.controllers.iter().map(move |&c| (s, i, c)))
        })
        .collect();
    let record = cfg.trajectory_dir.is_some();
    let work = || {
        jobs.par_iter()
            .map(|&(shape, index, controller)| {
                let mut probe = make_probe();
                let (row, result) = run_single(cfg, shape, controller, index, record, &mut probe)?;
                Ok((row, result.records, probe))
            })
            .collect::<Result<Vec<_>>>()
    };
    let mut results = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    results.sort_by_key(|(row, _, _)| {
        let shape = cfg.shapes.iter().position(|s| *s == row.shape).unwrap_or(usize::MAX);
        let ctrl = cfg.controllers.iter().position(|c| *c == row.controller).unwrap_or(usize::MAX);
        (shape, ctrl, row.episode_index)
    });

    if let Some(dir) = &cfg.trajectory_dir {
        fs::create_dir_all(dir)?;
        for (row, records, _) in &results {
            let name = format!("{}_{}_{:04}.jsonl", row.shape, row.controller, row.episode_index);
            dump_trajectory(records, &dir.join(name))?;
        }
    }
    let mut rows = Vec::with_capacity(results.len());
    let mut probes = Vec::with_capacity(results.len());
    for (row, _, probe) in results {
        rows.push(row);
        probes.push(probe);
    }
    if let Some(path) = &cfg.csv_path {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        write_csv(&rows, File::create(path)?)?;
    }
    let summaries = summarize(&rows)?;
    Ok((BenchmarkReport { rows, summaries }, probes))
}

pub fn write_csv<W: std::io::Write>(rows: &[EpisodeRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<EpisodeRow>> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn load_csv(path: &Path) -> Result<Vec<EpisodeRow>> {
    read_csv(File::open(path)?)
}

fn cell(v: f64) -> String {
    if v.is_nan() {
        "-".into()
    } else {
        format!("{v:.1}")
    }
}

/// Cost and success tables, one row per shape and one column per controller.
pub fn format_summary(summaries: &[Summary]) -> String {
    let mut shapes: Vec<ShapeKind> = Vec::new();
    let mut ctrls: Vec<ControllerKind> = Vec::new();
    for s in summaries {
        if !shapes.contains(&s.shape) {
            shapes.push(s.shape);
        }
        if !ctrls.contains(&s.controller) {
            ctrls.push(s.controller);
        }
    }
    let find = |shape, ctrl| summaries.iter().find(|s| s.shape == shape && s.controller == ctrl);
    let mut out = String::new();
    let tables: [(&str, fn(&Aggregate) -> f64); 3] = [
        ("Total cost E (mean over successful episodes)", |a| a.mean_cost_success),
        ("Total cost E (mean over all episodes)", |a| a.mean_cost_all),
        ("Success rate (%)", |a| a.success_rate),
    ];
    for (title, value) in tables {
        let _ = writeln!(out, "{title}");
        let _ = write!(out, "{:<8}", "");
        for c in &ctrls {
            let _ = write!(out, " | {:>10}", c.as_str());
        }
        let _ = writeln!(out);
        for &s in &shapes {
            let _ = write!(out, "{:<8}", s.as_str());
            for &c in &ctrls {
                let v = find(s, c).map(|x| cell(value(&x.aggregate))).unwrap_or_else(|| "-".into());
                let _ = write!(out, " | {v:>10}");
            }
            let _ = writeln!(out);
        }
        let _ = writeln!(out);
    }
    out
}
