//! K-sweep harness.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::scenario::Scenario;
use crate::broadphase::SkinRule;
use crate::engine::{run, PhaseMetrics, RunOptions, SimError, SimState, TimingMode};

/// The study's K grid, covering 0 to 5000.
pub const DEFAULT_K_GRID: [u32; 10] = [0, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000];

/// `k` value written for the buffer-disabled baseline row.
pub const BASELINE_K: i64 = -1;
/// `k` value written for the uniform skin = radius comparison row.
pub const UNIFORM_SKIN_K: i64 = -2;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("improvement needs a positive baseline time, got {0}")]
    NonPositiveBaseline(f64),
    #[error("sweep needs at least one K value")]
    EmptyKGrid,
    #[error("run with K = {k} failed: {source}")]
    Run {
        k: i64,
        #[source]
        source: SimError,
    },
    #[error("run with K = {k} diverged from the baseline final state")]
    EquivalenceViolation { k: i64 },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("building worker pool: {0}")]
    Pool(String),
}

/// Relative gain of `time_case` over the run without the buffer, in percent.
pub fn improvement(time_without_buffer: f64, time_case: f64) -> Result<f64, BenchError> {
    if !(time_without_buffer > 0.0) {
        return Err(BenchError::NonPositiveBaseline(time_without_buffer));
    }
    Ok(100.0 * (time_without_buffer - time_case) / time_without_buffer)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepMode {
    WallTime,
    #[default]
    OpCount,
}

/// One report line. In opcount mode the time columns hold operation counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: i64,
    pub total: f64,
    pub broad: f64,
    pub narrow: f64,
    pub model: f64,
    pub broad_executed_pct: f64,
    pub mean_pairs: f64,
    pub improvement_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub baseline: Option<SweepRow>,
    pub uniform_skin: Option<SweepRow>,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn row(&self, k: u32) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.k == i64::from(k))
    }

    /// All rows in file order: baseline, uniform-skin, then K rows.
    pub fn all_rows(&self) -> impl Iterator<Item = &SweepRow> {
        self.baseline
            .iter()
            .chain(self.uniform_skin.iter())
            .chain(self.rows.iter())
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    pub mode: SweepMode,
    /// Add a row with a uniform skin equal to the particle radius.
    pub uniform_skin_radius: bool,
    /// Worker threads for opcount sweeps; `None` runs points one at a time.
    pub threads: Option<usize>,
}

const HEADER: [&str; 8] = [
    "k",
    "total",
    "broad",
    "narrow",
    "model",
    "broad_executed_pct",
    "mean_pairs",
    "improvement_pct",
];

#[derive(Debug, Clone, Copy)]
struct Point {
    k: i64,
    k_factor: u32,
    verlet: bool,
    rule: SkinRule,
}

fn raw_row(k: i64, m: &PhaseMetrics, mode: SweepMode) -> SweepRow {
    let (broad, narrow, model, total) = match mode {
        SweepMode::OpCount => {
            let (b, n, m) = (m.broad_ops as f64, m.narrow_ops as f64, m.model_ops as f64);
            (b, n, m, b + n + m)
        }
        SweepMode::WallTime => (
            m.broad_time,
            m.narrow_time,
            m.model_time,
            m.broad_time + m.narrow_time + m.model_time + m.integrate_time,
        ),
    };
    SweepRow {
        k,
        total,
        broad,
        narrow,
        model,
        broad_executed_pct: m.broad_executed_pct(),
        mean_pairs: m.mean_pair_list_length(),
        improvement_pct: 0.0,
    }
}

fn states_match(a: &SimState, b: &SimState) -> bool {
    a.particles.len() == b.particles.len() && a.particles.iter().zip(&b.particles).all(|(p, q)| p.state_bit_eq(q))
}

/// Runs the baseline (buffer disabled) and one run per K, all from the same
/// initial particles, and checks that every run ends in the baseline's exact
/// final state.
pub fn run_sweep(scenario: &Scenario, k_values: &[u32], opts: &SweepOptions) -> Result<SweepReport, BenchError> {
    if k_values.is_empty() {
        return Err(BenchError::EmptyKGrid);
    }
    let mut points = vec![Point {
        k: BASELINE_K,
        k_factor: 0,
        verlet: false,
        rule: SkinRule::Zero,
    }];
    if opts.uniform_skin_radius {
        points.push(Point {
            k: UNIFORM_SKIN_K,
            k_factor: 0,
            verlet: true,
            rule: SkinRule::UniformRadius,
        });
    }
    points.extend(k_values.iter().map(|&k| Point {
        k: i64::from(k),
        k_factor: k,
        verlet: true,
        rule: SkinRule::Local,
    }));

    let timing = match opts.mode {
        SweepMode::WallTime => TimingMode::WallTime,
        SweepMode::OpCount => TimingMode::OpCount,
    };
    let run_point = |pt: &Point| -> Result<(SweepRow, SimState), BenchError> {
        let cfg = scenario.config(pt.k_factor, pt.verlet);
        let run_opts = RunOptions {
            skin_rule: pt.rule,
            timing,
            ..RunOptions::default()
        };
        let out =
            run(&cfg, scenario.particles.clone(), &run_opts).map_err(|source| BenchError::Run { k: pt.k, source })?;
        Ok((raw_row(pt.k, &out.metrics, opts.mode), out.state))
    };

    // wall-time points never share the machine
    let results: Vec<_> = match (opts.mode, opts.threads) {
        (SweepMode::OpCount, Some(threads)) if threads > 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| BenchError::Pool(e.to_string()))?;
            pool.install(|| points.par_iter().map(run_point).collect::<Result<_, _>>())?
        }
        _ => points.iter().map(run_point).collect::<Result<_, _>>()?,
    };

    let mut results = results.into_iter();
    let (mut baseline, baseline_state) = results.next().expect("baseline point");
    baseline.improvement_pct = 0.0;
    let mut report = SweepReport::default();
    for (mut row, state) in results {
        if !states_match(&state, &baseline_state) {
            return Err(BenchError::EquivalenceViolation { k: row.k });
        }
        row.improvement_pct = if baseline.total > 0.0 {
            improvement(baseline.total, row.total)?
        } else {
            0.0
        };
        if row.k == UNIFORM_SKIN_K {
            report.uniform_skin = Some(row);
        } else {
            report.rows.push(row);
        }
    }
    report.baseline = Some(baseline);
    Ok(report)
}

/// Writes the report as CSV with a fixed header. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_report(report: &SweepReport, out: impl Write) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HEADER)?;
    for row in report.all_rows() {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_report(report: &SweepReport, path: impl AsRef<Path>) -> Result<(), BenchError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|source| BenchError::Io {
        path: shown.clone(),
        source,
    })?;
    write_report(report, file).map_err(|source| BenchError::Csv { path: shown, source })
}

pub fn read_report(input: impl Read) -> csv::Result<SweepReport> {
    let mut r = csv::Reader::from_reader(input);
    let mut report = SweepReport::default();
    for row in r.deserialize() {
        let row: SweepRow = row?;
        match row.k {
            BASELINE_K => report.baseline = Some(row),
            UNIFORM_SKIN_K => report.uniform_skin = Some(row),
            _ => report.rows.push(row),
        }
    }
    Ok(report)
}

pub fn parse_report(path: impl AsRef<Path>) -> Result<SweepReport, BenchError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| BenchError::Io {
        path: shown.clone(),
        source,
    })?;
    read_report(file).map_err(|source| BenchError::Csv { path: shown, source })
}
