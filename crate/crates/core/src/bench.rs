// SPDX-License-Identifier: Apache-2.0

//! Operation-count benchmark of the policy transformation.
//!
//! Each search rebuilds an `N x N` cost matrix and runs a linear-scan
//! Dijkstra over it, so compiling `M` rules costs `O(M * N^2)` cell
//! operations. [`bench`] reports that count alongside wall time.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::generate::paired_instance;
use crate::transform::transform_spm;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BenchError {
    #[error("need at least 2 switches, got {0}")]
    TooFewSwitches(u32),
    #[error("need at least 1 rule")]
    NoRules,
    #[error("need at least 1 trial")]
    NoTrials,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub switches: u32,
    pub rules: u32,
    pub trials: u32,
    pub mean_ops: f64,
    pub mean_wall: Duration,
}

pub const BENCH_CSV_HEADER: &str = "switches,rules,trials,mean_ops,mean_wall_us";

impl BenchRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{:.1},{:.3}",
            self.switches,
            self.rules,
            self.trials,
            self.mean_ops,
            self.mean_wall.as_secs_f64() * 1e6
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchReport {
    rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn push(&mut self, row: BenchRow) {
        self.rows.push(row);
        self.rows.sort_by_key(|r| (r.switches, r.rules));
    }

    pub fn rows(&self) -> &[BenchRow] {
        &self.rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(BENCH_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.csv_line());
            out.push('\n');
        }
        out
    }
}

/// Compiles a seeded `switches`/`rules` instance `trials` times.
pub fn bench(switches: u32, rules: u32, trials: u32, seed: u64) -> Result<BenchRow, BenchError> {
    if switches < 2 {
        return Err(BenchError::TooFewSwitches(switches));
    }
    if rules == 0 {
        return Err(BenchError::NoRules);
    }
    if trials == 0 {
        return Err(BenchError::NoTrials);
    }
    let (topo, spm) = paired_instance(switches, rules, seed);
    let mut ops = 0u64;
    let mut wall = Duration::ZERO;
    for _ in 0..trials {
        let start = Instant::now();
        let out = transform_spm(&spm, &topo);
        wall += start.elapsed();
        debug_assert_eq!(out.routed(), rules as usize);
        ops += out.ops;
    }
    Ok(BenchRow {
        switches,
        rules,
        trials,
        mean_ops: ops as f64 / trials as f64,
        mean_wall: wall / trials,
    })
}

/// Every `(n, m)` combination, sorted by `(n, m)`.
pub fn sweep(ns: &[u32], ms: &[u32], trials: u32, seed: u64) -> Result<BenchReport, BenchError> {
    let mut report = BenchReport::default();
    for &n in ns {
        for &m in ms {
            report.push(bench(n, m, trials, seed)?);
        }
    }
    Ok(report)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let var: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    cov / var
}
