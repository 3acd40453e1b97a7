use serde::Serialize;
use std::collections::BTreeMap;

use super::config::RunConfig;
use super::generate::suite_instance;
use super::pipeline::run_pipeline;
use crate::error::Result;
use crate::verify::{mann_kendall, MannKendall, VerificationReport};

/// Worst record of one check name across a suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Worst {
    #[serde(with = "crate::verify::real")]
    pub ratio: f64,
    pub seed: u64,
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteSummary {
    pub resolution: u32,
    pub seeds: Vec<u64>,
    pub worst: BTreeMap<String, Worst>,
    /// Suite-wide maximum of `∫_{G'}|T^{P_n}f| / ‖f‖_1` per level.
    pub lweak1_by_level: BTreeMap<u32, f64>,
    pub lweak1_trend: MannKendall,
    pub passed: bool,
}

/// Configuration of suite member `seed`: `base` with the member's `f`, `N` and seed.
pub fn suite_config(base: &RunConfig, seed: u64) -> RunConfig {
    let resolution = base.resolution.unwrap_or(10);
    let (f, n) = suite_instance(seed, resolution);
    RunConfig { seed: Some(seed), f: Some(f.to_string()), n: Some(n.to_string()), ..base.clone() }
}

pub fn summarize_suite(resolution: u32, reports: &[VerificationReport]) -> SuiteSummary {
    let mut worst: BTreeMap<String, Worst> = BTreeMap::new();
    let mut by_level: BTreeMap<u32, f64> = BTreeMap::new();
    for r in reports {
        for c in &r.checks {
            let w = worst
                .entry(c.name.clone())
                .or_insert(Worst { ratio: c.ratio, seed: r.meta.seed, failures: 0 });
            if c.ratio > w.ratio || (w.ratio.is_nan() && !c.ratio.is_nan()) {
                w.ratio = c.ratio;
                w.seed = r.meta.seed;
            }
            w.failures += (!c.pass) as usize;
            if c.name == "b.lweak1" {
                if let Some(n) = c.context.n {
                    let e = by_level.entry(n).or_insert(c.ratio);
                    *e = e.max(c.ratio);
                }
            }
        }
    }
    let series: Vec<f64> = by_level.values().copied().collect();
    SuiteSummary {
        resolution,
        seeds: reports.iter().map(|r| r.meta.seed).collect(),
        passed: reports.iter().all(VerificationReport::passed),
        worst,
        lweak1_trend: mann_kendall(&series),
        lweak1_by_level: by_level,
    }
}

/// Runs every suite member and aggregates the reports.
pub fn run_suite(base: &RunConfig, seeds: impl IntoIterator<Item = u64>) -> Result<(SuiteSummary, Vec<VerificationReport>)> {
    let resolution = base.resolve()?.resolution;
    let mut reports = Vec::new();
    for seed in seeds {
        reports.push(run_pipeline(&suite_config(base, seed))?.report);
    }
    Ok((summarize_suite(resolution, &reports), reports))
}
