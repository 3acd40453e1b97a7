use std::collections::BTreeMap;
use std::path::Path;

use super::config::{CheckFamily, Resolved, RunConfig};
use super::generate::{rng, FSpec};
use super::plot;
use crate::dyadic::{pow2_neg, TorusSet};
use crate::error::Result;
use crate::grid::GridFunction;
use crate::kernel::{CarlesonModel, KernelConfig};
use crate::spaces::space_report;
use crate::verify::{self, Analysis, ReportMeta, VerificationReport};
use rand::Rng;

const DUALITY_STREAM: u64 = 4;
const SWEEP_STREAM: u64 = 5;

/// Exponents `p` for the per-level `L^p` ratios.
pub const LP_EXPONENTS: [f64; 2] = [1.5, 3.0];
/// Exponent in the `log(e‖f‖_p/‖f‖_1)` normalization.
pub const INTERP_EXPONENT: f64 = 2.0;

pub struct Run {
    pub config: Resolved,
    pub analysis: Analysis,
    pub report: VerificationReport,
}

/// Builds `f`, `N`, the model, and every decomposition.
pub fn decompose(cfg: &Resolved) -> Result<Analysis> {
    let f = cfg.f.generate(cfg.resolution, cfg.seed)?;
    let n = cfg.n.generate(cfg.resolution, cfg.seed)?;
    let model = CarlesonModel::new(KernelConfig::new(cfg.resolution, cfg.k_min, cfg.k_max)?, n)?;
    Analysis::new(model, f, cfg.f.to_string(), &cfg.mass, cfg.c_forest)
}

/// Intervals `[a, a + 2^{-e})` at random aligned offsets, one per exponent.
pub fn indicator_sweep(resolution: u32, seed: u64, exponents: impl IntoIterator<Item = u32>) -> Result<Vec<(String, GridFunction)>> {
    let mut r = rng(seed, SWEEP_STREAM);
    exponents
        .into_iter()
        .map(|e| {
            let len = pow2_neg(e);
            let a = r.gen_range(0..1u64 << e) as f64 * len;
            let spec = FSpec::Interval(a, a + len);
            Ok((spec.to_string(), spec.generate(resolution, seed)?))
        })
        .collect()
}

/// All checks selected by `cfg` on a finished analysis.
pub fn verify(cfg: &Resolved, an: &Analysis) -> Result<VerificationReport> {
    let pc = &cfg.constants;
    let mut checks = Vec::new();
    checks.extend(verify::check_partition(an, pc));
    checks.extend(verify::check_mass_window(an, pc));
    checks.extend(verify::check_forests(an, pc));
    checks.extend(verify::check_cz(an, pc)?);
    let mut dual_rng = rng(cfg.seed, DUALITY_STREAM);
    checks.extend(verify::check_duality(an, dual_rng.gen(), pc)?);
    let needs_trees = cfg.runs(CheckFamily::A) || cfg.runs(CheckFamily::B);
    let evals = if needs_trees { an.tree_evals() } else { Vec::new() };
    if cfg.runs(CheckFamily::A) {
        checks.extend(verify::check_theorem_a(an, pc));
        checks.extend(verify::check_trees(an, &evals, pc));
    }
    if cfg.runs(CheckFamily::B) && !an.f.is_zero() {
        checks.extend(verify::check_theorem_b(an, &evals, &TorusSet::full(), cfg.c_g, pc)?);
    }
    if cfg.runs(CheckFamily::C) {
        checks.extend(verify::check_theorem_c(an, &LP_EXPONENTS, pc));
    }
    if cfg.runs(CheckFamily::D) {
        checks.extend(verify::check_theorem_d(an, INTERP_EXPONENT, pc));
    }
    if cfg.runs(CheckFamily::Corollaries) {
        checks.extend(verify::check_corollaries(&an.model, &[(an.f_label.clone(), an.f.clone())], pc)?);
        let top = 8.min(cfg.resolution - 2);
        let sets = indicator_sweep(cfg.resolution, cfg.seed, 2..=top)?;
        checks.extend(verify::check_indicator_sweep(&an.model, &sets, pc)?);
        if !an.f.is_zero() {
            checks.extend(verify::check_sjolin_split(an, cfg.sjolin_c, pc)?);
        }
    }
    if cfg.runs(CheckFamily::Oq) {
        checks.extend(verify::probe_open_question(an, pc));
    }
    let meta = ReportMeta {
        resolution: cfg.resolution,
        k_min: cfg.k_min,
        k_max: cfg.k_max,
        seed: cfg.seed,
        f: cfg.f.to_string(),
        n: cfg.n.to_string(),
        tiles: an.family.len(),
        levels: an.mass.levels.iter().map(|(&n, s)| (n, s.len())).collect::<BTreeMap<_, _>>(),
        discarded: an.mass.discard.len(),
    };
    Ok(VerificationReport::new(meta, checks, space_report(&an.f)))
}

/// Generation, decomposition, and verification for one configuration.
pub fn run_pipeline(cfg: &RunConfig) -> Result<Run> {
    let config = cfg.resolve()?;
    let analysis = decompose(&config)?;
    let report = verify(&config, &analysis)?;
    Ok(Run { config, analysis, report })
}

/// Writes `report.json`, `report.csv`, `tiles.svg` and `decay.svg` into `dir`.
pub fn write_outputs(run: &Run, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), run.report.to_json()?)?;
    let mut csv = Vec::new();
    run.report.write_csv(&mut csv)?;
    std::fs::write(dir.join("report.csv"), csv)?;
    std::fs::write(dir.join("tiles.svg"), plot::tiles_svg(&run.analysis))?;
    std::fs::write(dir.join("decay.svg"), plot::decay_svg(&run.report))?;
    Ok(())
}

/// Mass layers, `α` classes, and forests as one JSON document.
pub fn decomposition_json(an: &Analysis) -> Result<String> {
    let forests: BTreeMap<String, &Vec<crate::forest::BmoForest>> =
        an.forests.iter().map(|((n, a), v)| (format!("{n},{a}"), v)).collect();
    let doc = serde_json::json!({
        "f": an.f_label,
        "mass": an.mass,
        "cz": an.cz,
        "forests": forests,
    });
    Ok(serde_json::to_string_pretty(&doc)?)
}
