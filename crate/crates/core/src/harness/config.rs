use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::generate::{FSpec, NSpec};
use crate::error::{Error, Result};
use crate::mass::MassConfig;

pub const MAX_RESOLUTION: u32 = 16;

/// Families of optional checks; the structural checks always run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CheckFamily {
    A,
    B,
    C,
    D,
    Corollaries,
    Oq,
}

impl CheckFamily {
    pub const ALL: [CheckFamily; 6] = [
        CheckFamily::A,
        CheckFamily::B,
        CheckFamily::C,
        CheckFamily::D,
        CheckFamily::Corollaries,
        CheckFamily::Oq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckFamily::A => "a",
            CheckFamily::B => "b",
            CheckFamily::C => "c",
            CheckFamily::D => "d",
            CheckFamily::Corollaries => "corollaries",
            CheckFamily::Oq => "oq",
        }
    }
}

impl fmt::Display for CheckFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses `all` or a comma-separated list of family names.
pub fn parse_checks(s: &str) -> Result<BTreeSet<CheckFamily>> {
    let mut out = BTreeSet::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part == "all" {
            out.extend(CheckFamily::ALL);
            continue;
        }
        let fam = CheckFamily::ALL
            .into_iter()
            .find(|c| c.name() == part)
            .ok_or_else(|| Error::Config(format!("unknown check family `{part}`")))?;
        out.insert(fam);
    }
    if out.is_empty() {
        return Err(Error::Config("empty check selection".into()));
    }
    Ok(out)
}

/// A run as written in a config file; unset fields take their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_min: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<u32>,
    /// Decay exponent in the tile mass.
    #[serde(rename = "N_mass", default, skip_serializing_if = "Option::is_none")]
    pub n_mass: Option<u32>,
    /// Exceptional-set cut.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_forest: Option<f64>,
    #[serde(rename = "C_G", default, skip_serializing_if = "Option::is_none")]
    pub c_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<String>,
    /// Constant in `γ = c ‖f‖^{2/3}` for the excised set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sjolin_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merged(mut self, other: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => {$( if other.$f.is_some() { self.$f = other.$f; } )*};
        }
        take!(resolution, k_min, k_max, n_mass, c, c_forest, c_g, n_max, seed, f, n, check, sjolin_c, output);
        self.overrides.extend(other.overrides);
        self
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let resolution = self.resolution.unwrap_or(10);
        if !(6..=MAX_RESOLUTION).contains(&resolution) {
            return Err(Error::Config(format!("K={resolution} outside [6, {MAX_RESOLUTION}]")));
        }
        let k_min = self.k_min.unwrap_or(3);
        let k_max = self.k_max.unwrap_or(resolution - 3);
        if !(3 <= k_min && k_min <= k_max && k_max <= resolution - 3) {
            return Err(Error::Config(format!(
                "scale range [{k_min}, {k_max}] must satisfy 3 <= k_min <= k_max <= K-3 = {}",
                resolution - 3
            )));
        }
        let mut mass = MassConfig::default_for(resolution);
        if let Some(e) = self.n_mass {
            mass.exponent = e;
        }
        if let Some(c) = self.c {
            mass.c = c;
        }
        if let Some(n) = self.n_max {
            mass.n_max = n;
        }
        mass.validate(resolution)?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Config(format!("{name}={v} must be positive")))
            }
        };
        let c_forest = positive("c_forest", self.c_forest.unwrap_or(4.0))?;
        let c_g = positive("C_G", self.c_g.unwrap_or(8.0))?;
        let sjolin_c = positive("sjolin_c", self.sjolin_c.unwrap_or(1.0))?;
        let f: FSpec = self.f.as_deref().unwrap_or("random_step").parse()?;
        let n: NSpec = self.n.as_deref().unwrap_or("random_piecewise").parse()?;
        let checks = parse_checks(self.check.as_deref().unwrap_or("all"))?;
        let mut constants = crate::verify::PassConstants::default();
        constants.apply_overrides(&self.overrides)?;
        Ok(Resolved {
            resolution,
            k_min,
            k_max,
            mass,
            c_forest,
            c_g,
            sjolin_c,
            seed: self.seed.unwrap_or(0),
            f,
            n,
            checks,
            constants,
        })
    }
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub resolution: u32,
    pub k_min: u32,
    pub k_max: u32,
    pub mass: MassConfig,
    pub c_forest: f64,
    pub c_g: f64,
    pub sjolin_c: f64,
    pub seed: u64,
    pub f: FSpec,
    pub n: NSpec,
    pub checks: BTreeSet<CheckFamily>,
    pub constants: crate::verify::PassConstants,
}

impl Resolved {
    pub fn runs(&self, fam: CheckFamily) -> bool {
        self.checks.contains(&fam)
    }
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_json(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let r = RunConfig::default().resolve().unwrap();
        assert_eq!((r.resolution, r.k_min, r.k_max), (10, 3, 7));
        assert_eq!(r.c_forest, 4.0);
        assert_eq!(r.c_g, 8.0);
        assert_eq!(r.checks.len(), CheckFamily::ALL.len());
    }

    #[test]
    fn bad_ranges() {
        let bad = |json: &str| RunConfig::from_json(json).unwrap().resolve().is_err();
        assert!(bad(r#"{"K": 17}"#));
        assert!(bad(r#"{"K": 10, "k_min": 6, "k_max": 5}"#));
        assert!(bad(r#"{"K": 10, "k_max": 8}"#));
        assert!(bad(r#"{"K": 10, "k_min": 2}"#));
        assert!(bad(r#"{"c": 0.5}"#));
        assert!(bad(r#"{"check": "e"}"#));
        assert!(bad(r#"{"overrides": {"nope": 1}}"#));
        assert!(RunConfig::from_json(r#"{"KK": 10}"#).is_err());
    }

    #[test]
    fn round_trip_and_merge() {
        let text = r#"{"K": 8, "seed": 3, "f": "indicator:0.25", "N": "chirp", "overrides": {"a.main": 2.0}}"#;
        let cfg = RunConfig::from_json(text).unwrap();
        let again = RunConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(cfg, again);
        let a: serde_json::Value = serde_json::from_str(text).unwrap();
        let b: serde_json::Value = serde_json::from_str(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(a, b);
        let m = cfg.merged(RunConfig { seed: Some(9), ..Default::default() });
        assert_eq!((m.seed, m.resolution), (Some(9), Some(8)));
        assert_eq!(parse_checks("a,b").unwrap().len(), 2);
    }
}
