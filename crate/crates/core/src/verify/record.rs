use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;
use std::io::Write;

use crate::error::Result;

/// Where a measured ratio came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Context {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tree: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub f: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl Context {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn level(n: u32) -> Self {
        Self { n: Some(n), ..Self::default() }
    }

    pub fn class(n: u32, alpha: i32) -> Self {
        Self { n: Some(n), alpha: Some(alpha), ..Self::default() }
    }

    pub fn alpha(alpha: i32) -> Self {
        Self { alpha: Some(alpha), ..Self::default() }
    }

    pub fn function(f: impl Into<String>) -> Self {
        Self { f: Some(f.into()), ..Self::default() }
    }

    pub fn with_tree(mut self, tree: usize) -> Self {
        self.tree = Some(tree);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    fn key(&self) -> String {
        let mut parts = Vec::new();
        if let Some(f) = &self.f {
            parts.push(format!("f={f}"));
        }
        if let Some(n) = self.n {
            parts.push(format!("n={n}"));
        }
        if let Some(a) = self.alpha {
            parts.push(format!("alpha={a}"));
        }
        if let Some(t) = self.tree {
            parts.push(format!("tree={t}"));
        }
        if let Some(s) = &self.note {
            parts.push(s.clone());
        }
        parts.join(" ")
    }
}

/// Comparison applied to `ratio` against the configured limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// `ratio ≤ limit`.
    AtMost,
    /// `ratio < limit`.
    Below,
}

/// Serializes non-finite values as strings so reports stay valid JSON.
pub mod real {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad number `{other}`"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    #[serde(with = "real")]
    pub lhs: f64,
    #[serde(with = "real")]
    pub rhs: f64,
    #[serde(with = "real")]
    pub ratio: f64,
    /// `None` for experiments without a pass constant.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub limit: Option<f64>,
    pub bound: Bound,
    pub pass: bool,
    pub context: Context,
}

/// `lhs/rhs`, with `0/0 = 0` and `x/0 = ∞`.
pub fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

impl CheckRecord {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, limit: Option<f64>, context: Context) -> Self {
        Self::with_bound(name, lhs, rhs, limit, Bound::AtMost, context)
    }

    pub fn with_bound(
        name: impl Into<String>,
        lhs: f64,
        rhs: f64,
        limit: Option<f64>,
        bound: Bound,
        context: Context,
    ) -> Self {
        let r = ratio(lhs, rhs);
        let pass = match (limit, bound) {
            (None, _) => !r.is_nan(),
            (Some(l), Bound::AtMost) => r <= l,
            (Some(l), Bound::Below) => r < l,
        };
        Self { name: name.into(), lhs, rhs, ratio: r, limit, bound, pass, context }
    }

    /// A count of violations that must be zero.
    pub fn violations(name: impl Into<String>, count: usize, context: Context) -> Self {
        Self::new(name, count as f64, 1.0, Some(0.0), context)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub resolution: u32,
    pub k_min: u32,
    pub k_max: u32,
    pub seed: u64,
    pub f: String,
    pub n: String,
    pub tiles: usize,
    pub levels: BTreeMap<u32, usize>,
    pub discarded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Largest ratio per check name.
    pub max_ratio: BTreeMap<String, Ratio>,
    pub failures: BTreeMap<String, usize>,
    pub passed: bool,
}

/// An `f64` carried through JSON with non-finite support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ratio(#[serde(with = "real")] pub f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub meta: ReportMeta,
    pub checks: Vec<CheckRecord>,
    pub summary: Summary,
    #[serde(default)]
    pub spaces: Vec<crate::spaces::NormRow>,
}

impl VerificationReport {
    /// Orders the checks by name and context and fills the summary.
    pub fn new(meta: ReportMeta, mut checks: Vec<CheckRecord>, spaces: Vec<crate::spaces::NormRow>) -> Self {
        checks.sort_by_cached_key(|c| (c.name.clone(), c.context.n, c.context.alpha, c.context.key()));
        let summary = summarize(&checks);
        Self { meta, checks, summary, spaces }
    }

    pub fn passed(&self) -> bool {
        self.summary.passed
    }

    pub fn failing(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn records<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a CheckRecord> + 'a {
        self.checks.iter().filter(move |c| c.name == name)
    }

    pub fn max_ratio(&self, name: &str) -> Option<f64> {
        self.summary.max_ratio.get(name).map(|r| r.0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "name,lhs,rhs,ratio,limit,pass,n,alpha,tree,f,note")?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for c in &self.checks {
            writeln!(
                w,
                "{},{:e},{:e},{:e},{},{},{},{},{},{},{}",
                c.name,
                c.lhs,
                c.rhs,
                c.ratio,
                opt(c.limit.map(|l| format!("{l:e}"))),
                c.pass,
                opt(c.context.n.map(|v| v.to_string())),
                opt(c.context.alpha.map(|v| v.to_string())),
                opt(c.context.tree.map(|v| v.to_string())),
                csv_field(c.context.f.as_deref().unwrap_or("")),
                csv_field(c.context.note.as_deref().unwrap_or("")),
            )?;
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn summarize(checks: &[CheckRecord]) -> Summary {
    let mut max_ratio: BTreeMap<String, Ratio> = BTreeMap::new();
    let mut failures: BTreeMap<String, usize> = BTreeMap::new();
    for c in checks {
        let e = max_ratio.entry(c.name.clone()).or_insert(Ratio(0.0));
        if c.ratio > e.0 || c.ratio.is_nan() {
            e.0 = c.ratio;
        }
        if !c.pass {
            *failures.entry(c.name.clone()).or_default() += 1;
        }
    }
    let passed = failures.is_empty();
    Summary { max_ratio, failures, passed }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_conventions() {
        assert_eq!(ratio(0.0, 0.0), 0.0);
        assert_eq!(ratio(1.0, 0.0), f64::INFINITY);
        assert_eq!(ratio(1.0, 4.0), 0.25);
        let r = CheckRecord::new("x", 2.0, 1.0, Some(2.0), Context::none());
        assert!(r.pass);
        let r = CheckRecord::with_bound("x", 2.0, 1.0, Some(2.0), Bound::Below, Context::none());
        assert!(!r.pass);
        assert!(CheckRecord::new("x", 5.0, 1.0, None, Context::none()).pass);
        assert!(!CheckRecord::violations("x", 1, Context::none()).pass);
    }

    #[test]
    fn json_round_trip_with_infinity() {
        let meta = ReportMeta {
            resolution: 4,
            k_min: 1,
            k_max: 2,
            seed: 3,
            f: "zero".into(),
            n: "chirp".into(),
            tiles: 0,
            levels: BTreeMap::new(),
            discarded: 0,
        };
        let checks = vec![
            CheckRecord::new("b", 1.0, 0.0, Some(1.0), Context::level(2)),
            CheckRecord::new("a", 1.0, 2.0, None, Context::class(1, -3).with_tree(4)),
        ];
        let rep = VerificationReport::new(meta, checks, Vec::new());
        assert_eq!(rep.checks[0].name, "a");
        assert!(!rep.passed());
        assert_eq!(rep.summary.failures["b"], 1);
        let text = rep.to_json().unwrap();
        let back = VerificationReport::from_json(&text).unwrap();
        assert_eq!(back, rep);
        let mut csv = Vec::new();
        rep.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 3);
    }
}
