//! Norms and modulars for the Orlicz-type spaces near `L^1`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::E;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{sorted_abs_desc, GridFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiProfile {
    /// `log(1+t)`
    Log,
    /// `log(1+t)·log log(e+t)`
    LogLog,
    /// `log(1+t)·log log log(e^e+t)`
    LogLogLog,
    /// `s(1+log⁺(1/s))`
    SoriaPhi1,
}

impl PhiProfile {
    pub const ALL: [PhiProfile; 4] =
        [PhiProfile::Log, PhiProfile::LogLog, PhiProfile::LogLogLog, PhiProfile::SoriaPhi1];

    pub fn eval(self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            PhiProfile::Log => t.ln_1p(),
            PhiProfile::LogLog => t.ln_1p() * (E + t).ln().ln(),
            PhiProfile::LogLogLog => t.ln_1p() * (E.powf(E) + t).ln().ln().ln(),
            PhiProfile::SoriaPhi1 => t * (1.0 + (1.0 / t).ln().max(0.0)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PhiProfile::Log => "log",
            PhiProfile::LogLog => "loglog",
            PhiProfile::LogLogLog => "logloglog",
            PhiProfile::SoriaPhi1 => "soria_phi1",
        }
    }
}

impl fmt::Display for PhiProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhiProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PhiProfile::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown profile `{s}`")))
    }
}

/// `∫|f| φ(|f|)`.
pub fn orlicz_modular(f: &GridFunction, phi: PhiProfile) -> f64 {
    f.values().iter().map(|v| {
        let a = v.norm();
        a * phi.eval(a)
    }).sum::<f64>()
        * f.cell_width()
}

/// `∫ f* φ(f*)` on the decreasing rearrangement.
pub fn orlicz_norm(f: &GridFunction, phi: PhiProfile) -> f64 {
    sorted_abs_desc(f).iter().map(|&a| a * phi.eval(a)).sum::<f64>() * f.cell_width()
}

/// `∫|f| log⁺|f| log⁺log⁺|f|`.
pub fn sjolin_modular(f: &GridFunction) -> f64 {
    let lp = |x: f64| if x > 1.0 { x.ln() } else { 0.0 };
    f.values().iter().map(|v| {
        let a = v.norm();
        a * lp(a) * lp(lp(a))
    }).sum::<f64>()
        * f.cell_width()
}

/// Pieces `(λ, dt)` of the distribution function `λ_f`, which equals `λ` on an
/// interval of length `dt`; only pieces with `λ > 0` are returned.
fn distribution_pieces(f: &GridFunction) -> Vec<(f64, f64)> {
    let sorted = sorted_abs_desc(f);
    let w = f.cell_width();
    let mut out = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let next = sorted.get(i + 1).copied().unwrap_or(0.0);
        if v > next {
            out.push(((i + 1) as f64 * w, v - next));
        }
    }
    out
}

/// `‖f‖_φ = ∫_0^∞ φ(λ_f(t)) dt` with `φ = φ_1`.
pub fn soria_norm(f: &GridFunction) -> f64 {
    let phi = PhiProfile::SoriaPhi1;
    distribution_pieces(f).iter().map(|&(l, dt)| phi.eval(l) * dt).sum()
}

/// `(‖f‖_{φ_1}, ‖f‖*_{φ_1})`.
pub fn soria_norms(f: &GridFunction) -> Result<(f64, f64)> {
    if f.is_zero() {
        return Err(Error::ZeroFunction);
    }
    let phi = PhiProfile::SoriaPhi1;
    let pieces = distribution_pieces(f);
    let plain: f64 = pieces.iter().map(|&(l, dt)| phi.eval(l) * dt).sum();
    let starred = pieces
        .iter()
        .map(|&(l, dt)| {
            let v = phi.eval(l);
            v * (1.0 + (plain / v).ln()) * dt
        })
        .sum();
    Ok((plain, starred))
}

/// Cells of `f` grouped by `l` with `|f| ∈ [2^l, 2^{l+1})`.
pub fn level_sets(f: &GridFunction) -> BTreeMap<i32, Vec<usize>> {
    let mut out: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (m, v) in f.values().iter().enumerate() {
        let a = v.norm();
        if a > 0.0 {
            let mut l = a.log2().floor() as i32;
            if crate::dyadic::pow2(l) > a {
                l -= 1;
            } else if crate::dyadic::pow2(l + 1) <= a {
                l += 1;
            }
            out.entry(l).or_default().push(m);
        }
    }
    out
}

/// `Σ_l 2^l |Q_l| log²(e/|Q_l|)`.
pub fn llog2_levels(f: &GridFunction) -> f64 {
    let w = f.cell_width();
    level_sets(f)
        .iter()
        .map(|(&l, cells)| {
            let q = cells.len() as f64 * w;
            crate::dyadic::pow2(l) * q * (E / q).ln().powi(2)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaStrategy {
    /// `f_j = f χ_{Q_l}` over the dyadic level sets, largest `‖f_j‖_1` first.
    Levels,
    /// `f_1 = f`.
    Single,
}

impl QaStrategy {
    pub const ALL: [QaStrategy; 2] = [QaStrategy::Levels, QaStrategy::Single];

    pub fn name(self) -> &'static str {
        match self {
            QaStrategy::Levels => "levels",
            QaStrategy::Single => "single",
        }
    }
}

fn piece_norms(vals: &[f64], w: f64, p: f64) -> (f64, f64) {
    let l1 = vals.iter().sum::<f64>() * w;
    let lp = if p.is_infinite() {
        vals.iter().copied().fold(0.0, f64::max)
    } else {
        (vals.iter().map(|v| v.powf(p)).sum::<f64>() * w).powf(1.0 / p)
    };
    (l1, lp)
}

/// `Σ_j (1+log j) ‖f_j‖_1 log(e‖f_j‖_p/‖f_j‖_1)` for the decomposition
/// chosen by `strategy`; an upper bound for the `QA_p` quasinorm.
pub fn qa_upper(f: &GridFunction, p: f64, strategy: QaStrategy) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("QA_p needs p > 1, got {p}")));
    }
    let w = f.cell_width();
    let abs = f.abs_values();
    let mut pieces: Vec<(f64, f64)> = match strategy {
        QaStrategy::Single => vec![piece_norms(&abs, w, p)],
        QaStrategy::Levels => level_sets(f)
            .values()
            .map(|cells| {
                let vals: Vec<f64> = cells.iter().map(|&m| abs[m]).collect();
                piece_norms(&vals, w, p)
            })
            .collect(),
    };
    pieces.retain(|&(l1, _)| l1 > 0.0);
    pieces.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(pieces
        .iter()
        .enumerate()
        .map(|(i, &(l1, lp))| (1.0 + ((i + 1) as f64).ln()) * l1 * (E * lp / l1).ln())
        .sum())
}

/// Minimum of [`qa_upper`] over all strategies, with the winning strategy.
pub fn qa_upper_best(f: &GridFunction, p: f64) -> Result<(f64, QaStrategy)> {
    let mut best = (f64::INFINITY, QaStrategy::Single);
    for s in QaStrategy::ALL {
        let v = qa_upper(f, p, s)?;
        if v < best.0 {
            best = (v, s);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub space: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
}

/// All space evaluations for `f`.
pub fn space_report(f: &GridFunction) -> Vec<NormRow> {
    let row = |space: String, value: f64, strategy: Option<&str>| NormRow {
        space,
        value,
        strategy: strategy.map(str::to_owned),
    };
    let mut rows: Vec<NormRow> = PhiProfile::ALL
        .iter()
        .filter(|p| **p != PhiProfile::SoriaPhi1)
        .map(|&p| row(format!("orlicz_{p}"), orlicz_norm(f, p), None))
        .collect();
    rows.push(row("sjolin_modular".into(), sjolin_modular(f), None));
    rows.push(row("llog2_levels".into(), llog2_levels(f), None));
    if let Ok((plain, starred)) = soria_norms(f) {
        rows.push(row("soria".into(), plain, None));
        rows.push(row("soria_star".into(), starred, None));
    } else {
        rows.push(row("soria".into(), 0.0, None));
    }
    for s in QaStrategy::ALL {
        if let Ok(v) = qa_upper(f, f64::INFINITY, s) {
            rows.push(row("qa_upper".into(), v, Some(s.name())));
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn step(k: u32, vals: &[(usize, f64)]) -> GridFunction {
        let mut v = vec![0.0; 1 << k];
        let mut at = 0;
        for &(n, x) in vals {
            for c in &mut v[at..at + n] {
                *c = x;
            }
            at += n;
        }
        GridFunction::from_real(k, v).unwrap()
    }

    #[test]
    fn profiles_vanish_at_zero_and_grow() {
        for p in PhiProfile::ALL {
            assert_eq!(p.eval(0.0), 0.0);
            let mut prev = 0.0;
            for i in 1..2000 {
                let v = p.eval(i as f64 * 0.01);
                assert!(v >= prev, "{p} decreases at {i}");
                prev = v;
            }
            assert_eq!(p.name().parse::<PhiProfile>().unwrap(), p);
        }
    }

    #[test]
    fn modular_examples() {
        let one = GridFunction::constant(4, Complex64::new(1.0, 0.0));
        assert!((orlicz_modular(&one, PhiProfile::Log) - 2f64.ln()).abs() < 1e-15);
        assert!((orlicz_norm(&one, PhiProfile::Log) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(orlicz_modular(&GridFunction::zeros(4), PhiProfile::Log), 0.0);
        // 4 cells at 3, 4 cells at 1, rest 0, K=4
        let f = step(4, &[(4, 3.0), (4, 1.0)]);
        let want = (4.0 * 3.0 * 4f64.ln() + 4.0 * 2f64.ln()) / 16.0;
        assert!((orlicz_modular(&f, PhiProfile::Log) - want).abs() < 1e-15);
        let mut rev: Vec<Complex64> = f.values().to_vec();
        rev.reverse();
        let g = GridFunction::new(4, rev).unwrap();
        assert!((orlicz_norm(&f, PhiProfile::LogLog) - orlicz_norm(&g, PhiProfile::LogLog)).abs() < 1e-15);
    }

    #[test]
    fn soria_examples() {
        let e = step(4, &[(4, 1.0)]);
        let (plain, starred) = soria_norms(&e).unwrap();
        let phi = PhiProfile::SoriaPhi1.eval(0.25);
        assert!((plain - phi).abs() < 1e-15);
        assert!((starred - phi).abs() < 1e-15);
        assert_eq!(soria_norm(&GridFunction::zeros(3)), 0.0);
        assert!(soria_norms(&GridFunction::zeros(3)).is_err());
        // 2χ_E: λ = |E| on [0,2)
        let (p2, _) = soria_norms(&e.scale(Complex64::new(2.0, 0.0))).unwrap();
        assert!((p2 - 2.0 * phi).abs() < 1e-15);
        // λ = 1/2 on [0,1), 1/4 on [1,2)
        let f = step(4, &[(4, 2.0), (4, 1.0)]);
        let s = PhiProfile::SoriaPhi1;
        let want = s.eval(0.5) * 1.0 + s.eval(0.25) * 1.0;
        let (p, st) = soria_norms(&f).unwrap();
        assert!((p - want).abs() < 1e-15);
        let want_st = s.eval(0.5) * (1.0 + (want / s.eval(0.5)).ln())
            + s.eval(0.25) * (1.0 + (want / s.eval(0.25)).ln());
        assert!((st - want_st).abs() < 1e-14);
    }

    #[test]
    fn qa_examples() {
        let e = step(5, &[(8, 1.0)]);
        let v = qa_upper(&e, f64::INFINITY, QaStrategy::Single).unwrap();
        assert!((v - 0.25 * (E / 0.25).ln()).abs() < 1e-15);
        assert_eq!(qa_upper(&GridFunction::zeros(3), 2.0, QaStrategy::Levels).unwrap(), 0.0);
        assert!(qa_upper(&e, 1.0, QaStrategy::Single).is_err());

        // 8 cells at 4, 8 cells at 1 on K=5
        let f = step(5, &[(8, 4.0), (8, 1.0)]);
        let single = 1.25 * (E * 4.0 / 1.25).ln();
        let levels = 1.0 * (E * 4.0 / 1.0).ln() + (1.0 + 2f64.ln()) * 0.25 * (E / 0.25).ln();
        assert!((qa_upper(&f, f64::INFINITY, QaStrategy::Single).unwrap() - single).abs() < 1e-14);
        assert!((qa_upper(&f, f64::INFINITY, QaStrategy::Levels).unwrap() - levels).abs() < 1e-14);
        let (best, _) = qa_upper_best(&f, f64::INFINITY).unwrap();
        assert!((best - single.min(levels)).abs() < 1e-14);
    }

    #[test]
    fn level_set_membership() {
        let f = GridFunction::from_real(2, vec![1.0, 1.999, 2.0, 0.5]).unwrap();
        let ls = level_sets(&f);
        assert_eq!(ls[&0], vec![0, 1]);
        assert_eq!(ls[&1], vec![2]);
        assert_eq!(ls[&-1], vec![3]);
        let one = GridFunction::constant(3, Complex64::new(1.0, 0.0));
        assert!((llog2_levels(&one) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sjolin_modular_vanishes_below_e() {
        let f = GridFunction::constant(3, Complex64::new(2.5, 0.0));
        assert_eq!(sjolin_modular(&f), 0.0);
        let g = GridFunction::constant(3, Complex64::new(20.0, 0.0));
        let want = 20.0 * 20f64.ln() * 20f64.ln().ln();
        assert!((sjolin_modular(&g) - want).abs() < 1e-12);
    }
}
