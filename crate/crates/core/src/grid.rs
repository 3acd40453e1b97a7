//! Grid functions on the torus and the dyadic maximal machinery.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use crate::dyadic::{pow2, pow2_neg, DyadicInterval, TorusSet};
use crate::error::{Error, Result};

pub const MAX_RESOLUTION: u32 = 24;

/// Complex values on the grid `x_m = m 2^{-K}`, read as a step function
/// constant on each cell `[x_m, x_{m+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    resolution: u32,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(resolution: u32, values: Vec<Complex64>) -> Result<Self> {
        if resolution > MAX_RESOLUTION {
            return Err(Error::InvalidArgument(format!("resolution {resolution} too large")));
        }
        if values.len() != 1usize << resolution {
            return Err(Error::InvalidArgument(format!(
                "expected {} values for K={resolution}, got {}",
                1usize << resolution,
                values.len()
            )));
        }
        Ok(Self { resolution, values })
    }

    pub fn zeros(resolution: u32) -> Self {
        Self::constant(resolution, Complex64::new(0.0, 0.0))
    }

    pub fn constant(resolution: u32, c: Complex64) -> Self {
        Self { resolution, values: vec![c; 1usize << resolution] }
    }

    pub fn from_real(resolution: u32, values: Vec<f64>) -> Result<Self> {
        Self::new(resolution, values.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
    }

    /// Characteristic function of the cells whose midpoint lies in `set`.
    pub fn indicator(resolution: u32, set: &TorusSet) -> Self {
        let h = pow2_neg(resolution);
        let values = (0..1usize << resolution)
            .map(|m| {
                let inside = set.contains_point((m as f64 + 0.5) * h);
                Complex64::new(if inside { 1.0 } else { 0.0 }, 0.0)
            })
            .collect();
        Self { resolution, values }
    }

    pub fn from_fn(resolution: u32, mut f: impl FnMut(usize) -> Complex64) -> Self {
        Self { resolution, values: (0..1usize << resolution).map(&mut f).collect() }
    }

    #[inline]
    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn cell_width(&self) -> f64 {
        pow2_neg(self.resolution)
    }

    #[inline]
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn abs_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.re == 0.0 && v.im == 0.0)
    }

    pub fn integral(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() * self.cell_width()
    }

    /// `∫_S |f|` over the cells flagged in `mask`.
    pub fn abs_integral_on(&self, mask: &[bool]) -> f64 {
        self.values
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(v, _)| v.norm())
            .sum::<f64>()
            * self.cell_width()
    }

    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        assert_eq!(self.resolution, other.resolution);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, c: Complex64) -> GridFunction {
        GridFunction {
            resolution: self.resolution,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &GridFunction) -> GridFunction {
        assert_eq!(self.resolution, other.resolution);
        GridFunction {
            resolution: self.resolution,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        assert_eq!(self.resolution, other.resolution);
        GridFunction {
            resolution: self.resolution,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    /// Multiplies by `e^{2πi ω x_m}` for integer `ω`.
    pub fn modulate(&self, omega: i64) -> GridFunction {
        let n = self.len() as i64;
        let roots = unit_roots(self.resolution);
        GridFunction {
            resolution: self.resolution,
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(m, v)| v * roots[(omega * m as i64).rem_euclid(n) as usize])
                .collect(),
        }
    }

    /// Hermitian pairing `⟨f,g⟩ = ∫ f ḡ`.
    pub fn inner(&self, other: &GridFunction) -> Complex64 {
        assert_eq!(self.resolution, other.resolution);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum::<Complex64>()
            * self.cell_width()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,re,im")?;
        for (m, v) in self.values.iter().enumerate() {
            writeln!(w, "{m},{:?},{:?}", v.re, v.im)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?;
        if header.as_deref().map(str::trim) != Some("index,re,im") {
            return Err(Error::Parse("expected header `index,re,im`".into()));
        }
        let mut values = Vec::new();
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("row {row}: expected 3 fields")));
            }
            let index: usize = fields[0]
                .parse()
                .map_err(|_| Error::Parse(format!("row {row}: bad index")))?;
            if index != values.len() {
                return Err(Error::Parse(format!("row {row}: index {index} out of order")));
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| Error::Parse(format!("row {row}: bad number {s:?}")))
            };
            values.push(Complex64::new(parse(fields[1])?, parse(fields[2])?));
        }
        let resolution = resolution_of_len(values.len())?;
        Self::new(resolution, values)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&GridFunctionJson::from(self)).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: GridFunctionJson = serde_json::from_str(text)?;
        raw.try_into()
    }
}

pub(crate) fn resolution_of_len(len: usize) -> Result<u32> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::Parse(format!("length {len} is not a power of two")));
    }
    Ok(len.trailing_zeros())
}

#[derive(Serialize, Deserialize)]
struct GridFunctionJson {
    #[serde(rename = "K")]
    k: u32,
    values: Vec<[f64; 2]>,
}

impl From<&GridFunction> for GridFunctionJson {
    fn from(f: &GridFunction) -> Self {
        Self { k: f.resolution, values: f.values.iter().map(|v| [v.re, v.im]).collect() }
    }
}

impl TryFrom<GridFunctionJson> for GridFunction {
    type Error = Error;
    fn try_from(raw: GridFunctionJson) -> Result<Self> {
        GridFunction::new(raw.k, raw.values.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

impl Serialize for GridFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GridFunctionJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for GridFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        GridFunctionJson::deserialize(d)?.try_into().map_err(serde::de::Error::custom)
    }
}

/// `e^{2πi r/2^K}` for `r = 0..2^K`.
pub fn unit_roots(resolution: u32) -> Vec<Complex64> {
    let n = 1usize << resolution;
    (0..n)
        .map(|r| {
            let theta = std::f64::consts::TAU * (r as f64) / (n as f64);
            Complex64::new(theta.cos(), theta.sin())
        })
        .collect()
}

/// Averages of `|f|` over every dyadic interval of scale `0..=K`.
#[derive(Debug, Clone)]
pub struct DyadicAverages {
    resolution: u32,
    /// `levels[s][j]` = average over the interval `(s, j)`.
    levels: Vec<Vec<f64>>,
}

impl DyadicAverages {
    pub fn new(f: &GridFunction) -> Self {
        Self::from_abs(f.resolution, f.abs_values())
    }

    pub fn from_abs(resolution: u32, finest: Vec<f64>) -> Self {
        let mut sums = vec![finest];
        for _ in 0..resolution {
            let prev = sums.last().expect("nonempty");
            let next: Vec<f64> = prev.chunks_exact(2).map(|p| p[0] + p[1]).collect();
            sums.push(next);
        }
        sums.reverse();
        let levels = sums
            .into_iter()
            .enumerate()
            .map(|(s, v)| {
                let w = pow2_neg(resolution - s as u32);
                v.into_iter().map(|x| x * w).collect()
            })
            .collect();
        Self { resolution, levels }
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    #[inline]
    pub fn average(&self, d: &DyadicInterval) -> f64 {
        self.levels[d.scale as usize][d.index as usize]
    }

    pub fn level(&self, scale: u32) -> &[f64] {
        &self.levels[scale as usize]
    }

    pub fn maximal(&self) -> Vec<f64> {
        let n = 1usize << self.resolution;
        (0..n)
            .map(|m| {
                (0..=self.resolution)
                    .map(|s| self.levels[s as usize][m >> (self.resolution - s)])
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    /// Maximal dyadic intervals whose average strictly exceeds `threshold`,
    /// in left-to-right order.
    pub fn stopping(&self, threshold: f64) -> Vec<DyadicInterval> {
        let mut out = Vec::new();
        let mut stack = vec![DyadicInterval::UNIT];
        while let Some(d) = stack.pop() {
            if self.average(&d) > threshold {
                out.push(d);
            } else if d.scale < self.resolution {
                let [l, r] = d.children();
                stack.push(r);
                stack.push(l);
            }
        }
        out
    }
}

/// `Mf(x) = max over dyadic I ∋ x of avg_I |f|`.
pub fn dyadic_maximal(f: &GridFunction) -> GridFunction {
    let m = DyadicAverages::new(f).maximal();
    GridFunction::from_real(f.resolution, m).expect("same length")
}

/// The maximal dyadic intervals `J` with `avg_J |f| > 2^{-α}`.
pub fn stopping_intervals(f: &GridFunction, alpha: i32) -> Vec<DyadicInterval> {
    DyadicAverages::new(f).stopping(pow2(-alpha))
}

/// `|{|f| > t}|`.
pub fn distribution_function(f: &GridFunction, t: f64) -> f64 {
    assert!(t >= 0.0, "threshold must be nonnegative");
    f.values.iter().filter(|v| v.norm() > t).count() as f64 * f.cell_width()
}

/// `|f|` sorted nonincreasing.
pub fn decreasing_rearrangement(f: &GridFunction) -> GridFunction {
    let mut a = f.abs_values();
    a.sort_by(|x, y| y.total_cmp(x));
    GridFunction::from_real(f.resolution, a).expect("same length")
}

pub(crate) fn sorted_abs_desc(f: &GridFunction) -> Vec<f64> {
    let mut a = f.abs_values();
    a.sort_by(|x, y| y.total_cmp(x));
    a
}

/// `sup_t t λ_f(t)`, evaluated as `max_j (j 2^{-K}) f*_j`.
pub fn weak_quasinorm(f: &GridFunction) -> f64 {
    let h = f.cell_width();
    sorted_abs_desc(f)
        .into_iter()
        .enumerate()
        .map(|(j, v)| (j + 1) as f64 * h * v)
        .fold(0.0, f64::max)
}

pub fn lp_norm(f: &GridFunction, p: f64) -> f64 {
    assert!(p > 0.0, "p must be positive");
    if p.is_infinite() {
        return f.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    }
    let s: f64 = f.values.iter().map(|v| v.norm().powf(p)).sum::<f64>() * f.cell_width();
    s.powf(1.0 / p)
}
