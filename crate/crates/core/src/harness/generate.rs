use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::str::FromStr;

use crate::dyadic::pow2_neg;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::spaces::PhiProfile;
use crate::tile::LinearizingFunction;

const F_STREAM: u64 = 1;
const N_STREAM: u64 = 2;
const SUITE_STREAM: u64 = 3;

pub(crate) fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Test function shapes.
#[derive(Debug, Clone, PartialEq)]
pub enum FSpec {
    Zero,
    Constant(f64),
    /// Random set of cells with the given measure.
    Indicator(f64),
    /// `χ_{[a,b)}`.
    Interval(f64, f64),
    /// `Σ_l 2^l χ_{Q_l}` with disjoint random `Q_l` of the given measures.
    Levels(Vec<(i32, f64)>),
    /// Levels `2^l` whose contributions to the modular are equal.
    OrliczExtremal(PhiProfile),
    /// Piecewise constant on `cells` equal blocks with values in `{0} ∪ {2^l : l ≤ max_level}`.
    RandomStep { cells: u32, max_level: u32 },
}

/// Frequency choices `N(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum NSpec {
    Constant(u64),
    /// `N(x_m) = m`.
    Chirp,
    /// A random frequency per block.
    RandomPiecewise(u32),
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("bad number `{s}`")))
}

fn parse_u32(s: &str) -> Result<u32> {
    s.trim().parse().map_err(|_| Error::Parse(format!("bad integer `{s}`")))
}

fn split_spec(s: &str) -> (&str, Option<&str>) {
    match s.split_once(':') {
        Some((k, p)) => (k.trim(), Some(p.trim())),
        None => (s.trim(), None),
    }
}

impl FromStr for FSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, params) = split_spec(s);
        let spec = match (kind, params) {
            ("zero", None) => FSpec::Zero,
            ("constant", p) => FSpec::Constant(p.map(parse_f64).transpose()?.unwrap_or(1.0)),
            ("indicator", p) => FSpec::Indicator(p.map(parse_f64).transpose()?.unwrap_or(0.25)),
            ("interval", p) => {
                let (a, b) = p.unwrap_or("0,0.25").split_once(',').ok_or_else(|| Error::Parse(format!("interval needs `a,b`: `{s}`")))?;
                FSpec::Interval(parse_f64(a)?, parse_f64(b)?)
            }
            ("levels", Some(p)) => {
                let mut levels = Vec::new();
                for pair in p.split(',') {
                    let (l, m) = pair.split_once('=').ok_or_else(|| Error::Parse(format!("level needs `l=measure`: `{pair}`")))?;
                    let l: i32 = l.trim().parse().map_err(|_| Error::Parse(format!("bad level `{l}`")))?;
                    levels.push((l, parse_f64(m)?));
                }
                FSpec::Levels(levels)
            }
            ("orlicz_extremal", p) => FSpec::OrliczExtremal(p.unwrap_or("log").parse()?),
            ("random_step", p) => {
                let (cells, max_level) = match p {
                    None => (32, 6),
                    Some(p) => {
                        let (c, l) = p.split_once(',').ok_or_else(|| Error::Parse(format!("random_step needs `cells,max_level`: `{s}`")))?;
                        (parse_u32(c)?, parse_u32(l)?)
                    }
                };
                FSpec::RandomStep { cells, max_level }
            }
            _ => return Err(Error::Parse(format!("unknown function spec `{s}`"))),
        };
        Ok(spec)
    }
}

impl fmt::Display for FSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FSpec::Zero => write!(f, "zero"),
            FSpec::Constant(c) => write!(f, "constant:{c}"),
            FSpec::Indicator(m) => write!(f, "indicator:{m}"),
            FSpec::Interval(a, b) => write!(f, "interval:{a},{b}"),
            FSpec::Levels(ls) => {
                let parts: Vec<String> = ls.iter().map(|(l, m)| format!("{l}={m}")).collect();
                write!(f, "levels:{}", parts.join(","))
            }
            FSpec::OrliczExtremal(p) => write!(f, "orlicz_extremal:{p}"),
            FSpec::RandomStep { cells, max_level } => write!(f, "random_step:{cells},{max_level}"),
        }
    }
}

impl FromStr for NSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, params) = split_spec(s);
        match (kind, params) {
            ("constant", p) => {
                let n0 = p.map(|p| p.parse::<u64>().map_err(|_| Error::Parse(format!("bad frequency `{p}`")))).transpose()?;
                Ok(NSpec::Constant(n0.unwrap_or(0)))
            }
            ("chirp", None) => Ok(NSpec::Chirp),
            ("random_piecewise", p) => Ok(NSpec::RandomPiecewise(p.map(parse_u32).transpose()?.unwrap_or(8))),
            _ => Err(Error::Parse(format!("unknown N spec `{s}`"))),
        }
    }
}

impl fmt::Display for NSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NSpec::Constant(n) => write!(f, "constant:{n}"),
            NSpec::Chirp => write!(f, "chirp"),
            NSpec::RandomPiecewise(b) => write!(f, "random_piecewise:{b}"),
        }
    }
}

fn cell_count(measure: f64, resolution: u32) -> Result<usize> {
    if !(0.0..=1.0).contains(&measure) {
        return Err(Error::InvalidArgument(format!("measure {measure} outside [0, 1]")));
    }
    Ok((measure * (1u64 << resolution) as f64).round() as usize)
}

/// Disjoint random cell sets of the given sizes.
fn disjoint_cells(sizes: &[usize], resolution: u32, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<usize>>> {
    let total: usize = sizes.iter().sum();
    let len = 1usize << resolution;
    if total > len {
        return Err(Error::InvalidArgument(format!("level sets need {total} cells, grid has {len}")));
    }
    let mut cells: Vec<usize> = (0..len).collect();
    cells.shuffle(rng);
    let mut out = Vec::with_capacity(sizes.len());
    let mut at = 0;
    for &s in sizes {
        out.push(cells[at..at + s].to_vec());
        at += s;
    }
    Ok(out)
}

fn from_levels(levels: &[(i32, usize)], resolution: u32, rng: &mut ChaCha8Rng) -> Result<GridFunction> {
    let sizes: Vec<usize> = levels.iter().map(|&(_, s)| s).collect();
    let sets = disjoint_cells(&sizes, resolution, rng)?;
    let mut vals = vec![0.0; 1usize << resolution];
    for ((l, _), cells) in levels.iter().zip(sets) {
        for m in cells {
            vals[m] = f64::powi(2.0, *l);
        }
    }
    GridFunction::from_real(resolution, vals)
}

impl FSpec {
    pub fn generate(&self, resolution: u32, seed: u64) -> Result<GridFunction> {
        let mut rng = rng(seed, F_STREAM);
        let len = 1usize << resolution;
        match self {
            FSpec::Zero => Ok(GridFunction::zeros(resolution)),
            FSpec::Constant(c) => GridFunction::from_real(resolution, vec![*c; len]),
            FSpec::Indicator(m) => from_levels(&[(0, cell_count(*m, resolution)?)], resolution, &mut rng),
            FSpec::Interval(a, b) => {
                if !(0.0 <= *a && a <= b && *b <= 1.0) {
                    return Err(Error::InvalidArgument(format!("interval [{a}, {b}) not inside [0, 1]")));
                }
                let h = pow2_neg(resolution);
                GridFunction::from_real(
                    resolution,
                    (0..len)
                        .map(|m| {
                            let x = (m as f64 + 0.5) * h;
                            if *a <= x && x < *b { 1.0 } else { 0.0 }
                        })
                        .collect(),
                )
            }
            FSpec::Levels(ls) => {
                let mut seen = std::collections::BTreeSet::new();
                if let Some((l, _)) = ls.iter().find(|(l, _)| !seen.insert(*l)) {
                    return Err(Error::InvalidArgument(format!("level {l} repeated")));
                }
                let sized = ls
                    .iter()
                    .map(|&(l, m)| Ok((l, cell_count(m, resolution)?)))
                    .collect::<Result<Vec<_>>>()?;
                from_levels(&sized, resolution, &mut rng)
            }
            FSpec::OrliczExtremal(phi) => {
                let top = (resolution / 2).max(1) as i32;
                let weights: Vec<f64> = (1..=top).map(|l| 1.0 / (f64::powi(2.0, l) * phi.eval(f64::powi(2.0, l)))).collect();
                let scale = 0.5 / weights.iter().sum::<f64>();
                let sized: Vec<(i32, usize)> = (1..=top)
                    .zip(&weights)
                    .map(|(l, w)| (l, ((w * scale * len as f64).round() as usize).max(1)))
                    .collect();
                from_levels(&sized, resolution, &mut rng)
            }
            FSpec::RandomStep { cells, max_level } => {
                let cells = *cells as usize;
                if cells == 0 || !cells.is_power_of_two() || cells > len {
                    return Err(Error::InvalidArgument(format!("random_step cells={cells} must be a power of two <= 2^K")));
                }
                let width = len / cells;
                let mut vals = Vec::with_capacity(len);
                for _ in 0..cells {
                    let v = if rng.gen_bool(0.25) {
                        0.0
                    } else {
                        f64::powi(2.0, rng.gen_range(0..=*max_level) as i32)
                    };
                    vals.extend(std::iter::repeat(v).take(width));
                }
                GridFunction::from_real(resolution, vals)
            }
        }
    }
}

impl NSpec {
    pub fn generate(&self, resolution: u32, seed: u64) -> Result<LinearizingFunction> {
        let mut rng = rng(seed, N_STREAM);
        let len = 1usize << resolution;
        match self {
            NSpec::Constant(n0) => LinearizingFunction::constant(resolution, *n0),
            NSpec::Chirp => LinearizingFunction::new(resolution, (0..len as u64).collect()),
            NSpec::RandomPiecewise(blocks) => {
                let blocks = *blocks as usize;
                if blocks == 0 || blocks > len {
                    return Err(Error::InvalidArgument(format!("random_piecewise blocks={blocks} must be in [1, 2^K]")));
                }
                let freqs: Vec<u64> = (0..blocks).map(|_| rng.gen_range(0..len as u64)).collect();
                LinearizingFunction::new(resolution, (0..len).map(|m| freqs[m * blocks / len]).collect())
            }
        }
    }
}

/// The `(f, N)` pair of suite member `seed`.
pub fn suite_instance(seed: u64, resolution: u32) -> (FSpec, NSpec) {
    let mut r = rng(seed, SUITE_STREAM);
    let f = match seed % 4 {
        0 => FSpec::Indicator(pow2_neg(r.gen_range(1..=4))),
        1 => {
            let mut ls: Vec<i32> = (1..=6).collect();
            ls.shuffle(&mut r);
            let count = r.gen_range(2..=3);
            FSpec::Levels(ls[..count].iter().map(|&l| (l, pow2_neg(l as u32 + 2))).collect())
        }
        2 => FSpec::RandomStep { cells: 1 << r.gen_range(4..=6), max_level: r.gen_range(4..=8) },
        _ => FSpec::OrliczExtremal(PhiProfile::ALL[r.gen_range(0..PhiProfile::ALL.len())]),
    };
    let n = match (seed + seed / 4) % 3 {
        0 => NSpec::Constant(r.gen_range(0..1u64 << resolution)),
        1 => NSpec::Chirp,
        _ => NSpec::RandomPiecewise(1 << r.gen_range(2..=5)),
    };
    (f, n)
}
