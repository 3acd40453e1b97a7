//! Tiles, linearizing functions, E-sets, the tile order, and mass.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::dyadic::{pow2_neg, DyadicInterval, TorusSet};
use crate::error::{Error, Result};
use crate::grid::{resolution_of_len, GridFunction};

/// Time interval `[j 2^{-k}, (j+1) 2^{-k})` paired with frequency interval
/// `[m 2^k, (m+1) 2^k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Tile {
    pub k: u32,
    pub j: u64,
    pub m: u64,
}

impl Tile {
    pub const fn new(k: u32, j: u64, m: u64) -> Self {
        Self { k, j, m }
    }

    #[inline]
    pub fn time(&self) -> DyadicInterval {
        DyadicInterval { scale: self.k, index: self.j }
    }

    #[inline]
    pub fn time_len(&self) -> f64 {
        pow2_neg(self.k)
    }

    #[inline]
    pub fn freq_len(&self) -> f64 {
        (1u64 << self.k) as f64
    }

    #[inline]
    pub fn freq_start(&self) -> u64 {
        self.m << self.k
    }

    #[inline]
    pub fn freq_center(&self) -> f64 {
        (self.m as f64 + 0.5) * self.freq_len()
    }

    #[inline]
    pub fn contains_freq(&self, n: u64) -> bool {
        (n >> self.k) == self.m
    }

    /// Cells of `I_P` at resolution `K`.
    pub fn cells(&self, resolution: u32) -> std::ops::Range<usize> {
        self.time().cell_range(resolution)
    }
}

impl std::fmt::Display for Tile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(k={}, j={}, m={})", self.k, self.j, self.m)
    }
}

/// Integer frequencies `N(x_m) ∈ [0, 2^K)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearizingFunction {
    resolution: u32,
    values: Vec<u64>,
}

impl LinearizingFunction {
    pub fn new(resolution: u32, values: Vec<u64>) -> Result<Self> {
        let n = 1u64 << resolution;
        if values.len() as u64 != n {
            return Err(Error::InvalidArgument(format!(
                "expected {n} frequencies, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|&&v| v >= n) {
            return Err(Error::InvalidArgument(format!("frequency {bad} outside [0, {n})")));
        }
        Ok(Self { resolution, values })
    }

    pub fn constant(resolution: u32, n0: u64) -> Result<Self> {
        Self::new(resolution, vec![n0; 1usize << resolution])
    }

    #[inline]
    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    #[inline]
    pub fn values(&self) -> &[u64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, cell: usize) -> u64 {
        self.values[cell]
    }

    /// The unique tile of scale `k` whose `E`-set contains cell `x`.
    #[inline]
    pub fn tile_at(&self, k: u32, cell: usize) -> Tile {
        Tile {
            k,
            j: (cell >> (self.resolution - k)) as u64,
            m: self.values[cell] >> k,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,freq")?;
        for (m, v) in self.values.iter().enumerate() {
            writeln!(w, "{m},{v}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?;
        if header.as_deref().map(str::trim) != Some("index,freq") {
            return Err(Error::Parse("expected header `index,freq`".into()));
        }
        let mut values = Vec::new();
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (i, v) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("row {row}: expected 2 fields")))?;
            let i: usize = i.trim().parse().map_err(|_| Error::Parse(format!("row {row}: bad index")))?;
            if i != values.len() {
                return Err(Error::Parse(format!("row {row}: index {i} out of order")));
            }
            values.push(v.trim().parse().map_err(|_| Error::Parse(format!("row {row}: bad frequency")))?);
        }
        Self::new(resolution_of_len(values.len())?, values)
    }
}

/// Tiles in sorted `(k, j, m)` order without duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TileSet(Vec<Tile>);

impl TileSet {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    /// Wraps an already sorted, duplicate-free vector.
    pub(crate) fn from_sorted(v: Vec<Tile>) -> Self {
        debug_assert!(v.windows(2).all(|w| w[0] < w[1]));
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Tile> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Tile] {
        &self.0
    }

    pub fn contains(&self, t: &Tile) -> bool {
        self.0.binary_search(t).is_ok()
    }

    pub fn insert(&mut self, t: Tile) -> bool {
        match self.0.binary_search(&t) {
            Ok(_) => false,
            Err(pos) => {
                self.0.insert(pos, t);
                true
            }
        }
    }

    pub fn union(&self, other: &TileSet) -> TileSet {
        self.0.iter().chain(other.0.iter()).copied().collect()
    }

    pub fn difference(&self, other: &TileSet) -> TileSet {
        TileSet(self.0.iter().filter(|t| !other.contains(t)).copied().collect())
    }

    pub fn scale_range(&self) -> Option<(u32, u32)> {
        let lo = self.0.first()?.k;
        let hi = self.0.iter().map(|t| t.k).max()?;
        Some((lo, hi))
    }
}

impl FromIterator<Tile> for TileSet {
    fn from_iter<I: IntoIterator<Item = Tile>>(iter: I) -> Self {
        let mut v: Vec<Tile> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }
}

impl<'a> IntoIterator for &'a TileSet {
    type Item = &'a Tile;
    type IntoIter = std::slice::Iter<'a, Tile>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl IntoIterator for TileSet {
    type Item = Tile;
    type IntoIter = std::vec::IntoIter<Tile>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}

/// All tiles with time scale in `[k_min, k_max]` at resolution `K`, with a
/// dense integer id that follows the sorted tile order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileLattice {
    pub resolution: u32,
    pub k_min: u32,
    pub k_max: u32,
}

impl TileLattice {
    pub fn new(resolution: u32, k_min: u32, k_max: u32) -> Result<Self> {
        if k_min > k_max || k_max > resolution {
            return Err(Error::InvalidArgument(format!(
                "scale range [{k_min}, {k_max}] invalid for K={resolution}"
            )));
        }
        Ok(Self { resolution, k_min, k_max })
    }

    pub fn len(&self) -> usize {
        ((self.k_max - self.k_min + 1) as usize) << self.resolution
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, t: &Tile) -> bool {
        t.k >= self.k_min
            && t.k <= self.k_max
            && t.j < (1u64 << t.k)
            && t.m < (1u64 << (self.resolution - t.k))
    }

    #[inline]
    pub fn id(&self, t: &Tile) -> usize {
        debug_assert!(self.contains(t));
        (((t.k - self.k_min) as usize) << self.resolution)
            + ((t.j as usize) << (self.resolution - t.k))
            + t.m as usize
    }

    #[inline]
    pub fn tile(&self, id: usize) -> Tile {
        let k = self.k_min + (id >> self.resolution) as u32;
        let within = id & ((1usize << self.resolution) - 1);
        let shift = self.resolution - k;
        Tile { k, j: (within >> shift) as u64, m: (within & ((1usize << shift) - 1)) as u64 }
    }

    /// Ids of all tiles sharing the time interval `(k, j)`.
    pub fn time_block(&self, k: u32, j: u64) -> std::ops::Range<usize> {
        let start = self.id(&Tile { k, j, m: 0 });
        start..start + (1usize << (self.resolution - k))
    }

    pub fn tiles(&self) -> impl Iterator<Item = Tile> + '_ {
        (0..self.len()).map(move |id| self.tile(id))
    }

    pub fn family(&self) -> TileSet {
        TileSet::from_sorted(self.tiles().collect())
    }
}

/// All tiles of the given scale range at resolution `K`.
pub fn build_tile_family(resolution: u32, k_min: u32, k_max: u32) -> Result<TileSet> {
    Ok(TileLattice::new(resolution, k_min, k_max)?.family())
}

/// Number of cells `x ∈ I_P` with `N(x) ∈ ω_P`.
pub fn e_count(p: &Tile, n: &LinearizingFunction) -> usize {
    n.values()[p.cells(n.resolution())]
        .iter()
        .filter(|&&v| p.contains_freq(v))
        .count()
}

pub fn e_set(p: &Tile, n: &LinearizingFunction) -> TorusSet {
    let mut mask = vec![false; 1usize << n.resolution()];
    for cell in p.cells(n.resolution()) {
        mask[cell] = p.contains_freq(n.at(cell));
    }
    TorusSet::from_cell_mask(&mask, n.resolution())
}

/// `|E(P)| / |I_P|`.
pub fn density(p: &Tile, n: &LinearizingFunction) -> f64 {
    e_count(p, n) as f64 * pow2_neg(n.resolution() - p.k)
}

/// `|E(P)|` per lattice tile.
#[derive(Debug, Clone)]
pub struct ECounts {
    lattice: TileLattice,
    counts: Vec<u32>,
}

impl ECounts {
    pub fn new(lattice: TileLattice, n: &LinearizingFunction) -> Self {
        assert_eq!(lattice.resolution, n.resolution());
        let mut counts = vec![0u32; lattice.len()];
        for k in lattice.k_min..=lattice.k_max {
            for cell in 0..1usize << lattice.resolution {
                counts[lattice.id(&n.tile_at(k, cell))] += 1;
            }
        }
        Self { lattice, counts }
    }

    pub fn lattice(&self) -> &TileLattice {
        &self.lattice
    }

    #[inline]
    pub fn count(&self, id: usize) -> u32 {
        self.counts[id]
    }

    #[inline]
    pub fn density(&self, id: usize) -> f64 {
        let k = self.lattice.k_min + (id >> self.lattice.resolution) as u32;
        self.counts[id] as f64 * pow2_neg(self.lattice.resolution - k)
    }
}

/// `P1 ≤ P2`: `I_1 ⊆ I_2` and `ω_1 ⊇ ω_2`.
pub fn tile_leq(p1: &Tile, p2: &Tile) -> bool {
    p1.k >= p2.k && (p1.j >> (p1.k - p2.k)) == p2.j && (p2.m >> (p1.k - p2.k)) == p1.m
}

/// `P1 < P2`: `P1 ≤ P2` and `|I_1| < |I_2|`.
pub fn tile_lt(p1: &Tile, p2: &Tile) -> bool {
    p1.k > p2.k && tile_leq(p1, p2)
}

/// A tile with its frequency interval concentrically dilated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DilatedTile {
    pub freq: (f64, f64),
    pub time: DyadicInterval,
}

pub fn tile_dilate(p: &Tile, a: f64) -> DilatedTile {
    assert!(a > 0.0, "dilation factor must be positive");
    let c = p.freq_center();
    let half = 0.5 * a * p.freq_len();
    DilatedTile { freq: (c - half, c + half), time: p.time() }
}

/// `aP ≤ bQ` read literally: `I_P ⊆ I_Q` and `b ω_Q ⊆ a ω_P`.
pub fn dilated_leq(p: &Tile, a: f64, q: &Tile, b: f64) -> bool {
    let dp = tile_dilate(p, a);
    let dq = tile_dilate(q, b);
    q.time().contains(&p.time()) && dp.freq.0 <= dq.freq.0 && dq.freq.1 <= dp.freq.1
}

/// True if the open intervals `a ω_P` and `b ω_Q` intersect.
#[inline]
pub fn freq_near(p: &Tile, a: f64, q: &Tile, b: f64) -> bool {
    (p.freq_center() - q.freq_center()).abs() < 0.5 * (a * p.freq_len() + b * q.freq_len())
}

/// Tree membership relative to a top: `I_P ⊆ I_top` and `2ω_P ∩ 10ω_top ≠ ∅`.
#[inline]
pub fn admits(top: &Tile, p: &Tile) -> bool {
    top.time().contains(&p.time()) && freq_near(p, 2.0, top, 10.0)
}

/// Raw decay `(1 + |I'| dist(10ω, 10ω'))^{-N}` for tile coordinates.
#[inline]
pub(crate) fn decay_raw(k: u32, m: u64, k2: u32, m2: u64, exponent: u32) -> f64 {
    let len = (1u64 << k) as f64;
    let len2 = (1u64 << k2) as f64;
    let c = (m as f64 + 0.5) * len;
    let c2 = (m2 as f64 + 0.5) * len2;
    let gap = ((c - c2).abs() - 5.0 * len - 5.0 * len2).max(0.0);
    if gap == 0.0 {
        return 1.0;
    }
    (1.0 + pow2_neg(k2) * gap).powi(-(exponent as i32))
}

/// Frequency decay factor between `P` and a time-ancestor `P'`.
pub fn decay_factor(p: &Tile, p2: &Tile, exponent: u32) -> f64 {
    debug_assert!(p2.time().contains(&p.time()));
    decay_raw(p.k, p.m, p2.k, p2.m, exponent)
}

/// Mass of `P` relative to `pool` and `region`, by direct enumeration.
pub fn mass(
    p: &Tile,
    pool: &TileSet,
    region: &TorusSet,
    n: &LinearizingFunction,
    exponent: u32,
) -> Result<f64> {
    if !region.contains_dyadic(&p.time()) {
        return Err(Error::Precondition(format!("I_P of {p} not inside region")));
    }
    let mut best = 0.0f64;
    for q in pool {
        if q.time().contains(&p.time()) && region.contains_dyadic(&q.time()) {
            best = best.max(density(q, n) * decay_factor(p, q, exponent));
        }
    }
    Ok(best)
}

/// `sup_J Σ_{I ⊆ J} |I| / |J|` over dyadic `J`, counting multiplicity.
pub fn bmo_c_norm(intervals: &[DyadicInterval]) -> f64 {
    let mut packed: BTreeMap<DyadicInterval, f64> = BTreeMap::new();
    for d in intervals {
        for s in 0..=d.scale {
            *packed.entry(d.ancestor(s)).or_insert(0.0) += d.length();
        }
    }
    packed
        .iter()
        .map(|(j, total)| total / j.length())
        .fold(0.0, f64::max)
}

/// Pointwise number of intervals covering each cell.
pub fn counting_function(tops: &[DyadicInterval], resolution: u32) -> GridFunction {
    let counts = counting_cells(tops, resolution);
    GridFunction::from_real(resolution, counts.into_iter().map(|c| c as f64).collect())
        .expect("length matches")
}

pub(crate) fn counting_cells(tops: &[DyadicInterval], resolution: u32) -> Vec<u32> {
    let n = 1usize << resolution;
    let mut diff = vec![0i64; n + 1];
    for d in tops {
        let r = d.cell_range(resolution);
        diff[r.start] += 1;
        diff[r.end] -= 1;
    }
    let mut acc = 0i64;
    diff[..n]
        .iter()
        .map(|d| {
            acc += d;
            acc as u32
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn di(s: u32, i: u64) -> DyadicInterval {
        DyadicInterval::new(s, i).unwrap()
    }

    #[test]
    fn family_sizes() {
        assert_eq!(build_tile_family(3, 1, 1).unwrap().len(), 8);
        assert_eq!(build_tile_family(3, 1, 2).unwrap().len(), 16);
        assert_eq!(build_tile_family(12, 3, 9).unwrap().len(), 7 * 4096);
        assert!(build_tile_family(3, 2, 1).is_err());
    }

    #[test]
    fn lattice_ids_follow_sort_order() {
        let lat = TileLattice::new(5, 1, 4).unwrap();
        let fam = lat.family();
        for (id, t) in fam.iter().enumerate() {
            assert_eq!(lat.id(t), id);
            assert_eq!(lat.tile(id), *t);
        }
        assert!(fam.as_slice().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn e_set_examples() {
        let zero = LinearizingFunction::constant(3, 0).unwrap();
        let p = Tile::new(1, 1, 0);
        assert_eq!(e_set(&p, &zero), p.time().as_set());
        assert!(e_set(&Tile::new(1, 1, 1), &zero).is_empty());

        let chirp = LinearizingFunction::new(3, (0..8).collect()).unwrap();
        let p = Tile::new(2, 0, 0);
        assert_eq!(e_set(&p, &chirp).measure(), 0.25);
        assert_eq!(e_count(&p, &chirp), 2);
    }

    #[test]
    fn order_examples() {
        let p = Tile::new(1, 0, 0);
        assert!(tile_leq(&p, &p));
        assert!(!tile_lt(&p, &p));
        assert!(tile_leq(&p, &Tile::new(0, 0, 0)));
        assert!(tile_lt(&p, &Tile::new(0, 0, 0)));
        assert!(!tile_leq(&Tile::new(1, 1, 0), &Tile::new(1, 0, 0)));
        assert!(!tile_leq(&p, &Tile::new(0, 0, 2)));
    }

    #[test]
    fn dilation_examples() {
        let p = Tile::new(1, 0, 0);
        assert_eq!(tile_dilate(&p, 1.0).freq, (0.0, 2.0));
        assert_eq!(tile_dilate(&p, 2.0).freq, (-1.0, 3.0));
        for t in [p, Tile::new(0, 0, 5), Tile::new(3, 2, 1)] {
            assert!(!dilated_leq(&t, 2.0, &t, 10.0));
            assert!(dilated_leq(&t, 10.0, &t, 2.0));
            assert!(admits(&t, &t));
        }
    }

    #[test]
    fn decay_examples() {
        let p = Tile::new(0, 0, 3);
        assert_eq!(decay_factor(&p, &p, 10), 1.0);
        assert_eq!(decay_factor(&Tile::new(0, 0, 3), &Tile::new(0, 0, 12), 10), 1.0);
        // ω = [0,1), ω' = [11,12): 10ω = (-4.5, 5.5), 10ω' = (6.5, 16.5).
        assert_eq!(decay_factor(&Tile::new(0, 0, 0), &Tile::new(0, 0, 11), 10), pow2_neg(10));
    }

    #[test]
    fn mass_examples() {
        let zero = LinearizingFunction::constant(3, 0).unwrap();
        let p = Tile::new(2, 0, 0);
        let pool: TileSet = [p].into_iter().collect();
        assert_eq!(mass(&p, &pool, &TorusSet::full(), &zero, 10).unwrap(), 1.0);

        let empty_e: TileSet = [Tile::new(2, 0, 1), Tile::new(1, 0, 1)].into_iter().collect();
        assert_eq!(mass(&Tile::new(2, 0, 1), &empty_e, &TorusSet::full(), &zero, 10).unwrap(), 0.0);

        let pool: TileSet = [p, Tile::new(1, 0, 0)].into_iter().collect();
        assert_eq!(mass(&p, &pool, &TorusSet::full(), &zero, 10).unwrap(), 1.0);

        let small = di(3, 0).as_set();
        assert!(mass(&p, &pool, &small, &zero, 10).is_err());
    }

    #[test]
    fn bmo_and_counting_examples() {
        assert_eq!(bmo_c_norm(&[DyadicInterval::UNIT]), 1.0);
        assert_eq!(bmo_c_norm(&[di(1, 0), di(2, 0)]), 1.5);
        assert_eq!(bmo_c_norm(&[]), 0.0);

        let c = counting_function(&[di(1, 0), di(1, 1)], 3);
        assert!(c.values().iter().all(|v| v.re == 1.0));
        let c = counting_function(&[di(1, 0), di(2, 0)], 2);
        let vals: Vec<f64> = c.values().iter().map(|v| v.re).collect();
        assert_eq!(vals, vec![2.0, 1.0, 0.0, 0.0]);
        assert!(counting_function(&[], 2).is_zero());
    }

    #[test]
    fn linearizing_csv_round_trip() {
        let n = LinearizingFunction::new(2, vec![3, 0, 1, 2]).unwrap();
        let mut buf = Vec::new();
        n.write_csv(&mut buf).unwrap();
        assert_eq!(LinearizingFunction::read_csv(buf.as_slice()).unwrap(), n);
        assert!(LinearizingFunction::new(2, vec![4, 0, 0, 0]).is_err());
    }
}
