//! The `f`-dependent split `P_n = ⊔_α P_n^α` by stopping intervals, shadow
//! intervals, stopping-time partitions, and the per-tree projection.

use num_complex::Complex64;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap, HashSet};

use crate::dyadic::{pow2, DyadicInterval, TorusSet};
use crate::error::{Error, Result};
use crate::grid::{unit_roots, DyadicAverages, GridFunction};
use crate::tile::{tile_lt, Tile, TileSet};

/// Exponents `N`, `M` with `2^N < ‖Mf‖_∞ ≤ 2^{N+1}` and
/// `2^M < ∫|f| ≤ 2^{M+1}`.
pub fn level_exponents(f: &GridFunction) -> Result<(i32, i32)> {
    if f.is_zero() {
        return Err(Error::ZeroFunction);
    }
    let avgs = DyadicAverages::new(f);
    let sup = avgs.level(f.resolution()).iter().copied().fold(0.0, f64::max);
    let mean = avgs.level(0)[0];
    Ok((bracket(sup), bracket(mean)))
}

/// The integer `e` with `2^e < v ≤ 2^{e+1}`.
fn bracket(v: f64) -> i32 {
    let mut e = v.log2().ceil() as i32 - 1;
    while pow2(e) >= v {
        e -= 1;
    }
    while pow2(e + 1) < v {
        e += 1;
    }
    e
}

/// Cells of the concentric dilate `b·J` (`b` odd) at resolution `K`.
fn dilated_cells(j: &DyadicInterval, b: u64, resolution: u32) -> Option<(i64, i64)> {
    let len = 1i64 << (resolution - j.scale);
    let total = 1i64 << resolution;
    if len * b as i64 >= total {
        return None;
    }
    let start = (j.index as i64) * len;
    let pad = (b as i64 - 1) / 2 * len;
    Some((start - pad, start + len + pad))
}

/// Per-cell coverage by a union of dilated stopping intervals.
struct Coverage {
    diff: Vec<i64>,
    full: bool,
}

impl Coverage {
    fn new(resolution: u32) -> Self {
        Self { diff: vec![0; (1usize << resolution) + 1], full: false }
    }

    fn add(&mut self, j: &DyadicInterval, b: u64, resolution: u32) {
        let n = 1i64 << resolution;
        match dilated_cells(j, b, resolution) {
            None => self.full = true,
            Some((s, e)) => {
                let len = e - s;
                let s = s.rem_euclid(n);
                let end = s + len;
                self.diff[s as usize] += 1;
                if end <= n {
                    self.diff[end as usize] -= 1;
                } else {
                    self.diff[n as usize] -= 1;
                    self.diff[0] += 1;
                    self.diff[(end - n) as usize] -= 1;
                }
            }
        }
    }

    /// Prefix counts of covered cells.
    fn prefix(&self) -> Vec<u32> {
        let n = self.diff.len() - 1;
        let mut out = Vec::with_capacity(n + 1);
        out.push(0);
        let mut depth = 0i64;
        let mut acc = 0u32;
        for d in &self.diff[..n] {
            depth += d;
            acc += (self.full || depth > 0) as u32;
            out.push(acc);
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CzDecomposition {
    pub resolution: u32,
    /// `2^N < ‖Mf‖_∞ ≤ 2^{N+1}`.
    pub sup_exponent: i32,
    /// `2^M < ∫|f| ≤ 2^{M+1}`.
    pub mean_exponent: i32,
    pub alpha_lo: i32,
    pub alpha_hi: i32,
    pub classes: BTreeMap<i32, TileSet>,
    pub stopping: BTreeMap<i32, Vec<DyadicInterval>>,
    /// Tiles never captured (empty whenever the input tiles lie inside the grid).
    pub unassigned: TileSet,
}

impl CzDecomposition {
    pub fn class(&self, alpha: i32) -> Option<&TileSet> {
        self.classes.get(&alpha)
    }

    pub fn alpha_map(&self) -> HashMap<Tile, i32> {
        self.classes
            .iter()
            .flat_map(|(&a, s)| s.iter().map(move |t| (*t, a)))
            .collect()
    }

    /// `∪_{P ∈ P_n^α} I_P`.
    pub fn support(&self, alpha: i32) -> TorusSet {
        match self.classes.get(&alpha) {
            Some(s) => TorusSet::from_dyadic(s.iter().map(|t| t.time()).collect::<Vec<_>>().iter()),
            None => TorusSet::empty(),
        }
    }

    /// `{Mf > 2^{-α}}` as the union of the stopping intervals.
    pub fn level_set(&self, alpha: i32) -> TorusSet {
        match self.stopping.get(&alpha) {
            Some(js) => TorusSet::from_dyadic(js.iter()),
            None if alpha > self.alpha_hi => TorusSet::full(),
            None => TorusSet::empty(),
        }
    }
}

/// Splits `p_n` by the first `α` at which some stopping interval `J` has
/// `I_P ∩ 51J ≠ ∅` and `|I_P| ≤ |J|`.
pub fn cz_decompose(p_n: &TileSet, f: &GridFunction) -> Result<CzDecomposition> {
    let (sup_exp, mean_exp) = level_exponents(f)?;
    let resolution = f.resolution();
    if let Some(bad) = p_n.iter().find(|t| t.k > resolution) {
        return Err(Error::InvalidArgument(format!("tile {bad} finer than the K={resolution} grid")));
    }
    let avgs = DyadicAverages::new(f);
    let (alpha_lo, alpha_hi) = (-sup_exp, -mean_exp);
    let mut residual: Vec<Tile> = p_n.iter().copied().collect();
    let mut classes = BTreeMap::new();
    let mut stopping = BTreeMap::new();
    for alpha in alpha_lo..=alpha_hi {
        let mut js = avgs.stopping(pow2(-alpha));
        let members = capture(&residual, &mut js, resolution);
        let taken: HashSet<Tile> = members.iter().copied().collect();
        residual.retain(|t| !taken.contains(t));
        js.sort();
        stopping.insert(alpha, js);
        classes.insert(alpha, members.into_iter().collect());
    }
    Ok(CzDecomposition {
        resolution,
        sup_exponent: sup_exp,
        mean_exponent: mean_exp,
        alpha_lo,
        alpha_hi,
        classes,
        stopping,
        unassigned: residual.into_iter().collect(),
    })
}

/// Tiles of `tiles` captured by the stopping intervals `js`.
pub(crate) fn capture(tiles: &[Tile], js: &mut [DyadicInterval], resolution: u32) -> Vec<Tile> {
    if tiles.is_empty() || js.is_empty() {
        return Vec::new();
    }
    js.sort_by_key(|j| j.scale);
    let mut scales: Vec<u32> = tiles.iter().map(|t| t.k).collect();
    scales.sort_unstable();
    scales.dedup();
    let mut cov = Coverage::new(resolution);
    let mut next = 0;
    let mut prefix_by_scale = HashMap::new();
    for &k in &scales {
        while next < js.len() && js[next].scale <= k {
            cov.add(&js[next], 51, resolution);
            next += 1;
        }
        prefix_by_scale.insert(k, cov.prefix());
    }
    tiles
        .iter()
        .filter(|t| {
            let prefix = &prefix_by_scale[&t.k];
            let r = t.cells(resolution);
            prefix[r.end] > prefix[r.start]
        })
        .copied()
        .collect()
}

/// True if `I_P ∩ 51J ≠ ∅`, by set arithmetic.
pub fn meets_dilate(p: &Tile, j: &DyadicInterval, b: f64) -> bool {
    !crate::dyadic::dilate_dyadic(j, b).intersection(&p.time().as_set()).is_empty()
}

/// The 14 intervals of length `|I_P|` flanking `I_P` at offsets `2..=8`.
pub fn shadow_intervals(p: &Tile) -> Vec<DyadicInterval> {
    let n = 1i64 << p.k;
    let j = p.j as i64;
    (-8..=-2)
        .chain(2..=8)
        .map(|d| DyadicInterval { scale: p.k, index: (j + d).rem_euclid(n) as u64 })
        .collect()
}

/// Maximal dyadic intervals containing no member strictly, in left-to-right order.
pub fn cz_partition(members: &[DyadicInterval]) -> Vec<DyadicInterval> {
    let mut strict: HashSet<DyadicInterval> = HashSet::new();
    for d in members {
        for s in 0..d.scale {
            strict.insert(d.ancestor(s));
        }
    }
    let mut out = Vec::new();
    let mut stack = vec![DyadicInterval::UNIT];
    while let Some(d) = stack.pop() {
        if strict.contains(&d) {
            let [l, r] = d.children();
            stack.push(r);
            stack.push(l);
        } else {
            out.push(d);
        }
    }
    out
}

/// Minimal tiles of `tree` for the strict tile order.
pub fn minimal_tiles(tree: &TileSet) -> Vec<Tile> {
    tree.iter()
        .filter(|p| !tree.iter().any(|q| tile_lt(q, p)))
        .copied()
        .collect()
}

/// Stopping-time partition generated by the shadows of the minimal tiles.
pub fn tree_partition(tree: &TileSet) -> Vec<DyadicInterval> {
    let shadows: Vec<DyadicInterval> =
        minimal_tiles(tree).iter().flat_map(shadow_intervals).collect();
    cz_partition(&shadows)
}

/// Refines cells whose average of `|f|` reaches `bound` until it drops below
/// or the cell is a single grid cell. Returns the new partition and the
/// number of cells split.
pub fn refine_partition(
    partition: &[DyadicInterval],
    avgs: &DyadicAverages,
    bound: f64,
) -> (Vec<DyadicInterval>, usize) {
    let mut out = Vec::with_capacity(partition.len());
    let mut splits = 0;
    let mut stack: Vec<DyadicInterval> = partition.iter().rev().copied().collect();
    while let Some(d) = stack.pop() {
        if avgs.average(&d) >= bound && d.scale < avgs.resolution() {
            splits += 1;
            let [l, r] = d.children();
            stack.push(r);
            stack.push(l);
        } else {
            out.push(d);
        }
    }
    (out, splits)
}

/// `L f = Σ_J (avg_J f e^{2πiω·}) χ_J`.
pub fn tree_projection(f: &GridFunction, omega: i64, partition: &[DyadicInterval]) -> Result<GridFunction> {
    let resolution = f.resolution();
    let n = f.len();
    let mut covered = vec![false; n];
    for d in partition {
        if d.scale > resolution {
            return Err(Error::InvalidArgument(format!("cell {d} finer than the grid")));
        }
        for c in d.cell_range(resolution) {
            if covered[c] {
                return Err(Error::InvalidArgument("partition cells overlap".into()));
            }
            covered[c] = true;
        }
    }
    if covered.iter().any(|c| !c) {
        return Err(Error::InvalidArgument("partition does not cover the torus".into()));
    }
    let roots = unit_roots(resolution);
    let vals = f.values();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for d in partition {
        let r = d.cell_range(resolution);
        let len = r.len() as f64;
        let sum: Complex64 = r
            .clone()
            .map(|m| vals[m] * roots[(omega * m as i64).rem_euclid(n as i64) as usize])
            .sum();
        let avg = sum / len;
        for o in &mut out[r] {
            *o = avg;
        }
    }
    GridFunction::new(resolution, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tile::build_tile_family;

    fn di(s: u32, i: u64) -> DyadicInterval {
        DyadicInterval::new(s, i).unwrap()
    }

    #[test]
    fn exponents() {
        let one = GridFunction::constant(3, Complex64::new(1.0, 0.0));
        assert_eq!(level_exponents(&one).unwrap(), (-1, -1));
        let e = GridFunction::from_real(2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(level_exponents(&e).unwrap(), (-1, -3));
        assert!(level_exponents(&GridFunction::zeros(3)).is_err());
        assert_eq!(bracket(3.0), 1);
        assert_eq!(bracket(4.0), 1);
        assert_eq!(bracket(4.5), 2);
    }

    #[test]
    fn constant_function_lands_in_one_class() {
        let one = GridFunction::constant(3, Complex64::new(1.0, 0.0));
        let p_n = build_tile_family(3, 0, 3).unwrap();
        let cz = cz_decompose(&p_n, &one).unwrap();
        assert_eq!(cz.classes[&1], p_n);
        assert_eq!(cz.stopping[&1], vec![DyadicInterval::UNIT]);
        assert!(cz.unassigned.is_empty());
    }

    #[test]
    fn indicator_split() {
        let f = GridFunction::from_real(3, vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let p_n = build_tile_family(3, 1, 2).unwrap();
        let cz = cz_decompose(&p_n, &f).unwrap();
        let small: TileSet = p_n.iter().copied().filter(|t| t.k == 2).collect();
        let large: TileSet = p_n.iter().copied().filter(|t| t.k == 1).collect();
        assert_eq!(cz.classes[&1], small);
        assert_eq!(cz.classes[&2], large);
        assert!(cz.unassigned.is_empty());
    }

    #[test]
    fn empty_input() {
        let f = GridFunction::constant(3, Complex64::new(2.0, 0.0));
        let cz = cz_decompose(&TileSet::new(), &f).unwrap();
        assert!(cz.classes.values().all(TileSet::is_empty));
    }

    #[test]
    fn capture_agrees_with_set_arithmetic() {
        let f = GridFunction::from_fn(6, |m| Complex64::new(((m * 37) % 11) as f64 * (m % 5 == 0) as u8 as f64, 0.0));
        let avgs = DyadicAverages::new(&f);
        let tiles: Vec<Tile> = build_tile_family(6, 0, 6).unwrap().into_iter().collect();
        for alpha in -4..=3 {
            let mut js = avgs.stopping(pow2(-alpha));
            let fast: HashSet<Tile> = capture(&tiles, &mut js, 6).into_iter().collect();
            for t in &tiles {
                let slow = js.iter().any(|j| j.scale <= t.k && meets_dilate(t, j, 51.0));
                assert_eq!(fast.contains(t), slow, "alpha={alpha} tile={t}");
            }
        }
    }

    #[test]
    fn shadow_examples() {
        let p = Tile::new(2, 0, 0);
        let s = shadow_intervals(&p);
        assert_eq!(s.len(), 14);
        let total: f64 = s.iter().map(DyadicInterval::length).sum();
        assert_eq!(total, 14.0 * p.time_len());
        let q = Tile::new(6, 20, 0);
        for d in shadow_intervals(&q) {
            assert!(!d.intersects(&q.time()));
            assert_eq!(d.scale, 6);
        }
    }

    #[test]
    fn partition_examples() {
        assert_eq!(cz_partition(&[]), vec![DyadicInterval::UNIT]);
        assert_eq!(
            cz_partition(&[di(3, 4)]),
            vec![di(1, 0), di(3, 4), di(3, 5), di(2, 3)]
        );
        assert_eq!(cz_partition(&[DyadicInterval::UNIT]), vec![DyadicInterval::UNIT]);
    }

    #[test]
    fn projection_examples() {
        let one = GridFunction::constant(2, Complex64::new(1.0, 0.0));
        let p = tree_projection(&one, 0, &[DyadicInterval::UNIT]).unwrap();
        assert_eq!(p, one);

        let osc = GridFunction::from_real(2, vec![1.0, -1.0, 2.0, -2.0]).unwrap();
        let p = tree_projection(&osc, 0, &[di(1, 0), di(1, 1)]).unwrap();
        assert!(p.is_zero());

        let e = GridFunction::from_real(2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let p = tree_projection(&e, 0, &[di(1, 0), di(1, 1)]).unwrap();
        let vals: Vec<f64> = p.values().iter().map(|v| v.re).collect();
        assert_eq!(vals, vec![0.5, 0.5, 0.0, 0.0]);

        assert!(tree_projection(&e, 0, &[di(1, 0)]).is_err());
        assert!(tree_projection(&e, 0, &[di(1, 0), di(1, 1), di(2, 0)]).is_err());
    }

    #[test]
    fn refinement_reaches_bound() {
        let f = GridFunction::from_real(3, vec![16.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let avgs = DyadicAverages::new(&f);
        let (cells, splits) = refine_partition(&[DyadicInterval::UNIT], &avgs, 2.0);
        assert_eq!(splits, 3);
        assert_eq!(cells, vec![di(3, 0), di(3, 1), di(2, 1), di(1, 1)]);
        let (same, none) = refine_partition(&cells, &avgs, 100.0);
        assert_eq!((same, none), (cells, 0));
    }
}
