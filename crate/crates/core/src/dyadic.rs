//! Dyadic intervals and finite unions of intervals on the torus [0,1).

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// `2^{-k}` as an exact f64.
#[inline]
pub fn pow2_neg(k: u32) -> f64 {
    f64::powi(2.0, -(k as i32))
}

/// `2^{e}` for signed exponents.
#[inline]
pub fn pow2(e: i32) -> f64 {
    f64::powi(2.0, e)
}

/// The dyadic interval `[j 2^{-k}, (j+1) 2^{-k})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub scale: u32,
    pub index: u64,
}

impl DyadicInterval {
    pub const UNIT: DyadicInterval = DyadicInterval { scale: 0, index: 0 };

    pub fn new(scale: u32, index: u64) -> Result<Self> {
        if scale > 62 || index >= (1u64 << scale) {
            return Err(Error::InvalidArgument(format!(
                "dyadic interval ({scale},{index}) out of range"
            )));
        }
        Ok(Self { scale, index })
    }

    #[inline]
    pub fn length(&self) -> f64 {
        pow2_neg(self.scale)
    }

    #[inline]
    pub fn start(&self) -> f64 {
        self.index as f64 * self.length()
    }

    #[inline]
    pub fn end(&self) -> f64 {
        (self.index + 1) as f64 * self.length()
    }

    #[inline]
    pub fn center(&self) -> f64 {
        (self.index as f64 + 0.5) * self.length()
    }

    /// True if `other ⊆ self`.
    #[inline]
    pub fn contains(&self, other: &DyadicInterval) -> bool {
        other.scale >= self.scale && (other.index >> (other.scale - self.scale)) == self.index
    }

    #[inline]
    pub fn intersects(&self, other: &DyadicInterval) -> bool {
        self.contains(other) || other.contains(self)
    }

    pub fn parent(&self) -> Option<DyadicInterval> {
        (self.scale > 0).then(|| DyadicInterval {
            scale: self.scale - 1,
            index: self.index >> 1,
        })
    }

    /// Ancestor at a coarser scale (or `self` when `scale == self.scale`).
    pub fn ancestor(&self, scale: u32) -> DyadicInterval {
        debug_assert!(scale <= self.scale);
        DyadicInterval {
            scale,
            index: self.index >> (self.scale - scale),
        }
    }

    pub fn children(&self) -> [DyadicInterval; 2] {
        let scale = self.scale + 1;
        [
            DyadicInterval { scale, index: 2 * self.index },
            DyadicInterval { scale, index: 2 * self.index + 1 },
        ]
    }

    /// Grid cells `[start, end)` covered at resolution `2^{-K}`.
    pub fn cell_range(&self, resolution: u32) -> std::ops::Range<usize> {
        assert!(self.scale <= resolution, "interval finer than grid");
        let shift = resolution - self.scale;
        let start = (self.index << shift) as usize;
        start..start + (1usize << shift)
    }

    /// The dyadic interval at scale `k` containing grid cell `m` at resolution `K`.
    pub fn containing_cell(cell: usize, resolution: u32, scale: u32) -> DyadicInterval {
        DyadicInterval {
            scale,
            index: (cell >> (resolution - scale)) as u64,
        }
    }

    pub fn as_set(&self) -> TorusSet {
        TorusSet::from_intervals([(self.start(), self.end())])
    }
}

impl fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start(), self.end())
    }
}

/// Finite union of half-open intervals on the torus, stored as sorted,
/// pairwise disjoint, non-adjacent components inside `[0,1]`.
///
/// A component straddling `0` is stored as two pieces `[0,b)` and `[a,1)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TorusSet {
    components: Vec<(f64, f64)>,
}

impl TorusSet {
    pub fn empty() -> Self {
        Self { components: Vec::new() }
    }

    pub fn full() -> Self {
        Self { components: vec![(0.0, 1.0)] }
    }

    /// Builds a set from arbitrary real intervals `[a,b)`, reducing mod 1.
    pub fn from_intervals<I: IntoIterator<Item = (f64, f64)>>(intervals: I) -> Self {
        let mut pieces = Vec::new();
        for (a, b) in intervals {
            if b <= a {
                continue;
            }
            if b - a >= 1.0 {
                return Self::full();
            }
            let a0 = a.rem_euclid(1.0);
            let b0 = a0 + (b - a);
            if b0 > 1.0 {
                pieces.push((a0, 1.0));
                pieces.push((0.0, b0 - 1.0));
            } else {
                pieces.push((a0, b0));
            }
        }
        Self::normalize(pieces)
    }

    fn normalize(mut pieces: Vec<(f64, f64)>) -> Self {
        pieces.retain(|(a, b)| b > a);
        pieces.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(pieces.len());
        for (a, b) in pieces {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        Self { components: out }
    }

    /// Cells of a boolean mask at resolution `K`, merged into intervals.
    pub fn from_cell_mask(mask: &[bool], resolution: u32) -> Self {
        assert_eq!(mask.len(), 1usize << resolution);
        let h = pow2_neg(resolution);
        let mut pieces = Vec::new();
        let mut m = 0;
        while m < mask.len() {
            if mask[m] {
                let start = m;
                while m < mask.len() && mask[m] {
                    m += 1;
                }
                pieces.push((start as f64 * h, m as f64 * h));
            } else {
                m += 1;
            }
        }
        Self { components: pieces }
    }

    pub fn from_dyadic<'a, I: IntoIterator<Item = &'a DyadicInterval>>(intervals: I) -> Self {
        Self::normalize(intervals.into_iter().map(|d| (d.start(), d.end())).collect())
    }

    pub fn components(&self) -> &[(f64, f64)] {
        &self.components
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.components == [(0.0, 1.0)]
    }

    pub fn measure(&self) -> f64 {
        self.components.iter().map(|(a, b)| b - a).sum()
    }

    pub fn contains_point(&self, x: f64) -> bool {
        let x = x.rem_euclid(1.0);
        self.components.iter().any(|&(a, b)| a <= x && x < b)
    }

    /// True if `[a,b)` (reduced mod 1) lies inside the set.
    pub fn contains_interval(&self, a: f64, b: f64) -> bool {
        TorusSet::from_intervals([(a, b)]).is_subset(self)
    }

    pub fn contains_dyadic(&self, d: &DyadicInterval) -> bool {
        let (a, b) = (d.start(), d.end());
        self.components.iter().any(|&(s, e)| s <= a && b <= e)
    }

    pub fn is_subset(&self, other: &TorusSet) -> bool {
        self.components
            .iter()
            .all(|&(a, b)| other.components.iter().any(|&(s, e)| s <= a && b <= e))
    }

    pub fn union(&self, other: &TorusSet) -> TorusSet {
        let mut pieces = self.components.clone();
        pieces.extend_from_slice(&other.components);
        Self::normalize(pieces)
    }

    pub fn intersection(&self, other: &TorusSet) -> TorusSet {
        let mut pieces = Vec::new();
        for &(a, b) in &self.components {
            for &(s, e) in &other.components {
                let lo = a.max(s);
                let hi = b.min(e);
                if hi > lo {
                    pieces.push((lo, hi));
                }
            }
        }
        Self::normalize(pieces)
    }

    /// Grid cells fully contained in the set.
    pub fn to_cell_mask(&self, resolution: u32) -> Vec<bool> {
        let n = 1usize << resolution;
        let scale = n as f64;
        let mut mask = vec![false; n];
        for &(a, b) in &self.components {
            let first = (a * scale).ceil() as usize;
            let last = ((b * scale).floor() as usize).min(n);
            for cell in mask.iter_mut().take(last).skip(first) {
                *cell = true;
            }
        }
        mask
    }

    /// Components as seen on the circle: a piece touching 0 and a piece
    /// touching 1 are one arc. Returned arcs may end beyond 1.
    fn arcs(&self) -> Vec<(f64, f64)> {
        let mut arcs = self.components.clone();
        if arcs.len() >= 2 && arcs[0].0 == 0.0 && arcs[arcs.len() - 1].1 == 1.0 {
            let first = arcs.remove(0);
            let last = arcs.last_mut().expect("nonempty");
            last.1 = 1.0 + first.1;
        }
        arcs
    }

    /// Concentric dilation of every component by `b`, reduced mod 1.
    pub fn dilate(&self, b: f64) -> TorusSet {
        assert!(b > 0.0, "dilation factor must be positive");
        if self.is_full() {
            return Self::full();
        }
        Self::from_intervals(self.arcs().into_iter().map(|(s, e)| dilate_interval(s, e, b)))
    }
}

/// Concentric dilation of `[s,e)` by `b`.
#[inline]
pub fn dilate_interval(s: f64, e: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (s + e);
    let half = 0.5 * b * (e - s);
    (c - half, c + half)
}

/// Dilation of a set or a single dyadic interval.
pub fn dilate_set(set: &TorusSet, b: f64) -> TorusSet {
    set.dilate(b)
}

pub fn dilate_dyadic(d: &DyadicInterval, b: f64) -> TorusSet {
    assert!(b > 0.0, "dilation factor must be positive");
    let (s, e) = dilate_interval(d.start(), d.end(), b);
    TorusSet::from_intervals([(s, e)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn di(scale: u32, index: u64) -> DyadicInterval {
        DyadicInterval::new(scale, index).unwrap()
    }

    #[test]
    fn interval_arithmetic() {
        let d = di(2, 1);
        assert_eq!(d.start(), 0.25);
        assert_eq!(d.end(), 0.5);
        assert_eq!(d.parent(), Some(di(1, 0)));
        assert_eq!(d.children(), [di(3, 2), di(3, 3)]);
        assert!(di(1, 0).contains(&d));
        assert!(!d.contains(&di(1, 0)));
        assert!(!di(2, 2).intersects(&d));
        assert_eq!(d.cell_range(4), 4..8);
        assert!(DyadicInterval::new(2, 4).is_err());
    }

    #[test]
    fn dilation_examples() {
        let half = di(1, 0).as_set();
        assert_eq!(half.dilate(1.0), half);

        let q = di(2, 1);
        assert_eq!(
            dilate_dyadic(&q, 2.0).components(),
            &[(0.125, 0.625)]
        );

        let s = TorusSet::from_intervals([(0.0, 0.25), (0.5, 0.75)]);
        assert!(s.dilate(3.0).is_full());
    }

    #[test]
    fn dilation_treats_wrapped_component_as_one_arc() {
        let s = TorusSet::from_intervals([(0.875, 1.125)]);
        assert_eq!(s.components(), &[(0.0, 0.125), (0.875, 1.0)]);
        let d = s.dilate(2.0);
        assert_eq!(d.components(), &[(0.0, 0.25), (0.75, 1.0)]);
    }

    #[test]
    fn large_dilation_saturates() {
        assert!(dilate_dyadic(&di(3, 5), 8.0).is_full());
        assert!(dilate_dyadic(&di(3, 5), 100.0).is_full());
    }

    #[test]
    fn cell_mask_round_trip() {
        let mask = vec![true, false, true, true, false, false, false, true];
        let s = TorusSet::from_cell_mask(&mask, 3);
        assert_eq!(s.measure(), 0.5);
        assert_eq!(s.to_cell_mask(3), mask);
    }

    #[test]
    fn set_algebra() {
        let a = TorusSet::from_intervals([(0.0, 0.5)]);
        let b = TorusSet::from_intervals([(0.25, 0.75)]);
        assert_eq!(a.union(&b).components(), &[(0.0, 0.75)]);
        assert_eq!(a.intersection(&b).components(), &[(0.25, 0.5)]);
        assert!(a.intersection(&b).is_subset(&a));
        assert!(!a.is_subset(&b));
        assert!(a.contains_interval(0.125, 0.25));
        assert!(TorusSet::full().contains_interval(0.75, 1.25));
        assert!(!a.contains_interval(0.75, 1.25));
    }
}
