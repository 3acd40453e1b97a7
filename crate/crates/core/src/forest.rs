//! Trees, L∞-forests and BMO-forests: predicates, greedy extraction, and
//! packing of a level `P_n` into forests.

use serde::Serialize;
use std::collections::{HashMap, HashSet};

use crate::dyadic::DyadicInterval;
use crate::tile::{admits, counting_cells, freq_near, tile_leq, Tile, TileSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Tree {
    pub top: Tile,
    pub tiles: TileSet,
}

impl Tree {
    pub fn top_interval(&self) -> DyadicInterval {
        self.top.time()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum TreeViolation {
    /// A member is not below the top (`2P ≤ 10 P_0` fails).
    NotBelowTop(Tile),
    /// An ambient tile sharing a member's time interval and close to the top
    /// in frequency is missing.
    MissingSameTime(Tile),
    /// An ambient tile between two members is missing.
    NotConvex(Tile),
}

impl std::fmt::Display for TreeViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TreeViolation::NotBelowTop(t) => write!(f, "tile {t} not below the top"),
            TreeViolation::MissingSameTime(t) => write!(f, "same-time tile {t} missing"),
            TreeViolation::NotConvex(t) => write!(f, "tile {t} breaks convexity"),
        }
    }
}

/// Frequency indices `m` at scale `k` with `2ω ∩ 10ω_top ≠ ∅`.
fn admitted_freqs(top: &Tile, k: u32) -> impl Iterator<Item = u64> {
    let len = (1u64 << k) as f64;
    let len0 = top.freq_len();
    let c0 = top.freq_center();
    let lo = ((c0 - 5.0 * len0) / len - 1.5).floor() + 1.0;
    let hi = ((c0 + 5.0 * len0) / len + 0.5).ceil() - 1.0;
    let lo = lo.max(0.0) as u64;
    let hi = hi.max(-1.0);
    let top = *top;
    let range = if hi < 0.0 { 1..=0 } else { lo..=hi as u64 };
    range.filter(move |&m| freq_near(&Tile { k, j: 0, m }, 2.0, &top, 10.0))
}

/// Every tile at scales `top.k..=max_scale` admitted by `top`.
pub fn admitted_tiles(top: &Tile, max_scale: u32) -> impl Iterator<Item = Tile> + '_ {
    (top.k..=max_scale).flat_map(move |k| {
        let d = k - top.k;
        let js = (top.j << d)..((top.j + 1) << d);
        js.flat_map(move |j| admitted_freqs(top, k).map(move |m| Tile { k, j, m }))
    })
}

/// Tree conditions for `tree` with top `top`, relative to the tiles for which
/// `ambient` returns true (scales up to `max_scale`).
pub fn check_tree(
    tree: &TileSet,
    top: &Tile,
    ambient: &dyn Fn(&Tile) -> bool,
    max_scale: u32,
) -> Result<(), TreeViolation> {
    if let Some(bad) = tree.iter().find(|p| !admits(top, p)) {
        return Err(TreeViolation::NotBelowTop(*bad));
    }
    let times: HashSet<DyadicInterval> = tree.iter().map(|p| p.time()).collect();
    for cand in admitted_tiles(top, max_scale) {
        if tree.contains(&cand) || !ambient(&cand) {
            continue;
        }
        if times.contains(&cand.time()) && freq_near(&cand, 2.0, top, 1.0) {
            return Err(TreeViolation::MissingSameTime(cand));
        }
        let below = tree.iter().any(|p1| tile_leq(p1, &cand));
        let above = below && tree.iter().any(|p2| tile_leq(&cand, p2));
        if above {
            return Err(TreeViolation::NotConvex(cand));
        }
    }
    Ok(())
}

pub fn is_tree(tree: &TileSet, top: &Tile, ambient: &TileSet) -> Result<(), TreeViolation> {
    let max_scale = ambient.iter().chain(tree.iter()).map(|t| t.k).max().unwrap_or(top.k);
    check_tree(tree, top, &|t| ambient.contains(t), max_scale)
}

/// `max_P Σ_{P' ∈ S, I_{P'} ⊆ I_P} |I_{P'}| / |I_P|`.
pub fn sparse_constant(s: &TileSet) -> f64 {
    let Some((lo, _)) = s.scale_range() else {
        return 0.0;
    };
    let mut packed: HashMap<DyadicInterval, f64> = HashMap::new();
    for p in s {
        let d = p.time();
        for k in lo..=d.scale {
            *packed.entry(d.ancestor(k)).or_insert(0.0) += d.length();
        }
    }
    s.iter()
        .map(|p| packed[&p.time()] / p.time_len())
        .fold(0.0, f64::max)
}

pub fn is_sparse_tree(s: &TileSet, c: f64) -> bool {
    sparse_constant(s) <= c
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ForestViolation {
    /// Tile `tile` of tree `tree` sits below the top of tree `other`.
    NotSeparated { tree: usize, tile: Tile, other: usize },
    /// The counting function of the tops exceeds the bound.
    Counting { max: u32, bound: f64 },
    /// Tile `tile` of group `later` is too large relative to `earlier_tile` in group `earlier`.
    ScaleSeparation { earlier: usize, earlier_tile: Tile, later: usize, tile: Tile },
    /// Group `group` fails as an L∞-forest.
    Group { group: usize, inner: Box<ForestViolation> },
}

impl std::fmt::Display for ForestViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ForestViolation::NotSeparated { tree, tile, other } => {
                write!(f, "tile {tile} of tree {tree} is not separated from the top of tree {other}")
            }
            ForestViolation::Counting { max, bound } => write!(f, "top count {max} exceeds {bound}"),
            ForestViolation::ScaleSeparation { earlier, earlier_tile, later, tile } => write!(
                f,
                "tile {tile} of group {later} overlaps tile {earlier_tile} of group {earlier} at comparable scale"
            ),
            ForestViolation::Group { group, inner } => write!(f, "group {group}: {inner}"),
        }
    }
}

fn finest_scale<'a>(trees: impl Iterator<Item = &'a Tree>) -> u32 {
    trees
        .flat_map(|t| t.tiles.iter().map(|p| p.k).chain(std::iter::once(t.top.k)))
        .max()
        .unwrap_or(0)
}

/// Separation of the trees and `‖Σ χ_{I_top}‖_∞ ≤ c_forest 2^n`.
pub fn is_linf_forest(trees: &[Tree], n: u32, c_forest: f64) -> Result<(), ForestViolation> {
    if trees.is_empty() {
        return Ok(());
    }
    let resolution = finest_scale(trees.iter());
    let tops: Vec<DyadicInterval> = trees.iter().map(Tree::top_interval).collect();
    let max = counting_cells(&tops, resolution).into_iter().max().unwrap_or(0);
    let bound = c_forest * f64::powi(2.0, n as i32);
    if max as f64 > bound {
        return Err(ForestViolation::Counting { max, bound });
    }
    let mut by_time: HashMap<DyadicInterval, Vec<usize>> = HashMap::new();
    for (i, t) in trees.iter().enumerate() {
        by_time.entry(t.top_interval()).or_default().push(i);
    }
    for (i, t) in trees.iter().enumerate() {
        for p in &t.tiles {
            for k in 0..=p.k {
                let Some(owners) = by_time.get(&p.time().ancestor(k)) else {
                    continue;
                };
                if let Some(&other) = owners.iter().find(|&&o| o != i && admits(&trees[o].top, p)) {
                    return Err(ForestViolation::NotSeparated { tree: i, tile: *p, other });
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct LinfForest {
    pub trees: Vec<Tree>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct BmoForest {
    pub groups: Vec<LinfForest>,
}

impl BmoForest {
    pub fn tiles(&self) -> impl Iterator<Item = &Tile> {
        self.groups.iter().flat_map(|g| g.trees.iter().flat_map(|t| t.tiles.iter()))
    }

    pub fn trees(&self) -> impl Iterator<Item = &Tree> {
        self.groups.iter().flat_map(|g| g.trees.iter())
    }
}

/// Occupancy of time intervals by one group, for the scale-separation test.
#[derive(Default)]
struct ScaleIndex {
    exact: HashSet<DyadicInterval>,
    /// Nodes with some tile at or below them.
    subtree: HashSet<DyadicInterval>,
}

impl ScaleIndex {
    fn add(&mut self, p: &Tile) {
        let d = p.time();
        self.exact.insert(d);
        for k in 0..=d.scale {
            self.subtree.insert(d.ancestor(k));
        }
    }

    /// A tile of this group (index `j`) conflicting with `p` in group `k > j`:
    /// overlapping time intervals with `|I_p| > 2^{j-k} |I_P|`.
    fn conflict(&self, p: &Tile, gap: u32, group_tiles: &[Tile]) -> Option<Tile> {
        let d = p.time();
        if self.subtree.contains(&d) {
            return group_tiles.iter().find(|q| d.contains(&q.time())).copied();
        }
        // Coarser tiles at scale k need p.k ≥ k + gap.
        for k in p.k.saturating_sub(gap - 1)..d.scale {
            let a = d.ancestor(k);
            if self.exact.contains(&a) {
                return group_tiles.iter().find(|q| q.time() == a).copied();
            }
        }
        None
    }
}

/// Groups are L∞-forests, and for `j < k` every overlapping pair satisfies
/// `|I_{P'}| ≤ 2^{j-k} |I_P|`.
pub fn is_bmo_forest(groups: &[LinfForest], n: u32, c_forest: f64) -> Result<(), ForestViolation> {
    for (g, group) in groups.iter().enumerate() {
        is_linf_forest(&group.trees, n, c_forest)
            .map_err(|e| ForestViolation::Group { group: g, inner: Box::new(e) })?;
    }
    let mut indices: Vec<(ScaleIndex, Vec<Tile>)> = Vec::new();
    for (later, group) in groups.iter().enumerate() {
        for t in &group.trees {
            for p in &t.tiles {
                for (earlier, (idx, tiles)) in indices.iter().enumerate() {
                    if let Some(q) = idx.conflict(p, (later - earlier) as u32, tiles) {
                        return Err(ForestViolation::ScaleSeparation {
                            earlier,
                            earlier_tile: q,
                            later,
                            tile: *p,
                        });
                    }
                }
            }
        }
        let mut idx = ScaleIndex::default();
        let mut tiles = Vec::new();
        for t in &group.trees {
            for p in &t.tiles {
                idx.add(p);
                tiles.push(*p);
            }
        }
        indices.push((idx, tiles));
    }
    Ok(())
}

/// Greedy maximal trees: repeatedly take the unassigned tile with the largest
/// time interval as a top and collect every unassigned tile it admits.
pub fn extract_maximal_trees(s: &TileSet) -> Vec<Tree> {
    let Some((_, max_scale)) = s.scale_range() else {
        return Vec::new();
    };
    let mut unassigned: HashSet<Tile> = s.iter().copied().collect();
    let mut trees = Vec::new();
    for top in s {
        if !unassigned.contains(top) {
            continue;
        }
        let tiles: Vec<Tile> = admitted_tiles(top, max_scale)
            .filter(|p| unassigned.remove(p))
            .collect();
        trees.push(Tree { top: *top, tiles: tiles.into_iter().collect() });
    }
    trees
}

struct GroupState {
    trees: Vec<Tree>,
    counts: Vec<u32>,
    tops: HashMap<DyadicInterval, Vec<Tile>>,
    by_time: HashMap<DyadicInterval, Vec<Tile>>,
    occupied: HashSet<DyadicInterval>,
}

impl GroupState {
    fn new(resolution: u32) -> Self {
        Self {
            trees: Vec::new(),
            counts: vec![0; 1usize << resolution],
            tops: HashMap::new(),
            by_time: HashMap::new(),
            occupied: HashSet::new(),
        }
    }

    /// Some tile of the group admitted by `top`.
    fn admitted_by(&self, top: &Tile) -> bool {
        let mut stack = vec![top.time()];
        while let Some(d) = stack.pop() {
            if !self.occupied.contains(&d) {
                continue;
            }
            if let Some(tiles) = self.by_time.get(&d) {
                if tiles.iter().any(|p| admits(top, p)) {
                    return true;
                }
            }
            stack.extend(d.children());
        }
        false
    }

    fn accepts(&self, tree: &Tree, bound: f64, resolution: u32) -> bool {
        let cells = tree.top.cells(resolution);
        if self.counts[cells].iter().any(|&c| (c + 1) as f64 > bound) {
            return false;
        }
        for p in &tree.tiles {
            for k in 0..=p.k {
                if let Some(tops) = self.tops.get(&p.time().ancestor(k)) {
                    if tops.iter().any(|t| admits(t, p)) {
                        return false;
                    }
                }
            }
        }
        !self.admitted_by(&tree.top)
    }

    fn push(&mut self, tree: Tree, resolution: u32) {
        for c in &mut self.counts[tree.top.cells(resolution)] {
            *c += 1;
        }
        self.tops.entry(tree.top_interval()).or_default().push(tree.top);
        for p in &tree.tiles {
            let d = p.time();
            self.by_time.entry(d).or_default().push(*p);
            for k in (0..=d.scale).rev() {
                if !self.occupied.insert(d.ancestor(k)) {
                    break;
                }
            }
        }
        self.trees.push(tree);
    }
}

/// Packs the trees of `p_n` into L∞-forests (first fit), then chains
/// consecutive L∞-forests into BMO-forests while the scale separation holds.
pub fn forest_decompose(p_n: &TileSet, n: u32, c_forest: f64) -> Vec<BmoForest> {
    let trees = extract_maximal_trees(p_n);
    if trees.is_empty() {
        return Vec::new();
    }
    let resolution = finest_scale(trees.iter());
    let bound = c_forest * f64::powi(2.0, n as i32);
    let mut groups: Vec<GroupState> = Vec::new();
    for tree in trees {
        match groups.iter_mut().find(|g| g.accepts(&tree, bound, resolution)) {
            Some(g) => g.push(tree, resolution),
            None => {
                let mut g = GroupState::new(resolution);
                g.push(tree, resolution);
                groups.push(g);
            }
        }
    }
    let mut forests: Vec<BmoForest> = Vec::new();
    let mut current: Vec<LinfForest> = Vec::new();
    for g in groups {
        let candidate = LinfForest { trees: g.trees };
        current.push(candidate);
        if current.len() > 1 && is_bmo_forest(&current, n, c_forest).is_err() {
            let last = current.pop().expect("just pushed");
            forests.push(BmoForest { groups: std::mem::take(&mut current) });
            current.push(last);
        }
    }
    if !current.is_empty() {
        forests.push(BmoForest { groups: current });
    }
    forests
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(tiles: &[Tile]) -> TileSet {
        tiles.iter().copied().collect()
    }

    #[test]
    fn singleton_and_chain_trees() {
        let top = Tile::new(2, 1, 3);
        let ambient = set(&[top]);
        assert_eq!(is_tree(&set(&[top]), &top, &ambient), Ok(()));

        // A chain below the top: same frequency neighbourhood, nested times.
        let chain = set(&[top, Tile::new(3, 2, 1), Tile::new(4, 5, 0)]);
        assert_eq!(is_tree(&chain, &top, &chain), Ok(()));
    }

    #[test]
    fn frequency_far_tiles_are_rejected() {
        let top = Tile::new(2, 0, 0);
        let far = Tile::new(2, 0, 40);
        let s = set(&[top, far]);
        assert_eq!(is_tree(&s, &top, &s), Err(TreeViolation::NotBelowTop(far)));
    }

    #[test]
    fn convexity_is_checked_against_ambient() {
        let top = Tile::new(1, 0, 0);
        let mid = Tile::new(2, 0, 0);
        let low = Tile::new(3, 0, 0);
        let ambient = set(&[top, mid, low]);
        assert_eq!(is_tree(&set(&[top, low]), &top, &ambient), Err(TreeViolation::NotConvex(mid)));
    }

    #[test]
    fn same_time_closure() {
        let top = Tile::new(2, 0, 4);
        let member = Tile::new(2, 0, 4);
        let neighbour = Tile::new(2, 0, 5);
        let ambient = set(&[member, neighbour]);
        assert_eq!(
            is_tree(&set(&[member]), &top, &ambient),
            Err(TreeViolation::MissingSameTime(neighbour))
        );
    }

    #[test]
    fn sparse_examples() {
        assert!(is_sparse_tree(&set(&[Tile::new(2, 0, 0), Tile::new(2, 1, 0)]), 1.0));
        assert!(is_sparse_tree(&TileSet::new(), 0.0));
        let d = 4u32;
        let cascade: TileSet = (0..=d)
            .flat_map(|k| (0..1u64 << k).map(move |j| Tile::new(k, j, 0)))
            .collect();
        assert_eq!(sparse_constant(&cascade), (d + 1) as f64);
        assert!(!is_sparse_tree(&cascade, d as f64));
    }

    #[test]
    fn extraction_examples() {
        let t = Tile::new(2, 1, 0);
        assert_eq!(extract_maximal_trees(&set(&[t])), vec![Tree { top: t, tiles: set(&[t]) }]);

        let a = Tile::new(2, 0, 0);
        let b = Tile::new(2, 0, 40);
        assert_eq!(extract_maximal_trees(&set(&[a, b])).len(), 2);

        let chain = set(&[Tile::new(1, 0, 0), Tile::new(2, 0, 0), Tile::new(3, 1, 0)]);
        let trees = extract_maximal_trees(&chain);
        assert_eq!(trees.len(), 1);
        assert_eq!(trees[0].tiles, chain);
    }

    #[test]
    fn linf_forest_examples() {
        let t = Tile::new(2, 0, 0);
        let one = vec![Tree { top: t, tiles: set(&[t]) }];
        assert_eq!(is_linf_forest(&one, 0, 1.0), Ok(()));

        let stacked: Vec<Tree> = (0..5u64)
            .map(|i| {
                let top = Tile::new(2, 0, 100 * i);
                Tree { top, tiles: set(&[top]) }
            })
            .collect();
        assert!(matches!(is_linf_forest(&stacked, 0, 4.0), Err(ForestViolation::Counting { .. })));
        assert_eq!(is_linf_forest(&stacked, 1, 4.0), Ok(()));

        let top_a = Tile::new(1, 0, 0);
        let top_b = Tile::new(2, 0, 0);
        let overlapping = vec![
            Tree { top: top_a, tiles: set(&[top_a]) },
            Tree { top: top_b, tiles: set(&[top_b]) },
        ];
        assert!(matches!(
            is_linf_forest(&overlapping, 0, 4.0),
            Err(ForestViolation::NotSeparated { .. })
        ));
    }

    #[test]
    fn bmo_forest_examples() {
        let single = |t: Tile| LinfForest { trees: vec![Tree { top: t, tiles: set(&[t]) }] };
        assert_eq!(is_bmo_forest(&[single(Tile::new(1, 0, 0))], 0, 4.0), Ok(()));
        assert_eq!(is_bmo_forest(&[single(Tile::new(1, 0, 0)), single(Tile::new(1, 1, 0))], 0, 4.0), Ok(()));
        // Group 1 must be at least twice finer than an overlapping group-0 tile.
        assert_eq!(is_bmo_forest(&[single(Tile::new(1, 0, 0)), single(Tile::new(2, 0, 9))], 0, 4.0), Ok(()));
        assert!(is_bmo_forest(&[single(Tile::new(2, 0, 0)), single(Tile::new(2, 0, 9))], 0, 4.0).is_err());
        assert!(is_bmo_forest(&[single(Tile::new(2, 0, 0)), single(Tile::new(1, 0, 9))], 0, 4.0).is_err());
        // Three groups: the gap between groups 0 and 2 is two scales.
        let g = [single(Tile::new(1, 0, 0)), single(Tile::new(2, 1, 9)), single(Tile::new(2, 0, 40))];
        assert!(is_bmo_forest(&g, 0, 4.0).is_err());
    }

    #[test]
    fn forest_decompose_examples() {
        assert!(forest_decompose(&TileSet::new(), 0, 4.0).is_empty());
        let t = Tile::new(2, 0, 0);
        let f = forest_decompose(&set(&[t]), 0, 4.0);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].tiles().copied().collect::<Vec<_>>(), vec![t]);
    }
}
