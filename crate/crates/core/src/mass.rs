//! Level decomposition `P = ⊔_n P_n` driven by tile mass.

use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

use crate::dyadic::{pow2_neg, DyadicInterval, TorusSet};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::tile::{
    bmo_c_norm, counting_cells, decay_raw, ECounts, LinearizingFunction, Tile, TileLattice,
    TileSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct MassConfig {
    /// Decay exponent in the mass definition.
    pub exponent: u32,
    /// Cut for the exceptional sets, `{count > c ‖count‖_BMO}`.
    pub c: f64,
    pub n_max: u32,
}

impl MassConfig {
    pub fn default_for(resolution: u32) -> Self {
        Self { exponent: 10, c: 4.0, n_max: resolution + 1 }
    }

    pub fn validate(&self, resolution: u32) -> Result<()> {
        if !(self.c >= 1.0) {
            return Err(Error::Config(format!("exceptional-set cut c={} must be >= 1", self.c)));
        }
        if self.n_max < resolution {
            return Err(Error::Config(format!("n_max={} must be >= K={resolution}", self.n_max)));
        }
        Ok(())
    }
}

/// A set of whole grid cells with O(1) interval containment.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRegion {
    resolution: u32,
    mask: Vec<bool>,
    prefix: Vec<u32>,
}

impl CellRegion {
    pub fn from_mask(resolution: u32, mask: Vec<bool>) -> Self {
        let mut prefix = Vec::with_capacity(mask.len() + 1);
        prefix.push(0u32);
        let mut acc = 0u32;
        for &b in &mask {
            acc += b as u32;
            prefix.push(acc);
        }
        Self { resolution, mask, prefix }
    }

    pub fn full(resolution: u32) -> Self {
        Self::from_mask(resolution, vec![true; 1usize << resolution])
    }

    #[inline]
    pub fn contains(&self, d: &DyadicInterval) -> bool {
        let r = d.cell_range(self.resolution);
        (self.prefix[r.end] - self.prefix[r.start]) as usize == r.len()
    }

    #[inline]
    pub fn contains_cell(&self, cell: usize) -> bool {
        self.mask[cell]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn cell_count(&self) -> usize {
        self.prefix[self.mask.len()] as usize
    }

    pub fn measure(&self) -> f64 {
        self.cell_count() as f64 * pow2_neg(self.resolution)
    }

    pub fn is_empty(&self) -> bool {
        self.cell_count() == 0
    }

    pub fn to_set(&self) -> TorusSet {
        TorusSet::from_cell_mask(&self.mask, self.resolution)
    }
}

/// Mass evaluation over a tile lattice: per time interval, the nonzero
/// densities sorted in decreasing order, so the supremum can stop as soon as
/// no remaining candidate can beat the current best.
#[derive(Debug, Clone)]
pub struct MassEngine {
    lattice: TileLattice,
    exponent: u32,
    counts: ECounts,
    /// Indexed by `(1 << k) + j`.
    candidates: Vec<Vec<(u64, f64)>>,
}

impl MassEngine {
    pub fn new(lattice: TileLattice, n: &LinearizingFunction, exponent: u32) -> Self {
        let counts = ECounts::new(lattice, n);
        let mut candidates = vec![Vec::new(); 2usize << lattice.k_max];
        for k in lattice.k_min..=lattice.k_max {
            for j in 0..1u64 << k {
                let block = lattice.time_block(k, j);
                let mut list: Vec<(u64, f64)> = block
                    .clone()
                    .filter(|&id| counts.count(id) > 0)
                    .map(|id| ((id - block.start) as u64, counts.density(id)))
                    .collect();
                list.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                candidates[(1usize << k) + j as usize] = list;
            }
        }
        Self { lattice, exponent, counts, candidates }
    }

    pub fn lattice(&self) -> &TileLattice {
        &self.lattice
    }

    pub fn counts(&self) -> &ECounts {
        &self.counts
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    /// Mass of `p` relative to the tiles flagged in `pool` and `region`.
    pub fn mass(&self, p: &Tile, pool: &[bool], region: &CellRegion) -> f64 {
        let mut best = 0.0f64;
        for k2 in self.lattice.k_min..=p.k {
            let time = p.time().ancestor(k2);
            if !region.contains(&time) {
                continue;
            }
            let base = self.lattice.time_block(k2, time.index).start;
            for &(m2, dens) in &self.candidates[(1usize << k2) + time.index as usize] {
                if dens <= best {
                    break;
                }
                if !pool[base + m2 as usize] {
                    continue;
                }
                let v = dens * decay_raw(p.k, p.m, k2, m2, self.exponent);
                if v > best {
                    best = v;
                }
            }
        }
        best
    }

    /// Maximal tiles among the eligible ones with density `≥ threshold`.
    pub fn maximal_dense(&self, eligible: &[bool], threshold: f64) -> Vec<usize> {
        let lat = &self.lattice;
        let per_scale = 1usize << lat.resolution;
        let mut dense_or_above = vec![false; lat.len()];
        let mut out = Vec::new();
        for id in 0..lat.len() {
            let dense = eligible[id] && self.counts.count(id) > 0 && self.counts.density(id) >= threshold;
            let t = lat.tile(id);
            let above = if t.k > lat.k_min {
                let q = Tile { k: t.k - 1, j: t.j >> 1, m: 2 * t.m };
                let qid = lat.id(&q);
                dense_or_above[qid] || dense_or_above[qid + 1]
            } else {
                false
            };
            dense_or_above[id] = dense || above;
            if dense && !above {
                out.push(id);
            }
            debug_assert!(id / per_scale == (t.k - lat.k_min) as usize);
        }
        out
    }
}

/// One step of the exceptional-set iteration at level `n`.
#[derive(Debug, Clone, Serialize)]
pub struct MassLayer {
    pub n: u32,
    pub k: u32,
    /// `A_n^k`.
    pub region: TorusSet,
    pub maximal: TileSet,
    /// Time intervals of `maximal`, with multiplicity.
    pub intervals: Vec<DyadicInterval>,
    pub bmo: f64,
    /// Largest value of the counting function.
    pub max_count: u32,
    /// Largest value of the counting function on `A_n^k \ A_n^{k+1}`.
    pub max_count_kept: u32,
    /// `A_n^{k+1}`.
    pub exceptional: TorusSet,
    #[serde(skip)]
    pub counting: Vec<u32>,
    #[serde(skip)]
    region_cells: Option<CellRegion>,
}

impl MassLayer {
    pub fn counting_function(&self, resolution: u32) -> GridFunction {
        GridFunction::from_real(resolution, self.counting.iter().map(|&c| c as f64).collect())
            .expect("length matches")
    }

    fn region_cells(&self, resolution: u32) -> CellRegion {
        self.region_cells
            .clone()
            .unwrap_or_else(|| CellRegion::from_mask(resolution, self.region.to_cell_mask(resolution)))
    }
}

/// Grid cells where the counting function of `intervals` exceeds `c` times
/// its BMO_C norm.
pub fn exceptional_set(intervals: &[DyadicInterval], c: f64, resolution: u32) -> TorusSet {
    let counts = counting_cells(intervals, resolution);
    let bound = c * bmo_c_norm(intervals);
    let mask: Vec<bool> = counts.iter().map(|&v| v as f64 > bound).collect();
    TorusSet::from_cell_mask(&mask, resolution)
}

fn iterate_layers(
    engine: &MassEngine,
    pool: &[bool],
    n: u32,
    c: f64,
) -> Vec<MassLayer> {
    let lat = *engine.lattice();
    let threshold = pow2_neg(n);
    let mut region = CellRegion::full(lat.resolution);
    let mut layers = Vec::new();
    for k in 0.. {
        let eligible: Vec<bool> = (0..lat.len())
            .map(|id| pool[id] && region.contains(&lat.tile(id).time()))
            .collect();
        let maximal_ids = engine.maximal_dense(&eligible, threshold);
        let maximal: Vec<Tile> = maximal_ids.iter().map(|&id| lat.tile(id)).collect();
        let intervals: Vec<DyadicInterval> = maximal.iter().map(|t| t.time()).collect();
        let counting = counting_cells(&intervals, lat.resolution);
        let bmo = bmo_c_norm(&intervals);
        let bound = c * bmo;
        let next_mask: Vec<bool> = counting.iter().map(|&v| v as f64 > bound).collect();
        let next = CellRegion::from_mask(lat.resolution, next_mask);
        let max_count = counting.iter().copied().max().unwrap_or(0);
        let max_count_kept = counting
            .iter()
            .enumerate()
            .filter(|&(x, _)| !next.contains_cell(x))
            .map(|(_, &v)| v)
            .max()
            .unwrap_or(0);
        let done = maximal.is_empty() || next.is_empty();
        layers.push(MassLayer {
            n,
            k,
            region: region.to_set(),
            maximal: TileSet::from_sorted(maximal),
            intervals,
            bmo,
            max_count,
            max_count_kept,
            exceptional: next.to_set(),
            counting,
            region_cells: Some(region),
        });
        if done {
            break;
        }
        region = next;
    }
    layers
}

fn assign_ids(
    engine: &MassEngine,
    pool: &[bool],
    n: u32,
    layers: &[MassLayer],
) -> Vec<(usize, u32, f64)> {
    let lat = *engine.lattice();
    let regions: Vec<CellRegion> = layers.iter().map(|l| l.region_cells(lat.resolution)).collect();
    let lo = pow2_neg(n);
    let hi = 2.0 * lo;
    (0..lat.len())
        .into_par_iter()
        .filter(|&id| pool[id])
        .filter_map(|id| {
            let t = lat.tile(id);
            let layer = regions.iter().rposition(|r| r.contains(&t.time()))?;
            let m = engine.mass(&t, pool, &regions[layer]);
            (m >= lo && m < hi).then_some((id, layer as u32, m))
        })
        .collect()
}

fn lattice_for(pool: &TileSet, n: &LinearizingFunction) -> Result<Option<TileLattice>> {
    let Some((lo, hi)) = pool.scale_range() else {
        return Ok(None);
    };
    let lat = TileLattice::new(n.resolution(), lo, hi)?;
    if let Some(bad) = pool.iter().find(|t| !lat.contains(t)) {
        return Err(Error::InvalidArgument(format!("tile {bad} outside the K={} lattice", n.resolution())));
    }
    Ok(Some(lat))
}

fn pool_mask(lat: &TileLattice, pool: &TileSet) -> Vec<bool> {
    let mut mask = vec![false; lat.len()];
    for t in pool {
        mask[lat.id(t)] = true;
    }
    mask
}

/// Maximal tiles of `pool` with density `≥ 2^{-n}`.
pub fn select_maximal_dense(pool: &TileSet, n: u32, lin: &LinearizingFunction) -> Result<TileSet> {
    let Some(lat) = lattice_for(pool, lin)? else {
        return Ok(TileSet::new());
    };
    let engine = MassEngine::new(lat, lin, 0);
    let ids = engine.maximal_dense(&pool_mask(&lat, pool), pow2_neg(n));
    Ok(TileSet::from_sorted(ids.into_iter().map(|id| lat.tile(id)).collect()))
}

/// The layers `A_n^0 ⊇ A_n^1 ⊇ …` at level `n` for the given pool.
pub fn layer_iteration(pool: &TileSet, n: u32, lin: &LinearizingFunction, c: f64) -> Result<Vec<MassLayer>> {
    let Some(lat) = lattice_for(pool, lin)? else {
        let empty = MassLayer {
            n,
            k: 0,
            region: TorusSet::full(),
            maximal: TileSet::new(),
            intervals: Vec::new(),
            bmo: 0.0,
            max_count: 0,
            max_count_kept: 0,
            exceptional: TorusSet::empty(),
            counting: vec![0; 1usize << lin.resolution()],
            region_cells: None,
        };
        return Ok(vec![empty]);
    };
    let engine = MassEngine::new(lat, lin, 0);
    Ok(iterate_layers(&engine, &pool_mask(&lat, pool), n, c))
}

/// Tiles of `pool` whose mass relative to their layer falls in `[2^{-n}, 2^{1-n})`.
pub fn assign_level(
    pool: &TileSet,
    n: u32,
    layers: &[MassLayer],
    lin: &LinearizingFunction,
    exponent: u32,
) -> Result<TileSet> {
    let Some(lat) = lattice_for(pool, lin)? else {
        return Ok(TileSet::new());
    };
    let engine = MassEngine::new(lat, lin, exponent);
    let ids = assign_ids(&engine, &pool_mask(&lat, pool), n, layers);
    Ok(TileSet::from_sorted(ids.into_iter().map(|(id, _, _)| lat.tile(id)).collect()))
}

/// Where a tile ended up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Assignment {
    pub level: u32,
    pub layer: u32,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MassDecomposition {
    pub resolution: u32,
    pub config: MassConfig,
    pub levels: BTreeMap<u32, TileSet>,
    pub layers: BTreeMap<u32, Vec<MassLayer>>,
    /// Tiles never reaching a mass window.
    pub discard: TileSet,
    #[serde(skip)]
    lattice: Option<TileLattice>,
    #[serde(skip)]
    assignment: Vec<Option<Assignment>>,
}

impl MassDecomposition {
    pub fn lattice(&self) -> Option<&TileLattice> {
        self.lattice.as_ref()
    }

    pub fn assignment(&self, t: &Tile) -> Option<Assignment> {
        let lat = self.lattice?;
        if !lat.contains(t) {
            return None;
        }
        self.assignment[lat.id(t)]
    }

    pub fn level_of(&self, t: &Tile) -> Option<u32> {
        self.assignment(t).map(|a| a.level)
    }

    /// Level per lattice id (`None` for discarded or non-family tiles).
    pub fn level_table(&self) -> Vec<Option<u32>> {
        self.assignment.iter().map(|a| a.map(|a| a.level)).collect()
    }

    pub fn nonempty_levels(&self) -> impl Iterator<Item = (u32, &TileSet)> {
        self.levels.iter().filter(|(_, s)| !s.is_empty()).map(|(n, s)| (*n, s))
    }

    pub fn tile_count(&self) -> usize {
        self.levels.values().map(TileSet::len).sum::<usize>() + self.discard.len()
    }
}

/// Runs the full level decomposition of `family`.
pub fn mass_decompose(family: &TileSet, lin: &LinearizingFunction, cfg: &MassConfig) -> Result<MassDecomposition> {
    cfg.validate(lin.resolution())?;
    let Some(lat) = lattice_for(family, lin)? else {
        return Ok(MassDecomposition {
            resolution: lin.resolution(),
            config: *cfg,
            levels: BTreeMap::new(),
            layers: BTreeMap::new(),
            discard: TileSet::new(),
            lattice: None,
            assignment: Vec::new(),
        });
    };
    let engine = MassEngine::new(lat, lin, cfg.exponent);
    decompose_with(&engine, family, cfg)
}

pub fn decompose_with(engine: &MassEngine, family: &TileSet, cfg: &MassConfig) -> Result<MassDecomposition> {
    let lat = *engine.lattice();
    cfg.validate(lat.resolution)?;
    let mut pool = pool_mask(&lat, family);
    let mut assignment: Vec<Option<Assignment>> = vec![None; lat.len()];
    let mut levels = BTreeMap::new();
    let mut all_layers = BTreeMap::new();
    for n in 0..=cfg.n_max {
        if !pool.iter().any(|&b| b) {
            break;
        }
        let layers = iterate_layers(engine, &pool, n, cfg.c);
        let assigned = assign_ids(engine, &pool, n, &layers);
        let mut tiles = Vec::with_capacity(assigned.len());
        for &(id, layer, mass) in &assigned {
            if assignment[id].is_some() {
                return Err(Error::Internal(format!("tile {} assigned twice", lat.tile(id))));
            }
            assignment[id] = Some(Assignment { level: n, layer, mass });
            tiles.push(lat.tile(id));
        }
        for &(id, _, _) in &assigned {
            pool[id] = false;
        }
        levels.insert(n, TileSet::from_sorted(tiles));
        all_layers.insert(n, layers);
    }
    let discard = TileSet::from_sorted((0..lat.len()).filter(|&id| pool[id]).map(|id| lat.tile(id)).collect());
    let dec = MassDecomposition {
        resolution: lat.resolution,
        config: *cfg,
        levels,
        layers: all_layers,
        discard,
        lattice: Some(lat),
        assignment,
    };
    if dec.tile_count() != family.len() {
        return Err(Error::Internal(format!(
            "decomposition holds {} tiles, family has {}",
            dec.tile_count(),
            family.len()
        )));
    }
    Ok(dec)
}
