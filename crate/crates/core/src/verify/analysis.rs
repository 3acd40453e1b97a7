use num_complex::Complex64;
use std::collections::BTreeMap;

use crate::cz::{cz_decompose, refine_partition, tree_partition, tree_projection, CzDecomposition};
use crate::dyadic::pow2;
use crate::error::{Error, Result};
use crate::forest::{forest_decompose, BmoForest, Tree};
use crate::grid::{DyadicAverages, GridFunction};
use crate::kernel::{CarlesonModel, ScaleBank};
use crate::mass::{decompose_with, MassConfig, MassDecomposition, MassEngine};
use crate::tile::{Tile, TileSet};

/// Which part of the tile family a `(scale, cell)` pair belongs to.
pub type PieceLabel = (Option<u32>, Option<i32>);

/// Everything the checks need for one `(f, N)` instance.
pub struct Analysis {
    pub model: CarlesonModel,
    pub f: GridFunction,
    pub f_label: String,
    pub family: TileSet,
    pub engine: MassEngine,
    pub mass: MassDecomposition,
    /// Per level `n`; empty when `f ≡ 0`.
    pub cz: BTreeMap<u32, CzDecomposition>,
    /// Forest decomposition of every `P_n^α`.
    pub forests: BTreeMap<(u32, i32), Vec<BmoForest>>,
    pub c_forest: f64,
    pub bank: ScaleBank,
    pub tf: GridFunction,
    /// `T^{P_n} f` per level, `None` for the discarded tiles.
    pub by_level: BTreeMap<Option<u32>, GridFunction>,
    /// `T^{P_n^α} f`.
    pub by_class: BTreeMap<(u32, i32), GridFunction>,
    labels: Vec<PieceLabel>,
}

impl Analysis {
    pub fn new(
        model: CarlesonModel,
        f: GridFunction,
        f_label: impl Into<String>,
        mass_cfg: &MassConfig,
        c_forest: f64,
    ) -> Result<Self> {
        let lattice = model.lattice();
        if f.resolution() != lattice.resolution {
            return Err(Error::InvalidArgument(format!(
                "f has K={}, model has K={}",
                f.resolution(),
                lattice.resolution
            )));
        }
        let family = lattice.family();
        let engine = MassEngine::new(lattice, model.linearizing(), mass_cfg.exponent);
        let mass = decompose_with(&engine, &family, mass_cfg)?;
        let mut cz = BTreeMap::new();
        let mut forests = BTreeMap::new();
        if !f.is_zero() {
            for (n, p_n) in mass.nonempty_levels() {
                let dec = cz_decompose(p_n, &f)?;
                for (&alpha, class) in &dec.classes {
                    if !class.is_empty() {
                        forests.insert((n, alpha), forest_decompose(class, n, c_forest));
                    }
                }
                cz.insert(n, dec);
            }
        }
        let mut labels = vec![(None, None); lattice.len()];
        for (n, p_n) in mass.nonempty_levels() {
            for t in p_n {
                labels[lattice.id(t)] = (Some(n), None);
            }
        }
        for (&n, dec) in &cz {
            for (&alpha, class) in &dec.classes {
                for t in class {
                    labels[lattice.id(t)] = (Some(n), Some(alpha));
                }
            }
        }
        let bank = model.bank(&f)?;
        let tf = bank.total();
        let lin = model.linearizing();
        let pieces = bank.split_by_label(|k, x| Some(labels[lattice.id(&lin.tile_at(k, x))]));
        let mut by_level: BTreeMap<Option<u32>, GridFunction> = BTreeMap::new();
        let mut by_class = BTreeMap::new();
        for (&(n, alpha), g) in &pieces {
            match by_level.get_mut(&n) {
                Some(acc) => *acc = acc.add(g),
                None => {
                    by_level.insert(n, g.clone());
                }
            }
            if let (Some(n), Some(alpha)) = (n, alpha) {
                by_class.insert((n, alpha), g.clone());
            }
        }
        Ok(Self {
            model,
            f,
            f_label: f_label.into(),
            family,
            engine,
            mass,
            cz,
            forests,
            c_forest,
            bank,
            tf,
            by_level,
            by_class,
            labels,
        })
    }

    pub fn resolution(&self) -> u32 {
        self.f.resolution()
    }

    /// `(n, α)` of a family tile.
    pub fn label(&self, t: &Tile) -> PieceLabel {
        let lat = self.model.lattice();
        if lat.contains(t) {
            self.labels[lat.id(t)]
        } else {
            (None, None)
        }
    }

    pub fn level_operator(&self, n: u32) -> GridFunction {
        self.by_level
            .get(&Some(n))
            .cloned()
            .unwrap_or_else(|| GridFunction::zeros(self.resolution()))
    }

    pub fn class_operator(&self, n: u32, alpha: i32) -> GridFunction {
        self.by_class
            .get(&(n, alpha))
            .cloned()
            .unwrap_or_else(|| GridFunction::zeros(self.resolution()))
    }

    /// Trees of `P_n^α` in forest order.
    pub fn trees(&self, n: u32, alpha: i32) -> impl Iterator<Item = &Tree> {
        self.forests.get(&(n, alpha)).into_iter().flatten().flat_map(BmoForest::trees)
    }

    /// Cells of `E(P)`.
    pub fn e_cells(&self, p: &Tile) -> Vec<usize> {
        let lin = self.model.linearizing();
        p.cells(self.resolution()).filter(|&x| lin.tile_at(p.k, x) == *p).collect()
    }

    /// `T^S h` evaluated on `∪_{P ∈ S} E(P)` only, as `(cell, value)` pairs.
    pub fn sparse_apply(&self, h: &GridFunction, tiles: &TileSet) -> Vec<(usize, Complex64)> {
        let mut acc: BTreeMap<usize, Complex64> = BTreeMap::new();
        for p in tiles {
            for x in self.e_cells(p) {
                *acc.entry(x).or_default() += self.model.scale_at(h.values(), p.k, x, 0);
            }
        }
        acc.into_iter().collect()
    }

    /// `T^S f` on `∪ E(P)`, read from the precomputed scale outputs.
    pub fn banked_apply(&self, tiles: &TileSet) -> Vec<(usize, Complex64)> {
        let mut acc: BTreeMap<usize, Complex64> = BTreeMap::new();
        for p in tiles {
            let vals = self.bank.scale(p.k);
            for x in self.e_cells(p) {
                *acc.entry(x).or_default() += vals[x];
            }
        }
        acc.into_iter().collect()
    }

    /// Per-tree quantities for every tree of every class.
    pub fn tree_evals(&self) -> Vec<TreeEval> {
        let avgs = DyadicAverages::new(&self.f);
        let mut out = Vec::new();
        for &(n, alpha) in self.forests.keys() {
            for (index, tree) in self.trees(n, alpha).enumerate() {
                out.push(self.eval_tree(n, alpha, index, tree, &avgs));
            }
        }
        out
    }

    fn eval_tree(&self, n: u32, alpha: i32, index: usize, tree: &Tree, avgs: &DyadicAverages) -> TreeEval {
        let top = tree.top;
        let omega = (top.freq_start() + ((1u64 << top.k) >> 1)) as i64;
        let e_count: usize = tree.tiles.iter().map(|p| self.e_cells(p).len()).sum();
        let tpf = self.banked_apply(&tree.tiles);

        let partition = tree_partition(&tree.tiles);
        let bound = pow2(-alpha + 10);
        let cz_max = partition.iter().map(|d| avgs.average(d)).fold(0.0, f64::max);
        let (partition, refinements) = if cz_max >= bound {
            refine_partition(&partition, avgs, bound)
        } else {
            (partition, 0)
        };
        let projection = tree_projection(&self.f, -omega, &partition).expect("partition covers the torus");
        let proj_sup = projection.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        let h2 = projection.modulate(omega);
        let h1 = self.f.sub(&h2);
        let t1 = self.sparse_apply(&h1, &tree.tiles);
        let t2 = self.sparse_apply(&h2, &tree.tiles);
        let w = self.f.cell_width();
        let mut split_error = 0.0f64;
        for ((a, b), (c, v)) in t1.iter().zip(&t2).zip(&tpf) {
            debug_assert!(a.0 == b.0 && a.0 == *c);
            split_error = split_error.max((a.1 + b.1 - v).norm());
        }
        let top_cells = top.cells(self.resolution());
        let f_on_top: f64 = self.f.values()[top_cells].iter().map(|v| v.norm()).sum::<f64>() * w;
        TreeEval {
            n,
            alpha,
            index,
            top,
            size: tree.tiles.len(),
            e_measure: e_count as f64 * w,
            tpf,
            t1_l1: t1.iter().map(|(_, v)| v.norm()).sum::<f64>() * w,
            t2_l1: t2.iter().map(|(_, v)| v.norm()).sum::<f64>() * w,
            split_error,
            proj_sup,
            cz_max,
            refinements,
            f_on_top,
        }
    }

    /// `|{Mf > 2^{-α}}|`.
    pub fn level_set_measure(&self, n: u32, alpha: i32) -> f64 {
        self.cz.get(&n).map(|d| d.level_set(alpha).measure()).unwrap_or(0.0)
    }

    pub fn tile_count(&self) -> usize {
        self.family.len()
    }

    pub fn alpha_classes(&self) -> BTreeMap<i32, Vec<u32>> {
        let mut out: BTreeMap<i32, Vec<u32>> = BTreeMap::new();
        for &(n, a) in self.by_class.keys() {
            out.entry(a).or_default().push(n);
        }
        out
    }
}

/// Measured quantities of one tree `p ⊆ P_n^α`.
#[derive(Debug, Clone)]
pub struct TreeEval {
    pub n: u32,
    pub alpha: i32,
    pub index: usize,
    pub top: Tile,
    pub size: usize,
    /// `|E(p)|`.
    pub e_measure: f64,
    /// `T^p f` on `E(p)`.
    pub tpf: Vec<(usize, Complex64)>,
    /// `∫|T^p(f - e^{iω·}L_p)|`.
    pub t1_l1: f64,
    /// `∫|T^p(e^{iω·}L_p)|`.
    pub t2_l1: f64,
    pub split_error: f64,
    /// `‖L_p f‖_∞`.
    pub proj_sup: f64,
    /// Largest average of `|f|` over the stopping-time partition.
    pub cz_max: f64,
    pub refinements: usize,
    /// `‖f‖_{L^1(I_p)}`.
    pub f_on_top: f64,
}

impl TreeEval {
    pub fn top_len(&self) -> f64 {
        self.top.time_len()
    }

    pub fn l1(&self, w: f64) -> f64 {
        self.tpf.iter().map(|(_, v)| v.norm()).sum::<f64>() * w
    }
}
