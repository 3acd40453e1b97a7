//! The smooth partition `1/y = Σ_k ψ_k(y)` and the scale, tile, and tile-set
//! operators built from it.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::pow2_neg;
use crate::error::{Error, Result};
use crate::grid::{unit_roots, GridFunction};
use crate::tile::{LinearizingFunction, Tile, TileLattice, TileSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub resolution: u32,
    pub k_min: u32,
    pub k_max: u32,
}

impl KernelConfig {
    pub fn new(resolution: u32, k_min: u32, k_max: u32) -> Result<Self> {
        if k_min > k_max || k_max > resolution {
            return Err(Error::Config(format!(
                "kernel scales [{k_min}, {k_max}] invalid for K={resolution}"
            )));
        }
        Ok(Self { resolution, k_min, k_max })
    }

    /// `k_min = 3`, `k_max = K - 3`, clamped for very small grids.
    pub fn default_for(resolution: u32) -> Self {
        let k_min = 3.min(resolution);
        let k_max = resolution.saturating_sub(3).max(k_min);
        Self { resolution, k_min, k_max }
    }

    pub fn lattice(&self) -> TileLattice {
        TileLattice { resolution: self.resolution, k_min: self.k_min, k_max: self.k_max }
    }

    pub fn scales(&self) -> std::ops::RangeInclusive<u32> {
        self.k_min..=self.k_max
    }
}

fn g(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

fn smooth_step(t: f64) -> f64 {
    let a = g(t);
    a / (a + g(1.0 - t))
}

/// Smooth cutoff: `1` on `[0,4]`, `0` on `[8,∞)`.
pub fn eta_profile(y: f64) -> f64 {
    assert!(y >= 0.0, "eta is defined for y >= 0");
    if y <= 4.0 {
        1.0
    } else if y >= 8.0 {
        0.0
    } else {
        smooth_step((8.0 - y) / 4.0)
    }
}

/// `ψ_k(y) = 2^k ψ(2^k y)` with `ψ(y) = (η(|y|) - η(2|y|)) / y`.
pub fn psi(y: f64, k: u32) -> f64 {
    if y == 0.0 {
        return 0.0;
    }
    let s = (1u64 << k) as f64;
    let u = (s * y).abs();
    (eta_profile(u) - eta_profile(2.0 * u)) / y
}

/// `Σ_{k=k_min}^{k_max} ψ_k(y)` in telescoped form, checked against the
/// direct sum.
pub fn truncated_kernel(y: f64, cfg: &KernelConfig) -> Result<f64> {
    if y == 0.0 {
        return Err(Error::InvalidArgument("truncated kernel is undefined at y = 0".into()));
    }
    let closed = telescoped(y, cfg.k_min, cfg.k_max);
    let direct: f64 = (cfg.k_min..=cfg.k_max).map(|k| psi(y, k)).sum();
    let scale = closed.abs().max(direct.abs()).max(1.0);
    if (closed - direct).abs() > 1e-12 * scale {
        return Err(Error::Internal(format!(
            "kernel sum {direct} disagrees with closed form {closed} at y={y}"
        )));
    }
    Ok(closed)
}

/// `(η(2^{lo}|y|) - η(2^{hi+1}|y|)) / y`.
pub fn telescoped(y: f64, lo: u32, hi: u32) -> f64 {
    let a = y.abs();
    (eta_profile((1u64 << lo) as f64 * a) - eta_profile((1u64 << (hi + 1)) as f64 * a)) / y
}

/// Nonzero samples `(j, ψ_k(j 2^{-K}))` over offsets `j ∈ (-2^{K-1}, 2^{K-1}]`.
#[derive(Debug, Clone)]
pub struct ScaleKernel {
    pub k: u32,
    pub taps: Vec<(i64, f64)>,
}

impl ScaleKernel {
    pub fn new(resolution: u32, k: u32) -> Self {
        let half = 1i64 << (resolution.max(1) - 1);
        let h = pow2_neg(resolution);
        let taps = (-half + 1..=half)
            .filter_map(|j| {
                let w = psi(j as f64 * h, k);
                (w != 0.0).then_some((j, w))
            })
            .collect();
        Self { k, taps }
    }
}

/// The discretized operator family for one linearizing function.
#[derive(Debug, Clone)]
pub struct CarlesonModel {
    cfg: KernelConfig,
    n: LinearizingFunction,
    roots: Vec<Complex64>,
    kernels: Vec<ScaleKernel>,
}

impl CarlesonModel {
    pub fn new(cfg: KernelConfig, n: LinearizingFunction) -> Result<Self> {
        if n.resolution() != cfg.resolution {
            return Err(Error::InvalidArgument(format!(
                "linearizing function has K={}, kernel has K={}",
                n.resolution(),
                cfg.resolution
            )));
        }
        let kernels = cfg.scales().map(|k| ScaleKernel::new(cfg.resolution, k)).collect();
        Ok(Self { roots: unit_roots(cfg.resolution), cfg, n, kernels })
    }

    pub fn config(&self) -> &KernelConfig {
        &self.cfg
    }

    pub fn linearizing(&self) -> &LinearizingFunction {
        &self.n
    }

    pub fn lattice(&self) -> TileLattice {
        self.cfg.lattice()
    }

    pub fn kernel(&self, k: u32) -> &ScaleKernel {
        &self.kernels[(k - self.cfg.k_min) as usize]
    }

    fn check_scale(&self, k: u32) -> Result<()> {
        if k < self.cfg.k_min || k > self.cfg.k_max {
            return Err(Error::InvalidArgument(format!(
                "scale {k} outside [{}, {}]",
                self.cfg.k_min, self.cfg.k_max
            )));
        }
        Ok(())
    }

    fn check_input(&self, f: &GridFunction) -> Result<()> {
        if f.resolution() != self.cfg.resolution {
            return Err(Error::InvalidArgument(format!(
                "function has K={}, operator has K={}",
                f.resolution(),
                self.cfg.resolution
            )));
        }
        Ok(())
    }

    /// `T_k f(x_m)` with the frequency `N(x_m) + shift`.
    #[inline]
    pub fn scale_at(&self, f: &[Complex64], k: u32, cell: usize, shift: i64) -> Complex64 {
        let mask = (f.len() - 1) as i64;
        let freq = self.n.at(cell) as i64 + shift;
        let x = cell as i64;
        let mut acc = Complex64::new(0.0, 0.0);
        for &(j, w) in &self.kernel(k).taps {
            let phase = self.roots[((freq * j) & mask) as usize];
            acc += phase * f[((x - j) & mask) as usize] * w;
        }
        acc * pow2_neg(self.cfg.resolution)
    }

    pub fn apply_scale(&self, f: &GridFunction, k: u32) -> Result<GridFunction> {
        self.check_input(f)?;
        self.check_scale(k)?;
        let vals = f.values();
        let out = (0..vals.len()).into_par_iter().map(|x| self.scale_at(vals, k, x, 0)).collect();
        GridFunction::new(self.cfg.resolution, out)
    }

    /// Every `T_k f` at once.
    pub fn bank(&self, f: &GridFunction) -> Result<ScaleBank> {
        self.bank_shifted(f, 0)
    }

    /// Scale outputs with the frequency `N + shift`.
    pub fn bank_shifted(&self, f: &GridFunction, shift: i64) -> Result<ScaleBank> {
        self.check_input(f)?;
        let vals = f.values();
        let per_scale = self
            .cfg
            .scales()
            .map(|k| (0..vals.len()).into_par_iter().map(|x| self.scale_at(vals, k, x, shift)).collect())
            .collect();
        Ok(ScaleBank { cfg: self.cfg, per_scale })
    }

    /// Scale outputs only at the flagged `(scale, cell)` pairs.
    pub fn bank_masked(
        &self,
        f: &GridFunction,
        shift: i64,
        active: &(dyn Fn(u32, usize) -> bool + Sync),
    ) -> Result<ScaleBank> {
        self.check_input(f)?;
        let vals = f.values();
        let zero = Complex64::new(0.0, 0.0);
        let per_scale = self
            .cfg
            .scales()
            .map(|k| {
                (0..vals.len())
                    .into_par_iter()
                    .map(|x| if active(k, x) { self.scale_at(vals, k, x, shift) } else { zero })
                    .collect()
            })
            .collect();
        Ok(ScaleBank { cfg: self.cfg, per_scale })
    }

    /// The full operator `T = Σ_k T_k`.
    pub fn apply_full(&self, f: &GridFunction) -> Result<GridFunction> {
        Ok(self.bank(f)?.total())
    }

    pub fn apply_tile(&self, f: &GridFunction, p: &Tile) -> Result<GridFunction> {
        self.check_scale(p.k)?;
        let tk = self.apply_scale(f, p.k)?;
        let zero = Complex64::new(0.0, 0.0);
        let vals = tk
            .values()
            .iter()
            .enumerate()
            .map(|(x, v)| if self.n.tile_at(p.k, x) == *p { *v } else { zero })
            .collect();
        GridFunction::new(self.cfg.resolution, vals)
    }

    pub fn apply_tileset(&self, f: &GridFunction, s: &TileSet) -> Result<GridFunction> {
        for p in s {
            self.check_scale(p.k)?;
        }
        let bank = self.bank_masked(f, 0, &|k, x| s.contains(&self.n.tile_at(k, x)))?;
        Ok(bank.masked_sum(|k, x| s.contains(&self.n.tile_at(k, x))))
    }

    /// `sup_N |T_N f(x)|` over all linearizing functions, with a maximizing `N`.
    ///
    /// `T_N f(x)` depends on `N` only through `N(x)`, so the supremum is the
    /// maximum over constant frequencies `ν` of the convolutions `T_ν f`,
    /// each obtained as one inverse DFT of `Ŵ(ξ - ν) f̂(ξ)`. Ties keep the
    /// smallest `ν`.
    pub fn maximal(&self, f: &GridFunction) -> Result<(GridFunction, LinearizingFunction)> {
        self.check_input(f)?;
        let len = f.len();
        let mut planner = rustfft::FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let mut w_hat = vec![Complex64::new(0.0, 0.0); len];
        let mask = (len - 1) as i64;
        for ker in &self.kernels {
            for &(j, w) in &ker.taps {
                w_hat[(j & mask) as usize] += w;
            }
        }
        forward.process(&mut w_hat);
        let mut f_hat = f.values().to_vec();
        forward.process(&mut f_hat);
        let norm = pow2_neg(self.cfg.resolution) / len as f64;
        let mut best = vec![0.0f64; len];
        let mut arg = vec![0u64; len];
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        let mut scratch = vec![Complex64::new(0.0, 0.0); inverse.get_inplace_scratch_len()];
        for nu in 0..len {
            for (xi, b) in buf.iter_mut().enumerate() {
                *b = w_hat[(xi + len - nu) & (len - 1)] * f_hat[xi];
            }
            inverse.process_with_scratch(&mut buf, &mut scratch);
            for (x, v) in buf.iter().enumerate() {
                let a = v.norm() * norm;
                if a > best[x] {
                    best[x] = a;
                    arg[x] = nu as u64;
                }
            }
        }
        Ok((
            GridFunction::from_real(self.cfg.resolution, best)?,
            LinearizingFunction::new(self.cfg.resolution, arg)?,
        ))
    }

    /// `(T_k)^* h(z) = 2^{-K} Σ_j e^{-2πi N(z+y_j) y_j} ψ_k(y_j) h(z + y_j)`.
    #[inline]
    fn scale_adjoint_at(&self, h: &[Complex64], k: u32, z: usize) -> Complex64 {
        let mask = (h.len() - 1) as i64;
        let z = z as i64;
        let mut acc = Complex64::new(0.0, 0.0);
        for &(j, w) in &self.kernel(k).taps {
            let x = ((z + j) & mask) as usize;
            let phase = self.roots[((self.n.at(x) as i64 * j) & mask) as usize].conj();
            acc += phase * h[x] * w;
        }
        acc * pow2_neg(self.cfg.resolution)
    }

    /// `(T^S)^* g = Σ_k (T_k)^*(χ_{∪E(P), P∈S, scale k} g)`.
    pub fn apply_tileset_adjoint(&self, g: &GridFunction, s: &TileSet) -> Result<GridFunction> {
        self.check_input(g)?;
        for p in s {
            self.check_scale(p.k)?;
        }
        let zero = Complex64::new(0.0, 0.0);
        let len = g.len();
        let mut total = vec![zero; len];
        for k in self.cfg.scales() {
            let masked: Vec<Complex64> = g
                .values()
                .iter()
                .enumerate()
                .map(|(x, v)| if s.contains(&self.n.tile_at(k, x)) { *v } else { zero })
                .collect();
            if masked.iter().all(|v| *v == zero) {
                continue;
            }
            let part: Vec<Complex64> =
                (0..len).into_par_iter().map(|z| self.scale_adjoint_at(&masked, k, z)).collect();
            for (t, p) in total.iter_mut().zip(part) {
                *t += p;
            }
        }
        GridFunction::new(self.cfg.resolution, total)
    }
}

/// Precomputed `T_k f` for every scale in the kernel range.
#[derive(Debug, Clone)]
pub struct ScaleBank {
    cfg: KernelConfig,
    per_scale: Vec<Vec<Complex64>>,
}

impl ScaleBank {
    pub fn scale(&self, k: u32) -> &[Complex64] {
        &self.per_scale[(k - self.cfg.k_min) as usize]
    }

    /// `Σ_k T_k f`, summed in increasing `k`.
    pub fn total(&self) -> GridFunction {
        self.masked_sum(|_, _| true)
    }

    /// `Σ_k [keep(k, x)] T_k f(x)`, summed in increasing `k`.
    pub fn masked_sum(&self, keep: impl Fn(u32, usize) -> bool) -> GridFunction {
        let len = 1usize << self.cfg.resolution;
        let mut out = vec![Complex64::new(0.0, 0.0); len];
        for (i, vals) in self.per_scale.iter().enumerate() {
            let k = self.cfg.k_min + i as u32;
            for (x, o) in out.iter_mut().enumerate() {
                if keep(k, x) {
                    *o += vals[x];
                }
            }
        }
        GridFunction::new(self.cfg.resolution, out).expect("length matches")
    }

    /// Splits `T f` by an integer label per `(k, x)`: returns `Σ_k [label(k,x) = ℓ] T_k f(x)`
    /// for every label that occurs.
    pub fn split_by_label<L: Ord + Copy>(
        &self,
        label: impl Fn(u32, usize) -> Option<L>,
    ) -> std::collections::BTreeMap<L, GridFunction> {
        let len = 1usize << self.cfg.resolution;
        let zero = Complex64::new(0.0, 0.0);
        let mut parts: std::collections::BTreeMap<L, Vec<Complex64>> = Default::default();
        for (i, vals) in self.per_scale.iter().enumerate() {
            let k = self.cfg.k_min + i as u32;
            for (x, v) in vals.iter().enumerate() {
                if let Some(l) = label(k, x) {
                    parts.entry(l).or_insert_with(|| vec![zero; len])[x] += *v;
                }
            }
        }
        parts
            .into_iter()
            .map(|(l, v)| (l, GridFunction::new(self.cfg.resolution, v).expect("length matches")))
            .collect()
    }
}

pub fn apply_scale(f: &GridFunction, n: &LinearizingFunction, k: u32, cfg: &KernelConfig) -> Result<GridFunction> {
    CarlesonModel::new(*cfg, n.clone())?.apply_scale(f, k)
}

pub fn apply_tile(f: &GridFunction, n: &LinearizingFunction, p: &Tile, cfg: &KernelConfig) -> Result<GridFunction> {
    CarlesonModel::new(*cfg, n.clone())?.apply_tile(f, p)
}

pub fn apply_tileset(f: &GridFunction, n: &LinearizingFunction, s: &TileSet, cfg: &KernelConfig) -> Result<GridFunction> {
    CarlesonModel::new(*cfg, n.clone())?.apply_tileset(f, s)
}

pub fn apply_tileset_adjoint(
    g: &GridFunction,
    n: &LinearizingFunction,
    s: &TileSet,
    cfg: &KernelConfig,
) -> Result<GridFunction> {
    CarlesonModel::new(*cfg, n.clone())?.apply_tileset_adjoint(g, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maximal_matches_constant_frequency_models() {
        let cfg = KernelConfig::new(6, 2, 3).unwrap();
        let f = GridFunction::from_fn(6, |m| Complex64::new(((m * 7) % 5) as f64 - 1.5, (m % 3) as f64));
        let n = LinearizingFunction::new(6, (0..64u64).map(|m| (m * 13) % 64).collect()).unwrap();
        let (sup, arg) = CarlesonModel::new(cfg, n.clone()).unwrap().maximal(&f).unwrap();
        let mut direct = vec![0.0f64; 64];
        for nu in 0..64 {
            let model = CarlesonModel::new(cfg, LinearizingFunction::constant(6, nu).unwrap()).unwrap();
            let t = model.apply_full(&f).unwrap();
            for (d, v) in direct.iter_mut().zip(t.values()) {
                *d = d.max(v.norm());
            }
        }
        let linear = CarlesonModel::new(cfg, n).unwrap().apply_full(&f).unwrap();
        let at_arg = CarlesonModel::new(cfg, arg).unwrap().apply_full(&f).unwrap();
        for x in 0..64 {
            assert!((sup.values()[x].re - direct[x]).abs() < 1e-12);
            assert!(linear.values()[x].norm() <= sup.values()[x].re + 1e-12);
            assert!((at_arg.values()[x].norm() - sup.values()[x].re).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_examples() {
        assert_eq!(eta_profile(3.0), 1.0);
        assert_eq!(eta_profile(8.0), 0.0);
        assert_eq!(eta_profile(6.0), 0.5);
        assert_eq!(eta_profile(4.0), 1.0);
        let samples: Vec<f64> = (0..=400).map(|i| eta_profile(4.0 + i as f64 / 100.0)).collect();
        assert!(samples.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn psi_examples() {
        assert!((psi(3.0, 0) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(psi(1.0, 0), 0.0);
        assert!((psi(-3.0, 0) + 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(psi(0.0, 4), 0.0);
        // 2^k ψ(2^k y): at k=2, y=3/4 the rescaled argument is 3.
        assert!((psi(0.75, 2) - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn truncated_kernel_examples() {
        let cfg = KernelConfig::new(40, 0, 40).unwrap();
        assert_eq!(truncated_kernel(0.25, &cfg).unwrap(), 4.0);
        assert_eq!(truncated_kernel(1.0 / 16.0, &cfg).unwrap(), 16.0);
        assert_eq!(truncated_kernel(-0.125, &cfg).unwrap(), -8.0);
        assert!(truncated_kernel(0.0, &cfg).is_err());
    }

    #[test]
    fn default_scales() {
        let c = KernelConfig::default_for(10);
        assert_eq!((c.k_min, c.k_max), (3, 7));
        let c = KernelConfig::default_for(4);
        assert!(c.k_min <= c.k_max && c.k_max <= 4);
    }

    #[test]
    fn scale_kernel_support() {
        let sk = ScaleKernel::new(10, 4);
        let h = pow2_neg(10);
        for &(j, _) in &sk.taps {
            let y = (j as f64 * h).abs();
            assert!(y > 2.0 / 16.0 && y < 8.0 / 16.0);
        }
        assert!(ScaleKernel::new(10, 2).taps.is_empty());
    }

    #[test]
    fn delta_response() {
        let k_res = 8;
        let cfg = KernelConfig::new(k_res, 3, 5).unwrap();
        let n = LinearizingFunction::constant(k_res, 0).unwrap();
        let model = CarlesonModel::new(cfg, n).unwrap();
        let f = GridFunction::from_fn(k_res, |m| Complex64::new(if m == 0 { 1.0 } else { 0.0 }, 0.0));
        let out = model.apply_scale(&f, 4).unwrap();
        let h = pow2_neg(k_res);
        for m in [40usize, 64, 100, 200] {
            let y = if m > 128 { m as f64 * h - 1.0 } else { m as f64 * h };
            let expect = h * psi(y, 4);
            assert!((out.values()[m].re - expect).abs() < 1e-15, "m={m}");
            assert_eq!(out.values()[m].im, 0.0);
        }
        assert_eq!(out.values()[10].re, 0.0);
    }

    #[test]
    fn coarse_scales_vanish() {
        let cfg = KernelConfig::new(8, 0, 5).unwrap();
        let n = LinearizingFunction::constant(8, 7).unwrap();
        let model = CarlesonModel::new(cfg, n).unwrap();
        let f = GridFunction::from_fn(8, |m| Complex64::new((m % 7) as f64, 1.0));
        for k in 0..=2 {
            assert!(model.apply_scale(&f, k).unwrap().is_zero());
        }
        assert!(model.apply_scale(&f, 6).is_err());
    }
}
