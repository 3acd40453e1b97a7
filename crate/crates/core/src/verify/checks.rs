use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

use super::analysis::{Analysis, TreeEval};
use super::constants::PassConstants;
use super::record::{Bound, CheckRecord, Context};
use super::stats::{ls_slope, mann_kendall, normal_critical};
use crate::cz::{capture, cz_decompose, shadow_intervals};
use crate::dyadic::{pow2, pow2_neg, TorusSet};
use crate::error::{Error, Result};
use crate::forest::{is_bmo_forest, is_linf_forest, is_tree};
use crate::grid::{lp_norm, weak_quasinorm, DyadicAverages, GridFunction};
use crate::kernel::CarlesonModel;
use crate::mass::CellRegion;
use crate::spaces::{level_sets, llog2_levels, orlicz_norm, qa_upper_best, sjolin_modular, soria_norms, PhiProfile};
use crate::tile::{counting_cells, Tile};

fn l1(g: &GridFunction) -> f64 {
    lp_norm(g, 1.0)
}

fn l1_on(g: &GridFunction, mask: &[bool]) -> f64 {
    g.abs_integral_on(mask)
}

fn nonzero_set(g: &GridFunction) -> TorusSet {
    let mask: Vec<bool> = g.values().iter().map(|v| *v != Complex64::new(0.0, 0.0)).collect();
    TorusSet::from_cell_mask(&mask, g.resolution())
}

/// Largest ratio among `(lhs, rhs, tree)` triples as one record.
fn worst(
    name: &str,
    items: impl Iterator<Item = (f64, f64, usize)>,
    pc: &PassConstants,
    bound: Bound,
    ctx: Context,
) -> Option<CheckRecord> {
    let mut best: Option<CheckRecord> = None;
    for (lhs, rhs, tree) in items {
        let rec = CheckRecord::with_bound(name, lhs, rhs, pc.limit(name), bound, ctx.clone().with_tree(tree));
        if best.as_ref().map_or(true, |b| rec.ratio > b.ratio || (!rec.pass && b.pass)) {
            best = Some(rec);
        }
    }
    best
}

/// `Σ_{n,α} T^{P_n^α} f + T^{P_∞} f` against `T f`.
pub fn check_partition(an: &Analysis, pc: &PassConstants) -> Vec<CheckRecord> {
    let mut sum = GridFunction::zeros(an.resolution());
    for g in an.by_level.values() {
        sum = sum.add(g);
    }
    let err = sum.sup_distance(&an.tf);
    vec![CheckRecord::new("partition.operator", err, 1.0, pc.limit("partition.operator"), Context::function(&an.f_label))]
}

/// Recomputes the mass of every assigned tile against its level's pool and layer.
pub fn check_mass_window(an: &Analysis, pc: &PassConstants) -> Vec<CheckRecord> {
    let Some(lat) = an.mass.lattice().copied() else {
        return Vec::new();
    };
    let resolution = lat.resolution;
    let mut pool = vec![false; lat.len()];
    for t in &an.family {
        pool[lat.id(t)] = true;
    }
    let mut out = Vec::new();
    for (&n, tiles) in &an.mass.levels {
        let layers = &an.mass.layers[&n];
        let regions: Vec<CellRegion> = layers
            .iter()
            .map(|l| CellRegion::from_mask(resolution, l.region.to_cell_mask(resolution)))
            .collect();
        let lo = pow2_neg(n);
        let hi = 2.0 * lo;
        let mut bad = 0;
        for t in tiles {
            let a = an.mass.assignment(t).expect("assigned tile");
            let region = &regions[a.layer as usize];
            let deeper = regions.iter().rposition(|r| r.contains(&t.time()));
            let m = an.engine.mass(t, &pool, region);
            if !(m >= lo && m < hi) || deeper != Some(a.layer as usize) {
                bad += 1;
            }
        }
        out.push(CheckRecord::violations("mass.window", bad, Context::level(n)));
        for t in tiles {
            pool[lat.id(t)] = false;
        }
    }
    let _ = pc;
    out
}

/// Tree, L∞-forest and BMO-forest predicates on the forests of every class.
pub fn check_forests(an: &Analysis, pc: &PassConstants) -> Vec<CheckRecord> {
    let _ = pc;
    let mut out = Vec::new();
    for (&(n, alpha), forests) in &an.forests {
        let class = &an.cz[&n].classes[&alpha];
        let mut linf_bad = 0;
        let mut bmo_bad = 0;
        let mut trees = Vec::new();
        for forest in forests {
            if is_bmo_forest(&forest.groups, n, an.c_forest).is_err() {
                bmo_bad += 1;
            }
            for group in &forest.groups {
                if is_linf_forest(&group.trees, n, an.c_forest).is_err() {
                    linf_bad += 1;
                }
                trees.extend(group.trees.iter());
            }
        }
        // each tree against the tiles not taken by trees with an earlier top
        trees.sort_by_key(|t| t.top);
        let mut residual = class.clone();
        let mut tree_bad = 0;
        let mut covered = 0;
        for tree in trees {
            covered += tree.tiles.len();
            tree_bad += tree.tiles.iter().filter(|t| !residual.contains(t)).count();
            if is_tree(&tree.tiles, &tree.top, &residual).is_err() {
                tree_bad += 1;
            }
            residual = residual.difference(&tree.tiles);
        }
        tree_bad += covered.abs_diff(class.len());
        let ctx = Context::class(n, alpha);
        out.push(CheckRecord::violations("forest.tree", tree_bad, ctx.clone()));
        out.push(CheckRecord::violations("forest.linf", linf_bad, ctx.clone()));
        out.push(CheckRecord::violations("forest.bmo", bmo_bad, ctx));
    }
    out
}

/// Structural properties of the `α` classes.
pub fn check_cz(an: &Analysis, pc: &PassConstants) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    if an.f.is_zero() {
        return Ok(out);
    }
    let resolution = an.resolution();
    let avgs = DyadicAverages::new(&an.f);
    for (&n, dec) in &an.cz {
        out.push(CheckRecord::violations("cz.unassigned", dec.unassigned.len(), Context::level(n)));
        for (&alpha, class) in &dec.classes {
            if class.is_empty() {
                continue;
            }
            let ctx = Context::class(n, alpha);
            let tiles: Vec<Tile> = class.iter().copied().collect();
            let mut prev = dec.stopping.get(&(alpha - 1)).cloned().unwrap_or_default();
            let caught = capture(&tiles, &mut prev, resolution).len();
            out.push(CheckRecord::violations("cz.dichotomy", caught, ctx.clone()));

            let allowed = dec.level_set(alpha).dilate(100.0);
            let outside = tiles.iter().filter(|t| !allowed.contains_dyadic(&t.time())).count();
            out.push(CheckRecord::violations("cz.support", outside, ctx.clone()));

            let cap = pow2(-alpha + 10);
            let shadow_max = tiles
                .iter()
                .flat_map(shadow_intervals)
                .map(|d| avgs.average(&d))
                .fold(0.0, f64::max);
            out.push(CheckRecord::with_bound(
                "cz.suppPstar",
                shadow_max,
                cap,
                pc.limit("cz.suppPstar"),
                Bound::Below,
                ctx,
            ));
        }
        out.push(CheckRecord::violations("cz.convexity", convexity_violations(an, n)?, Context::level(n)));
    }
    Ok(out)
}

/// Number of `P_2 ∈ P_n` lying strictly between two tiles of one class
/// `P_n^α` without belonging to it.
pub fn convexity_violations(an: &Analysis, n: u32) -> Result<usize> {
    let Some(dec) = an.cz.get(&n) else {
        return Ok(0);
    };
    let lat = an.model.lattice();
    let span = (dec.alpha_hi - dec.alpha_lo + 1) as usize;
    if span > 128 {
        return Err(Error::InvalidArgument(format!("{span} classes exceed the convexity bitset")));
    }
    let mut bit = vec![0u128; lat.len()];
    let mut member = vec![false; lat.len()];
    for (&alpha, class) in &dec.classes {
        for t in class {
            bit[lat.id(t)] = 1u128 << (alpha - dec.alpha_lo);
        }
    }
    if let Some(p_n) = an.mass.levels.get(&n) {
        for t in p_n {
            member[lat.id(t)] = true;
        }
    }
    let mut below = vec![0u128; lat.len()];
    for k in (lat.k_min..lat.k_max).rev() {
        for t in lat.tiles().filter(|t| t.k == k) {
            let id = lat.id(&t);
            let mut acc = 0u128;
            for c in [2 * t.j, 2 * t.j + 1] {
                let cid = lat.id(&Tile { k: k + 1, j: c, m: t.m >> 1 });
                acc |= bit[cid] | below[cid];
            }
            below[id] = acc;
        }
    }
    let mut above = vec![0u128; lat.len()];
    let mut bad = 0;
    for k in lat.k_min..=lat.k_max {
        for t in lat.tiles().filter(|t| t.k == k) {
            let id = lat.id(&t);
            if k > lat.k_min {
                let mut acc = 0u128;
                for m in [2 * t.m, 2 * t.m + 1] {
                    let pid = lat.id(&Tile { k: k - 1, j: t.j >> 1, m });
                    acc |= bit[pid] | above[pid];
                }
                above[id] = acc;
            }
            if member[id] && (below[id] & above[id] & !bit[id]) != 0 {
                bad += 1;
            }
        }
    }
    Ok(bad)
}

/// Support containment and the `L^1` bound per class, and the `L log L` aggregate.
pub fn check_theorem_a(an: &Analysis, pc: &PassConstants) -> Vec<CheckRecord> {
    let mut out = Vec::new();
    let resolution = an.resolution();
    let llogl = orlicz_norm(&an.f, PhiProfile::Log);
    let mut per_level: BTreeMap<u32, f64> = BTreeMap::new();
    for (&(n, alpha), g) in &an.by_class {
        let ctx = Context::class(n, alpha);
        let level_set = an.cz[&n].level_set(alpha);
        let allowed = level_set.dilate(100.0);
        let support_ok = nonzero_set(g).is_subset(&allowed);
        out.push(CheckRecord::violations("a.support", (!support_ok) as usize, ctx.clone()));
        let norm = l1(g);
        *per_level.entry(n).or_default() += norm;
        out.push(CheckRecord::new(
            "a.main",
            norm,
            pow2(-alpha) * level_set.measure(),
            pc.limit("a.main"),
            ctx.clone(),
        ));
        let mut tops_all = Vec::new();
        let mut linf = 0u32;
        for forest in an.forests.get(&(n, alpha)).into_iter().flatten() {
            for group in &forest.groups {
                let tops: Vec<_> = group.trees.iter().map(|t| t.top_interval()).collect();
                linf = linf.max(counting_cells(&tops, resolution).into_iter().max().unwrap_or(0));
                tops_all.extend(tops);
            }
        }
        out.push(CheckRecord::new(
            "a.counting_linf",
            linf as f64,
            pow2(n as i32),
            pc.limit("a.counting_linf"),
            ctx.clone(),
        ));
        let counts = counting_cells(&tops_all, resolution);
        let w = pow2_neg(resolution);
        let n_l1 = counts.iter().map(|&c| c as f64).sum::<f64>() * w;
        let union = counts.iter().filter(|&&c| c > 0).count() as f64 * w;
        out.push(CheckRecord::new(
            "a.counting_l1",
            n_l1,
            pow2(n as i32) * union,
            pc.limit("a.counting_l1"),
            ctx,
        ));
    }
    for (n, total) in per_level {
        out.push(CheckRecord::new("a.llogl", total, llogl, pc.limit("a.llogl"), Context::level(n)));
    }
    out
}

/// Tree estimates, worst tree per class.
pub fn check_trees(an: &Analysis, evals: &[TreeEval], pc: &PassConstants) -> Vec<CheckRecord> {
    let w = an.f.cell_width();
    let mut grouped: BTreeMap<(u32, i32), Vec<&TreeEval>> = BTreeMap::new();
    for e in evals {
        grouped.entry((e.n, e.alpha)).or_default().push(e);
    }
    let mut out = Vec::new();
    for ((n, alpha), es) in grouped {
        let ctx = Context::class(n, alpha);
        let wn = pow2_neg(n);
        let wa = pow2(-alpha);
        let items: [(&str, Bound, Box<dyn Fn(&TreeEval) -> (f64, f64)>); 7] = [
            ("tree.l1", Bound::AtMost, Box::new(|e| (e.l1(w), wn * wa * e.top_len()))),
            ("tree.carleson", Bound::AtMost, Box::new(|e| (e.e_measure, wn * e.top_len()))),
            ("tree.split", Bound::AtMost, Box::new(|e| (e.split_error, 1.0))),
            ("tree.linfproj", Bound::Below, Box::new(|e| (e.proj_sup, wa))),
            ("tree.cz", Bound::Below, Box::new(|e| (e.cz_max, pow2(-alpha + 10)))),
            ("tree.t1", Bound::AtMost, Box::new(|e| (e.t1_l1, wn * e.f_on_top))),
            ("tree.t2", Bound::AtMost, Box::new(|e| (e.t2_l1, wn * wa * e.top_len()))),
        ];
        for (name, bound, measure) in items.iter() {
            let rec = worst(
                name,
                es.iter().map(|e| {
                    let (l, r) = measure(e);
                    (l, r, e.index)
                }),
                pc,
                *bound,
                ctx.clone(),
            );
            out.extend(rec);
        }
        let refinements: usize = es.iter().map(|e| e.refinements).sum();
        out.push(CheckRecord::violations("tree.refinements", refinements, ctx));
    }
    out
}

/// `G' = {x ∈ G : Mf(x) ≤ C ‖f‖_1/|G|}` as a cell mask.
pub fn g_prime(f: &GridFunction, g: &TorusSet, c_g: f64) -> Result<Vec<bool>> {
    let measure = g.measure();
    if !(measure > 0.0) {
        return Err(Error::Precondition("G must have positive measure".into()));
    }
    let lambda = c_g * l1(f) / measure;
    let mf = DyadicAverages::new(f).maximal();
    let g_mask = g.to_cell_mask(f.resolution());
    Ok(g_mask.iter().zip(&mf).map(|(&inside, &m)| inside && m <= lambda).collect())
}

/// Uniform weak-type estimates on `G'`.
pub fn check_theorem_b(
    an: &Analysis,
    evals: &[TreeEval],
    g: &TorusSet,
    c_g: f64,
    pc: &PassConstants,
) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    let gp = g_prime(&an.f, g, c_g)?;
    let w = an.f.cell_width();
    let gp_measure = gp.iter().filter(|&&b| b).count() as f64 * w;
    let g_measure = g.measure();
    out.push(CheckRecord::with_bound(
        "b.gprime",
        g_measure / 2.0,
        gp_measure,
        pc.limit("b.gprime"),
        Bound::Below,
        Context::none().with_note(format!("C_G={c_g}")),
    ));
    let f1 = l1(&an.f);
    let lambda = c_g * f1 / g_measure;
    let mut series = Vec::new();
    for (n, tpn) in an.by_level.iter().filter_map(|(n, g)| n.map(|n| (n, g))) {
        let lhs = l1_on(tpn, &gp);
        series.push(crate::verify::record::ratio(lhs, f1));
        out.push(CheckRecord::new("b.lweak1", lhs, f1, pc.limit("b.lweak1"), Context::level(n)));
        out.push(CheckRecord::new("b.weak", weak_quasinorm(tpn), f1, pc.limit("b.weak"), Context::level(n)));
    }
    let mk = mann_kendall(&series);
    let zc = normal_critical(0.05);
    out.push(CheckRecord::new(
        "b.trend",
        mk.z.max(0.0),
        zc,
        pc.limit("b.trend"),
        Context::none().with_note(format!("S={} p={:.4}", mk.s, mk.p_value)),
    ));
    for (&(n, alpha), tpna) in &an.by_class {
        let k = (lambda * pow2(alpha)).log2().round() as i32;
        out.push(CheckRecord::new(
            "b.kdecay",
            l1_on(tpna, &gp),
            pow2(-k).sqrt() * f1,
            pc.limit("b.kdecay"),
            Context::class(n, alpha).with_note(format!("k={k}")),
        ));
    }
    let mut grouped: BTreeMap<(u32, i32), Vec<(f64, f64, usize)>> = BTreeMap::new();
    for e in evals {
        let lhs: f64 = e.tpf.iter().filter(|(x, _)| gp[*x]).map(|(_, v)| v.norm()).sum::<f64>() * w;
        let e_gp = e.tpf.iter().filter(|(x, _)| gp[*x]).count() as f64 * w;
        let rhs = pow2(-e.alpha) * e_gp.sqrt() * pow2_neg(e.n).sqrt() * e.top_len().sqrt();
        grouped.entry((e.n, e.alpha)).or_default().push((lhs, rhs, e.index));
    }
    for ((n, alpha), items) in grouped {
        out.extend(worst("b.essential", items.into_iter(), pc, Bound::AtMost, Context::class(n, alpha)));
    }
    Ok(out)
}

/// `L^2` decay normalized by `n^2 2^{-n/2}`, `L^p` ratios, and the fitted decay slope.
pub fn check_theorem_c(an: &Analysis, ps: &[f64], pc: &PassConstants) -> Vec<CheckRecord> {
    let mut out = Vec::new();
    let f2 = lp_norm(&an.f, 2.0);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (n, tpn) in an.by_level.iter().filter_map(|(n, g)| n.map(|n| (n, g))) {
        let norm = lp_norm(tpn, 2.0);
        let weight = (n.max(1) as f64).powi(2) * pow2(-(n as i32)).sqrt();
        out.push(CheckRecord::new("c.l2decay", norm, weight * f2, pc.limit("c.l2decay"), Context::level(n)));
        if norm > 0.0 {
            xs.push(n as f64);
            ys.push(norm.log2());
        }
        for &p in ps {
            out.push(CheckRecord::new(
                "c.lp",
                lp_norm(tpn, p),
                lp_norm(&an.f, p),
                pc.limit("c.lp"),
                Context::level(n).with_note(format!("p={p}")),
            ));
        }
    }
    let rec = match ls_slope(&xs, &ys) {
        Some(s) => CheckRecord::new("c.slope", s.exp2(), 1.0, pc.limit("c.slope"), Context::none().with_note(format!("slope={s:.6}"))),
        None => CheckRecord::new("c.slope", 0.0, 0.0, pc.limit("c.slope"), Context::none().with_note("degenerate")),
    };
    out.push(rec);
    out
}

/// `‖Tf‖_{1,∞} / (‖f‖_1 log(e‖f‖_p/‖f‖_1))` for the full operator.
pub fn check_theorem_d(an: &Analysis, p: f64, pc: &PassConstants) -> Vec<CheckRecord> {
    let ctx = Context::function(&an.f_label).with_note(format!("p={p}"));
    if an.f.is_zero() {
        return vec![CheckRecord::new("d.weak", 0.0, 0.0, pc.limit("d.weak"), ctx)];
    }
    let f1 = l1(&an.f);
    let rhs = f1 * (std::f64::consts::E * lp_norm(&an.f, p) / f1).ln();
    vec![CheckRecord::new("d.weak", weak_quasinorm(&an.tf), rhs, pc.limit("d.weak"), ctx)]
}

/// Corollary ratios over a list of test functions, for the maximal operator
/// `sup_N |T_N f|`.
pub fn check_corollaries(
    model: &CarlesonModel,
    functions: &[(String, GridFunction)],
    pc: &PassConstants,
) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    for (label, f) in functions {
        if f.is_zero() {
            continue;
        }
        let (tf, _) = model.maximal(f)?;
        let weak = weak_quasinorm(&tf);
        let ctx = Context::function(label.clone());
        for p in [1.5, 2.0, 3.0] {
            out.push(CheckRecord::new(
                "cor1",
                lp_norm(&tf, p),
                lp_norm(f, p),
                pc.limit("cor1"),
                ctx.clone().with_note(format!("p={p}")),
            ));
        }
        out.push(CheckRecord::new("cor2", l1(&tf), llog2_levels(f), pc.limit("cor2"), ctx.clone()));
        out.push(CheckRecord::new("cor4", weak, orlicz_norm(f, PhiProfile::LogLog), pc.limit("cor4"), ctx.clone()));
        let (qa, strategy) = qa_upper_best(f, f64::INFINITY)?;
        out.push(CheckRecord::new(
            "cor5",
            weak,
            qa,
            pc.limit("cor5"),
            ctx.clone().with_note(format!("strategy={}", strategy.name())),
        ));
        out.push(CheckRecord::new("cor7", weak, orlicz_norm(f, PhiProfile::LogLogLog), pc.limit("cor7"), ctx.clone()));
        let (_, soria_star) = soria_norms(f)?;
        out.push(CheckRecord::new("cor6", weak, soria_star, pc.limit("cor6"), ctx));
    }
    Ok(out)
}

/// `‖sup_N |T_N χ_E|‖_{1,∞} / (|E| log(e/|E|))` over a sweep of sets, and the spread of
/// the ratio across the sweep.
pub fn check_indicator_sweep(
    model: &CarlesonModel,
    sets: &[(String, GridFunction)],
    pc: &PassConstants,
) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    let mut ratios = Vec::new();
    for (label, chi) in sets {
        let measure = l1(chi);
        if measure == 0.0 {
            continue;
        }
        let (tf, _) = model.maximal(chi)?;
        let rec = CheckRecord::new(
            "cor3",
            weak_quasinorm(&tf),
            measure * (std::f64::consts::E / measure).ln(),
            pc.limit("cor3"),
            Context::function(label.clone()),
        );
        ratios.push(rec.ratio);
        out.push(rec);
    }
    if !ratios.is_empty() {
        let hi = ratios.iter().copied().fold(0.0, f64::max);
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        out.push(CheckRecord::with_bound(
            "cor3.spread",
            hi,
            lo,
            pc.limit("cor3.spread"),
            Bound::Below,
            Context::none().with_note(format!("sets={}", ratios.len())),
        ));
    }
    Ok(out)
}

/// The excised set `A` for the part of `f` above 8 and the `L^1(A^c)` bound.
pub fn check_sjolin_split(an: &Analysis, c: f64, pc: &PassConstants) -> Result<Vec<CheckRecord>> {
    let resolution = an.resolution();
    let levels = level_sets(&an.f);
    let big: Vec<(i32, Vec<usize>)> = levels.into_iter().filter(|(l, _)| *l > 2).collect();
    let mut vals = vec![Complex64::new(0.0, 0.0); an.f.len()];
    for (_, cells) in &big {
        for &m in cells {
            vals[m] = an.f.values()[m];
        }
    }
    let f_big = GridFunction::new(resolution, vals)?;
    let norm = sjolin_modular(&f_big);
    let ctx = Context::function(&an.f_label);
    if f_big.is_zero() {
        return Ok(vec![CheckRecord::new("sjolin.hypothesis", 0.0, 1.0, None, ctx.with_note("vacuous"))]);
    }
    if norm >= 1.0 {
        return Ok(vec![CheckRecord::new(
            "sjolin.hypothesis",
            norm,
            1.0,
            None,
            ctx.with_note("modular >= 1, split skipped"),
        )]);
    }
    let gamma = c * norm.powf(2.0 / 3.0);
    let mut excised = vec![false; f_big.len()];
    for (l, cells) in &big {
        let mut chi = vec![0.0; f_big.len()];
        for &m in cells {
            chi[m] = 1.0;
        }
        let chi = GridFunction::from_real(resolution, chi)?;
        // α ∈ C_l  ⇔  2^{-α} ≥ γ 2^{-l}
        for (_, p_n) in an.mass.nonempty_levels() {
            let dec = cz_decompose(p_n, &chi)?;
            for (&alpha, class) in &dec.classes {
                if pow2(-alpha) >= gamma * pow2(-l) {
                    for t in class {
                        for x in t.cells(resolution) {
                            excised[x] = true;
                        }
                    }
                }
            }
        }
    }
    let w = f_big.cell_width();
    let a_measure = excised.iter().filter(|&&b| b).count() as f64 * w;
    let complement: Vec<bool> = excised.iter().map(|b| !b).collect();
    let tf = an.model.apply_full(&f_big)?;
    Ok(vec![
        CheckRecord::new("sjolin.hypothesis", norm, 1.0, None, ctx.clone().with_note(format!("gamma={gamma:.6e}"))),
        CheckRecord::new("sjolin.excised", a_measure, norm.powf(1.0 / 3.0), pc.limit("sjolin.excised"), ctx.clone()),
        CheckRecord::new("sjolin.bound", l1_on(&tf, &complement), norm.sqrt(), pc.limit("sjolin.bound"), ctx),
    ])
}

/// `‖T^{P^α} f‖_1 / ‖f‖_1` with `P^α = ∪_n P_n^α`.
pub fn probe_open_question(an: &Analysis, pc: &PassConstants) -> Vec<CheckRecord> {
    let f1 = l1(&an.f);
    let mut per_alpha: BTreeMap<i32, GridFunction> = BTreeMap::new();
    for (&(_, alpha), g) in &an.by_class {
        let acc = per_alpha.entry(alpha).or_insert_with(|| GridFunction::zeros(an.resolution()));
        *acc = acc.add(g);
    }
    per_alpha
        .into_iter()
        .map(|(alpha, g)| CheckRecord::new("oq.alpha", l1(&g), f1, pc.limit("oq.alpha"), Context::alpha(alpha)))
        .collect()
}

/// `|⟨T^{P_n} χ_Q, g⟩ - ⟨χ_Q, (T^{P_n})^* g⟩|` for a random `Q` and `g`.
pub fn check_duality(an: &Analysis, seed: u64, pc: &PassConstants) -> Result<Vec<CheckRecord>> {
    let resolution = an.resolution();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(7);
    let len = an.f.len();
    let chi = GridFunction::from_real(resolution, (0..len).map(|_| if rng.gen_bool(0.25) { 1.0 } else { 0.0 }).collect())?;
    let g = GridFunction::new(
        resolution,
        (0..len).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect(),
    )?;
    let bank = an.model.bank(&chi)?;
    let lin = an.model.linearizing();
    let lat = an.model.lattice();
    let level_of: Vec<Option<u32>> = an.mass.level_table();
    let mut out = Vec::new();
    for (n, p_n) in an.mass.nonempty_levels() {
        let t_chi = bank.masked_sum(|k, x| level_of[lat.id(&lin.tile_at(k, x))] == Some(n));
        let adj = an.model.apply_tileset_adjoint(&g, p_n)?;
        let lhs = t_chi.inner(&g);
        let err = (lhs - chi.inner(&adj)).norm();
        out.push(CheckRecord::new("duality.qspot", err, 1.0, pc.limit("duality.qspot"), Context::level(n)));
    }
    Ok(out)
}
