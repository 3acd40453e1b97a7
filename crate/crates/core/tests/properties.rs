use carleson_core::harness::{FSpec, NSpec};
use carleson_core::mass::MassEngine;
use carleson_core::tile::mass as tile_mass;
use carleson_core::{
    decreasing_rearrangement, dyadic_maximal, lp_norm, orlicz_norm, stopping_intervals, tile_leq, tile_lt,
    weak_quasinorm, Analysis, CarlesonModel, Complex64, DyadicInterval, GridFunction, KernelConfig,
    LinearizingFunction, MassConfig, PhiProfile, Tile, TileSet, TorusSet,
};
use proptest::prelude::*;

const K: u32 = 6;
const LEN: usize = 1 << K;

fn real_fn() -> impl Strategy<Value = GridFunction> {
    prop::collection::vec(-4.0f64..4.0, LEN).prop_map(|v| GridFunction::from_real(K, v).unwrap())
}

fn complex_fn() -> impl Strategy<Value = GridFunction> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), LEN)
        .prop_map(|v| GridFunction::new(K, v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()).unwrap())
}

fn linearizing() -> impl Strategy<Value = LinearizingFunction> {
    prop::collection::vec(0..LEN as u64, LEN).prop_map(|v| LinearizingFunction::new(K, v).unwrap())
}

fn tile() -> impl Strategy<Value = Tile> {
    (0..=K).prop_flat_map(|k| (Just(k), 0..1u64 << k, 0..1u64 << (K - k))).prop_map(|(k, j, m)| Tile { k, j, m })
}

fn permutation() -> impl Strategy<Value = Vec<usize>> {
    Just((0..LEN).collect::<Vec<_>>()).prop_shuffle()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rearrangement_invariance(f in real_fn(), perm in permutation()) {
        let g = GridFunction::new(K, perm.iter().map(|&i| f.values()[i]).collect()).unwrap();
        let fs = decreasing_rearrangement(&f);
        let gs = decreasing_rearrangement(&g);
        prop_assert!(fs.sup_distance(&gs) == 0.0);
        for p in [1.0, 1.5, 2.0, 3.0] {
            prop_assert!(close(lp_norm(&f, p), lp_norm(&g, p)));
        }
        prop_assert!(close(weak_quasinorm(&f), weak_quasinorm(&g)));
        for phi in PhiProfile::ALL {
            prop_assert!(close(orlicz_norm(&f, phi), orlicz_norm(&g, phi)));
        }
    }

    #[test]
    fn rearrangement_is_nonincreasing(f in real_fn()) {
        let v = decreasing_rearrangement(&f).abs_values();
        prop_assert!(v.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn weak_below_l1(f in real_fn()) {
        prop_assert!(weak_quasinorm(&f) <= lp_norm(&f, 1.0) * (1.0 + 1e-12));
    }

    #[test]
    fn maximal_dominates_and_stops(f in real_fn(), alpha in -3i32..4) {
        let mf = dyadic_maximal(&f).abs_values();
        for (m, v) in mf.iter().zip(f.abs_values()) {
            prop_assert!(*m >= v * (1.0 - 1e-12));
        }
        let t = (-(alpha as f64)).exp2();
        let level: Vec<bool> = mf.iter().map(|&m| m > t).collect();
        let js = stopping_intervals(&f, alpha);
        prop_assert_eq!(TorusSet::from_dyadic(js.iter()).to_cell_mask(K), level);
        for (a, b) in js.iter().zip(js.iter().skip(1)) {
            prop_assert!(!a.intersects(b));
        }
    }

    #[test]
    fn dyadic_structure(scale in 1u32..=K, index in 0u64..64) {
        let d = DyadicInterval::new(scale, index % (1 << scale)).unwrap();
        let p = d.parent().unwrap();
        prop_assert!(p.contains(&d));
        prop_assert!(d.children().iter().all(|c| d.contains(c) && c.length() * 2.0 == d.length()));
        prop_assert_eq!(d.ancestor(scale - 1), p);
        prop_assert_eq!(d.cell_range(K).len(), 1 << (K - scale));
        prop_assert!(d.as_set().contains_dyadic(&d));
    }

    #[test]
    fn torus_sets(a in prop::collection::vec(any::<bool>(), LEN), b in prop::collection::vec(any::<bool>(), LEN)) {
        let sa = TorusSet::from_cell_mask(&a, K);
        let sb = TorusSet::from_cell_mask(&b, K);
        prop_assert_eq!(sa.to_cell_mask(K), a.clone());
        let u = sa.union(&sb);
        let i = sa.intersection(&sb);
        prop_assert!(close(u.measure() + i.measure(), sa.measure() + sb.measure()));
        prop_assert!(i.is_subset(&sa) && sa.is_subset(&u));
        prop_assert!(sa.is_subset(&sa.dilate(3.0)));
    }

    #[test]
    fn tile_order(p in tile(), q in tile(), r in tile()) {
        prop_assert!(tile_leq(&p, &p) && !tile_lt(&p, &p));
        if tile_leq(&p, &q) && tile_leq(&q, &p) {
            prop_assert_eq!(p, q);
        }
        if tile_leq(&p, &q) && tile_leq(&q, &r) {
            prop_assert!(tile_leq(&p, &r));
        }
        // tiles with the same scale and intersecting time are disjoint in frequency or equal
        if p.k == q.k && p.j == q.j && p != q {
            prop_assert!(p.m != q.m);
        }
    }

    #[test]
    fn csv_round_trip(f in complex_fn(), n in linearizing()) {
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        prop_assert_eq!(GridFunction::read_csv(&buf[..]).unwrap(), f);
        buf.clear();
        n.write_csv(&mut buf).unwrap();
        prop_assert_eq!(LinearizingFunction::read_csv(&buf[..]).unwrap(), n);
    }

    #[test]
    fn mass_engine_matches_enumeration(n in linearizing(), picks in prop::collection::vec(any::<bool>(), 7 * LEN), p in tile()) {
        let lat = KernelConfig::new(K, 0, K).unwrap().lattice();
        let pool: TileSet = lat.tiles().zip(&picks).filter(|(_, &b)| b).map(|(t, _)| t).collect();
        let flags: Vec<bool> = lat.tiles().map(|t| pool.contains(&t)).collect();
        let engine = MassEngine::new(lat.clone(), &n, 10);
        let region = carleson_core::mass::CellRegion::full(K);
        let fast = engine.mass(&p, &flags, &region);
        let slow = tile_mass(&p, &pool, &TorusSet::full(), &n, 10).unwrap();
        prop_assert!(close(fast, slow));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn partition_and_adjoint(f in complex_fn(), g in complex_fn(), n in linearizing(), keep in prop::collection::vec(any::<bool>(), 7 * LEN)) {
        let model = CarlesonModel::new(KernelConfig::new(K, 0, K).unwrap(), n).unwrap();
        let s: TileSet = model.lattice().tiles().zip(&keep).filter(|(_, &b)| b).map(|(t, _)| t).collect();
        let rest = model.lattice().family().difference(&s);
        let whole = model.apply_full(&f).unwrap();
        let split = model.apply_tileset(&f, &s).unwrap().add(&model.apply_tileset(&f, &rest).unwrap());
        prop_assert!(whole.sup_distance(&split) <= 1e-12);
        let lhs = model.apply_tileset(&f, &s).unwrap().inner(&g);
        let rhs = f.inner(&model.apply_tileset_adjoint(&g, &s).unwrap());
        prop_assert!((lhs - rhs).norm() <= 1e-12);
    }

    #[test]
    fn analysis_invariants(seed in 0u64..1000, fi in 0usize..4, ni in 0usize..3) {
        let fs = ["indicator:0.25", "random_step:16,6", "levels:1=0.125,3=0.03125", "constant:1"];
        let ns = ["chirp", "random_piecewise:8", "constant:5"];
        let f: FSpec = fs[fi].parse().unwrap();
        let n: NSpec = ns[ni].parse().unwrap();
        prop_assert_eq!(f.to_string().parse::<FSpec>().unwrap(), f.clone());
        prop_assert_eq!(n.to_string().parse::<NSpec>().unwrap(), n.clone());
        let model = CarlesonModel::new(KernelConfig::new(K, 1, K - 1).unwrap(), n.generate(K, seed).unwrap()).unwrap();
        let an = Analysis::new(model, f.generate(K, seed).unwrap(), f.to_string(), &MassConfig::default_for(K), 4.0).unwrap();
        // levels and the discard partition the family
        let assigned: usize = an.mass.levels.values().map(TileSet::len).sum();
        prop_assert_eq!(assigned + an.mass.discard.len(), an.family.len());
        // classes partition each level
        for (n, dec) in &an.cz {
            let total: usize = dec.classes.values().map(TileSet::len).sum();
            prop_assert_eq!(total, an.mass.levels[n].len());
            prop_assert!(dec.unassigned.is_empty());
        }
        // forests cover each class
        for (&(n, alpha), forests) in &an.forests {
            let covered: usize = forests.iter().map(|f| f.tiles().count()).sum();
            prop_assert_eq!(covered, an.cz[&n].classes[&alpha].len());
        }
        let mut sum = GridFunction::zeros(K);
        for g in an.by_level.values() {
            sum = sum.add(g);
        }
        prop_assert!(sum.sup_distance(&an.tf) <= 1e-12);
    }
}
