use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparsedom::grid::{avg_p, orlicz_avg, CellSet, Cube, Grid, GridFunction, PowerYoung};
use sparsedom::maximal::{hl_maximal, CubeSweepPolicy};
use sparsedom::operators::{apply_restricted, dini_constant, hormander_constant, Kernel};
use sparsedom::sparse::{local_cz_decomposition, partition_cover};
use sparsedom::verify::{
    check_sparsity, random_sparse_family, sharp_vs_maximal, t1_testing_probe, wq_profile,
};

fn grid1(n: usize) -> Grid {
    Grid::new(1, n, 1.0).unwrap()
}

fn real_fn(grid: Grid, values: &[f64]) -> GridFunction {
    GridFunction::from_real(grid, values).unwrap()
}

fn window_set(grid: Grid) -> CellSet {
    CellSet::window(grid)
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4.0..4.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transform_is_linear(a in values(16), b in values(16), c in -3.0..3.0f64) {
        let g = grid1(16);
        let k = Kernel::hilbert();
        let w = window_set(g);
        let fa = real_fn(g, &a);
        let fb = real_fn(g, &b);
        let sum = fa.map(|x, v| v * c + fb.value(x));
        let ta = apply_restricted(&k, &fa, &w, &w).unwrap();
        let tb = apply_restricted(&k, &fb, &w, &w).unwrap();
        let ts = apply_restricted(&k, &sum, &w, &w).unwrap();
        for i in 0..16 {
            let want = ta.values()[i] * c + tb.values()[i];
            prop_assert!((ts.values()[i] - want).norm() <= 1e-9 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn source_splitting_is_additive(a in values(16), cut in 1i64..15) {
        let g = grid1(16);
        let k = Kernel::holder(0.5).unwrap();
        let f = real_fn(g, &a);
        let w = window_set(g);
        let left = CellSet::from_predicate(g, g.window_rect(), |x| x[0] < cut);
        let right = CellSet::from_predicate(g, g.window_rect(), |x| x[0] >= cut);
        let all = apply_restricted(&k, &f, &w, &w).unwrap();
        let l = apply_restricted(&k, &f, &w, &left).unwrap();
        let r = apply_restricted(&k, &f, &w, &right).unwrap();
        for i in 0..16 {
            prop_assert!((all.values()[i] - l.values()[i] - r.values()[i]).norm() <= 1e-9);
        }
    }

    #[test]
    fn transpose_pairing_is_symmetric(a in values(16), b in values(16)) {
        let g = grid1(16);
        let k = Kernel::dini_stress();
        let kt = k.transpose();
        let w = window_set(g);
        let fa = real_fn(g, &a);
        let fb = real_fn(g, &b);
        let ta = apply_restricted(&k, &fa, &w, &w).unwrap();
        let tb = apply_restricted(&kt, &fb, &w, &w).unwrap();
        let lhs: f64 = ta.values().iter().zip(&b).map(|(t, y)| t.re * y).sum();
        let rhs: f64 = tb.values().iter().zip(&a).map(|(t, x)| t.re * x).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn maximal_is_sublinear_and_homogeneous(a in values(16), b in values(16), c in 0.1..5.0f64, r in 1.0..3.0f64) {
        let g = grid1(16);
        let p = CubeSweepPolicy::default();
        let fa = real_fn(g, &a);
        let fb = real_fn(g, &b);
        let sum = fa.map(|x, v| v + fb.value(x));
        let ma = hl_maximal(&fa, r, &p).unwrap();
        let mb = hl_maximal(&fb, r, &p).unwrap();
        let ms = hl_maximal(&sum, r, &p).unwrap();
        let mc = hl_maximal(&fa.scaled(Complex64::new(c, 0.0)), r, &p).unwrap();
        for i in 0..16 {
            let (x, y, s) = (ma.values()[i].re, mb.values()[i].re, ms.values()[i].re);
            prop_assert!(s <= x + y + 1e-9);
            prop_assert!((mc.values()[i].re - c * x).abs() <= 1e-9 * (1.0 + c * x));
        }
    }

    #[test]
    fn wider_sweeps_never_decrease_the_maximal_function(a in values(16), side in 1i64..16) {
        let g = grid1(16);
        let f = real_fn(g, &a);
        let narrow = CubeSweepPolicy { max_side: Some(side), ..Default::default() };
        let m1 = hl_maximal(&f, 1.0, &narrow).unwrap();
        let m2 = hl_maximal(&f, 1.0, &CubeSweepPolicy::default()).unwrap();
        for i in 0..16 {
            prop_assert!(m1.values()[i].re <= m2.values()[i].re + 1e-12);
            prop_assert!(m1.values()[i].re >= a[i].abs() - 1e-12);
        }
    }

    #[test]
    fn maximal_function_is_weak_one_one(a in values(32), t in 0.05..4.0f64) {
        let g = grid1(32);
        let f = real_fn(g, &a);
        let m = hl_maximal(&f, 1.0, &CubeSweepPolicy::default()).unwrap();
        let level = m.values().iter().filter(|v| v.re > t).count() as f64 * g.cell_measure();
        let l1: f64 = a.iter().map(|v| v.abs()).sum::<f64>() * g.cell_measure();
        prop_assert!(level <= 3.0 * l1 / t + 1e-12);
    }

    #[test]
    fn stopping_time_sandwich(bits in prop::collection::vec(any::<bool>(), 64), shift in 0usize..64) {
        let g = grid1(64);
        let q = Cube::interval(0, 64);
        let mut om = CellSet::empty(g, q.rect());
        for (i, &b) in bits.iter().enumerate().take(8) {
            if b {
                om.set([((i * 7 + shift) % 64) as i64, 0], true).unwrap();
            }
        }
        let lambda = 1.0 / 4.0;
        let ps = local_cz_decomposition(&om, &q, lambda).unwrap();
        let mut covered = 0usize;
        let mut total = 0u64;
        for p in &ps {
            let m = om.count_in(&p.rect()) as u64;
            prop_assert!(4 * m > p.num_cells());
            prop_assert!(2 * m <= p.num_cells());
            covered += m as usize;
            total += p.num_cells();
        }
        prop_assert_eq!(covered, om.count());
        prop_assert!(2 * total <= q.num_cells());
    }

    #[test]
    fn cover_contains_support_and_tiles(lo in -20i64..20, k in 0u32..4, alpha in prop::sample::select(vec![3i64, 5])) {
        let q0 = Cube::interval(lo, 1 << k);
        let window = q0.dilate(alpha).unwrap();
        let cover = partition_cover(&q0, alpha, &window).unwrap();
        let mut total = 0usize;
        for c in &cover {
            prop_assert!(c.dilate(alpha).unwrap().contains_cube(&q0));
            total += c.rect().intersect(&window.rect()).num_cells();
        }
        for (i, a) in cover.iter().enumerate() {
            for b in &cover[i + 1..] {
                prop_assert!(a.rect().intersect(&b.rect()).is_empty());
            }
        }
        prop_assert_eq!(total as u64, window.num_cells());
    }

    #[test]
    fn orlicz_matches_power_average(a in values(16), p in 1.0..4.0f64, lo in 0i64..8, side in 1i64..8) {
        let g = grid1(16);
        let f = real_fn(g, &a);
        let q = Cube::interval(lo, side);
        let want = avg_p(&f, &q, p);
        let got = orlicz_avg(&f, &q, &PowerYoung(p)).unwrap();
        prop_assert!((got - want).abs() <= 1e-9 * want.max(1e-300));
    }

    #[test]
    fn random_families_pass_the_sparsity_audit(seed in any::<u64>(), p in 0.1..0.9f64) {
        let g = grid1(64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fam = random_sparse_family(g, &g.window(), p, &mut rng).unwrap();
        prop_assert!(check_sparsity(&fam, 0.5).passed);
    }

    #[test]
    fn shrinking_a_witness_below_eta_fails_the_audit(seed in any::<u64>()) {
        let g = grid1(16);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fam = random_sparse_family(g, &g.window(), 0.5, &mut rng).unwrap();
        let e = &mut fam.entries[0];
        e.witness = CellSet::empty(g, e.cube.rect());
        prop_assert!(!check_sparsity(&fam, 0.5).passed);
    }

    #[test]
    fn wq_profile_is_non_increasing_and_scale_free(a in values(32), c in 0.5..4.0f64) {
        prop_assume!(a.iter().any(|v| v.abs() > 1e-3));
        let g = grid1(32);
        let f = real_fn(g, &a);
        let q = g.window();
        let lambdas: Vec<f64> = (1..=6).map(|j| 0.5f64.powi(j)).collect();
        let k = Kernel::hilbert();
        let prof = wq_profile(&k, &f, &q, 1.0, &lambdas).unwrap();
        let prof2 = wq_profile(&k, &f.scaled(Complex64::new(c, 0.0)), &q, 1.0, &lambdas).unwrap();
        for w in prof.windows(2) {
            prop_assert!(w[0].1 <= w[1].1 + 1e-12);
        }
        for (x, y) in prof.iter().zip(&prof2) {
            prop_assert!((x.1 - y.1).abs() <= 1e-9 * (1.0 + x.1));
        }
    }

    #[test]
    fn sharp_ratio_is_non_increasing_in_the_exponent(a in values(16), rp in 1.0..3.0f64) {
        let g = grid1(16);
        let f = real_fn(g, &a);
        let k = Kernel::hilbert();
        let p = CubeSweepPolicy::default();
        let r1 = sharp_vs_maximal(&k, &f, 3, rp, &p).unwrap();
        let r2 = sharp_vs_maximal(&k, &f, 3, rp + 1.0, &p).unwrap();
        prop_assert!(r2.worst_ratio <= r1.worst_ratio + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn dini_constant_grows_with_the_modulus(d1 in 0.2..1.0f64, d2 in 0.2..1.0f64) {
        let (lo, hi) = if d1 < d2 { (d2, d1) } else { (d1, d2) };
        let a = dini_constant(move |t: f64| t.powf(lo)).unwrap();
        let b = dini_constant(move |t: f64| t.powf(hi)).unwrap();
        prop_assert!(a.value <= b.value + 1e-12);
    }

    #[test]
    fn hormander_constant_grows_with_r(r1 in 1.0..3.0f64, dr in 0.0..2.0f64) {
        let g = grid1(16);
        let k = Kernel::holder(0.5).unwrap();
        let a = hormander_constant(&k, r1, &g, 8).unwrap();
        let b = hormander_constant(&k, r1 + dr, &g, 8).unwrap();
        prop_assert!(a.value <= b.value * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn t1_probe_dominates_the_full_set(seed in any::<u64>(), trials in 1u32..6) {
        let g = grid1(32);
        let q = Cube::interval(8, 16);
        let rep = t1_testing_probe(&Kernel::hilbert(), &g, &q, trials, seed).unwrap();
        let full: f64 = rep.metadata["full_set_value"].parse().unwrap();
        prop_assert!(full <= rep.worst_ratio);
        prop_assert!(rep.passed);
    }
}
