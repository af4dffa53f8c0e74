use std::f64::consts::PI;

use ppboot_core::geometry::simulate_homogeneous_poisson;
use ppboot_core::two_point::{distinct_index_sums, estimate_product_density, two_point_statistic};
use ppboot_core::{KernelFunction, KernelKind, PairFunction, PairSpec, PlanarPattern, PointPattern, RngSeed, Window2};
use proptest::prelude::*;

fn pattern_strategy(max: usize) -> impl Strategy<Value = PlanarPattern> {
    prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 0..max).prop_filter_map("distinct points", |pts| {
        PointPattern::new(pts.into_iter().map(|(x, y)| [x, y]).collect(), Window2::unit_square()).ok()
    })
}

fn brute_force(pattern: &PlanarPattern, f: &PairFunction) -> [f64; 4] {
    let pts = pattern.points();
    let n = pts.len();
    let fv = |i: usize, j: usize| f.eval(pts[i], pts[j]);
    let (mut p, mut t3, mut q4, mut r) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            p += fv(i, j);
            r += fv(i, j) * fv(i, j);
            for k in (0..n).filter(|&k| k != i && k != j) {
                t3 += fv(i, j) * fv(i, k);
                for l in (0..n).filter(|&l| l != i && l != j && l != k) {
                    q4 += fv(i, j) * fv(k, l);
                }
            }
        }
    }
    [p, t3, q4, r]
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-10 * scale.max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fast_sums_match_brute_force(pattern in pattern_strategy(10), r in 0.05..0.6f64, b in 0.01..0.3f64) {
        let kernel = KernelFunction::new(KernelKind::Epanechnikov, b).unwrap();
        let f = PairFunction::product_density(Window2::unit_square(), r, kernel).unwrap();
        let [p, t3, q4, rr] = brute_force(&pattern, &f);
        let fast = distinct_index_sums(&pattern, &f);
        let scale = p * p + 1e-12;
        prop_assert!(close(fast.p, p, p.abs()));
        prop_assert!(close(fast.t3, t3, scale));
        prop_assert!(close(fast.q4, q4, scale));
        prop_assert!(close(fast.r, rr, scale));
        prop_assert!(close(p * p, q4 + 4.0 * t3 + 2.0 * rr, scale));
    }

    #[test]
    fn statistic_is_permutation_invariant(pattern in pattern_strategy(40), seed in any::<u64>()) {
        let f: PairFunction = "pcf:r=0.2,b=0.1".parse::<PairSpec>().unwrap().on(Window2::unit_square()).unwrap();
        let mut perm: Vec<usize> = (0..pattern.len()).collect();
        let mut rng = RngSeed::new(seed).rng();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let shuffled = pattern.permuted(&perm).unwrap();
        let (a, b) = (distinct_index_sums(&pattern, &f), distinct_index_sums(&shuffled, &f));
        let scale = a.p * a.p + 1e-12;
        prop_assert!(close(a.p, b.p, a.p.abs()));
        prop_assert!(close(a.t3, b.t3, scale));
        prop_assert!(close(a.q4, b.q4, scale));
        prop_assert!(close(a.r, b.r, scale));
    }

    #[test]
    fn radial_statistic_is_translation_invariant(pattern in pattern_strategy(40), dx in -5.0..5.0f64, dy in -5.0..5.0f64) {
        let spec: PairSpec = "pcf:r=0.15,b=0.05".parse().unwrap();
        let moved = pattern.translated(dx, dy);
        let a = two_point_statistic(&pattern, &spec.on(*pattern.window()).unwrap());
        let b = two_point_statistic(&moved, &spec.on(*moved.window()).unwrap());
        prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0));
    }
}

#[test]
fn product_density_carries_the_isotropized_edge_factor() {
    // Without border correction E ρ̂(r) = λ² (1 − 4r/π + r²/π) on the unit square.
    let window = Window2::unit_square();
    let lambda = 200.0;
    let kernel = KernelFunction::new(KernelKind::Box, 0.01).unwrap();
    let radii = [0.05, 0.1, 0.2];
    let reps = 300;
    let root = RngSeed::new(77);
    let mut samples = vec![Vec::new(); radii.len()];
    for k in 0..reps {
        let pattern = simulate_homogeneous_poisson(lambda, &window, root.child(k)).unwrap();
        for (i, (_, rho)) in estimate_product_density(&pattern, &radii, &kernel).unwrap().into_iter().enumerate() {
            samples[i].push(rho);
        }
    }
    for (i, &r) in radii.iter().enumerate() {
        let (mean, var) = ppboot_core::numeric::mean_and_variance(&samples[i]);
        let expected = lambda * lambda * (1.0 - 4.0 * r / PI + r * r / PI);
        let se = (var / reps as f64).sqrt();
        assert!((mean - expected).abs() < 4.0 * se + 1e-3 * expected, "r={r}: {mean} vs {expected} (se {se})");
    }
}

#[test]
fn empty_and_single_point_patterns() {
    let w = Window2::unit_square();
    let f = PairFunction::constant(w, 2.0).unwrap();
    for pts in [vec![], vec![[0.3, 0.3]]] {
        let s = distinct_index_sums(&PointPattern::new(pts, w).unwrap(), &f);
        assert_eq!((s.p, s.t3, s.q4, s.r), (0.0, 0.0, 0.0, 0.0));
    }
}
