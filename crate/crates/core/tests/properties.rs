use distreg::experiment::parse_config;
use distreg::theory::telescoping_check;
use distreg::{
    kernel_kernel_estimate, l1_distance, DensityEstimate, GridSpec, KernelSpec, LabeledEstimate,
    Samples,
};
use proptest::prelude::*;

fn kernel() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        Just(KernelSpec::Boxcar),
        Just(KernelSpec::Epanechnikov),
        Just(KernelSpec::Gaussian)
    ]
}

/// Random estimates whose bandwidth the covering grid resolves with at
/// least 64 nodes.
fn estimate(dim: usize) -> impl Strategy<Value = DensityEstimate> {
    let (spread, min_b) = if dim == 1 { (3.0, 0.05) } else { (1.0, 0.1) };
    (
        prop::collection::vec(prop::collection::vec(-spread..spread, dim), 2..30),
        min_b..1.0f64,
        kernel(),
    )
        .prop_map(|(rows, b, k)| DensityEstimate::new(Samples::from_rows(&rows).unwrap(), b, k).unwrap())
}

fn estimate_1d() -> impl Strategy<Value = DensityEstimate> {
    (prop::collection::vec(-2.0..2.0f64, 2..12), 0.1..0.6f64).prop_map(|(xs, b)| {
        DensityEstimate::new(Samples::from_scalars(xs).unwrap(), b, KernelSpec::Epanechnikov).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn kde_integrates_to_one(est in prop_oneof![estimate(1), estimate(2)]) {
        let grid = GridSpec::covering(&[&est]).unwrap();
        let mass = grid.integrate(&grid.sample(&est).unwrap());
        prop_assert!(
            (mass - 1.0).abs() <= 1e-3,
            "dim {} {} b {}: {}", est.dim(), est.kernel(), est.bandwidth(), mass
        );
    }

    #[test]
    fn kde_is_non_negative_with_compact_support(est in estimate(2), x in -6.0..6.0f64, y in -6.0..6.0f64) {
        let v = est.eval(&[x, y]).unwrap();
        prop_assert!(v >= 0.0);
        if est.kernel().is_compact() {
            let r = est.kernel().support_radius() * est.bandwidth();
            let far = est.points().rows().all(|p| ((p[0] - x).powi(2) + (p[1] - y).powi(2)).sqrt() > r);
            if far {
                prop_assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn kde_is_translation_equivariant(est in estimate(2), shift in prop::collection::vec(-5.0..5.0f64, 2), x in prop::collection::vec(-4.0..4.0f64, 2)) {
        let moved = DensityEstimate::new(est.points().translated(&shift).unwrap(), est.bandwidth(), est.kernel()).unwrap();
        let xs: Vec<f64> = x.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let a = est.eval(&x).unwrap();
        let b = moved.eval(&xs).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn config_round_trips(seed in 0..=i64::MAX as u64, trials in 1usize..1000, eps in 0.01..1.0f64, d in 1usize..=3) {
        let text = format!(
            "experiment = \"adaptive_regression\"\nseed = {seed}\ntrials = {trials}\nepsilon = {eps}\n[meta]\nd = {d}\ndistance_scale = 0.5\n"
        );
        let cfg = parse_config(&text).unwrap();
        prop_assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn l1_satisfies_triangle_inequality(p in estimate_1d(), q in estimate_1d(), r in estimate_1d()) {
        let grid = GridSpec::new(vec![-3.0], vec![3.0], 2048).unwrap();
        let pq = l1_distance(&p, &q, &grid).unwrap();
        let qr = l1_distance(&q, &r, &grid).unwrap();
        let pr = l1_distance(&p, &r, &grid).unwrap();
        prop_assert!(pr <= pq + qr + 1e-12);
        prop_assert!((l1_distance(&q, &p, &grid).unwrap() - pq).abs() <= 1e-12);
    }

    #[test]
    fn telescoping_is_exact(d in 1u32..=3, m in prop_oneof![Just(1u32), Just(10), Just(100)], i in 1u32..=40) {
        let c = telescoping_check(d, m, i).unwrap();
        prop_assert!(c.exact());
        prop_assert!(c.float_rel_err <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn kernel_kernel_stays_in_label_range(
        data in prop::collection::vec((estimate_1d(), -10.0..10.0f64), 1..5),
        query in estimate_1d(),
        h in 0.05..3.0f64,
        k in kernel(),
    ) {
        let grid = GridSpec::new(vec![-3.0], vec![3.0], 256).unwrap();
        let dataset: Vec<LabeledEstimate> = data
            .into_iter()
            .map(|(estimate, label)| LabeledEstimate { estimate, label, handle: None })
            .collect();
        let y = kernel_kernel_estimate(&dataset, &query, h, k, &grid).unwrap();
        let lo = dataset.iter().map(|e| e.label).fold(f64::INFINITY, f64::min);
        let hi = dataset.iter().map(|e| e.label).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(y == 0.0 || (lo - 1e-12 <= y && y <= hi + 1e-12), "{} not in [{}, {}]", y, lo, hi);
    }
}
