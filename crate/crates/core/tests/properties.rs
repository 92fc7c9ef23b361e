use biphoton_core::detection::{
    classify_pixels, pixel_probabilities, split_probabilities, split_probabilities_exact,
    split_probabilities_linearized, CoincidenceBin, PixelDetector, SplitOutcome,
};
use biphoton_core::experiments::run_random_walk;
use biphoton_core::inference::{
    averaged_marginal_variance, dmin_alpha_beta, fisher_continuous, fisher_discrete, fisher_ratio,
    fisher_split, qfi_numeric, Scheme,
};
use biphoton_core::numerics::{bvn_rect_prob, Rect};
use biphoton_core::{BiphotonModel, PhotonPair, QuadratureSpec};
use proptest::prelude::*;

fn model(s: f64, e: f64, d: f64) -> BiphotonModel {
    BiphotonModel::new(s, e, d).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bvn_partition_sums_to_one(
        mu1 in -2.0..2.0f64, mu2 in -2.0..2.0f64,
        s1 in 0.1..3.0f64, s2 in 0.1..3.0f64,
        rho in -0.999..0.999f64,
        cx in -1.5..1.5f64, cy in -1.5..1.5f64,
    ) {
        let spec = QuadratureSpec::default();
        let inf = f64::INFINITY;
        let cells = [
            Rect::new(-inf, cx, -inf, cy).unwrap(),
            Rect::new(cx, inf, -inf, cy).unwrap(),
            Rect::new(-inf, cx, cy, inf).unwrap(),
            Rect::new(cx, inf, cy, inf).unwrap(),
        ];
        let total: f64 = cells
            .iter()
            .map(|r| bvn_rect_prob(mu1, mu2, s1, s2, rho, r, &spec).unwrap())
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "{}", total);
    }

    #[test]
    fn joint_density_is_exchange_symmetric(
        s in 0.1..3.0f64, e in 0.05..3.0f64, d in -1.0..1.0f64,
        x1 in -3.0..3.0f64, x2 in -3.0..3.0f64,
    ) {
        let m = model(s, e, d);
        let a = m.joint_pdf(x1, x2).unwrap();
        let b = m.joint_pdf(x2, x1).unwrap();
        prop_assert!((a - b).abs() <= 1e-15 * a.max(1e-300));
        // Reflection about d.
        let c = m.joint_pdf(2.0 * d - x1, 2.0 * d - x2).unwrap();
        prop_assert!((a - c).abs() <= 1e-12 * a.max(1e-300));
    }

    #[test]
    fn correlation_lies_in_open_interval(s in 1e-3..1e3f64, e in 1e-3..1e3f64) {
        let xi = model(s, e, 0.0).correlation_coefficient();
        prop_assert!(xi > -1.0 && xi < 1.0);
        let r = fisher_ratio(&model(s, e, 0.0), Scheme::Split).unwrap();
        prop_assert!(r >= 0.5 - 1e-12);
        prop_assert_eq!(r >= 1.0 - 1e-12, xi <= 1e-12);
    }

    #[test]
    fn split_tables_mirror_in_d(s in 0.2..2.0f64, e in 0.05..2.0f64, d in 0.0..0.5f64) {
        let spec = QuadratureSpec::default();
        let p = split_probabilities(&model(s, e, d), &spec).unwrap();
        let q = split_probabilities(&model(s, e, -d), &spec).unwrap();
        prop_assert!((p.split(SplitOutcome::PlusTwo) - q.split(SplitOutcome::MinusTwo)).abs() < 1e-10);
        prop_assert!((p.split(SplitOutcome::Zero) - q.split(SplitOutcome::Zero)).abs() < 1e-10);
        let total: f64 = p.outcomes().iter().map(|o| o.probability).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn delta_tables_mirror_in_d(s in 0.2..2.0f64, d in 0.0..1.0f64) {
        let spec = QuadratureSpec::default();
        let p = split_probabilities(&model(s, 0.0, d), &spec).unwrap();
        let q = split_probabilities(&model(s, 0.0, -d), &spec).unwrap();
        prop_assert_eq!(p.split(SplitOutcome::PlusTwo), q.split(SplitOutcome::MinusTwo));
        prop_assert_eq!(p.split(SplitOutcome::MinusTwo), 0.0);
    }

    #[test]
    fn linearized_table_is_a_distribution(s in 0.2..2.0f64, e in 0.05..2.0f64, f in -0.99..0.99f64) {
        let m = model(s, e, f * e * 0.1);
        let t = split_probabilities_linearized(&m).unwrap();
        prop_assert!(t.outcomes().iter().all(|o| o.probability >= 0.0));
    }

    #[test]
    fn averaged_variance_never_beats_equal_weights(
        s in 0.2..2.0f64, e in 0.0..2.0f64, w in -2.0..3.0f64, n in 1.0..1e6f64,
    ) {
        let m = model(s, e, 0.0);
        let best = averaged_marginal_variance(&m, n, 0.5, 0.5);
        prop_assert!(averaged_marginal_variance(&m, n, w, 1.0 - w) >= best * (1.0 - 1e-12));
        prop_assert!(best >= -1e-18);
    }

    #[test]
    fn dmin_alpha_beta_decreases_with_events(
        alpha in 0.0..0.49f64, beta in 0.05..2.0f64, nu in 1.0..1e6f64,
    ) {
        let a = dmin_alpha_beta(alpha, beta, nu).unwrap();
        let b = dmin_alpha_beta(alpha, beta, 2.0 * nu).unwrap();
        prop_assert!(b < a);
        // Between the Heisenberg (1/ν) and SQL (1/√ν) rates.
        prop_assert!(b >= a / 2.0 * (1.0 - 1e-12));
        prop_assert!(b <= a / 2f64.sqrt() * (1.0 + 1e-12));
    }

    #[test]
    fn pixel_classification_matches_edges(n in 2usize..60, ext in 0.5..20.0f64, x in -12.0..12.0f64, y in -12.0..12.0f64) {
        let det = PixelDetector::new(n, ext).unwrap();
        for i in 1..=n {
            prop_assert_eq!(det.pixel_of(det.edge(i)), Some(i));
        }
        match classify_pixels(&PhotonPair::new(x, y), &det) {
            CoincidenceBin::Miss => prop_assert!(det.pixel_of(x).is_none() || det.pixel_of(y).is_none()),
            CoincidenceBin::Pixels { i, j } => {
                prop_assert!(i <= j);
                let (a, b) = (det.pixel_of(x).unwrap(), det.pixel_of(y).unwrap());
                prop_assert_eq!((i, j), (a.min(b), a.max(b)));
                prop_assert!(det.edge(a) <= x && x < det.edge(a + 1));
            }
        }
    }

    #[test]
    fn random_walks_are_consistent(e in 0.0..1.5f64, d in -0.3..0.3f64, seed in any::<u64>()) {
        let w = run_random_walk(&model(1.0, e, d), 500, seed);
        prop_assert!(w.is_consistent());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn fisher_information_ordering(e in 0.2..1.0f64, d in 0.0..0.02f64) {
        let spec = QuadratureSpec::default();
        let m = model(1.0, e, d);
        let split = fisher_discrete(&split_probabilities_exact(&m, &spec).unwrap(), 1.0).unwrap().value;
        let ten = fisher_discrete(&pixel_probabilities(&m, &PixelDetector::new(10, 10.0).unwrap(), &spec).unwrap(), 1.0)
            .unwrap()
            .value;
        let fifty = fisher_discrete(&pixel_probabilities(&m, &PixelDetector::new(50, 10.0).unwrap(), &spec).unwrap(), 1.0)
            .unwrap()
            .value;
        let cont = fisher_continuous(&m).unwrap().value;
        let q = qfi_numeric(&m, &spec).unwrap().value;
        prop_assert!(split <= ten && ten <= fifty && fifty <= cont && cont <= q * (1.0 + 1e-4),
            "{} {} {} {} {}", split, ten, fifty, cont, q);
        // Near d = 0 the split table carries the small-displacement information.
        let closed = fisher_split(&m).unwrap().value;
        prop_assert!((split / closed - 1.0).abs() < 0.01 + 4.0 * d * d / (e * e));
    }
}
