use mmspace::excursion::{code_excursion, d_gamma, d_lambda, four_point_check, sample_excursion, ExcursionKind, Resolution};
use mmspace::gp_box::{box_lambda, gromov_prohorov, BoxConfig};
use mmspace::mm_core::{are_isomorphic, canonicalize, sample_mm_space};
use mmspace::prohorov::{prohorov_flow, total_variation, CommonSpaceMeasures};
use mmspace::rational::Rational;
use proptest::prelude::*;

fn r(n: i128) -> Rational {
    Rational::from(n)
}

fn measure(raw: &[u8], n: usize) -> Vec<Rational> {
    let mut w: Vec<i128> = raw.iter().take(n).map(|x| (*x % 5) as i128).collect();
    w.resize(n, 0);
    if w.iter().all(|x| *x == 0) {
        w[0] = 1;
    }
    let t: i128 = w.iter().sum();
    w.into_iter().map(|x| Rational::new(x, t)).collect()
}

fn kind(pl: bool) -> ExcursionKind {
    if pl {
        ExcursionKind::PiecewiseLinear
    } else {
        ExcursionKind::PiecewiseConstant
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prohorov_is_a_metric_below_total_variation(seed in any::<u64>(), a in prop::collection::vec(any::<u8>(), 6), b in prop::collection::vec(any::<u8>(), 6), c in prop::collection::vec(any::<u8>(), 6)) {
        let space = sample_mm_space(seed, 6, r(2));
        let n = space.len();
        let (mu, nu, xi) = (measure(&a, n), measure(&b, n), measure(&c, n));
        let d = |x: &Vec<Rational>, y: &Vec<Rational>| prohorov_flow(&CommonSpaceMeasures::on_space(&space, x.clone(), y.clone()).unwrap());
        prop_assert_eq!(d(&mu, &mu), Rational::ZERO);
        prop_assert_eq!(d(&mu, &nu), d(&nu, &mu));
        prop_assert!(d(&mu, &xi) <= d(&mu, &nu) + d(&nu, &xi));
        prop_assert!(d(&mu, &nu) <= total_variation(&mu, &nu));
    }

    #[test]
    fn gp_is_invariant_under_relabeling_and_canonicalization(s1 in any::<u64>(), s2 in any::<u64>()) {
        let cfg = BoxConfig::default();
        let a = sample_mm_space(s1, 3, r(2));
        let b = sample_mm_space(s2, 3, r(2));
        let rev: Vec<usize> = (0..a.len()).rev().collect();
        let d = gromov_prohorov(&a, &b, &cfg).unwrap().value;
        prop_assert_eq!(gromov_prohorov(&a.restrict_unchecked(&rev), &b, &cfg).unwrap().value, d);
        prop_assert_eq!(gromov_prohorov(&canonicalize(&a), &b, &cfg).unwrap().value, d);
        prop_assert_eq!(gromov_prohorov(&b, &a, &cfg).unwrap().value, d);
        prop_assert!(d <= Rational::ONE);
        prop_assert_eq!(d.is_zero(), are_isomorphic(&canonicalize(&a), &canonicalize(&b)));
    }

    #[test]
    fn box_is_monotone_in_lambda(s1 in any::<u64>(), s2 in any::<u64>(), k in 1i128..8) {
        let cfg = BoxConfig::default();
        let a = sample_mm_space(s1, 4, r(2));
        let b = sample_mm_space(s2, 4, r(2));
        let small = Rational::new(k, 4);
        let big = small * r(2);
        let lo = box_lambda(&a, &b, &big, &cfg).unwrap().value;
        let hi = box_lambda(&a, &b, &small, &cfg).unwrap().value;
        prop_assert!(lo <= hi && hi <= r(2) * lo);
    }

    #[test]
    fn coded_trees_are_trees(seed in any::<u64>(), pl in any::<bool>(), step in 0i128..4) {
        let h = sample_excursion(seed, kind(pl), 5);
        let res = Resolution { cuts: Vec::new(), level_step: (step > 0).then(|| Rational::new(1, 2 * step)) };
        let tree = code_excursion(&h, &res);
        prop_assert!(four_point_check(&tree.space).is_empty());
        prop_assert_eq!(tree.space.weights().iter().copied().fold(Rational::ZERO, |s, w| s + w), Rational::ONE);
        for i in 0..tree.space.len() {
            for j in 0..tree.space.len() {
                let (s, t) = (tree.representatives[i], tree.representatives[j]);
                prop_assert_eq!(*tree.space.dist(i, j), h.dh(&s, &t).unwrap());
            }
        }
    }

    #[test]
    fn redundant_breakpoints_change_nothing(seed in any::<u64>(), pl in any::<bool>(), num in 1i128..40) {
        let h = sample_excursion(seed, kind(pl), 4);
        let t = Rational::new(num, 41);
        let h2 = h.with_breakpoint(&t).unwrap();
        prop_assert_eq!(d_lambda(&h, &h2), Rational::ZERO);
        prop_assert!(d_gamma(&h, &h2).hi <= 1e-9);
        let (a, b) = (code_excursion(&h, &Resolution::default()), code_excursion(&h2, &Resolution::default()));
        prop_assert_eq!(a.space.matrix(), b.space.matrix());
        prop_assert_eq!(a.space.weights(), b.space.weights());
    }

    #[test]
    fn excursion_metrics_are_bounded_by_the_uniform_distance(s1 in any::<u64>(), s2 in any::<u64>(), pl in any::<bool>()) {
        let h = sample_excursion(s1, kind(pl), 4);
        let g = sample_excursion(s2, kind(pl), 4);
        let sup = h.sup_distance(&g);
        prop_assert!(d_lambda(&h, &g) <= sup);
        prop_assert_eq!(d_lambda(&h, &g), d_lambda(&g, &h));
        let gamma = d_gamma(&h, &g);
        prop_assert!(gamma.lo <= sup.to_f64() + 1e-9);
        let back = d_gamma(&g, &h);
        prop_assert!((gamma.lo - back.lo).abs() <= 2e-9 || gamma.square == back.square);
    }

    #[test]
    fn rational_text_round_trips(p in -10_000i128..10_000, q in 1i128..10_000) {
        let x = Rational::new(p, q);
        prop_assert_eq!(Rational::parse(&x.to_string()).unwrap(), x);
        let dec: f64 = x.to_decimal().parse().unwrap();
        prop_assert!((dec - x.to_f64()).abs() <= 1e-12);
    }
}
