use pamlab::lattice::{for_each_in_ball, Site};
use pamlab::potential::*;
use pamlab::stats::ks_distance;
use proptest::prelude::*;

#[test]
fn pareto_quantile_examples() {
    assert_eq!(pareto_quantile(1.0, 3.0), 1.0);
    assert!((pareto_quantile(0.5, 2.0) - 2f64.sqrt()).abs() < 1e-12);
    assert!((pareto_quantile(1.0 / 16.0, 4.0) - 2.0).abs() < 1e-12);
}

#[test]
fn constants_and_scales() {
    let (q, theta) = constants(1, 2.0).unwrap();
    assert!((q - 1.0).abs() < 1e-15 && (theta - 2.0).abs() < 1e-12);
    let (q, theta) = constants(2, 4.0).unwrap();
    assert!((q - 1.0).abs() < 1e-15 && (theta - 2.0 / 3.0).abs() < 1e-12);
    let (q, theta) = constants(1, 4.0).unwrap();
    assert!((q - 1.0 / 3.0).abs() < 1e-15 && (theta - 2.0).abs() < 1e-12);
    assert!(constants(2, 2.0).is_err());

    let e = std::f64::consts::E;
    let s = ScalingBundle::new(1, 2.0).unwrap().at(e).unwrap();
    assert!((s.r_t - e * e).abs() < 1e-12 && (s.a_t - e).abs() < 1e-12);
    let b = ScalingBundle::new(1, 3.0).unwrap().with_exponents(0.2, 0.45, 0.1, 2.0).unwrap();
    assert!((b.at(e * e).unwrap().lambda_t - 0.25).abs() < 1e-12);
    // mpmath oracle at 30 digits
    let r = ScalingBundle::new(1, 4.0).unwrap().at(1e4).unwrap().r_t;
    assert!((r - 11159.183693070235).abs() < 1e-9 * r);
    assert!(ScalingBundle::new(1, 2.0).unwrap().at(1.0).is_err());
}

#[test]
fn pareto_values_follow_the_law() {
    for alpha in [2.0, 4.0] {
        let f = PotentialField::pareto(11, 1, alpha).unwrap();
        let xs: Vec<f64> = (-50_000..50_000i64).map(|z| f.xi(&[z])).collect();
        assert!(xs.iter().all(|&x| x >= 1.0 && x.is_finite()));
        let ks = ks_distance(&xs, |x| if x < 1.0 { 0.0 } else { 1.0 - x.powf(-alpha) }).unwrap();
        assert!(ks < 0.01, "alpha={alpha} ks={ks}");
    }
}

fn brute_top(field: &PotentialField, r: u64, m: usize) -> Vec<(Site, f64)> {
    let mut all = Vec::new();
    for_each_in_ball(field.dim(), r, |z| all.push((Site::new(z.to_vec()), field.xi(z))));
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    all.truncate(m);
    all
}

#[test]
fn order_statistics_small_ball() {
    let f = PotentialField::pareto(5, 1, 3.0).unwrap();
    let s = order_statistics(&f, 2, 3).unwrap();
    assert_eq!(s.entries, brute_top(&f, 2, 3));
    let s0 = order_statistics(&f, 0, 1).unwrap();
    assert_eq!(s0.entries, vec![(Site::origin(1), f.xi(&[0]))]);
    assert!(order_statistics(&f, 2, 6).is_err());
}

#[test]
fn relevant_sets_nest() {
    let b = ScalingBundle::new(1, 3.0).unwrap();
    let f = PotentialField::pareto(2, 1, 3.0).unwrap();
    let (small, large) = relevant_sets(&f, &b, 1e4).unwrap();
    assert!(small.len() <= large.len());
    assert!(small.iter().all(|z| large.contains(z)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn order_statistics_match_full_sort(seed in any::<u64>(), d in 1usize..=2, m in 1usize..20) {
        let f = PotentialField::pareto(seed, d, 2.5 + d as f64).unwrap();
        let r = if d == 1 { 4000 } else { 60 };
        let s = order_statistics(&f, r, m).unwrap();
        prop_assert_eq!(s.entries, brute_top(&f, r, m));
    }

    #[test]
    fn evaluation_order_does_not_matter(seed in any::<u64>(), coords in prop::collection::vec(prop::collection::vec(-1000i64..1000, 2), 1..50)) {
        let a = PotentialField::pareto(seed, 2, 3.0).unwrap();
        let b = PotentialField::pareto(seed, 2, 3.0).unwrap();
        let forward: Vec<f64> = coords.iter().map(|z| a.xi(z)).collect();
        let backward: Vec<f64> = coords.iter().rev().map(|z| b.xi(z)).collect();
        prop_assert!(forward.iter().eq(backward.iter().rev()));
    }
}
