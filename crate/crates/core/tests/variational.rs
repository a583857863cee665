use pamlab::lattice::{eta, for_each_in_ball, l1_norm, Site};
use pamlab::potential::{ExplicitField, PotentialField, ScalingBundle, TailLaw};
use pamlab::variational::*;
use proptest::prelude::*;

/// Top k of Φ_t over the full ball of radius r, ties to the smaller site.
fn brute_scan(field: &PotentialField, t: f64, r: u64, k: usize) -> Vec<(Site, f64)> {
    let mut all = Vec::new();
    for_each_in_ball(field.dim(), r, |z| {
        let v = phi(field, t, z);
        all.push((v.site, v.phi));
    });
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

fn brute_radius(d: usize, alpha: f64, t: f64) -> u64 {
    let s = ScalingBundle::new(d, alpha).unwrap().at(t).unwrap();
    (4.0 * s.r_t * s.g_t).ceil() as u64
}

#[test]
fn scan_matches_brute_force_pinned_seed() {
    let field = PotentialField::pareto(42, 1, 4.0).unwrap();
    let scan = top_k_scan(&field, 1e3, 3, &ScanConfig::default()).unwrap();
    let brute = brute_scan(&field, 1e3, brute_radius(1, 4.0, 1e3), 3);
    let got: Vec<(Site, f64)> = scan.top.iter().map(|v| (v.site.clone(), v.phi)).collect();
    assert_eq!(got, brute);
    let sites: Vec<i64> = got.iter().map(|(s, _)| s.coords()[0]).collect();
    assert_eq!(sites, vec![373, -995, -2463]);
    assert!(scan.miss_probability_bound <= 1e-6);
}

#[test]
fn scan_matches_brute_force_in_two_dimensions() {
    for seed in 0..4 {
        let field = PotentialField::pareto(seed, 2, 6.0).unwrap();
        let t = 30.0;
        let scan = top_k_scan(&field, t, 3, &ScanConfig::default()).unwrap();
        let brute = brute_scan(&field, t, brute_radius(2, 6.0, t), 3);
        let got: Vec<(Site, f64)> = scan.top.iter().map(|v| (v.site.clone(), v.phi)).collect();
        assert_eq!(got, brute, "seed {seed}");
    }
}

#[test]
fn synthetic_peak_is_certified() {
    let field = PotentialField::Explicit(ExplicitField::new(1, 1.0).with_value(&[0], 100.0));
    let scan = top_k_scan(&field, 10.0, 1, &ScanConfig::default()).unwrap();
    assert_eq!(scan.top[0].site, Site::origin(1));
    assert!(scan.miss_probability_bound <= 1e-6);
}

#[test]
fn tail_bound_regression_pin() {
    let b = tail_miss_bound(TailLaw::Pareto { alpha: 4.0 }, 1, 100.0, 1000, 5.0);
    assert!((1.6558406867953254e-4..=1.6558406867953254e-4 * 1.03).contains(&b));
}

#[test]
fn maximizer_value_grows_with_time() {
    for seed in 0..10 {
        let field = PotentialField::pareto(seed, 1, 3.0).unwrap();
        let grid = [20.0, 40.0, 80.0, 160.0, 320.0];
        for w in grid.windows(2) {
            let scan = top_k_scan(&field, w[0], 1, &ScanConfig::default()).unwrap();
            let top = &scan.top[0];
            if top.xi > 1.0 {
                let later = phi(&field, w[1], top.site.coords());
                assert!(later.phi >= top.phi, "seed {seed} t {} -> {}", w[0], w[1]);
            }
        }
    }
}

proptest! {
    #[test]
    fn psi_is_nondecreasing(a in 0.0f64..50.0, x in -10.0f64..200.0, dx in 0.0f64..10.0) {
        prop_assume!(a > 0.0 || x >= 0.0);
        prop_assert!(psi(a, x + dx).unwrap() >= psi(a, x).unwrap());
    }

    #[test]
    fn psi_at_least_a(a in 0.0f64..50.0, x in 0.0f64..200.0) {
        prop_assert!(psi(a, x).unwrap() >= a);
    }

    #[test]
    fn psi_round_trips(a in 1e-3f64..1e3, e in -3.0f64..3.0) {
        let x = a * (1.0 + 10f64.powf(e));
        let back = psi(a, x - a * x.ln()).unwrap();
        prop_assert!((back - x).abs() <= 1e-9 * x);
        let y = chi(a, x);
        let again = chi(a, psi(a, y).unwrap());
        prop_assert!((again - y).abs() <= 1e-9 * (y.abs() + a * x.ln().abs()));
    }

    #[test]
    fn event_identity(t in 1.0f64..1e3, z in prop::collection::vec(-40i64..=40, 1..=3), u in 1e-12f64..1.0, x in 0.0f64..60.0) {
        let xi = u.powf(-0.5);
        let n = l1_norm(&z);
        let eta = eta(&z);
        let (phi_val, _) = phi_from_parts(xi, n, eta, t);
        let direct = phi_val <= x;
        let via_psi = xi <= psi(n as f64 / t, x - eta / t).unwrap();
        prop_assert_eq!(direct, via_psi);
    }
}
