use pamlab::potential::{ExplicitField, PotentialField};
use pamlab::spectral::{principal_eigenpair, FiniteSet, SpectralConfig};
use pamlab::Site;
use pamlab::solver::*;
use pamlab::variational::{top_k_scan, ScanConfig};
use proptest::prelude::*;

fn cfg(tol: f64) -> SolverConfig {
    SolverConfig {
        tol,
        ..SolverConfig::default()
    }
}

fn two_peaks() -> PotentialField {
    PotentialField::Explicit(ExplicitField::new(1, 1.0).with_value(&[0], 5.0).with_value(&[10], 8.0))
}

#[test]
fn gauge_shift_moves_log_mass_only() {
    let base = PotentialField::pareto(4, 1, 2.0).unwrap();
    let c = 3.25;
    let t = 3.0;
    let a = evolve(&base, SolverState::new(1, 60).unwrap(), t, &cfg(1e-8)).unwrap();
    let b = evolve(&base.clone().shifted(c), SolverState::new(1, 60).unwrap(), t, &cfg(1e-8)).unwrap();
    let diff = a
        .weights()
        .iter()
        .zip(b.weights())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(diff < 1e-9, "{diff}");
    let dm = b.log_total_mass() - a.log_total_mass() - c * t;
    assert!(dm.abs() < 1e-8, "{dm}");
}

#[test]
fn constant_potential_grows_exactly() {
    let f = PotentialField::Explicit(ExplicitField::new(2, 1.5));
    let s = evolve(&f, SolverState::new(2, 0).unwrap(), 2.0, &SolverConfig {
        boundary_threshold: 2.0,
        ..cfg(1e-10)
    })
    .unwrap();
    assert!((s.log_total_mass() - (1.5 - 4.0) * 2.0).abs() < 1e-9);
}

#[test]
fn halving_tolerance_stays_within_error_estimate() {
    let f = PotentialField::pareto(3, 1, 2.0).unwrap();
    let coarse = evolve(&f, SolverState::new(1, 100).unwrap(), 5.0, &cfg(1e-6)).unwrap();
    let fine = evolve(&f, SolverState::new(1, 100).unwrap(), 5.0, &cfg(5e-7)).unwrap();
    let change = (coarse.log_total_mass() - fine.log_total_mass()).abs();
    assert!(change < coarse.error_estimate(), "{change} vs {}", coarse.error_estimate());
}

#[test]
fn growth_rate_within_potential_range() {
    let f = PotentialField::pareto(8, 1, 2.0).unwrap();
    let mut s = SolverState::new(1, 200).unwrap();
    s.advance(&f, 2.0, &cfg(1e-8)).unwrap();
    let l1 = s.log_total_mass();
    s.advance(&f, 2.5, &cfg(1e-8)).unwrap();
    let rate = (s.log_total_mass() - l1) / 0.5;
    let r = s.radius() as i64;
    let xs: Vec<f64> = (-r..=r).map(|z| f.xi(&[z])).collect();
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min) - 2.0;
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(rate >= lo && rate <= hi, "{lo} <= {rate} <= {hi}");
}

#[test]
fn dominant_peak_takes_the_mass() {
    let f = PotentialField::Explicit(ExplicitField::new(1, 1.0).with_value(&[2], 10.0));
    let mut s = SolverState::new(1, 30).unwrap();
    let mut last = 0.0;
    for t in [1.5, 2.0, 4.0, 8.0] {
        s.advance(&f, t, &cfg(1e-8)).unwrap();
        let scan = top_k_scan(&f, t, 2, &ScanConfig::default()).unwrap();
        let rep = localization_report(&s, &scan).unwrap();
        assert!(rep.r1 <= rep.r2 && rep.r2 <= 1.0);
        assert!(rep.r1 > last);
        last = rep.r1;
    }
    // the mass settles on the principal eigenvector, whose peak weight is
    // 1/Σv with v(peak) = 1
    let set = FiniteSet::ball(&Site::new(vec![2]), 25);
    let v = principal_eigenpair(&f, &set, &SpectralConfig::default()).unwrap().v;
    let weight = 1.0 / v.iter().sum::<f64>();
    assert!((last - weight).abs() < 1e-4, "{last} vs {weight}");
}

#[test]
fn one_transition_at_the_crossing() {
    let f = two_peaks();
    let crossing = crossing_time(&f, &[0], &[10], 1.5, 20.0).unwrap();
    assert!((crossing - 10.0 * 8f64.ln() / 3.0).abs() < 1e-10);
    let grid = [2.0, 4.0, 6.0, 8.0, 10.0, 12.0];
    let log = two_cities_track(&f, &grid, &cfg(1e-7), &ScanConfig::default(), 20).unwrap();
    assert_eq!(log.transitions.len(), 1);
    let tr = &log.transitions[0];
    assert!(tr.t_before < crossing && crossing < tr.t_after);
    assert_eq!(tr.old_site.coords(), &[0]);
    assert_eq!(tr.new_site.coords(), &[10]);
    assert!(tr.shares_mass());
}

#[test]
fn no_transition_without_a_swap() {
    let f = PotentialField::Explicit(ExplicitField::new(1, 1.0).with_value(&[0], 8.0).with_value(&[3], 5.0));
    let log = two_cities_track(&f, &[2.0, 4.0, 8.0], &cfg(1e-7), &ScanConfig::default(), 10).unwrap();
    assert!(log.transitions.is_empty());
    assert_eq!(log.points.len(), 3);
}

#[test]
fn snapshot_columns() {
    let f = two_peaks();
    let s = evolve(&f, SolverState::new(1, 12).unwrap(), 1.0, &cfg(1e-8)).unwrap();
    let mut out = Vec::new();
    s.write_snapshot(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("z_1,w,log_u\n"));
}

#[test]
fn feynman_kac_trivial_cases() {
    let f = PotentialField::Explicit(ExplicitField::new(1, 0.7));
    let zero = fk_estimate(&f, 0.0, 10, &pamlab::solver::Strategy::Direct, &FkConfig::default()).unwrap();
    assert_eq!((zero.mean, zero.standard_error), (1.0, 0.0));
    let e = fk_estimate(&f, 1.3, 100, &pamlab::solver::Strategy::Direct, &FkConfig::default()).unwrap();
    assert!((e.mean - (0.7f64 * 1.3).exp()).abs() < 1e-12);
}

#[test]
fn sandwich_holds_on_pareto_seeds() {
    for seed in [1u64, 2, 3] {
        let f = PotentialField::pareto(seed, 1, 2.0).unwrap();
        let t = 10.0;
        let scan = top_k_scan(&f, t, 2, &ScanConfig::default()).unwrap();
        let s = evolve(&f, SolverState::new(1, radius_for_scans(std::slice::from_ref(&scan), 100)).unwrap(), t, &cfg(1e-6)).unwrap();
        let gap = s.log_total_mass() / t - scan.top[0].phi;
        assert!((-3.0..=1.0).contains(&gap), "seed {seed}: {gap}");
        assert!(s.log_total_mass() >= strategy_lower_bound(&f, scan.top[0].site.coords(), t) - 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn weights_are_a_probability_vector(seed in any::<u64>(), t in 0.1f64..3.0) {
        let f = PotentialField::pareto(seed, 2, 3.0).unwrap();
        let s = evolve(&f, SolverState::new(2, 12).unwrap(), t, &cfg(1e-6)).unwrap();
        let w = s.weights();
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
