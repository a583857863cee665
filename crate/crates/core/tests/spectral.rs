use nalgebra::{DMatrix, SymmetricEigen};
use pamlab::lattice::Site;
use pamlab::potential::{ExplicitField, PotentialField};
use pamlab::spectral::*;

/// Largest eigenpair of the dense matrix of Δ + ξ on a connected set,
/// eigenvector normalized at the peak index, and the distance to the next
/// eigenvalue.
fn dense(field: &PotentialField, sites: &[Site]) -> (f64, Vec<f64>, f64) {
    let n = sites.len();
    let d = field.dim() as f64;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = field.xi(sites[i].coords()) - 2.0 * d;
        for j in 0..n {
            if sites[i].distance(&sites[j]) == 1 {
                m[(i, j)] = 1.0;
            }
        }
    }
    let eig = SymmetricEigen::new(m);
    let (k, &gamma) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
    let peak = (0..n)
        .max_by(|&a, &b| field.xi(sites[a].coords()).total_cmp(&field.xi(sites[b].coords())))
        .unwrap();
    let s = v[peak];
    let next = eig.eigenvalues.iter().filter(|&&e| e < gamma).fold(f64::NEG_INFINITY, |m, &e| m.max(e));
    (gamma, v.iter().map(|x| x / s).collect(), gamma - next)
}

#[test]
fn power_iteration_matches_dense_eigensolver() {
    let cases = [(1usize, 2.0, 20u64), (2, 3.0, 3), (2, 4.0, 4), (3, 5.0, 2)];
    for (d, alpha, r) in cases {
        for seed in 0..5 {
            let field = PotentialField::pareto(seed, d, alpha).unwrap();
            let set = FiniteSet::ball(&Site::origin(d), r);
            assert!(set.len() <= 50);
            let res = principal_eigenpair(&field, &set, &SpectralConfig::default()).unwrap();
            let (gamma, v, separation) = dense(&field, set.sites());
            assert!((res.gamma - gamma).abs() < 1e-8, "d={d} seed={seed}: {} vs {gamma}", res.gamma);
            // compare in the max norm: when v lives away from the peak,
            // v(Z_A) is tiny and normalizing there magnifies rounding
            let max_norm = |w: &[f64]| w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let (ma, mb) = (max_norm(&res.v), max_norm(&v));
            let err = res.v.iter().zip(&v).map(|(a, b)| (a / ma - b / mb).abs()).fold(0.0, f64::max);
            assert!(err < 1e-8 / separation.min(1.0), "d={d} seed={seed}: {err}, separation {separation}");
            let top = res.peak_xi;
            assert!(res.gamma <= top && res.gamma >= top - 2.0 * d as f64);
        }
    }
}

#[test]
fn two_sites_closed_form() {
    let c = 20.0;
    let field = PotentialField::Explicit(ExplicitField::new(1, 0.0).with_value(&[0], c));
    let set = FiniteSet::new(vec![Site::new(vec![0]), Site::new(vec![1])]).unwrap();
    let res = principal_eigenpair(&field, &set, &SpectralConfig::default()).unwrap();
    let gamma = c / 2.0 - 2.0 + (c * c / 4.0 + 1.0).sqrt();
    assert!((res.gamma - gamma).abs() < 1e-10);
    assert!((res.v[1] - 1.0 / (gamma + 2.0)).abs() < 1e-10);
    assert_eq!(res.gap, Some(c));
    let cert = decay_certificate(&res).unwrap();
    assert!(cert.holds());
}

#[test]
fn gap_matches_brute_force() {
    let field = PotentialField::pareto(9, 2, 3.0).unwrap();
    let set = FiniteSet::ball(&Site::new(vec![5, -2]), 3);
    let mut xs: Vec<f64> = set.sites().iter().map(|z| field.xi(z.coords())).collect();
    xs.sort_by(|a, b| b.total_cmp(a));
    assert_eq!(gap(&field, &set).unwrap(), xs[0] - xs[1]);
    let one = FiniteSet::new(vec![Site::origin(2)]).unwrap();
    assert!(gap(&field, &one).is_err());
}

#[test]
fn varphi_closed_form() {
    assert!((varphi(1, 4.0).unwrap() - 10.0 / 3.0).abs() < 1e-12);
    assert!(varphi(2, 4.0).is_err());
    assert!(varphi(2, 5.0).unwrap() > varphi(2, 6.0).unwrap());
}

#[test]
fn decay_certificate_on_large_gaps() {
    let mut checked = 0;
    for seed in 0..200 {
        let field = PotentialField::pareto(seed, 2, 3.0).unwrap();
        let set = FiniteSet::ball(&Site::origin(2), 3);
        if gap(&field, &set).unwrap() <= 4.0 {
            continue;
        }
        let res = principal_eigenpair(&field, &set, &SpectralConfig::default()).unwrap();
        let cert = decay_certificate(&res).unwrap();
        assert!(cert.holds(), "seed {seed}: {cert:?}");
        checked += 1;
    }
    assert!(checked >= 10);
}

/// Solves (γ + 2 − ξ(z))v(z) − v(z−1) − v(z+1) = 0 on the sites 1..=n steps
/// from the peak, with v = 1 at the peak and 0 past the end. Diagonally
/// dominant when γ + 2 − ξ > 2, so the Thomas sweep keeps relative accuracy
/// in the tail.
fn tail_from_peak(diag: &[f64]) -> Vec<f64> {
    let n = diag.len();
    // forward sweep: v(k) = c(k)·v(k+1) + e(k), with v(0) = 1 folded into e
    let mut c = vec![0.0; n];
    let mut e = vec![0.0; n];
    let (mut c_prev, mut e_prev) = (0.0, 1.0);
    for k in 0..n {
        let denom = diag[k] - c_prev;
        c[k] = 1.0 / denom;
        e[k] = e_prev / denom;
        (c_prev, e_prev) = (c[k], e[k]);
    }
    let mut v = vec![0.0; n];
    let mut next = 0.0;
    for k in (0..n).rev() {
        v[k] = c[k] * next + e[k];
        next = v[k];
    }
    v
}

#[test]
fn tail_is_accurate_relative_to_its_size() {
    // gap ≈ 87 on this ball; the tail falls to about 1e-20
    let field = PotentialField::pareto(404, 1, 2.0).unwrap();
    let set = FiniteSet::ball(&Site::origin(1), 6);
    let res = principal_eigenpair(&field, &set, &SpectralConfig::default()).unwrap();
    let (gamma, _, _) = dense(&field, set.sites());
    assert!((res.gamma - gamma).abs() < 1e-12 * gamma);
    let peak = res.peak.coords()[0];
    let value = |z: i64| res.sites.iter().zip(&res.v).find(|(s, _)| s.coords()[0] == z).unwrap().1;
    for dir in [-1i64, 1] {
        let zs: Vec<i64> = (1..).map(|k| peak + dir * k).take_while(|z| z.abs() <= 6).collect();
        let diag: Vec<f64> = zs.iter().map(|&z| gamma + 2.0 - field.xi(&[z])).collect();
        let exact = tail_from_peak(&diag);
        for (z, x) in zs.iter().zip(exact) {
            let got = *value(*z);
            assert!((got - x).abs() <= 1e-8 * x, "z = {z}: {got} vs {x}");
        }
    }
    assert!(decay_certificate(&res).unwrap().holds());
}

#[test]
fn set_construction() {
    assert!(FiniteSet::new(vec![]).is_err());
    assert!(FiniteSet::new(vec![Site::origin(1), Site::origin(2)]).is_err());
    let s = FiniteSet::new(vec![Site::origin(1), Site::origin(1), Site::new(vec![3])]).unwrap();
    assert_eq!(s.len(), 2);
    assert_eq!(FiniteSet::ball(&Site::origin(2), 2).len(), 13);
}
