//! Solves ∂_t u = Δu + ξu from a point mass at the origin and watches the
//! mass concentrate on the top maximizers of Φ_t.
//!
//! Run with `cargo run --release --example solve_pam [seed]`.

use pamlab::potential::PotentialField;
use pamlab::solver::{localization_report, radius_for_scans, SolverConfig, SolverState};
use pamlab::variational::{top_k_scan, PhiScanResult, ScanConfig};

fn main() -> pamlab::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let field = PotentialField::pareto(seed, 1, 2.0)?;
    let grid = [2.0, 5.0, 10.0, 20.0];
    let scans: Vec<PhiScanResult> = grid
        .iter()
        .map(|&t| top_k_scan(&field, t, 2, &ScanConfig::default()))
        .collect::<pamlab::Result<_>>()?;

    let cfg = SolverConfig::default();
    let mut state = SolverState::new(1, radius_for_scans(&scans, 50))?;
    println!("{:>5} {:>10} {:>6} {:>6} {:>8} {:>8} {:>8}", "t", "log U", "Z1", "Z2", "r1", "r2", "steps");
    for scan in &scans {
        state.advance(&field, scan.t, &cfg)?;
        let rep = localization_report(&state, scan)?;
        println!(
            "{:>5} {:>10.3} {:>6} {:>6} {:>8.4} {:>8.4} {:>8}",
            scan.t,
            rep.log_u,
            scan.site(0),
            scan.site(1),
            rep.r1,
            rep.r2,
            state.accepted_steps()
        );
    }
    println!(
        "box radius {}, boundary mass {:.1e}, error estimate {:.1e}",
        state.radius(),
        state.boundary_mass_fraction(),
        state.error_estimate()
    );
    Ok(())
}
