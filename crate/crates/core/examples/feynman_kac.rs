//! Monte Carlo estimates of U(t) = E_0[exp ∫ξ(X_s) ds] against the lattice
//! solution, and the lower bound from walks that run straight to a site and
//! stay there.

use pamlab::potential::PotentialField;
use pamlab::solver::{evolve, fk_estimate, FkConfig, SolverConfig, SolverState, Strategy};
use pamlab::Site;

fn main() -> pamlab::Result<()> {
    let field = PotentialField::pareto(7, 1, 2.0)?;
    let t = 0.5;
    let exact = evolve(&field, SolverState::new(1, 40)?, t, &SolverConfig::default())?;
    println!("lattice solver: U({t}) = {:.6}", exact.log_total_mass().exp());

    for n in [1_000, 10_000, 100_000] {
        let est = fk_estimate(&field, t, n, &Strategy::Direct, &FkConfig::default())?;
        println!("  {n:>7} walks: {:.6} ± {:.6}", est.mean, 1.96 * est.standard_error);
    }

    let best = (-5..=5).max_by(|a, b| field.xi(&[*a]).total_cmp(&field.xi(&[*b]))).unwrap_or(0);
    let sit = Strategy::SitAt {
        z: Site::new(vec![best]),
        rho: 0.2,
    };
    let est = fk_estimate(&field, t, 10_000, &sit, &FkConfig::default())?;
    println!("restricted to sitting at {best}: {:.6} (a lower bound)", est.mean);

    // the pilot predicts the relative error and refuses hopeless times
    match fk_estimate(&field, 4.0, 10_000, &Strategy::Direct, &FkConfig::default()) {
        Ok(e) => println!("t = 4: {:.6}", e.mean),
        Err(e) => println!("t = 4 refused: {e}"),
    }
    Ok(())
}
