//! Principal Dirichlet eigenpair of Δ + ξ on a ball and the check that the
//! eigenfunction decays like (2d/g)^{distance} away from the peak.

use pamlab::potential::PotentialField;
use pamlab::spectral::{decay_certificate, principal_eigenpair, FiniteSet, SpectralConfig};
use pamlab::Site;

fn main() -> pamlab::Result<()> {
    let d = 2;
    let set = FiniteSet::ball(&Site::origin(d), 6);
    for seed in 0..8 {
        let field = PotentialField::pareto(seed, d, 2.5)?;
        let res = principal_eigenpair(&field, &set, &SpectralConfig::default())?;
        let gap = res.gap.unwrap_or(f64::NAN);
        print!(
            "seed {seed}: peak {} xi = {:.3}, gamma = {:.6}, gap = {gap:.3}, {} iterations",
            res.peak, res.peak_xi, res.gamma, res.iterations
        );
        match decay_certificate(&res) {
            Ok(c) => println!(
                ", decay ratio {:.3}, mass term {:.3e} vs phi {:.3e}: {}",
                c.worst_pointwise_ratio,
                c.mass_term,
                c.phi_bound.unwrap_or(f64::NAN),
                if c.holds() { "certified" } else { "not certified" }
            ),
            Err(e) => println!(", {e}"),
        }
    }
    Ok(())
}
