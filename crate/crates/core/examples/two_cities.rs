//! Tracks the top maximizer along a time grid and reports every change of
//! Z1 with the mass split between the old and the new site.

use pamlab::potential::PotentialField;
use pamlab::solver::{two_cities_track, SolverConfig};
use pamlab::variational::ScanConfig;

fn main() -> pamlab::Result<()> {
    let grid: Vec<f64> = (0..10).map(|i| 5.0 * 1.25f64.powi(i)).collect();
    for seed in [0u64, 3, 4] {
        let field = PotentialField::pareto(seed, 1, 2.0)?;
        let log = two_cities_track(&field, &grid, &SolverConfig::default(), &ScanConfig::default(), 100)?;
        let last = log.points.last().expect("nonempty grid");
        println!(
            "seed {seed}: Z1 = {} at t = {:.1}, r1 = {:.3}, r2 = {:.3}, {} transitions",
            last.z1,
            last.t,
            last.r1,
            last.r2,
            log.transitions.len()
        );
        for tr in &log.transitions {
            println!(
                "  {} -> {} in ({:.1}, {:.1}): u(old)/u(new) {:.3e} -> {:.3e}, r2 - r1 {:.1e} -> {:.1e}",
                tr.old_site,
                tr.new_site,
                tr.t_before,
                tr.t_after,
                tr.split_before,
                tr.split_after,
                tr.r2_before - tr.r1_before,
                tr.r2_after - tr.r1_after
            );
        }
    }
    Ok(())
}
