//! Certified search for the top maximizers of Φ_t over all of Z^d.
//!
//! The scan grows an l1 ball until the probability that any site outside
//! could still enter the top k is below the target.

use pamlab::potential::{PotentialField, ScalingBundle};
use pamlab::variational::{top_k_scan, ScanConfig};

fn main() -> pamlab::Result<()> {
    let (d, alpha) = (1, 4.0);
    let field = PotentialField::pareto(42, d, alpha)?;
    let bundle = ScalingBundle::new(d, alpha)?;
    let cfg = ScanConfig::default();

    for t in [100.0, 1000.0, 10000.0] {
        let scan = top_k_scan(&field, t, 3, &cfg)?;
        let s = bundle.at(t)?;
        println!(
            "t = {t}: scanned radius {} ({:.1} r_t), miss bound {:.2e}",
            scan.scan_radius,
            scan.scan_radius as f64 / s.r_t,
            scan.miss_probability_bound
        );
        for (i, v) in scan.top.iter().enumerate() {
            println!(
                "  Z{} = {:>8}  Phi/a_t = {:.4}  |Z|/r_t = {:.4}  xi = {:.2}",
                i + 1,
                v.site,
                v.phi / s.a_t,
                v.site.norm() as f64 / s.r_t,
                v.xi
            );
        }
    }
    Ok(())
}
