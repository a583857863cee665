//! A small limit-law ensemble: certified scans over many seeds, rescaled and
//! compared with the limit laws by KS distance. Writes records.csv,
//! summary.json and manifest.json to the directory given as argument.

use std::path::PathBuf;

use pamlab::config::ExperimentConfig;
use pamlab::experiments::limit_law_experiment;

fn main() -> pamlab::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| PathBuf::from("out/limit-law-demo"), PathBuf::from);
    let cfg = ExperimentConfig::from_toml_str(
        r#"
        d = 1
        alpha = 4.0
        seed_count = 100
        t_grid = [1e2, 1e3, 1e4]
        "#,
    )?;
    let run = limit_law_experiment(&cfg)?;
    for a in &run.summary.per_t {
        println!(
            "t = {:>7}: n = {}, KS(phi) = {:.4}, KS(radius) = {:.4}",
            a.t,
            a.n,
            a.ks_phi.unwrap_or(f64::NAN),
            a.ks_radius.unwrap_or(f64::NAN)
        );
    }
    run.write(&out, &cfg)?;
    println!("wrote {}", out.display());
    Ok(())
}
