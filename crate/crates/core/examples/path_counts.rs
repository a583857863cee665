//! Exact path counts on Z^d: shortest paths N(z), paths of length n that
//! visit z, and the log-counts η that enter Φ_t.

use pamlab::lattice::{eta, eta_n, l1_norm, shortest_path_count, visiting_path_count, DEFAULT_DP_BUDGET};

fn main() -> pamlab::Result<()> {
    for z in [vec![3], vec![2, 1], vec![3, -2], vec![1, 1, 1]] {
        println!(
            "z = {z:?}: |z| = {}, N(z) = {}, eta(z) = {:.4}",
            l1_norm(&z),
            shortest_path_count(&z),
            eta(&z)
        );
    }

    let z = [2, 1];
    println!("\npaths of length n from 0 that visit {z:?}:");
    for n in 3..=9 {
        let count = visiting_path_count(n, &z, DEFAULT_DP_BUDGET)?;
        println!("  n = {n}: {count:>8}  eta(n, z) = {:.4}", eta_n(n, &z, DEFAULT_DP_BUDGET)?);
    }
    Ok(())
}
