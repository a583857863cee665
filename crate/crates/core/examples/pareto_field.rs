//! The Pareto potential: values at a few sites, the largest values in a ball,
//! and the scales r_t, a_t at a few times.
//!
//! Run with `cargo run --release --example pareto_field`.

use pamlab::potential::{order_statistics, PotentialField, ScalingBundle};

fn main() -> pamlab::Result<()> {
    let (d, alpha, seed) = (2, 3.0, 7);
    let field = PotentialField::pareto(seed, d, alpha)?;

    println!("xi on [-2, 2]^2:");
    for y in (-2..=2).rev() {
        let row: Vec<String> = (-2..=2).map(|x| format!("{:7.3}", field.xi(&[x, y]))).collect();
        println!("  {}", row.join(" "));
    }

    let stats = order_statistics(&field, 200, 5)?;
    println!("\ntop 5 values in the l1 ball of radius {}:", stats.radius);
    for (z, xi) in &stats.entries {
        println!("  {z:>12}  {xi:10.3}");
    }

    let bundle = ScalingBundle::new(d, alpha)?;
    println!("\nq = {:.4}, theta = {:.4}", bundle.q, bundle.theta);
    println!("{:>8} {:>12} {:>10} {:>8}", "t", "r_t", "a_t", "g_t");
    for t in [10.0, 100.0, 1000.0, 10000.0] {
        let s = bundle.at(t)?;
        println!("{t:>8} {:>12.1} {:>10.3} {:>8.3}", s.r_t, s.a_t, s.g_t);
    }
    Ok(())
}
