//! The limit laws of the rescaled top maximizer: the value law, the density
//! of the position and its radial distribution, and the joint density of
//! the top two positions.

use pamlab::laws::LimitLaw;

fn main() -> pamlab::Result<()> {
    let law = LimitLaw::new(1, 4.0)?;
    println!("d = 1, alpha = 4: q = {:.4}, theta = {:.4}", law.q, law.theta);
    println!("total mass of p1 = {:.9}", law.x1_total_mass());

    println!("\n{:>6} {:>12} {:>12} {:>12}", "x", "P(Y<=x)", "p1(x)", "P(|X1|<=x)");
    for x in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
        println!(
            "{x:>6} {:>12.6} {:>12.6} {:>12.6}",
            law.y_cdf(x)?,
            law.x1_density(&[x])?,
            law.radial_cdf(x)
        );
    }

    println!("\njoint density is not symmetric:");
    for (a, b) in [(1.0, 2.0), (2.0, 1.0)] {
        println!("  p({a}, {b}) = {:.6e}", law.joint_density(&[a], &[b])?);
    }
    Ok(())
}
