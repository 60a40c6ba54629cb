//! Profile log-likelihood of the 4x4 table over (alpha11, alpha21) with
//! alpha31 fixed at 0.2, and its peaks.

use latent_class::geometry::ProfileConfig;
use latent_class::{fixtures, profile_loglik_grid, ModelSpec};

fn main() -> latent_class::Result<()> {
    let table = fixtures::swiss();
    let spec = ModelSpec::for_table(&table, 2)?;
    let cfg = ProfileConfig::alpha_slice(0.2);
    let grid = profile_loglik_grid(&table, &spec, &cfg)?;
    println!("max profile loglik {:.6}", grid.max_value());
    for p in grid.peaks() {
        println!(
            "peak at ({:.4}, {:.4}): {:.6} {:?}",
            p.x, p.y, p.value, p.kind
        );
    }
    Ok(())
}
