//! Multistart enumeration of the critical points of the two-class model on
//! the 4x4 table.

use latent_class::symmetry::ExploreConfig;
use latent_class::{fixtures, multistart_explore, ModelSpec};

fn main() -> latent_class::Result<()> {
    let table = fixtures::swiss();
    let spec = ModelSpec::for_table(&table, 2)?;
    let cfg = ExploreConfig {
        n_starts: 500,
        seed: 7,
        ..ExploreConfig::default()
    };
    let set = multistart_explore(&table, &spec, &cfg)?;
    print!("{}", set.summary_text());
    for (level, count) in set.levels(1e-6) {
        println!("level {level:.6}: {count} points");
    }
    Ok(())
}
