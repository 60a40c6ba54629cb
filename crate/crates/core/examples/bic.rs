//! BIC for a two-class model of sixteen binary items.

use latent_class::{bic, ModelSpec};

fn main() -> latent_class::Result<()> {
    let spec = ModelSpec::new(vec![2; 16], 2)?;
    let value = bic(-152527.32796, &spec, 21574);
    println!(
        "standard dimension {}, BIC {value:.5}",
        spec.standard_dimension()
    );
    Ok(())
}
