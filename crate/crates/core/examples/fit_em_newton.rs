//! Fits the two-class model to the influenza table by EM, then refines the
//! EM solution with modified Newton and prints the fitted counts.

use latent_class::newton::newton_fit_traced;
use latent_class::{em_fit, fixtures, seeded_start, EmConfig, ModelSpec, NewtonConfig};

fn main() -> latent_class::Result<()> {
    let table = fixtures::influenza();
    let spec = ModelSpec::for_table(&table, 2)?;
    let em = em_fit(&seeded_start(&spec, 7, 0), &table, &EmConfig::default())?;
    println!(
        "EM: loglik {:.10} after {} iterations ({:?})",
        em.loglik, em.iterations, em.classification
    );
    let newton = newton_fit_traced(&em.theta, &table, &NewtonConfig::default())?;
    println!(
        "Newton: loglik {:.10}, gradient {:e}, {} steps ({:?})",
        newton.fit.loglik,
        newton.fit.gradient_norm.unwrap_or(f64::NAN),
        newton.trace.len(),
        newton.fit.classification
    );
    println!("lambda = {:.4?}", newton.fit.theta.lambda);
    for (cell, (obs, fit)) in table
        .counts()
        .iter()
        .zip(newton.fit.fitted_counts(&table))
        .enumerate()
    {
        println!("cell {cell:2}: observed {obs:3}  fitted {fit:8.3}");
    }
    Ok(())
}
