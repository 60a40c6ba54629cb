//! From a saddle of the 4x4 table, pair averaging of the rank-one deviation
//! climbs to a global maximum.

use latent_class::model::ParamPoint;
use latent_class::symmetry::{square, symmetrize_and_climb};
use latent_class::{ef_decompose, em_fit, fixtures, EmConfig};

fn main() -> latent_class::Result<()> {
    let table = fixtures::swiss();
    let start = ParamPoint {
        lambda: vec![0.5, 0.5],
        cond: vec![
            vec![vec![0.4, 0.2, 0.2, 0.2], vec![0.2, 0.4, 0.2, 0.2]],
            vec![vec![0.4, 0.2, 0.2, 0.2], vec![0.2, 0.4, 0.2, 0.2]],
        ],
    };
    let saddle = em_fit(&start, &table, &EmConfig::default())?;
    println!(
        "EM stops at {:.6} ({:?})",
        saddle.loglik, saddle.classification
    );
    let fitted = square(&saddle.fitted_counts(&table));
    let dec = ef_decompose(&fitted)?;
    println!("K = {:.6}, e = {:.6?}, f = {:.6?}", dec.k, dec.e, dec.f);
    let climb = symmetrize_and_climb(&table, &dec, &[(0, 2), (1, 3)], 1)?;
    println!("trace {:.8?}", climb.trace());
    println!("final table {:.6}", climb.decomposition.reconstruct());
    Ok(())
}
