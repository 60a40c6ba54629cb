//! Points on the non-identifiable surface of the 4x4 table all map to the
//! same block table; EM maxima land on that surface.

use latent_class::{
    accounting_map, em_fit, fixtures, match_swiss_surface, seeded_start, swiss_surface_point,
    EmConfig, ModelSpec,
};

fn main() -> latent_class::Result<()> {
    for (a, b) in [(0.05, 0.1), (0.45, 0.45), (0.3474, 0.3474)] {
        let theta = swiss_surface_point(a, b)?;
        let p = accounting_map(&theta, &theta.spec())?;
        let row: Vec<f64> = p.p[..4].iter().map(|x| x * 40.0).collect();
        println!(
            "({a}, {b}): lambda1 {:.6}, first row x40 {:.12?}",
            theta.lambda[0], row
        );
    }
    let table = fixtures::swiss();
    let spec = ModelSpec::for_table(&table, 2)?;
    for run in 0..5 {
        let fit = em_fit(&seeded_start(&spec, 1, run), &table, &EmConfig::default())?;
        match match_swiss_surface(&fit.theta) {
            Some(m) if m.max_abs_diff < 1e-6 => println!(
                "run {run}: loglik {:.6} on the {:?} surface at ({:.4}, {:.4}), max diff {:.1e}",
                fit.loglik, m.pairing, m.alpha11, m.beta11, m.max_abs_diff
            ),
            _ => println!("run {run}: loglik {:.6} off the surface", fit.loglik),
        }
    }
    Ok(())
}
