//! Checks that the block-diagonal table maximizes the two-class likelihood
//! for constant-diagonal data of several sizes.

use latent_class::verify_conjecture;

fn main() -> latent_class::Result<()> {
    for n in [4, 5, 6] {
        let rep = verify_conjecture(n, 4, 2, 500, 0)?;
        println!(
            "n = {n}: verdict {}, best {:.8}, conjectured {:.8}",
            rep.verdict, rep.best_loglik, rep.conjecture_loglik
        );
    }
    Ok(())
}
