//! The block-diagonal form of the two-class maximum likelihood estimate for
//! tables with constant diagonal and constant off-diagonal counts.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{find_joint_permutation, multistart_explore, square, ExploreConfig};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::tables::ContingencyTable;

/// The `n x n` table with `x` on the diagonal and `y` elsewhere.
pub fn conjecture_data(n: usize, x: u64, y: u64) -> Result<ContingencyTable> {
    let counts = (0..n * n)
        .map(|c| if c / n == c % n { x } else { y })
        .collect();
    Ok(ContingencyTable::new(vec![n, n], counts)?)
}

/// Conjectured maximizer, as expected counts: with `p = n / 2` (rounded
/// down) and `q = n - p`, a `p x p` block of `y + (x - y) / p`, a `q x q`
/// block of `y + (x - y) / q`, and `y` off the blocks.
pub fn conjecture_mle(n: usize, x: f64, y: f64) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need n >= 2, got {n}")));
    }
    if y > x {
        return Err(Error::InvalidArgument(format!(
            "need y <= x, got x = {x}, y = {y}"
        )));
    }
    let p = n / 2;
    let q = n - p;
    let a = y + (x - y) / p as f64;
    let c = y + (x - y) / q as f64;
    Ok(DMatrix::from_fn(n, n, |i, j| match (i < p, j < p) {
        (true, true) => a,
        (false, false) => c,
        _ => y,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjectureReport {
    pub n: usize,
    pub x: u64,
    pub y: u64,
    pub n_starts: usize,
    pub seed: u64,
    pub verdict: bool,
    pub best_loglik: f64,
    pub conjecture_loglik: f64,
    /// Relabeling taking the conjectured table onto the best fitted table,
    /// when one exists within 1e-4.
    pub permutation: Option<Vec<usize>>,
    pub best_fitted: Vec<f64>,
    pub conjectured: Vec<f64>,
    /// Distinct log-likelihood levels found, with their point counts.
    pub levels: Vec<(f64, usize)>,
}

/// Runs a two-class multistart on the `(n, x, y)` table and checks that the
/// best point found has the conjectured log-likelihood within 1e-6 and is a
/// simultaneous row/column relabeling of the conjectured table within 1e-4.
pub fn verify_conjecture(
    n: usize,
    x: u64,
    y: u64,
    n_starts: usize,
    seed: u64,
) -> Result<ConjectureReport> {
    let cfg = ExploreConfig {
        n_starts,
        seed,
        ..ExploreConfig::default()
    };
    verify_conjecture_with(n, x, y, &cfg)
}

pub fn verify_conjecture_with(
    n: usize,
    x: u64,
    y: u64,
    cfg: &ExploreConfig,
) -> Result<ConjectureReport> {
    let t = conjecture_data(n, x, y)?;
    let spec = ModelSpec::for_table(&t, 2)?;
    let conj = conjecture_mle(n, x as f64, y as f64)?;
    let total = t.total() as f64;
    let conjecture_loglik: f64 = t
        .counts()
        .iter()
        .enumerate()
        .map(|(c, &cnt)| cnt as f64 * (conj[(c / n, c % n)] / total).ln())
        .sum();
    let set = multistart_explore(&t, &spec, cfg)?;
    let best = set.best().ok_or_else(|| {
        Error::InvalidArgument("no multistart run reached a critical point".into())
    })?;
    let best_m = square(&best.fitted);
    let permutation = find_joint_permutation(&best_m, &conj, 1e-4).map(|p| p.images().to_vec());
    let verdict = (best.loglik - conjecture_loglik).abs() <= 1e-6 && permutation.is_some();
    Ok(ConjectureReport {
        n,
        x,
        y,
        n_starts: cfg.n_starts,
        seed: cfg.seed,
        verdict,
        best_loglik: best.loglik,
        conjecture_loglik,
        permutation,
        best_fitted: best.fitted.clone(),
        conjectured: conj.transpose().iter().copied().collect(),
        levels: set.levels(1e-6),
    })
}
