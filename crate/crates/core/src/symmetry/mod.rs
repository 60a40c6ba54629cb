//! Symmetry-aware exploration of likelihood surfaces for square two-way
//! tables: canonical forms under simultaneous row/column relabeling,
//! multistart critical-point enumeration, the `K + e f^T` decomposition with
//! pair averaging, and the block-diagonal maximum likelihood conjecture.

mod conjecture;
mod ef;
mod explore;

pub use conjecture::{
    conjecture_data, conjecture_mle, verify_conjecture, verify_conjecture_with, ConjectureReport,
};
pub use ef::{
    climb_rescaled, ef_decompose, reconstruct, symmetrize_and_climb, symmetrize_pair, ClimbResult,
    ClimbStep, EfDecomposition,
};
pub use explore::{multistart_explore, CriticalPoint, CriticalPointSet, ExploreConfig};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::model::ModelSpec;
use crate::tables::Permutation;

/// Canonicalization is exhaustive up to this side length.
pub const EXHAUSTIVE_LIMIT: usize = 8;

/// Entries closer than this (relative to the largest entry) compare equal.
const CANON_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Canonical {
    /// Row-major canonical table.
    pub table: Vec<f64>,
    /// `table[i][j] = input[sigma(i)][sigma(j)]`.
    pub permutation: Vec<usize>,
    /// False when the side exceeds [`EXHAUSTIVE_LIMIT`] and a row-signature
    /// heuristic was used instead of full enumeration.
    pub exhaustive: bool,
}

fn permuted(m: &DMatrix<f64>, sigma: &[usize]) -> Vec<f64> {
    let n = sigma.len();
    (0..n * n)
        .map(|c| m[(sigma[c / n], sigma[c % n])])
        .collect()
}

/// Lexicographic comparison with ties below `tol`.
fn lex_less(a: &[f64], b: &[f64], tol: f64) -> bool {
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > tol {
            return x < y;
        }
    }
    false
}

/// Lexicographically smallest row-major table among all simultaneous
/// row/column permutations of the square matrix `m`.
pub fn canonicalize(m: &DMatrix<f64>) -> Canonical {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "canonicalize needs a square matrix");
    let tol = CANON_TOL * m.amax().max(f64::MIN_POSITIVE);
    if n > EXHAUSTIVE_LIMIT {
        return signature_canonical(m);
    }
    let mut sigma: Vec<usize> = (0..n).collect();
    let mut best_sigma = sigma.clone();
    let mut best = permuted(m, &sigma);
    // Heap's algorithm over all n! relabelings
    let mut c = vec![0; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                sigma.swap(0, i);
            } else {
                sigma.swap(c[i], i);
            }
            let cand = permuted(m, &sigma);
            if lex_less(&cand, &best, tol) {
                best = cand;
                best_sigma.clone_from(&sigma);
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Canonical {
        table: best,
        permutation: best_sigma,
        exhaustive: true,
    }
}

/// Sorts indices by (diagonal entry, sorted row, sorted column). Ties keep
/// their input order, so the result is not a true canonical form.
fn signature_canonical(m: &DMatrix<f64>) -> Canonical {
    let n = m.nrows();
    let key = |i: usize| {
        let mut row: Vec<f64> = m.row(i).iter().copied().collect();
        let mut col: Vec<f64> = m.column(i).iter().copied().collect();
        row.sort_by(f64::total_cmp);
        col.sort_by(f64::total_cmp);
        let mut k = vec![m[(i, i)]];
        k.extend(row);
        k.extend(col);
        k
    };
    let keys: Vec<Vec<f64>> = (0..n).map(key).collect();
    let mut sigma: Vec<usize> = (0..n).collect();
    sigma.sort_by(|&a, &b| {
        keys[a]
            .iter()
            .zip(&keys[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Canonical {
        table: permuted(m, &sigma),
        permutation: sigma,
        exhaustive: false,
    }
}

/// A simultaneous relabeling `sigma` with `a[i][j] = b[sigma(i)][sigma(j)]`
/// within `tol`, found by backtracking.
pub fn find_joint_permutation(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> Option<Permutation> {
    let n = a.nrows();
    if a.shape() != b.shape() || n != a.ncols() {
        return None;
    }
    let close = |x: f64, y: f64| (x - y).abs() <= tol;
    let mut sigma = vec![usize::MAX; n];
    let mut used = vec![false; n];
    fn extend(
        i: usize,
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        sigma: &mut Vec<usize>,
        used: &mut Vec<bool>,
        close: &dyn Fn(f64, f64) -> bool,
    ) -> bool {
        let n = sigma.len();
        if i == n {
            return true;
        }
        for cand in 0..n {
            if used[cand] || !close(a[(i, i)], b[(cand, cand)]) {
                continue;
            }
            let consistent = (0..i).all(|k| {
                close(a[(i, k)], b[(cand, sigma[k])]) && close(a[(k, i)], b[(sigma[k], cand)])
            });
            if !consistent {
                continue;
            }
            sigma[i] = cand;
            used[cand] = true;
            if extend(i + 1, a, b, sigma, used, close) {
                return true;
            }
            used[cand] = false;
        }
        false
    }
    extend(0, a, b, &mut sigma, &mut used, &close)
        .then(|| Permutation::new(sigma).expect("bijection by construction"))
}

/// `-2 loglik + standard_dimension * ln N`.
pub fn bic(loglik: f64, spec: &ModelSpec, n: u64) -> f64 {
    bic_with_dimension(loglik, spec.standard_dimension(), n)
}

pub fn bic_with_dimension(loglik: f64, dimension: usize, n: u64) -> f64 {
    -2.0 * loglik + dimension as f64 * (n as f64).ln()
}

/// Square matrix view of row-major entries.
pub fn square(entries: &[f64]) -> DMatrix<f64> {
    let n = (entries.len() as f64).sqrt().round() as usize;
    assert_eq!(n * n, entries.len(), "entries do not form a square");
    DMatrix::from_row_slice(n, n, entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(n: usize, cut: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| if (i < cut) == (j < cut) { 3.0 } else { 2.0 })
    }

    #[test]
    fn canonical_form_is_idempotent_and_invariant() {
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[
                3.0, 2.0, 3.0, 2.0, 2.0, 3.0, 2.0, 3.0, 3.0, 2.0, 3.0, 2.0, 2.0, 3.0, 2.0, 3.0,
            ],
        );
        let c = canonicalize(&m);
        assert!(c.exhaustive);
        assert_eq!(c.table, canonicalize(&square(&c.table)).table);
        assert_eq!(c.table, canonicalize(&block(4, 2)).table);
        // the diagonal is fixed, so the first row is as small as it can be after it
        assert_eq!(&c.table[..4], &[3.0, 2.0, 2.0, 3.0]);
    }

    #[test]
    fn joint_permutation_search() {
        let a = block(6, 3);
        let sigma = Permutation::new(vec![4, 0, 5, 1, 3, 2]).unwrap();
        let b = DMatrix::from_fn(6, 6, |i, j| {
            a[(sigma.inverse().apply(i), sigma.inverse().apply(j))]
        });
        let found = find_joint_permutation(&a, &b, 1e-12).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(a[(i, j)], b[(found.apply(i), found.apply(j))]);
            }
        }
        assert!(find_joint_permutation(&block(6, 3), &block(6, 2), 1e-12).is_none());
    }

    #[test]
    fn large_tables_use_the_heuristic() {
        let c = canonicalize(&block(10, 5));
        assert!(!c.exhaustive);
        assert_eq!(c.table.len(), 100);
    }

    #[test]
    fn bic_zero() {
        assert_eq!(bic_with_dimension(0.0, 0, 100), 0.0);
    }
}
