//! Equal-margin rank-two tables written as `M = K + e f^T`, and pair
//! averaging of the deviation vectors.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tables::ContingencyTable;

/// `M[i][j] = k + e[i] f[j]` with `sum e = sum f = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfDecomposition {
    pub k: f64,
    pub e: Vec<f64>,
    pub f: Vec<f64>,
}

impl EfDecomposition {
    pub fn new(k: f64, e: Vec<f64>, f: Vec<f64>) -> Self {
        let mut dec = Self { k, e, f };
        dec.fix_sign();
        dec
    }

    /// Flips `(e, f)` to `(-e, -f)` when the first nonzero entry of `e` is
    /// negative.
    fn fix_sign(&mut self) {
        let scale = self.e.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if let Some(&first) = self.e.iter().find(|x| x.abs() > 1e-12 * scale) {
            if first < 0.0 {
                self.e.iter_mut().for_each(|x| *x = -*x);
                self.f.iter_mut().for_each(|x| *x = -*x);
            }
        }
    }

    pub fn n(&self) -> usize {
        self.e.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        reconstruct(self)
    }
}

pub fn reconstruct(dec: &EfDecomposition) -> DMatrix<f64> {
    let n = dec.n();
    DMatrix::from_fn(n, n, |i, j| dec.k + dec.e[i] * dec.f[j])
}

/// Splits a square matrix with equal row sums and equal column sums into its
/// mean entry plus a rank-one deviation, balanced so that `|e| = |f|`.
/// The deviation is factored through its largest entry.
pub fn ef_decompose(m: &DMatrix<f64>) -> Result<EfDecomposition> {
    let n = m.nrows();
    if n != m.ncols() || n == 0 {
        return Err(Error::NotSquare(vec![m.nrows(), m.ncols()]));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let margin_tol = 1e-8 * scale * n as f64;
    let rows: Vec<f64> = m.row_iter().map(|r| r.sum()).collect();
    let cols: Vec<f64> = m.column_iter().map(|c| c.sum()).collect();
    for sums in [&rows, &cols] {
        let spread = sums.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(x))
            - sums.iter().fold(f64::INFINITY, |a, &x| a.min(x));
        if spread > margin_tol {
            return Err(Error::Decomposition(format!(
                "unequal margins (spread {spread:e})"
            )));
        }
    }
    let k = m.sum() / (n * n) as f64;
    let dev = m.map(|x| x - k);
    let (pi, pj) = dev.iamax_full();
    let pivot = dev[(pi, pj)];
    if pivot.abs() <= 1e-14 * scale {
        return Ok(EfDecomposition::new(k, vec![0.0; n], vec![0.0; n]));
    }
    // a rank-one matrix is its pivot column times its pivot row over the pivot
    let col: Vec<f64> = dev.column(pj).iter().copied().collect();
    let row: Vec<f64> = dev.row(pi).iter().map(|x| x / pivot).collect();
    let residual = (0..n * n)
        .map(|c| (dev[(c / n, c % n)] - col[c / n] * row[c % n]).abs())
        .fold(0.0, f64::max);
    if residual > 1e-8 * scale {
        return Err(Error::Decomposition(format!(
            "deviation from the mean has rank above one (residual {residual:e})"
        )));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let balance = (norm(&row) / norm(&col)).sqrt();
    let e: Vec<f64> = col.iter().map(|x| x * balance).collect();
    let f: Vec<f64> = row.iter().map(|x| x / balance).collect();
    Ok(EfDecomposition::new(k, e, f))
}

/// Replaces `e_i, e_j` by their mean and `f_i, f_j` by theirs.
pub fn symmetrize_pair(dec: &EfDecomposition, i: usize, j: usize) -> EfDecomposition {
    assert!(
        i != j && i < dec.n() && j < dec.n(),
        "pair ({i}, {j}) is not a valid distinct pair"
    );
    let mut out = dec.clone();
    let em = 0.5 * (dec.e[i] + dec.e[j]);
    let fm = 0.5 * (dec.f[i] + dec.f[j]);
    out.e[i] = em;
    out.e[j] = em;
    out.f[i] = fm;
    out.f[j] = fm;
    out
}

/// `sum n log p` of the reconstructed table normalized to probabilities, or
/// `None` if an entry is not positive where the data has mass.
fn table_loglik(dec: &EfDecomposition, t: &ContingencyTable) -> Option<f64> {
    let m = reconstruct(dec);
    let n = dec.n();
    let total = m.sum();
    let mut ll = 0.0;
    for (c, &cnt) in t.counts().iter().enumerate() {
        let x = m[(c / n, c % n)];
        if x < 0.0 {
            return None;
        }
        if cnt > 0 {
            if x == 0.0 {
                return None;
            }
            ll += cnt as f64 * (x / total).ln();
        }
    }
    Some(ll)
}

/// Scales the deviation to the likelihood-maximizing multiple `s e f^T`,
/// keeping the table nonnegative. The log-likelihood is concave in `s`, so
/// bisection on its derivative finds the maximizer.
pub fn climb_rescaled(dec: &EfDecomposition, t: &ContingencyTable) -> EfDecomposition {
    let n = dec.n();
    let prod: Vec<f64> = (0..n * n).map(|c| dec.e[c / n] * dec.f[c % n]).collect();
    // s must keep k + s * prod > 0 on every cell
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for &p in &prod {
        if p > 0.0 {
            lo = lo.max(-dec.k / p);
        } else if p < 0.0 {
            hi = hi.min(-dec.k / p);
        }
    }
    // the products sum to zero, so both bounds are finite unless all vanish
    if !lo.is_finite() || !hi.is_finite() {
        return dec.clone();
    }
    let deriv = |s: f64| -> f64 {
        t.counts()
            .iter()
            .zip(&prod)
            .map(|(&cnt, &p)| cnt as f64 * p / (dec.k + s * p))
            .sum()
    };
    let pad = 1e-12 * (hi - lo);
    let (mut a, mut b) = (lo + pad, hi - pad);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if deriv(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        if (b - a).abs() <= 1e-15 * mid.abs().max(1.0) {
            break;
        }
    }
    let s = 0.5 * (a + b);
    let root = s.abs().sqrt();
    let sign = if s < 0.0 { -1.0 } else { 1.0 };
    EfDecomposition::new(
        dec.k,
        dec.e.iter().map(|x| sign * root * x).collect(),
        dec.f.iter().map(|x| root * x).collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClimbStep {
    pub pair: (usize, usize),
    /// Log-likelihood right after averaging.
    pub averaged_loglik: Option<f64>,
    /// Log-likelihood after rescaling the deviation; the trace value.
    pub loglik: f64,
    pub increased: bool,
    /// The averaged table had a negative entry; the step was skipped.
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClimbResult {
    pub start_loglik: f64,
    pub decomposition: EfDecomposition,
    pub steps: Vec<ClimbStep>,
}

impl ClimbResult {
    /// Starting value followed by the value after every step.
    pub fn trace(&self) -> Vec<f64> {
        std::iter::once(self.start_loglik)
            .chain(self.steps.iter().map(|s| s.loglik))
            .collect()
    }

    pub fn final_loglik(&self) -> f64 {
        self.steps.last().map_or(self.start_loglik, |s| s.loglik)
    }

    pub fn is_non_decreasing(&self, slack: f64) -> bool {
        self.trace().windows(2).all(|w| w[1] >= w[0] - slack)
    }
}

/// Applies the pair averages in `schedule`, `rounds` times over, rescaling
/// the deviation after each average.
pub fn symmetrize_and_climb(
    t: &ContingencyTable,
    dec: &EfDecomposition,
    schedule: &[(usize, usize)],
    rounds: usize,
) -> Result<ClimbResult> {
    let n = dec.n();
    if t.dims() != [n, n] {
        return Err(Error::ShapeMismatch(format!(
            "{n}x{n} decomposition vs table dims {:?}",
            t.dims()
        )));
    }
    for &(i, j) in schedule {
        if i == j || i >= n || j >= n {
            return Err(Error::InvalidArgument(format!(
                "invalid averaging pair ({i}, {j})"
            )));
        }
    }
    let start_loglik = table_loglik(dec, t).ok_or_else(|| {
        Error::InvalidArgument("starting decomposition has a negative entry".into())
    })?;
    let mut cur = dec.clone();
    let mut cur_ll = start_loglik;
    let mut steps = Vec::new();
    for _ in 0..rounds {
        for &(i, j) in schedule {
            let averaged = symmetrize_pair(&cur, i, j);
            let averaged_loglik = table_loglik(&averaged, t);
            if averaged_loglik.is_none() {
                steps.push(ClimbStep {
                    pair: (i, j),
                    averaged_loglik,
                    loglik: cur_ll,
                    increased: false,
                    rejected: true,
                });
                continue;
            }
            let next = climb_rescaled(&averaged, t);
            let ll = table_loglik(&next, t).expect("rescaling stays nonnegative");
            steps.push(ClimbStep {
                pair: (i, j),
                averaged_loglik,
                loglik: ll,
                increased: ll > cur_ll,
                rejected: false,
            });
            cur = next;
            cur_ll = ll;
        }
    }
    Ok(ClimbResult {
        start_loglik,
        decomposition: cur,
        steps,
    })
}
