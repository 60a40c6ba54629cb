//! Latent class model parametrization, the accounting map from parameters to
//! cell probabilities, and the multinomial log-likelihood.
//!
//! A latent class model for `k` categorical variables with `d_1, .., d_k`
//! levels and `r` latent classes writes every cell probability as
//!
//! ```text
//! p(i_1, .., i_k) = sum_h lambda_h * prod_l cond[l][h][i_l]
//! ```
//!
//! where `lambda` is a point of the `(r-1)`-simplex and every `cond[l][h]` a
//! point of the `(d_l - 1)`-simplex.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tables::{multi_index, ContingencyTable};

/// Tolerance for simplex-sum checks on parameter blocks and probability tables.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Probabilities are floored here before taking logs, so that rounding never
/// turns a positive cell into `-inf`.
pub const LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dims: Vec<usize>,
    pub r: usize,
}

impl ModelSpec {
    pub fn new(dims: Vec<usize>, r: usize) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidArgument(
                "model needs at least one variable".into(),
            ));
        }
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidArgument(format!(
                "every variable needs at least 2 categories, got {dims:?}"
            )));
        }
        if r == 0 {
            return Err(Error::InvalidArgument(
                "at least one latent class is required".into(),
            ));
        }
        Ok(Self { dims, r })
    }

    /// Same observable variables as `t`.
    pub fn for_table(t: &ContingencyTable, r: usize) -> Result<Self> {
        Self::new(t.dims().to_vec(), r)
    }

    pub fn n_vars(&self) -> usize {
        self.dims.len()
    }

    /// Number of cells `d = prod d_l`.
    pub fn n_cells(&self) -> usize {
        self.dims.iter().product()
    }

    /// `r * sum(d_l - 1) + r - 1`: the parameter count, and the length of the
    /// free chart.
    pub fn standard_dimension(&self) -> usize {
        let free: usize = self.dims.iter().map(|d| d - 1).sum();
        self.r * free + self.r - 1
    }

    /// `d - 1`, the dimension of the probability simplex.
    pub fn complete_dimension(&self) -> usize {
        self.n_cells() - 1
    }

    /// Offset of the free coordinates of block `(l, h)` in the chart.
    pub fn block_offset(&self, l: usize, h: usize) -> usize {
        let before: usize = self.dims[..l].iter().map(|d| d - 1).sum();
        self.r - 1 + self.r * before + h * (self.dims[l] - 1)
    }

    pub(crate) fn check_table(&self, t: &ContingencyTable) -> Result<()> {
        if t.dims() != self.dims.as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "model dims {:?} vs table dims {:?}",
                self.dims,
                t.dims()
            )));
        }
        Ok(())
    }
}

/// A point of the parameter space: mixing weights plus one conditional
/// distribution per (variable, class) pair, indexed `cond[l][h][i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint {
    pub lambda: Vec<f64>,
    pub cond: Vec<Vec<Vec<f64>>>,
}

impl ParamPoint {
    /// Checks shapes against `spec` and that every block lies in its simplex.
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        self.check_shape(spec)?;
        for block in self.blocks() {
            let sum: f64 = block.iter().sum();
            if block.iter().any(|&x| x.is_nan() || x < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "parameter block {block:?} is not a probability vector"
                )));
            }
        }
        Ok(())
    }

    pub fn check_shape(&self, spec: &ModelSpec) -> Result<()> {
        let ok = self.lambda.len() == spec.r
            && self.cond.len() == spec.n_vars()
            && self.cond.iter().zip(&spec.dims).all(|(per_class, &d)| {
                per_class.len() == spec.r && per_class.iter().all(|v| v.len() == d)
            });
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "parameter point does not match model dims {:?} with r = {}",
                spec.dims, spec.r
            )))
        }
    }

    /// The model this point belongs to, read off its shape.
    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            dims: self.cond.iter().map(|c| c[0].len()).collect(),
            r: self.lambda.len(),
        }
    }

    /// Every class uniform on every variable, equal class weights.
    pub fn uniform(spec: &ModelSpec) -> Self {
        let r = spec.r;
        Self {
            lambda: vec![1.0 / r as f64; r],
            cond: spec
                .dims
                .iter()
                .map(|&d| vec![vec![1.0 / d as f64; d]; r])
                .collect(),
        }
    }

    /// Every simplex block drawn independently from the flat Dirichlet
    /// distribution.
    pub fn random<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Self {
        Self {
            lambda: flat_dirichlet(spec.r, rng),
            cond: spec
                .dims
                .iter()
                .map(|&d| (0..spec.r).map(|_| flat_dirichlet(d, rng)).collect())
                .collect(),
        }
    }

    /// All simplex blocks, weights first.
    pub fn blocks(&self) -> impl Iterator<Item = &Vec<f64>> {
        std::iter::once(&self.lambda).chain(self.cond.iter().flatten())
    }

    pub fn blocks_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        std::iter::once(&mut self.lambda).chain(self.cond.iter_mut().flatten())
    }

    pub fn min_coordinate(&self) -> f64 {
        self.blocks()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest absolute coordinate difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.blocks()
            .flatten()
            .zip(other.blocks().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Relabels latent classes: class `h` of the result is class `perm[h]` of
    /// `self`.
    pub fn permute_classes(&self, perm: &[usize]) -> Self {
        Self {
            lambda: perm.iter().map(|&h| self.lambda[h]).collect(),
            cond: self
                .cond
                .iter()
                .map(|per_class| perm.iter().map(|&h| per_class[h].clone()).collect())
                .collect(),
        }
    }

    /// Relabels the categories of variable `l` in every class: new category
    /// `i` is old category `sigma[i]`.
    pub fn permute_categories(&self, l: usize, sigma: &[usize]) -> Self {
        let mut out = self.clone();
        for (h, v) in out.cond[l].iter_mut().enumerate() {
            *v = sigma.iter().map(|&i| self.cond[l][h][i]).collect();
        }
        out
    }

    /// Clamps every coordinate at `floor` and renormalizes each block.
    pub fn project_interior(&mut self, floor: f64) {
        for block in self.blocks_mut() {
            for x in block.iter_mut() {
                if x.is_nan() || *x < floor {
                    *x = floor;
                }
            }
            let s: f64 = block.iter().sum();
            block.iter_mut().for_each(|x| *x /= s);
        }
    }

    /// Drops the last coordinate of every block.
    pub fn to_chart(&self) -> FreeChart {
        let mut v = Vec::new();
        for block in self.blocks() {
            v.extend_from_slice(&block[..block.len() - 1]);
        }
        FreeChart(v)
    }
}

fn flat_dirichlet<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Minimal coordinates: every simplex block of a [`ParamPoint`] with its last
/// coordinate dropped. Layout is `lambda[..r-1]` followed by the blocks
/// `cond[l][h][..d_l-1]` for `l` outer, `h` inner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeChart(pub Vec<f64>);

impl FreeChart {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Restores the dropped coordinates as one minus the block sum.
    pub fn to_param(&self, spec: &ModelSpec) -> Result<ParamPoint> {
        if self.0.len() != spec.standard_dimension() {
            return Err(Error::ShapeMismatch(format!(
                "chart has {} coordinates, model needs {}",
                self.0.len(),
                spec.standard_dimension()
            )));
        }
        let mut pos = 0;
        let mut take = |n: usize| {
            let free = &self.0[pos..pos + n - 1];
            pos += n - 1;
            let mut block = free.to_vec();
            block.push(1.0 - free.iter().sum::<f64>());
            block
        };
        let lambda = take(spec.r);
        let cond = spec
            .dims
            .iter()
            .map(|&d| (0..spec.r).map(|_| take(d)).collect())
            .collect();
        Ok(ParamPoint { lambda, cond })
    }

    /// Strictly inside every simplex, including the completed coordinates.
    pub fn is_interior(&self, spec: &ModelSpec) -> bool {
        self.to_param(spec)
            .map(|p| p.min_coordinate() > 0.0)
            .unwrap_or(false)
    }
}

/// A joint probability table over the observable cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbTable {
    pub dims: Vec<usize>,
    pub p: Vec<f64>,
}

impl ProbTable {
    /// Normalizes nonnegative weights into probabilities.
    pub fn from_weights(dims: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if dims.iter().product::<usize>() != weights.len() {
            return Err(Error::ShapeMismatch("weights do not match dims".into()));
        }
        let s: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w.is_nan() || w < 0.0) || s.is_nan() || s <= 0.0 {
            return Err(Error::InvalidArgument(
                "weights must be nonnegative with positive sum".into(),
            ));
        }
        Ok(Self {
            dims,
            p: weights.into_iter().map(|w| w / s).collect(),
        })
    }

    pub fn uniform(dims: Vec<usize>) -> Self {
        let d: usize = dims.iter().product();
        Self {
            dims,
            p: vec![1.0 / d as f64; d],
        }
    }

    /// Expected counts for a sample of size `n`.
    pub fn fitted_counts(&self, n: f64) -> Vec<f64> {
        self.p.iter().map(|&x| x * n).collect()
    }
}

/// Per-cell product `prod_l cond[l][h][i_l]` for every class, written into
/// `out` (length `r`).
fn class_products(theta: &ParamPoint, idx: &[usize], out: &mut [f64]) {
    for (h, q) in out.iter_mut().enumerate() {
        *q = theta
            .cond
            .iter()
            .zip(idx)
            .map(|(per_class, &i)| per_class[h][i])
            .product();
    }
}

/// Evaluates the accounting equations: the joint cell probabilities implied by
/// `theta`.
pub fn accounting_map(theta: &ParamPoint, spec: &ModelSpec) -> Result<ProbTable> {
    theta.check_shape(spec)?;
    let d = spec.n_cells();
    let mut idx = vec![0; spec.n_vars()];
    let mut q = vec![0.0; spec.r];
    let p = (0..d)
        .map(|cell| {
            multi_index(&spec.dims, cell, &mut idx);
            class_products(theta, &idx, &mut q);
            q.iter().zip(&theta.lambda).map(|(a, b)| a * b).sum()
        })
        .collect();
    Ok(ProbTable {
        dims: spec.dims.clone(),
        p,
    })
}

/// `sum n log p` over the cells, with `0 log 0 = 0`. A cell with positive
/// count and exactly zero probability yields `-inf`.
fn loglik_from_probs(p: &[f64], counts: &[u64]) -> f64 {
    let mut ll = 0.0;
    for (&pi, &n) in p.iter().zip(counts) {
        if n == 0 {
            continue;
        }
        if pi == 0.0 {
            return f64::NEG_INFINITY;
        }
        ll += n as f64 * pi.max(LOG_FLOOR).ln();
    }
    ll
}

/// Multinomial log-likelihood `sum n log p(theta)`, without the multinomial
/// coefficient.
pub fn log_likelihood(theta: &ParamPoint, t: &ContingencyTable) -> Result<f64> {
    let spec = theta.spec();
    spec.check_table(t)?;
    let p = accounting_map(theta, &spec)?;
    Ok(loglik_from_probs(&p.p, t.counts()))
}

/// Log-likelihood as a function of the cell probabilities directly. Model
/// membership is not checked here.
pub fn log_likelihood_p(p: &ProbTable, t: &ContingencyTable) -> Result<f64> {
    if p.dims != t.dims() {
        return Err(Error::ShapeMismatch(format!(
            "probability dims {:?} vs table dims {:?}",
            p.dims,
            t.dims()
        )));
    }
    Ok(loglik_from_probs(&p.p, t.counts()))
}

/// Log of the multinomial coefficient `N! / prod n_i!`, the constant separating
/// [`log_likelihood`] from the full multinomial log-probability.
pub fn log_multinomial_coefficient(t: &ContingencyTable) -> f64 {
    let ln_fact = |n: u64| (1..=n).map(|k| (k as f64).ln()).sum::<f64>();
    ln_fact(t.total()) - t.counts().iter().map(|&n| ln_fact(n)).sum::<f64>()
}

/// Closed-form maximum likelihood estimate of the single-class model: the
/// product of the observed one-way marginal proportions.
pub fn independence_fit(t: &ContingencyTable) -> ParamPoint {
    let dims = t.dims();
    let n = t.total() as f64;
    let mut margins: Vec<Vec<f64>> = dims.iter().map(|&d| vec![0.0; d]).collect();
    let mut idx = vec![0; dims.len()];
    for (cell, &c) in t.counts().iter().enumerate() {
        multi_index(dims, cell, &mut idx);
        for (m, &i) in margins.iter_mut().zip(&idx) {
            m[i] += c as f64;
        }
    }
    ParamPoint {
        lambda: vec![1.0],
        cond: margins
            .into_iter()
            .map(|m| vec![m.into_iter().map(|x| x / n).collect()])
            .collect(),
    }
}
