//! Exact first and second derivatives of the accounting map and of the
//! log-likelihood, taken with respect to the free chart coordinates.
//!
//! Every cell probability is multilinear in the simplex blocks, so all
//! second derivatives within one block vanish and the only nonzero mixed
//! terms couple the weights with a conditional block, or two conditional
//! blocks of the same class on different variables.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{FreeChart, ModelSpec, ParamPoint};
use crate::tables::{multi_index, ContingencyTable};

/// Scratch state for derivative evaluation at one parameter point.
struct CellEvaluator<'a> {
    spec: &'a ModelSpec,
    theta: ParamPoint,
    offsets: Vec<Vec<usize>>,
    idx: Vec<usize>,
    factors: Vec<Vec<f64>>,
    q: Vec<f64>,
    jac: Vec<f64>,
}

impl<'a> CellEvaluator<'a> {
    fn new(spec: &'a ModelSpec, chart: &FreeChart) -> Result<Self> {
        let theta = chart.to_param(spec)?;
        if theta.min_coordinate().is_nan() || theta.min_coordinate() <= 0.0 {
            return Err(Error::BoundaryPoint);
        }
        let offsets = (0..spec.n_vars())
            .map(|l| (0..spec.r).map(|h| spec.block_offset(l, h)).collect())
            .collect();
        Ok(Self {
            spec,
            theta,
            offsets,
            idx: vec![0; spec.n_vars()],
            factors: vec![vec![0.0; spec.r]; spec.n_vars()],
            q: vec![0.0; spec.r],
            jac: vec![0.0; spec.standard_dimension()],
        })
    }

    /// Free coordinates touched by `cond[l][h][c_l]`, with their signs.
    fn touched(&self, l: usize, h: usize) -> impl Iterator<Item = (usize, f64)> {
        let d = self.spec.dims[l];
        let c = self.idx[l];
        let off = self.offsets[l][h];
        let (range, sign) = if c + 1 < d {
            (c..c + 1, 1.0)
        } else {
            (0..d - 1, -1.0)
        };
        range.map(move |i| (off + i, sign))
    }

    fn product_except(&self, h: usize, skip: &[usize]) -> f64 {
        self.factors
            .iter()
            .enumerate()
            .filter(|(m, _)| !skip.contains(m))
            .map(|(_, f)| f[h])
            .product()
    }

    /// Loads cell `cell`, fills `self.jac` with `dp/dx` and returns `p`.
    fn load(&mut self, cell: usize) -> f64 {
        let spec = self.spec;
        let r = spec.r;
        multi_index(&spec.dims, cell, &mut self.idx);
        for l in 0..spec.n_vars() {
            for h in 0..r {
                self.factors[l][h] = self.theta.cond[l][h][self.idx[l]];
            }
        }
        for h in 0..r {
            self.q[h] = self.product_except(h, &[]);
        }
        self.jac.iter_mut().for_each(|x| *x = 0.0);
        for g in 0..r - 1 {
            self.jac[g] = self.q[g] - self.q[r - 1];
        }
        for l in 0..spec.n_vars() {
            for h in 0..r {
                let e = self.theta.lambda[h] * self.product_except(h, &[l]);
                let touched: Vec<_> = self.touched(l, h).collect();
                for (col, s) in touched {
                    self.jac[col] += s * e;
                }
            }
        }
        self.q
            .iter()
            .zip(&self.theta.lambda)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Adds `w * d2p/dx dx'` for the loaded cell to the upper triangle of `m`.
    fn add_second(&self, w: f64, m: &mut DMatrix<f64>) {
        let spec = self.spec;
        let r = spec.r;
        let k = spec.n_vars();
        for h in 0..r {
            for l in 0..k {
                let e = self.product_except(h, &[l]);
                for (col, s) in self.touched(l, h) {
                    if h + 1 < r {
                        m[(h, col)] += w * s * e;
                    } else {
                        for g in 0..r - 1 {
                            m[(g, col)] -= w * s * e;
                        }
                    }
                }
                for l2 in l + 1..k {
                    let e2 = w * self.theta.lambda[h] * self.product_except(h, &[l, l2]);
                    for (col, s) in self.touched(l, h) {
                        for (col2, s2) in self.touched(l2, h) {
                            m[(col, col2)] += s * s2 * e2;
                        }
                    }
                }
            }
        }
    }
}

/// Jacobian of `chart -> p` with the last cell dropped: a
/// `(d - 1) x standard_dimension` matrix.
pub fn model_jacobian(chart: &FreeChart, spec: &ModelSpec) -> Result<DMatrix<f64>> {
    let mut ev = CellEvaluator::new(spec, chart)?;
    let rows = spec.n_cells() - 1;
    let mut j = DMatrix::zeros(rows, spec.standard_dimension());
    for cell in 0..rows {
        ev.load(cell);
        for (c, &v) in ev.jac.iter().enumerate() {
            j[(cell, c)] = v;
        }
    }
    Ok(j)
}

fn check(spec: &ModelSpec, t: &ContingencyTable) -> Result<()> {
    if spec.dims != t.dims() {
        return Err(Error::ShapeMismatch(format!(
            "model dims {:?} vs table dims {:?}",
            spec.dims,
            t.dims()
        )));
    }
    Ok(())
}

/// Gradient of the log-likelihood in the free chart.
pub fn score(chart: &FreeChart, spec: &ModelSpec, t: &ContingencyTable) -> Result<DVector<f64>> {
    check(spec, t)?;
    let mut ev = CellEvaluator::new(spec, chart)?;
    let mut g = DVector::zeros(spec.standard_dimension());
    for (cell, &n) in t.counts().iter().enumerate() {
        if n == 0 {
            continue;
        }
        let p = ev.load(cell);
        let w = n as f64 / p;
        for (gi, &ji) in g.iter_mut().zip(&ev.jac) {
            *gi += w * ji;
        }
    }
    Ok(g)
}

/// Gradient and Hessian of the log-likelihood in the free chart. The Hessian
/// is assembled from its upper triangle, so it is exactly symmetric.
pub fn score_and_hessian(
    chart: &FreeChart,
    spec: &ModelSpec,
    t: &ContingencyTable,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check(spec, t)?;
    let mut ev = CellEvaluator::new(spec, chart)?;
    let dim = spec.standard_dimension();
    let mut g = DVector::zeros(dim);
    let mut h = DMatrix::zeros(dim, dim);
    for (cell, &n) in t.counts().iter().enumerate() {
        if n == 0 {
            continue;
        }
        let p = ev.load(cell);
        let n = n as f64;
        let w = n / p;
        let w2 = n / (p * p);
        ev.add_second(w, &mut h);
        for a in 0..dim {
            let ja = ev.jac[a];
            g[a] += w * ja;
            if ja == 0.0 {
                continue;
            }
            for b in a..dim {
                h[(a, b)] -= w2 * ja * ev.jac[b];
            }
        }
    }
    h.fill_lower_triangle_with_upper_triangle();
    Ok((g, h))
}

pub fn hessian(chart: &FreeChart, spec: &ModelSpec, t: &ContingencyTable) -> Result<DMatrix<f64>> {
    score_and_hessian(chart, spec, t).map(|(_, h)| h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{accounting_map, log_likelihood};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chart_loglik(x: &[f64], spec: &ModelSpec, t: &ContingencyTable) -> f64 {
        let theta = FreeChart(x.to_vec()).to_param(spec).unwrap();
        log_likelihood(&theta, t).unwrap()
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let spec = ModelSpec::new(vec![3, 2, 4], 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let theta = ParamPoint::random(&spec, &mut rng);
        let x = theta.to_chart();
        let j = model_jacobian(&x, &spec).unwrap();
        let h = 1e-6;
        for c in 0..x.0.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp.0[c] += h;
            xm.0[c] -= h;
            let pp = accounting_map(&xp.to_param(&spec).unwrap(), &spec).unwrap();
            let pm = accounting_map(&xm.to_param(&spec).unwrap(), &spec).unwrap();
            for row in 0..j.nrows() {
                let fd = (pp.p[row] - pm.p[row]) / (2.0 * h);
                assert!((fd - j[(row, c)]).abs() < 1e-8, "row {row} col {c}");
            }
        }
    }

    #[test]
    fn single_variable_hessian_block() {
        // r = 1, k = 1: l(x) = sum n_i log x_i with x_last = 1 - sum x
        let t = crate::tables::load_table(r#"{"dims": [3], "counts": [2, 3, 5]}"#).unwrap();
        let spec = ModelSpec::new(vec![3], 1).unwrap();
        let x = FreeChart(vec![0.2, 0.3]);
        let (g, h) = score_and_hessian(&x, &spec, &t).unwrap();
        assert!((g[0] - (2.0 / 0.2 - 5.0 / 0.5)).abs() < 1e-12);
        assert!((g[1] - (3.0 / 0.3 - 5.0 / 0.5)).abs() < 1e-12);
        assert!((h[(0, 0)] - (-2.0 / 0.04 - 5.0 / 0.25)).abs() < 1e-9);
        assert!((h[(0, 1)] - (-5.0 / 0.25)).abs() < 1e-9);
    }

    #[test]
    fn boundary_points_are_rejected() {
        let spec = ModelSpec::new(vec![2, 2], 2).unwrap();
        let x = FreeChart(vec![0.5, 0.0, 0.5, 0.5, 0.5]);
        assert!(matches!(
            model_jacobian(&x, &spec),
            Err(Error::BoundaryPoint)
        ));
        let x = FreeChart(vec![1.0, 0.5, 0.5, 0.5, 0.5]);
        let t = crate::tables::load_table("1,2\n3,4\n").unwrap();
        assert!(matches!(score(&x, &spec, &t), Err(Error::BoundaryPoint)));
    }

    #[test]
    fn hessian_is_exactly_symmetric() {
        let t = crate::fixtures::influenza();
        let spec = ModelSpec::for_table(&t, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = ParamPoint::random(&spec, &mut rng).to_chart();
        let h = hessian(&x, &spec, &t).unwrap();
        assert_eq!((&h - h.transpose()).amax(), 0.0);
        // finite-difference spot check on one entry
        let step = 1e-5;
        let (a, b) = (4, 9);
        let f = |da: f64, db: f64| {
            let mut y = x.0.clone();
            y[a] += da;
            y[b] += db;
            chart_loglik(&y, &spec, &t)
        };
        let fd = (f(step, step) - f(step, -step) - f(-step, step) + f(-step, -step))
            / (4.0 * step * step);
        assert!((fd - h[(a, b)]).abs() < 1e-4 * h[(a, b)].abs().max(1.0));
    }
}
