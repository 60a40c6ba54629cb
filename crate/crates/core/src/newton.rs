//! Modified Newton-Raphson ascent in the free chart.
//!
//! Each step solves `(mu I - H) delta = g` with the smallest shift `mu` from a
//! power-of-two ladder that makes `H - mu I` negative definite, then picks the
//! step length by bisection until the weak Wolfe conditions hold.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::derivatives::{hessian, score, score_and_hessian};
use crate::em::{finish_fit, FitResult, BOUNDARY_TOL, CRITICAL_GRAD_TOL};
use crate::error::{Error, Result};
use crate::linalg::singular_values;
use crate::model::{accounting_map, log_likelihood, FreeChart, ModelSpec, ParamPoint, ProbTable};
use crate::tables::{multi_index, ContingencyTable};

/// Coordinates are clamped here when a step leaves the parameter space.
pub const PROJECTION_FLOOR: f64 = 1e-10;
/// Line-search bisections before giving up.
pub const MAX_BISECTIONS: usize = 60;
/// Times the shift is raised after a failed line search.
const MAX_SHIFT_RAISES: usize = 12;
/// A projected step gaining less than this fraction of `|loglik|` only maps
/// the boundary point back onto itself.
const STALL_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub max_iterations: usize,
    pub grad_tol: f64,
    pub c1: f64,
    pub c2: f64,
    /// The shifted Hessian must have every eigenvalue at or below
    /// `-shift_margin * |H|`.
    pub shift_margin: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            grad_tol: 1e-8,
            c1: 1e-4,
            c2: 0.9,
            shift_margin: 1e-10,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "Wolfe constants need 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.c1, self.c2
            )));
        }
        if !(self.grad_tol > 0.0 && self.shift_margin > 0.0) {
            return Err(Error::InvalidArgument(
                "Newton tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One accepted Newton iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonIterate {
    pub iteration: usize,
    /// Log-likelihood after the step.
    pub loglik: f64,
    /// Gradient norm before the step.
    pub gradient_norm: f64,
    pub step: f64,
    /// Log-likelihood increase, computed cell by cell so that it stays
    /// accurate when far below the resolution of `loglik`.
    pub gain: f64,
    pub shift: f64,
    /// Largest eigenvalue of the shifted Hessian used for the step.
    pub shifted_max_eigenvalue: f64,
    pub projected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonOutcome {
    pub fit: FitResult,
    pub trace: Vec<NewtonIterate>,
}

impl NewtonOutcome {
    /// The trace as CSV with a header row.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,loglik,gradient_norm,step,shift\n");
        for it in &self.trace {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                it.iteration, it.loglik, it.gradient_norm, it.step, it.shift
            ));
        }
        out
    }
}

/// Smallest `mu` of the form `2^k` (or zero) with `lambda_max - mu <= -margin`.
fn ladder_shift(lambda_max: f64, margin: f64) -> f64 {
    let need = lambda_max + margin;
    if need <= 0.0 {
        return 0.0;
    }
    let mut mu = 2f64.powi(need.log2().ceil() as i32);
    while mu < need {
        mu *= 2.0;
    }
    while mu / 2.0 >= need {
        mu /= 2.0;
    }
    mu
}

/// Eigendecomposition of the Hessian, reused for every shift tried.
struct ShiftedSolver {
    eig: SymmetricEigen<f64, nalgebra::Dyn>,
    coeffs: DVector<f64>,
    norm: f64,
    top: f64,
}

impl ShiftedSolver {
    fn new(g: &DVector<f64>, h: &DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(h.clone());
        let coeffs = eig.eigenvectors.transpose() * g;
        let norm = eig.eigenvalues.amax();
        let top = eig.eigenvalues.max();
        Self {
            eig,
            coeffs,
            norm,
            top,
        }
    }

    /// Ascent direction `(mu I - H)^{-1} g`.
    fn direction(&self, mu: f64) -> DVector<f64> {
        let scaled = DVector::from_iterator(
            self.coeffs.len(),
            self.coeffs
                .iter()
                .zip(self.eig.eigenvalues.iter())
                .map(|(c, l)| c / (mu - l)),
        );
        &self.eig.eigenvectors * scaled
    }
}

/// The face of the parameter space holding a point near the boundary.
/// Each block is re-charted with its largest coordinate dropped, so only the
/// kept coordinates can reach zero; those at zero whose gradient points
/// outward are frozen and the step is taken in the remaining ones.
struct BoundaryFace {
    /// Jacobian of the standard chart with respect to the face chart.
    jac: DMatrix<f64>,
    free: Vec<usize>,
    g: DVector<f64>,
    h: DMatrix<f64>,
}

impl BoundaryFace {
    fn new(theta: &ParamPoint, g: &DVector<f64>, h: &DMatrix<f64>) -> Self {
        let n = g.len();
        let mut jac = DMatrix::zeros(n, n);
        let mut coords = Vec::with_capacity(n);
        let mut offset = 0;
        for block in theta.blocks() {
            let k = block
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map_or(0, |(i, _)| i);
            let free = block.len() - 1;
            let pos = |j: usize| if j < k { j } else { j - 1 };
            for j in 0..free {
                if j == k {
                    for q in 0..free {
                        jac[(offset + j, offset + q)] = -1.0;
                    }
                } else {
                    jac[(offset + j, offset + pos(j))] = 1.0;
                }
            }
            coords.extend(
                block
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != k)
                    .map(|(_, &v)| v),
            );
            offset += free;
        }
        let g_face = jac.transpose() * g;
        let free: Vec<usize> = (0..n)
            .filter(|&i| coords[i] >= BOUNDARY_TOL || g_face[i] > 0.0)
            .collect();
        let h_face = jac.transpose() * h * &jac;
        Self {
            g: g_face.select_rows(&free),
            h: h_face.select_rows(&free).select_columns(&free),
            jac,
            free,
        }
    }

    /// A face-chart step on the free coordinates as a standard-chart step.
    fn lift(&self, step: &DVector<f64>) -> DVector<f64> {
        let mut full = DVector::zeros(self.jac.ncols());
        for (&i, &v) in self.free.iter().zip(step.iter()) {
            full[i] = v;
        }
        &self.jac * full
    }
}

/// Moves `x` by `alpha * delta`, projecting back into the interior if the
/// result leaves it. Returns the point and whether projection happened.
fn trial_point(
    x: &FreeChart,
    delta: &DVector<f64>,
    alpha: f64,
    spec: &ModelSpec,
) -> Result<(ParamPoint, bool)> {
    let y = FreeChart(
        x.0.iter()
            .zip(delta.iter())
            .map(|(a, d)| a + alpha * d)
            .collect(),
    );
    let mut theta = y.to_param(spec)?;
    if theta.min_coordinate() >= PROJECTION_FLOOR {
        return Ok((theta, false));
    }
    theta.project_interior(PROJECTION_FLOOR);
    Ok((theta, true))
}

/// Coordinate differences `y - x` as a parameter-shaped point, with the
/// dropped coordinate of each block differing by minus the block sum.
fn chart_difference(x: &FreeChart, y: &FreeChart, spec: &ModelSpec) -> ParamPoint {
    let d: Vec<f64> = x.0.iter().zip(&y.0).map(|(a, b)| b - a).collect();
    let mut pos = 0;
    let mut take = |n: usize| {
        let mut block = d[pos..pos + n - 1].to_vec();
        pos += n - 1;
        block.push(-block.iter().sum::<f64>());
        block
    };
    let lambda = take(spec.r);
    let cond = spec
        .dims
        .iter()
        .map(|&k| (0..spec.r).map(|_| take(k)).collect())
        .collect();
    ParamPoint { lambda, cond }
}

/// Coordinatewise `new - old`.
fn point_difference(new: &ParamPoint, old: &ParamPoint) -> ParamPoint {
    let sub = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<f64>>();
    ParamPoint {
        lambda: sub(&new.lambda, &old.lambda),
        cond: new
            .cond
            .iter()
            .zip(&old.cond)
            .map(|(nl, ol)| nl.iter().zip(ol).map(|(a, b)| sub(a, b)).collect())
            .collect(),
    }
}

/// `l(old + diff) - l(old)` as `sum n log1p(dp / p)`, with each cell change
/// `dp` telescoped from the coordinate differences so that it keeps full
/// relative precision when the two points are close.
fn loglik_gain(
    diff: &ParamPoint,
    old: &ParamPoint,
    old_p: &ProbTable,
    t: &ContingencyTable,
) -> f64 {
    let dims = t.dims();
    let n_vars = dims.len();
    let mut idx = vec![0; n_vars];
    let mut gain = 0.0;
    for (cell, (&b, &n)) in old_p.p.iter().zip(t.counts()).enumerate() {
        if n == 0 {
            continue;
        }
        multi_index(dims, cell, &mut idx);
        let mut dp = 0.0;
        for h in 0..old.lambda.len() {
            // factor 0 is the class weight, factor l + 1 the l-th conditional
            let factor = |theta: &ParamPoint, k: usize| {
                if k == 0 {
                    theta.lambda[h]
                } else {
                    theta.cond[k - 1][h][idx[k - 1]]
                }
            };
            for k in 0..=n_vars {
                let step = factor(diff, k);
                if step == 0.0 {
                    continue;
                }
                let before: f64 = (0..k).map(|j| factor(old, j) + factor(diff, j)).product();
                let after: f64 = (k + 1..=n_vars).map(|j| factor(old, j)).product();
                dp += before * step * after;
            }
        }
        let ratio = dp / b;
        if ratio <= -1.0 {
            return f64::NEG_INFINITY;
        }
        gain += n as f64 * ratio.ln_1p();
    }
    gain
}

type Accepted = (ParamPoint, ProbTable, f64, f64, bool);

/// Weak Wolfe bisection along `delta`. Returns the accepted point, its cell
/// probabilities, the gain, the step length and whether it was projected.
fn line_search(
    theta: &ParamPoint,
    delta: &DVector<f64>,
    slope: f64,
    probs: &ProbTable,
    spec: &ModelSpec,
    t: &ContingencyTable,
    cfg: &NewtonConfig,
) -> Result<Option<Accepted>> {
    let x = theta.to_chart();
    // the chart round trip can move the last coordinate of a block by an ulp
    let base = x.to_param(spec)?;
    let (mut lo, mut hi, mut alpha) = (0.0, f64::INFINITY, 1.0);
    let mut sufficient = None;
    for _ in 0..=MAX_BISECTIONS {
        let (cand, projected) = trial_point(&x, delta, alpha, spec)?;
        let cand_p = accounting_map(&cand, spec)?;
        let diff = if projected {
            point_difference(&cand, &base)
        } else {
            chart_difference(&x, &cand.to_chart(), spec)
        };
        let gain = loglik_gain(&diff, &base, probs, t);
        let armijo = gain >= cfg.c1 * alpha * slope && gain > 0.0;
        if !armijo {
            hi = alpha;
        } else if projected {
            return Ok(Some((cand, cand_p, gain, alpha, projected)));
        } else {
            let slope_new = score(&cand.to_chart(), spec, t)?.dot(delta);
            if slope_new <= cfg.c2 * slope {
                return Ok(Some((cand, cand_p, gain, alpha, projected)));
            }
            lo = alpha;
            sufficient = Some((cand, cand_p, gain, alpha, projected));
        }
        alpha = if hi.is_finite() {
            0.5 * (lo + hi)
        } else {
            2.0 * lo
        };
    }
    // the curvature condition never held: keep the longest step with
    // sufficient increase
    Ok(sufficient)
}

/// Runs modified Newton from `theta0`, returning the fit and the per-step trace.
pub fn newton_fit_traced(
    theta0: &ParamPoint,
    t: &ContingencyTable,
    cfg: &NewtonConfig,
) -> Result<NewtonOutcome> {
    cfg.validate()?;
    let spec = theta0.spec();
    spec.check_table(t)?;
    theta0.validate(&spec)?;
    if theta0.min_coordinate().is_nan() || theta0.min_coordinate() <= 0.0 {
        return Err(Error::BoundaryPoint);
    }
    let mut theta = theta0.clone();
    let ll0 = log_likelihood(&theta, t)?;
    if !ll0.is_finite() {
        return Err(Error::NonFiniteLikelihood);
    }
    let mut probs = accounting_map(&theta, &spec)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        let x = theta.to_chart();
        let (g, h) = score_and_hessian(&x, &spec, t)?;
        let face =
            (theta.min_coordinate() < BOUNDARY_TOL).then(|| BoundaryFace::new(&theta, &g, &h));
        let (g_step, h_step) = face.as_ref().map_or((&g, &h), |f| (&f.g, &f.h));
        let gnorm = g_step.norm();
        if gnorm < cfg.grad_tol {
            converged = true;
            break;
        }
        let solver = ShiftedSolver::new(g_step, h_step);
        let floor = cfg.shift_margin * solver.norm.max(f64::MIN_POSITIVE);
        let mut mu = ladder_shift(solver.top, floor);
        let mut found = None;
        for _ in 0..=MAX_SHIFT_RAISES {
            let delta = match &face {
                Some(f) => f.lift(&solver.direction(mu)),
                None => solver.direction(mu),
            };
            let slope = g.dot(&delta);
            if slope > 0.0 {
                if let Some(step) = line_search(&theta, &delta, slope, &probs, &spec, t, cfg)? {
                    found = Some(step);
                    break;
                }
            }
            // nearly flat directions can make the step too long to follow;
            // raising the shift bends it toward the gradient
            mu = if mu == 0.0 {
                ladder_shift(0.0, floor)
            } else {
                4.0 * mu
            };
        }
        let Some((cand, cand_p, gain, step, projected)) = found else {
            // below the critical tolerance the remaining gains are lost in
            // rounding; on the boundary every ascent direction leaves the
            // domain. Either way the point is terminal.
            if gnorm <= CRITICAL_GRAD_TOL || theta.min_coordinate() < BOUNDARY_TOL {
                break;
            }
            return Err(Error::LineSearchFailed(MAX_BISECTIONS));
        };
        let shifted_top = solver.top - mu;
        iterations += 1;
        theta = cand;
        probs = cand_p;
        let loglik = log_likelihood(&theta, t)?;
        trace.push(NewtonIterate {
            iteration: iterations,
            loglik,
            gradient_norm: gnorm,
            step,
            gain,
            shift: mu,
            shifted_max_eigenvalue: shifted_top,
            projected,
        });
        if projected && gain <= STALL_TOL * loglik.abs().max(1.0) {
            break;
        }
    }
    if !converged && iterations == cfg.max_iterations {
        let g = score(&theta.to_chart(), &spec, t)?;
        converged = g.norm() < cfg.grad_tol;
    }
    let fit = finish_fit(theta, t, iterations, converged)?;
    Ok(NewtonOutcome { fit, trace })
}

/// [`newton_fit_traced`] without the trace.
pub fn newton_fit(
    theta0: &ParamPoint,
    t: &ContingencyTable,
    cfg: &NewtonConfig,
) -> Result<FitResult> {
    newton_fit_traced(theta0, t, cfg).map(|o| o.fit)
}

/// `sigma_max / sigma_min` of a symmetric matrix, infinite when the smallest
/// singular value vanishes to machine precision.
pub fn condition_number_of(h: &DMatrix<f64>) -> f64 {
    let sv = singular_values(h);
    let (Some(&top), Some(&bottom)) = (sv.first(), sv.last()) else {
        return f64::INFINITY;
    };
    if top == 0.0 || bottom <= top * f64::EPSILON {
        f64::INFINITY
    } else {
        top / bottom
    }
}

/// Condition number of the free-chart Hessian at an interior point.
pub fn hessian_condition_number(theta: &ParamPoint, t: &ContingencyTable) -> Result<f64> {
    let spec = theta.spec();
    Ok(condition_number_of(&hessian(&theta.to_chart(), &spec, t)?))
}
