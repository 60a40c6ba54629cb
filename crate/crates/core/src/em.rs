//! EM fitting for latent class models, plus the critical-point diagnostics
//! shared with the Newton fitter.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::derivatives::score_and_hessian;
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;
use crate::model::{accounting_map, log_likelihood, ModelSpec, ParamPoint, ProbTable};
use crate::newton::condition_number_of;
use crate::tables::{multi_index, ContingencyTable};

/// Coordinates below this make a terminal point a boundary point.
pub const BOUNDARY_TOL: f64 = 1e-8;
/// Gradient norm under which a terminal point counts as critical.
pub const CRITICAL_GRAD_TOL: f64 = 1e-6;
/// A critical point whose Hessian has an eigenvalue above this is a saddle.
pub const SADDLE_EIGEN_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iterations: usize,
    /// Stop once the relative log-likelihood change falls below this...
    pub rel_tol: f64,
    /// ...and no coordinate moved by more than this.
    pub param_tol: f64,
    /// Seed for random starting points.
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            rel_tol: 1e-10,
            param_tol: 1e-9,
            seed: 0,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rel_tol > 0.0 && self.param_tol > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "EM tolerances must be positive".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    InteriorMax,
    Saddle,
    Boundary,
    Unconverged,
}

/// Outcome of a fit, with first- and second-order diagnostics at the
/// terminal point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta: ParamPoint,
    pub fitted: ProbTable,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Euclidean norm of the free-chart gradient; absent when a coordinate is
    /// exactly zero.
    pub gradient_norm: Option<f64>,
    pub classification: Classification,
    #[serde(with = "crate::report::opt_f64")]
    pub hessian_condition_number: Option<f64>,
}

impl FitResult {
    pub fn fitted_counts(&self, t: &ContingencyTable) -> Vec<f64> {
        self.fitted.fitted_counts(t.total() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub gradient_norm: Option<f64>,
    pub classification: Classification,
    pub hessian_condition_number: Option<f64>,
    pub max_hessian_eigenvalue: Option<f64>,
}

/// Classifies `theta` from its coordinates and free-chart derivatives.
pub fn diagnose(theta: &ParamPoint, t: &ContingencyTable) -> Result<Diagnostics> {
    let spec = theta.spec();
    let chart = theta.to_chart();
    let min = theta.min_coordinate();
    if min < BOUNDARY_TOL {
        // the chart round trip can push a coordinate near zero out of the simplex
        let gradient_norm = crate::derivatives::score(&chart, &spec, t)
            .ok()
            .map(|g| g.norm());
        return Ok(Diagnostics {
            gradient_norm,
            classification: Classification::Boundary,
            hessian_condition_number: None,
            max_hessian_eigenvalue: None,
        });
    }
    let (g, h) = score_and_hessian(&chart, &spec, t)?;
    let gnorm = g.norm();
    let top = *symmetric_eigenvalues(&h).last().expect("nonempty chart");
    let classification = if gnorm >= CRITICAL_GRAD_TOL {
        Classification::Unconverged
    } else if top > SADDLE_EIGEN_TOL {
        Classification::Saddle
    } else {
        Classification::InteriorMax
    };
    Ok(Diagnostics {
        gradient_norm: Some(gnorm),
        classification,
        hessian_condition_number: Some(condition_number_of(&h)),
        max_hessian_eigenvalue: Some(top),
    })
}

/// Assembles a [`FitResult`] for a terminal point.
pub fn finish_fit(
    theta: ParamPoint,
    t: &ContingencyTable,
    iterations: usize,
    converged: bool,
) -> Result<FitResult> {
    let spec = theta.spec();
    let fitted = accounting_map(&theta, &spec)?;
    let loglik = log_likelihood(&theta, t)?;
    let diag = diagnose(&theta, t)?;
    Ok(FitResult {
        theta,
        fitted,
        loglik,
        iterations,
        converged,
        gradient_norm: diag.gradient_norm,
        classification: diag.classification,
        hessian_condition_number: diag.hessian_condition_number,
    })
}

/// A conditional-probability coordinate held fixed during EM:
/// `cond[var][class][category] = value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pin {
    pub var: usize,
    pub class: usize,
    pub category: usize,
    pub value: f64,
}

/// Checks pins against `spec` and rejects blocks whose pinned mass exceeds 1.
pub fn validate_pins(spec: &ModelSpec, pins: &[Pin]) -> Result<()> {
    for p in pins {
        if p.var >= spec.n_vars() || p.class >= spec.r || p.category >= spec.dims[p.var] {
            return Err(Error::InfeasiblePins(format!(
                "pin {p:?} outside the model"
            )));
        }
        if !(0.0..=1.0).contains(&p.value) {
            return Err(Error::InfeasiblePins(format!(
                "pin value {} is not a probability",
                p.value
            )));
        }
        let block: Vec<_> = pins
            .iter()
            .filter(|q| q.var == p.var && q.class == p.class)
            .collect();
        let mass: f64 = block.iter().map(|q| q.value).sum();
        let all_pinned = block.len() == spec.dims[p.var];
        if mass > 1.0 || (!all_pinned && mass >= 1.0) || (all_pinned && (mass - 1.0).abs() > 1e-12)
        {
            return Err(Error::InfeasiblePins(format!(
                "pinned coordinates of block ({}, {}) sum to {mass}",
                p.var, p.class
            )));
        }
    }
    Ok(())
}

/// Overwrites pinned coordinates of `theta` and rescales the free ones of
/// each affected block onto the remaining mass.
pub fn apply_pins(theta: &mut ParamPoint, pins: &[Pin]) {
    for p in pins {
        let block = &theta.cond[p.var][p.class];
        let pinned: Vec<usize> = pins
            .iter()
            .filter(|q| q.var == p.var && q.class == p.class)
            .map(|q| q.category)
            .collect();
        let weights: Vec<f64> = (0..block.len())
            .map(|i| if pinned.contains(&i) { 0.0 } else { block[i] })
            .collect();
        set_block_with_pins(
            &mut theta.cond[p.var][p.class],
            &weights,
            pins,
            p.var,
            p.class,
        );
    }
}

fn set_block_with_pins(block: &mut [f64], weights: &[f64], pins: &[Pin], var: usize, class: usize) {
    let mut free_mass = 1.0;
    let mut is_pinned = vec![false; block.len()];
    for q in pins.iter().filter(|q| q.var == var && q.class == class) {
        block[q.category] = q.value;
        is_pinned[q.category] = true;
        free_mass -= q.value;
    }
    let free: Vec<usize> = (0..block.len()).filter(|&i| !is_pinned[i]).collect();
    if free.is_empty() {
        return;
    }
    let total: f64 = free.iter().map(|&i| weights[i]).sum();
    for &i in &free {
        block[i] = if total > 0.0 {
            free_mass * weights[i] / total
        } else {
            free_mass / free.len() as f64
        };
    }
}

/// One EM update. Returns the new point and the log-likelihood of `theta`.
fn em_step_inner(theta: &ParamPoint, t: &ContingencyTable, pins: &[Pin]) -> (ParamPoint, f64) {
    let spec = theta.spec();
    let r = spec.r;
    let mut idx = vec![0; spec.n_vars()];
    let mut joint = vec![0.0; r];
    let mut class_mass = vec![0.0; r];
    let mut marg: Vec<Vec<Vec<f64>>> = spec.dims.iter().map(|&d| vec![vec![0.0; d]; r]).collect();
    let mut ll = 0.0;
    for (cell, &n) in t.counts().iter().enumerate() {
        if n == 0 {
            continue;
        }
        let n = n as f64;
        multi_index(&spec.dims, cell, &mut idx);
        for (h, j) in joint.iter_mut().enumerate() {
            *j = theta.lambda[h]
                * theta
                    .cond
                    .iter()
                    .zip(&idx)
                    .map(|(c, &i)| c[h][i])
                    .product::<f64>();
        }
        let p: f64 = joint.iter().sum();
        if p <= 0.0 {
            // responsibilities undefined; the cell is structurally impossible
            ll = f64::NEG_INFINITY;
            continue;
        }
        ll += n * p.ln();
        for h in 0..r {
            let resp = n * joint[h] / p;
            class_mass[h] += resp;
            for (l, &i) in idx.iter().enumerate() {
                marg[l][h][i] += resp;
            }
        }
    }
    let total = t.total() as f64;
    let mut next = theta.clone();
    for h in 0..r {
        next.lambda[h] = class_mass[h] / total;
        if class_mass[h] <= 0.0 {
            continue;
        }
        for (l, (cond_l, marg_l)) in next.cond.iter_mut().zip(&marg).enumerate() {
            let block = &mut cond_l[h];
            if pins.iter().any(|q| q.var == l && q.class == h) {
                set_block_with_pins(block, &marg_l[h], pins, l, h);
            } else {
                for (x, &m) in block.iter_mut().zip(&marg_l[h]) {
                    *x = m / class_mass[h];
                }
            }
        }
    }
    (next, ll)
}

/// One E-step plus M-step.
pub fn em_step(theta: &ParamPoint, t: &ContingencyTable) -> Result<ParamPoint> {
    theta.spec().check_table(t)?;
    Ok(em_step_inner(theta, t, &[]).0)
}

/// Runs EM from `theta0` until the relative log-likelihood change drops below
/// `cfg.rel_tol` with every coordinate moving less than `cfg.param_tol`, or
/// the iteration budget runs out.
pub fn em_fit(theta0: &ParamPoint, t: &ContingencyTable, cfg: &EmConfig) -> Result<FitResult> {
    em_fit_pinned(theta0, t, cfg, &[])
}

/// [`em_fit`] with some conditional coordinates held fixed. The M-step then
/// maximizes over the remaining coordinates only, which keeps EM monotone.
pub fn em_fit_pinned(
    theta0: &ParamPoint,
    t: &ContingencyTable,
    cfg: &EmConfig,
    pins: &[Pin],
) -> Result<FitResult> {
    let (theta, iterations, converged) = em_run(theta0, t, cfg, pins)?;
    finish_fit(theta, t, iterations, converged)
}

/// The bare EM loop: terminal point, iterations taken, convergence flag.
pub(crate) fn em_run(
    theta0: &ParamPoint,
    t: &ContingencyTable,
    cfg: &EmConfig,
    pins: &[Pin],
) -> Result<(ParamPoint, usize, bool)> {
    cfg.validate()?;
    let spec = theta0.spec();
    spec.check_table(t)?;
    theta0.validate(&spec)?;
    validate_pins(&spec, pins)?;
    let mut theta = theta0.clone();
    if !pins.is_empty() {
        apply_pins(&mut theta, pins);
    }
    let mut prev: Option<(ParamPoint, f64)> = None;
    for it in 0..=cfg.max_iterations {
        let (next, ll) = em_step_inner(&theta, t, pins);
        if !ll.is_finite() {
            return Err(Error::NonFiniteLikelihood);
        }
        if let Some((old, old_ll)) = &prev {
            let small_ll = (ll - old_ll).abs() <= cfg.rel_tol * ll.abs().max(1.0);
            if small_ll && theta.max_abs_diff(old) <= cfg.param_tol {
                return Ok((theta, it, true));
            }
        }
        if it == cfg.max_iterations {
            break;
        }
        prev = Some((std::mem::replace(&mut theta, next), ll));
    }
    Ok((theta, cfg.max_iterations, false))
}

/// Deterministic random starting point number `index` for a seeded multistart.
pub fn seeded_start(spec: &ModelSpec, seed: u64, index: u64) -> ParamPoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    ParamPoint::random(spec, &mut rng)
}
