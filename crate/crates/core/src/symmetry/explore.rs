//! Multistart enumeration of critical points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{canonicalize, square};
use crate::em::{
    em_run, finish_fit, seeded_start, Classification, EmConfig, FitResult, BOUNDARY_TOL,
};
use crate::error::Result;
use crate::model::{ModelSpec, ParamPoint};
use crate::newton::{newton_fit, NewtonConfig};
use crate::report::{matrix_text, ratio_string};
use crate::tables::ContingencyTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExploreConfig {
    pub n_starts: usize,
    pub seed: u64,
    pub em: EmConfig,
    /// Refine every interior EM terminal point with modified Newton.
    pub polish: bool,
    /// Make every other start constant on the blocks of a random partition of
    /// the categories, shared by both axes. EM keeps such points inside their
    /// subspace on exchangeable data, which reaches critical points random
    /// starts almost never find.
    pub symmetric_starts: bool,
    /// Fitted count tables closer than this elementwise are the same point.
    pub dedup_tol: f64,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        Self {
            n_starts: 500,
            seed: 0,
            em: EmConfig::default(),
            polish: true,
            symmetric_starts: false,
            dedup_tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    /// Expected counts, row-major.
    pub fitted: Vec<f64>,
    /// Canonical form of `fitted` for square two-way tables.
    pub canonical: Option<Vec<f64>>,
    pub canonical_exhaustive: Option<bool>,
    pub loglik: f64,
    pub classification: Classification,
    pub multiplicity: usize,
    /// Index of the first run that ended here.
    pub first_run: usize,
    pub representative: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnconvergedRun {
    pub run: usize,
    pub loglik: f64,
    pub gradient_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointSet {
    pub dims: Vec<usize>,
    pub counts: Vec<u64>,
    pub r: usize,
    pub config: ExploreConfig,
    /// Sorted by decreasing log-likelihood.
    pub points: Vec<CriticalPoint>,
    pub unconverged: Vec<UnconvergedRun>,
}

impl CriticalPointSet {
    pub fn with_classification(&self, c: Classification) -> impl Iterator<Item = &CriticalPoint> {
        self.points.iter().filter(move |p| p.classification == c)
    }

    pub fn best(&self) -> Option<&CriticalPoint> {
        self.points.first()
    }

    /// Distinct log-likelihood values within `tol`, with the number of
    /// points at each, highest first.
    pub fn levels(&self, tol: f64) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for p in &self.points {
            match out.iter_mut().find(|(v, _)| (v - p.loglik).abs() <= tol) {
                Some(level) => level.1 += 1,
                None => out.push((p.loglik, 1)),
            }
        }
        out
    }

    /// Runs that reached a classified critical point.
    pub fn classified_runs(&self) -> usize {
        self.points.iter().map(|p| p.multiplicity).sum()
    }

    /// Human-readable listing with small rationals written as fractions.
    pub fn summary_text(&self) -> String {
        let mut out = format!(
            "{} starts, seed {}: {} critical points, {} unconverged runs\n",
            self.config.n_starts,
            self.config.seed,
            self.points.len(),
            self.unconverged.len()
        );
        for (k, p) in self.points.iter().enumerate() {
            out.push_str(&format!(
                "\n#{} loglik {:.4} {:?} x{}\n",
                k + 1,
                p.loglik,
                p.classification,
                p.multiplicity
            ));
            if self.dims.len() == 2 {
                let (rows, cols) = (self.dims[0], self.dims[1]);
                out.push_str(&matrix_text(rows, cols, |i, j| {
                    ratio_string(p.fitted[i * cols + j])
                }));
            }
        }
        out
    }
}

/// A start constant on the blocks of a random partition of the categories,
/// with the same conditionals on every axis.
fn symmetric_start(spec: &ModelSpec, seed: u64, index: u64) -> ParamPoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let d = spec.dims[0];
    let mut theta = ParamPoint::random(spec, &mut rng);
    let n_blocks = rng.random_range(1..=d);
    let labels: Vec<usize> = (0..d).map(|_| rng.random_range(0..n_blocks)).collect();
    for h in 0..spec.r {
        let mut block_mass = vec![0.0; n_blocks];
        let mut block_size = vec![0usize; n_blocks];
        for (i, &b) in labels.iter().enumerate() {
            block_mass[b] += theta.cond[0][h][i];
            block_size[b] += 1;
        }
        let shared: Vec<f64> = labels
            .iter()
            .map(|&b| block_mass[b] / block_size[b] as f64)
            .collect();
        for l in 0..spec.n_vars() {
            theta.cond[l][h].clone_from(&shared);
        }
    }
    theta
}

fn single_run(
    t: &ContingencyTable,
    spec: &ModelSpec,
    cfg: &ExploreConfig,
    index: usize,
) -> Result<FitResult> {
    let square_data = spec.dims.iter().all(|&d| d == spec.dims[0]);
    let start = if cfg.symmetric_starts && square_data && index % 2 == 1 {
        symmetric_start(spec, cfg.seed, index as u64)
    } else {
        seeded_start(spec, cfg.seed, index as u64)
    };
    let (theta, iterations, converged) = em_run(&start, t, &cfg.em, &[])?;
    let em = finish_fit(theta, t, iterations, converged)?;
    if !cfg.polish || em.theta.min_coordinate() < BOUNDARY_TOL {
        return Ok(em);
    }
    match newton_fit(&em.theta, t, &NewtonConfig::default()) {
        Ok(nr) if nr.loglik >= em.loglik - 1e-9 => Ok(FitResult {
            iterations: em.iterations + nr.iterations,
            ..nr
        }),
        _ => Ok(em),
    }
}

/// Runs `cfg.n_starts` seeded EM fits and groups their terminal points by
/// fitted table. Results depend only on the configuration, not on thread
/// scheduling.
pub fn multistart_explore(
    t: &ContingencyTable,
    spec: &ModelSpec,
    cfg: &ExploreConfig,
) -> Result<CriticalPointSet> {
    spec.check_table(t)?;
    let fits: Vec<FitResult> = (0..cfg.n_starts)
        .into_par_iter()
        .map(|i| single_run(t, spec, cfg, i))
        .collect::<Result<_>>()?;
    let total = t.total() as f64;
    let mut points: Vec<CriticalPoint> = Vec::new();
    let mut unconverged = Vec::new();
    for (run, fit) in fits.into_iter().enumerate() {
        if fit.classification == Classification::Unconverged {
            unconverged.push(UnconvergedRun {
                run,
                loglik: fit.loglik,
                gradient_norm: fit.gradient_norm,
            });
            continue;
        }
        let fitted = fit.fitted.fitted_counts(total);
        let existing = points.iter_mut().find(|p| {
            p.fitted
                .iter()
                .zip(&fitted)
                .all(|(a, b)| (a - b).abs() <= cfg.dedup_tol)
        });
        match existing {
            Some(p) => {
                p.multiplicity += 1;
                if fit.loglik > p.representative.loglik {
                    p.loglik = fit.loglik;
                    p.classification = fit.classification;
                    p.representative = fit;
                }
            }
            None => {
                let canon = (spec.n_vars() == 2 && spec.dims[0] == spec.dims[1])
                    .then(|| canonicalize(&square(&fitted)));
                points.push(CriticalPoint {
                    canonical_exhaustive: canon.as_ref().map(|c| c.exhaustive),
                    canonical: canon.map(|c| c.table),
                    fitted,
                    loglik: fit.loglik,
                    classification: fit.classification,
                    multiplicity: 1,
                    first_run: run,
                    representative: fit,
                });
            }
        }
    }
    points.sort_by(|a, b| {
        b.loglik
            .total_cmp(&a.loglik)
            .then(a.first_run.cmp(&b.first_run))
    });
    Ok(CriticalPointSet {
        dims: t.dims().to_vec(),
        counts: t.counts().to_vec(),
        r: spec.r,
        config: *cfg,
        points,
        unconverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn symmetric_starts_are_block_constant() {
        let spec = ModelSpec::new(vec![6, 6], 2).unwrap();
        let theta = symmetric_start(&spec, 3, 5);
        theta.validate(&spec).unwrap();
        assert_eq!(theta.cond[0], theta.cond[1]);
    }

    #[test]
    fn small_exploration_is_deterministic() {
        let t = fixtures::sturmfels3();
        let spec = ModelSpec::for_table(&t, 2).unwrap();
        let cfg = ExploreConfig {
            n_starts: 12,
            seed: 4,
            ..Default::default()
        };
        let a = multistart_explore(&t, &spec, &cfg).unwrap();
        let b = multistart_explore(&t, &spec, &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_eq!(a.classified_runs() + a.unconverged.len(), 12);
    }
}
