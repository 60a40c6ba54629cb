//! Standard, complete, expected and effective dimensions of latent class
//! models.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::derivatives::model_jacobian;
use crate::linalg::numerical_rank;
use crate::model::{ModelSpec, ParamPoint};

/// Singular values at or below this fraction of the largest are treated as
/// zero when computing Jacobian ranks.
pub const RANK_TOL: f64 = 1e-9;

pub fn standard_dimension(spec: &ModelSpec) -> usize {
    spec.standard_dimension()
}

pub fn complete_dimension(spec: &ModelSpec) -> usize {
    spec.complete_dimension()
}

/// `min(d - 1, standard)`.
pub fn expected_dimension(spec: &ModelSpec) -> usize {
    spec.complete_dimension().min(spec.standard_dimension())
}

/// Jacobian rank at one random interior point, drawn from stream `index` of
/// `seed`.
pub fn jacobian_rank_sample(spec: &ModelSpec, seed: u64, index: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let theta = ParamPoint::random(spec, &mut rng);
    let j = model_jacobian(&theta.to_chart(), spec).expect("Dirichlet draws are interior");
    numerical_rank(&j, RANK_TOL)
}

/// Largest numerical Jacobian rank over `n_samples` random interior points.
pub fn effective_dimension(spec: &ModelSpec, n_samples: usize, seed: u64) -> usize {
    (0..n_samples as u64)
        .into_par_iter()
        .map(|i| jacobian_rank_sample(spec, seed, i))
        .max()
        .unwrap_or(0)
}

/// Gap between the standard dimension and the dimension of the rank-`r`
/// determinantal variety for a `d1 x d2` table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoWayDeficiency {
    pub value: usize,
    /// `r >= min(d1, d2)`: the rank condition constrains nothing.
    pub vacuous: bool,
}

/// `r (r - 1)` when the variety of `d1 x d2` matrices of rank at most `r`,
/// of dimension `r (d1 + d2) - r^2 - 1`, fits inside both the simplex and the
/// parameter count; zero otherwise.
pub fn two_way_deficiency(d1: usize, d2: usize, r: usize) -> TwoWayDeficiency {
    if r >= d1.min(d2) {
        return TwoWayDeficiency {
            value: 0,
            vacuous: true,
        };
    }
    let variety = r * (d1 + d2) - r * r - 1;
    let standard = r * (d1 + d2 - 2) + r - 1;
    let complete = d1 * d2 - 1;
    let value = if variety <= complete.min(standard) {
        r * (r - 1)
    } else {
        0
    };
    TwoWayDeficiency {
        value,
        vacuous: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub dims: Vec<usize>,
    pub r: usize,
    pub standard: usize,
    pub complete: usize,
    pub expected: usize,
    pub effective: usize,
    /// `expected - effective`.
    pub deficiency: usize,
    pub samples_used: usize,
    pub rank_tolerance: f64,
}

pub fn dimension_report(spec: &ModelSpec, n_samples: usize, seed: u64) -> DimensionReport {
    let expected = expected_dimension(spec);
    let effective = effective_dimension(spec, n_samples, seed);
    DimensionReport {
        dims: spec.dims.clone(),
        r: spec.r,
        standard: spec.standard_dimension(),
        complete: spec.complete_dimension(),
        expected,
        effective,
        deficiency: expected.saturating_sub(effective),
        samples_used: n_samples,
        rank_tolerance: RANK_TOL,
    }
}

/// A reference row: dims, r, effective, standard, complete, deficiency.
pub type ReferenceRow = (&'static [usize], usize, usize, usize, usize, usize);

/// Reference dimensions for 21 models, in the order (dims, r, effective,
/// standard, complete, deficiency).
pub const REFERENCE_ROWS: [ReferenceRow; 21] = [
    (&[2, 2], 2, 3, 5, 3, 0),
    (&[3, 3], 2, 7, 9, 8, 1),
    (&[4, 5], 3, 17, 23, 19, 2),
    (&[2, 2, 2], 2, 7, 7, 7, 0),
    (&[2, 2, 2], 3, 7, 11, 7, 0),
    (&[2, 2, 2], 4, 7, 15, 7, 0),
    (&[3, 3, 3], 2, 13, 13, 26, 0),
    (&[3, 3, 3], 3, 20, 20, 26, 0),
    (&[3, 3, 3], 4, 25, 27, 26, 1),
    (&[3, 3, 3], 5, 26, 34, 26, 0),
    (&[3, 3, 3], 6, 26, 41, 26, 0),
    (&[5, 2, 2], 3, 17, 20, 19, 2),
    (&[4, 2, 2], 3, 14, 17, 15, 1),
    (&[3, 3, 2], 5, 17, 29, 17, 0),
    (&[6, 3, 2], 5, 34, 44, 35, 1),
    (&[10, 3, 2], 5, 54, 64, 59, 5),
    (&[2, 2, 2, 2], 2, 9, 9, 15, 0),
    (&[2, 2, 2, 2], 3, 13, 14, 15, 1),
    (&[2, 2, 2, 2], 4, 15, 19, 15, 0),
    (&[2, 2, 2, 2], 5, 15, 24, 15, 0),
    (&[2, 2, 2, 2], 6, 15, 29, 15, 0),
];

/// Reports for every reference row.
pub fn reference_reports(n_samples: usize, seed: u64) -> Vec<DimensionReport> {
    REFERENCE_ROWS
        .par_iter()
        .map(|&(dims, r, ..)| {
            let spec = ModelSpec::new(dims.to_vec(), r).expect("valid reference spec");
            dimension_report(&spec, n_samples, seed)
        })
        .collect()
}

/// Text table in the column order model, r, effective, standard, complete,
/// deficiency.
pub fn reports_text(reports: &[DimensionReport]) -> String {
    let mut out = format!(
        "{:<12} {:>3} {:>10} {:>9} {:>9} {:>11}\n",
        "model", "r", "effective", "standard", "complete", "deficiency"
    );
    for rep in reports {
        let model: Vec<String> = rep.dims.iter().map(usize::to_string).collect();
        out.push_str(&format!(
            "{:<12} {:>3} {:>10} {:>9} {:>9} {:>11}\n",
            model.join("x"),
            rep.r,
            rep.effective,
            rep.standard,
            rep.complete,
            rep.deficiency
        ));
    }
    out
}
