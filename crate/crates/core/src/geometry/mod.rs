//! Rank conditions on probability tables and the explicit non-identifiable
//! surface of the 4x4 symmetric example.

mod profile;

pub use profile::{
    find_peaks, profile_loglik_grid, Peak, PeakKind, ProfileAxis, ProfileConfig, ProfileGrid,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{combinations, minor};
use crate::model::{ParamPoint, ProbTable};
use crate::tables::{flat_index, Permutation};

/// Split of the axes of a table into row and column groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bipartition {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl Bipartition {
    pub fn new(rows: Vec<usize>, cols: Vec<usize>) -> Self {
        Self { rows, cols }
    }

    fn validate(&self, k: usize) -> Result<()> {
        if self.rows.is_empty() || self.cols.is_empty() {
            return Err(Error::InvalidArgument(
                "both groups of a flattening must be nonempty".into(),
            ));
        }
        let mut all: Vec<usize> = self.rows.iter().chain(&self.cols).copied().collect();
        all.sort_unstable();
        if all != (0..k).collect::<Vec<_>>() {
            return Err(Error::InvalidArgument(format!(
                "{:?} | {:?} is not a bipartition of {k} axes",
                self.rows, self.cols
            )));
        }
        Ok(())
    }
}

/// A table viewed as a matrix through a bipartition of its axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Flattening {
    pub bipartition: Bipartition,
    pub matrix: DMatrix<f64>,
}

/// Lexicographic enumeration of the multi-indices of `axes`.
fn group_indices(dims: &[usize], axes: &[usize]) -> Vec<Vec<usize>> {
    let sub: Vec<usize> = axes.iter().map(|&a| dims[a]).collect();
    crate::tables::cells(&sub).collect()
}

/// Rows enumerate the multi-indices of the row axes lexicographically, in the
/// order the axes are listed; columns likewise.
pub fn flatten(p: &ProbTable, bipartition: &Bipartition) -> Result<Flattening> {
    bipartition.validate(p.dims.len())?;
    let rows = group_indices(&p.dims, &bipartition.rows);
    let cols = group_indices(&p.dims, &bipartition.cols);
    let mut full = vec![0; p.dims.len()];
    let matrix = DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        for (&a, &v) in bipartition.rows.iter().zip(&rows[i]) {
            full[a] = v;
        }
        for (&a, &v) in bipartition.cols.iter().zip(&cols[j]) {
            full[a] = v;
        }
        p.p[flat_index(&p.dims, &full)]
    });
    Ok(Flattening {
        bipartition: bipartition.clone(),
        matrix,
    })
}

/// All bipartitions with both groups nonempty, each listed once (axis 0 is
/// always in the row group).
pub fn all_bipartitions(k: usize) -> Vec<Bipartition> {
    (0..1usize << (k - 1))
        .filter_map(|mask| {
            let rows: Vec<usize> = std::iter::once(0)
                .chain((1..k).filter(|a| mask >> (a - 1) & 1 == 1))
                .collect();
            let cols: Vec<usize> = (1..k).filter(|a| mask >> (a - 1) & 1 == 0).collect();
            (!cols.is_empty()).then(|| Bipartition::new(rows, cols))
        })
        .collect()
}

/// Largest absolute `(r+1) x (r+1)` minor of `m`; zero when no such minor
/// exists.
pub fn max_minor_residual(m: &DMatrix<f64>, r: usize) -> f64 {
    let k = r + 1;
    if k > m.nrows().min(m.ncols()) {
        return 0.0;
    }
    let rows = combinations(m.nrows(), k);
    let cols = combinations(m.ncols(), k);
    let mut worst = 0.0f64;
    for rs in &rows {
        for cs in &cols {
            worst = worst.max(minor(m, rs, cs).abs());
        }
    }
    worst
}

/// [`max_minor_residual`] of a two-way probability table.
pub fn table_minor_residual(p: &ProbTable, r: usize) -> Result<f64> {
    if p.dims.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "expected a two-way table, got dims {:?}; flatten it first",
            p.dims
        )));
    }
    let f = flatten(p, &Bipartition::new(vec![0], vec![1]))?;
    Ok(max_minor_residual(&f.matrix, r))
}

/// Which categories share a conditional probability on the surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SwissPairing {
    /// {1,2} and {3,4}
    P12,
    /// {1,3} and {2,4}
    P13,
    /// {1,4} and {2,3}
    P14,
}

impl SwissPairing {
    pub const ALL: [SwissPairing; 3] = [SwissPairing::P12, SwissPairing::P13, SwissPairing::P14];

    /// Category relabeling `sigma` taking the {1,2}{3,4} pairing to this one:
    /// new category `i` is old category `sigma(i)`.
    pub fn permutation(self) -> Permutation {
        let images = match self {
            SwissPairing::P12 => vec![0, 1, 2, 3],
            SwissPairing::P13 => vec![0, 2, 1, 3],
            SwissPairing::P14 => vec![0, 2, 3, 1],
        };
        Permutation::new(images).expect("fixed bijection")
    }
}

/// Residual `80 l a b - 20 l a - 20 l b + 6 l - 1` of the surface equation.
pub fn swiss_surface_residual(theta: &ParamPoint) -> f64 {
    let l = theta.lambda[0];
    let a = theta.cond[0][0][0];
    let b = theta.cond[1][0][0];
    80.0 * l * a * b - 20.0 * l * a - 20.0 * l * b + 6.0 * l - 1.0
}

/// The parameter point of the 4x4, two-class model on the non-identifiable
/// surface with first coordinates `alpha11` (row variable) and `beta11`
/// (column variable), under the {1,2}{3,4} pairing.
///
/// Solving the fixed-point equations of the block table
/// `(3 3 2 2; 3 3 2 2; 2 2 3 3; 2 2 3 3) / 40` gives
///
/// ```text
/// lambda_1 = 1 / (80 a b - 20 a - 20 b + 6)
/// alpha_12 = (10 b - 3) / (10 (4 b - 1))
/// beta_12  = (10 a - 3) / (10 (4 a - 1))
/// ```
///
/// with the remaining coordinates of every block fixed by the pairing.
pub fn swiss_surface_point(alpha11: f64, beta11: f64) -> Result<ParamPoint> {
    let (a, b) = (alpha11, beta11);
    let out = || Error::OutOfDomain { alpha11, beta11 };
    let denom = 80.0 * a * b - 20.0 * a - 20.0 * b + 6.0;
    if denom == 0.0 || 4.0 * a == 1.0 || 4.0 * b == 1.0 || !a.is_finite() || !b.is_finite() {
        return Err(out());
    }
    let lambda1 = 1.0 / denom;
    let a2 = (10.0 * b - 3.0) / (10.0 * (4.0 * b - 1.0));
    let b2 = (10.0 * a - 3.0) / (10.0 * (4.0 * a - 1.0));
    let coords = [lambda1, a, b, a2, b2];
    let in_unit = |x: f64| (0.0..=1.0).contains(&x);
    if !coords.iter().all(|&x| in_unit(x)) || ![a, b, a2, b2].iter().all(|&x| x <= 0.5) {
        return Err(out());
    }
    let pair = |x: f64| vec![x, x, 0.5 - x, 0.5 - x];
    Ok(ParamPoint {
        lambda: vec![lambda1, 1.0 - lambda1],
        cond: vec![vec![pair(a), pair(a2)], vec![pair(b), pair(b2)]],
    })
}

/// [`swiss_surface_point`] relabeled to another pairing of the categories.
/// Its image is the corresponding block table among the three global maxima.
pub fn swiss_surface_point_paired(
    alpha11: f64,
    beta11: f64,
    pairing: SwissPairing,
) -> Result<ParamPoint> {
    let base = swiss_surface_point(alpha11, beta11)?;
    let sigma = pairing.permutation();
    Ok(base
        .permute_categories(0, sigma.images())
        .permute_categories(1, sigma.images()))
}

/// A fitted parameter point matched to the explicit surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMatch {
    pub pairing: SwissPairing,
    /// Class `h` of `surface` is class `class_order[h]` of the fitted point.
    pub class_order: Vec<usize>,
    pub alpha11: f64,
    pub beta11: f64,
    pub surface: ParamPoint,
    /// Largest coordinate difference between the relabeled fit and `surface`.
    pub max_abs_diff: f64,
}

/// Relabels the classes of a two-class 4x4 fit and tries every pairing,
/// returning the surface point closest to it. `None` when no relabeling has
/// first coordinates inside the surface domain.
pub fn match_swiss_surface(theta: &ParamPoint) -> Option<SurfaceMatch> {
    if theta.lambda.len() != 2
        || theta.cond.len() != 2
        || theta.cond.iter().any(|c| c[0].len() != 4)
    {
        return None;
    }
    let mut best: Option<SurfaceMatch> = None;
    for class_order in [vec![0, 1], vec![1, 0]] {
        let relabeled = theta.permute_classes(&class_order);
        for pairing in SwissPairing::ALL {
            let (a, b) = (relabeled.cond[0][0][0], relabeled.cond[1][0][0]);
            let Ok(surface) = swiss_surface_point_paired(a, b, pairing) else {
                continue;
            };
            let diff = relabeled.max_abs_diff(&surface);
            if best.as_ref().is_none_or(|m| diff < m.max_abs_diff) {
                best = Some(SurfaceMatch {
                    pairing,
                    class_order: class_order.clone(),
                    alpha11: a,
                    beta11: b,
                    surface,
                    max_abs_diff: diff,
                });
            }
        }
    }
    best
}
