//! Latent class models for multiway contingency tables.
//!
//! The crate fits latent class models by EM and by a modified Newton method,
//! computes their standard, expected and effective dimensions, checks
//! determinantal rank conditions, and explores multimodal likelihood surfaces
//! through multistart enumeration, profile grids and symmetry arguments.
//!
//! ```
//! use latent_class::{em_fit, fixtures, seeded_start, EmConfig, ModelSpec};
//!
//! let table = fixtures::influenza();
//! let spec = ModelSpec::for_table(&table, 2)?;
//! let fit = em_fit(&seeded_start(&spec, 7, 0), &table, &EmConfig::default())?;
//! assert!((fit.fitted_counts(&table)[0] - 139.51).abs() < 0.05);
//! # Ok::<(), latent_class::Error>(())
//! ```

pub mod cli;
pub mod derivatives;
pub mod dimension;
pub mod em;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod linalg;
pub mod model;
pub mod newton;
pub mod report;
pub mod symmetry;
pub mod tables;

pub use derivatives::{hessian, model_jacobian, score, score_and_hessian};
pub use dimension::{
    dimension_report, effective_dimension, expected_dimension, standard_dimension,
    two_way_deficiency, DimensionReport,
};
pub use em::{
    em_fit, em_fit_pinned, em_step, seeded_start, Classification, EmConfig, FitResult, Pin,
};
pub use error::{Error, ParseError, Result};
pub use geometry::{
    flatten, match_swiss_surface, max_minor_residual, profile_loglik_grid, swiss_surface_point,
    swiss_surface_residual, Bipartition, SwissPairing,
};
pub use model::{
    accounting_map, log_likelihood, log_likelihood_p, FreeChart, ModelSpec, ParamPoint, ProbTable,
};
pub use newton::{hessian_condition_number, newton_fit, NewtonConfig};
pub use symmetry::{
    bic, canonicalize, conjecture_mle, ef_decompose, multistart_explore, symmetrize_and_climb,
    symmetrize_pair, verify_conjecture, CriticalPointSet, EfDecomposition,
};
pub use tables::{
    apply_joint_permutation, is_exchange_symmetric, load_table, ContingencyTable, Permutation,
};
