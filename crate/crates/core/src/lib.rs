//! Geometric and Legendre moments of planar convex bodies, and reconstruction
//! of a convex polygon with prescribed outer normals from finitely many
//! (possibly noisy) Legendre moments.
//!
//! Everything lives in the unit square `[0,1]^2`. The pipeline is:
//!
//! 1. describe a convex body ([`ShapeModel`]) or a support vector over a
//!    [`DirectionSet`],
//! 2. compute its moment grid ([`MomentGrid`], geometric or Legendre),
//! 3. recover a polygon with the prescribed normals by constrained least
//!    squares over consistent support vectors ([`reconstruct`]).
//!
//! [`MomentPolynomials`] carries the closed-form polynomial dependence of the
//! moments on the support values, which gives the solver exact analytic
//! gradients. The [`noise`] and [`study`] modules add reproducible Gaussian
//! perturbations of moment grids and CSV-oriented convergence/noise studies;
//! stability-bound evaluators for the reconstruction error live in
//! [`estimator`].

pub mod basis;
pub mod estimator;
pub mod geometry;
pub mod moments;
pub mod noise;
pub mod quad;
pub mod study;

pub use basis::{hilbert_matrix, LegendreBasis, DEFAULT_MAX_ORDER};
pub use estimator::{
    bound_lsq, bound_noise, bound_stability2, bound_stability_geometric,
    bound_stability_legendre, objective, objective_gradient, reconstruct, reconstruct_with,
    BoundConfig, FeasibleSet, LsqKind, ReconstructionResult, SolverConfig, TruthErrors,
};
pub use geometry::{
    convex_hull, hausdorff_distance, intersect_convex, min_enclosing_circle, nikodym_distance,
    random_convex_polygon, ConvexPolygon, DirectionSet, Ellipse, ShapeModel, SupportVector,
};
pub use moments::{
    circumradius_bound, geometric_to_legendre, legendre_to_geometric, moment_distance,
    polygon_geometric_moments, polygon_legendre_moments, shape_geometric_moments,
    shape_legendre_moments, MomentGrid, MomentKind, MomentPolynomials, TriPoly,
};
pub use noise::{perturb, perturb_detailed, NoiseSchedule, NoisySpec, PerturbOutcome};
pub use study::{
    cell_medians, medians_to_csv, rows_to_csv, run_study, CellMedian, StudyConfig, StudyRow,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("order {order} exceeds the maximum supported order {max}")]
    OrderTooLarge { order: usize, max: usize },
    #[error("polynomial index {index} out of range for basis of order {order}")]
    IndexOutOfRange { index: usize, order: usize },
    #[error("invalid direction set: {0}")]
    InvalidDirections(String),
    #[error("support vector length {found} does not match direction count {expected}")]
    SupportLengthMismatch { found: usize, expected: usize },
    #[error("support vector violates the consistency inequalities (worst residual {worst:e})")]
    InconsistentSupport { worst: f64 },
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("operation requires a nondegenerate polygon")]
    DegeneratePolygon,
    #[error("invalid ellipse: semi-axes must be positive, got {a} and {b}")]
    InvalidEllipse { a: f64, b: f64 },
    #[error(
        "shape exceeds the unit square in direction theta={theta:.6} rad \
         (support value {support:.6}, limit {limit:.6})"
    )]
    ShapeOutsideUnitSquare { theta: f64, support: f64, limit: f64 },
    #[error("moment grids have different kinds")]
    KindMismatch,
    #[error("moment grid order {found} does not match expected order {expected}")]
    GridOrderMismatch { found: usize, expected: usize },
    #[error("quadrature did not converge: residual {residual:e} above tolerance {tol:e}")]
    QuadratureNonConvergence { residual: f64, tol: f64 },
    #[error("moment grid has nonpositive area entry mu_00 = {0}")]
    NonpositiveArea(f64),
    #[error("decaying noise schedules require grid order N >= 1")]
    ZeroOrderNoise,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
