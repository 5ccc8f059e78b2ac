//! Error type shared by all solver stages.

use thiserror::Error;

/// Failures reported by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A constitutive closure breaks one of its structural assumptions.
    #[error("closure violates `{invariant}` at S = {sample}")]
    Closure {
        /// Name of the violated assumption.
        invariant: String,
        /// Saturation sample where the violation was observed.
        sample: f64,
    },
    /// A parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        /// Parameter name.
        name: String,
        /// Human-readable reason.
        reason: String,
    },
    /// Adaptive quadrature did not reach the requested tolerance.
    #[error("quadrature did not converge on [{a}, {b}]")]
    Quadrature {
        /// Left end of the integration interval.
        a: f64,
        /// Right end of the integration interval.
        b: f64,
    },
    /// The problem specification failed validation.
    #[error("problem validation failed: {0}")]
    Validation(String),
    /// The (alpha, beta) pair lies outside the supported regimes.
    #[error("unsupported regime (alpha = {alpha}, beta = {beta}): {reason}")]
    UnsupportedRegime {
        /// Intensity exponent of the lateral flux.
        alpha: f64,
        /// Intensity exponent of the transverse permeability.
        beta: f64,
        /// Reason reported by the classifier.
        reason: String,
    },
    /// Cell-problem data do not satisfy the discrete compatibility condition.
    #[error("cell data incompatible: source integral {source_integral} vs boundary flux {flux_integral}")]
    Compatibility {
        /// Integral of the interior source.
        source_integral: f64,
        /// Integral of the boundary flux.
        flux_integral: f64,
    },
    /// An iterative linear solver stopped before reaching its tolerance.
    #[error("linear solver did not converge: residual {residual:e} after {iterations} iterations")]
    LinearSolve {
        /// Final relative residual.
        residual: f64,
        /// Iterations performed.
        iterations: usize,
    },
    /// A direct factorization met a zero pivot.
    #[error("singular matrix: zero pivot in column {column}")]
    Singular {
        /// Column of the zero pivot.
        column: usize,
    },
    /// Newton iteration failed even after the allowed step halvings.
    #[error("Newton iteration failed at t = {time} after {halvings} step halvings (residual {residual:e})")]
    Newton {
        /// Time level being computed.
        time: f64,
        /// Number of halvings attempted.
        halvings: usize,
        /// Last scaled residual.
        residual: f64,
    },
    /// A computed saturation left the admissible band.
    #[error("maximum principle violated at t = {time}: S = {value} at node {node} (bounds [{lower}, {upper}])")]
    MaximumPrinciple {
        /// Time level.
        time: f64,
        /// Flat node index.
        node: usize,
        /// Offending saturation value.
        value: f64,
        /// Lower admissible bound.
        lower: f64,
        /// Upper admissible bound.
        upper: f64,
    },
    /// A query point lies outside the unit disk.
    #[error("point ({0}, {1}) lies outside the unit disk")]
    OutsideDisk(f64, f64),
    /// Inputs of a sweep or rate fit are inconsistent.
    #[error("sweep error: {0}")]
    Sweep(String),
}

/// Convenience alias.
pub type Result<T> = std::result::Result<T, Error>;
