//! Numerical construction and validation of fundamental solutions of
//! nonlocal Schrödinger operators L_K + V.
//!
//! The operator acts as
//!
//! ```text
//! L_K u(x) = ½ p.v. ∫ (2u(x) − u(x+y) − u(x−y)) K(y) dy
//! ```
//!
//! with a symmetric kernel squeezed between λ·c_{n,s}|y|^{−n−2s} and
//! Λ·c_{n,s}|y|^{−n−2s} (the fractional Laplacian when λ = Λ = 1) and a
//! nonnegative potential V. The crate provides, layer by layer:
//!
//! * [`kernel`] — admissible kernels, the normalization constant c_{n,s}
//!   from its defining integral, the Fourier multiplier m(ξ), and the
//!   tail/second-moment integrals the discretization needs;
//! * [`grid`] — uniform lattices on a cube with the ball B_R inscribed,
//!   fields that vanish identically outside the ball;
//! * [`op`] — assembly of the discrete bilinear form ⟨u,v⟩_K + ∫V u v as a
//!   symmetric positive definite operator (dense or FFT-convolution
//!   backed), plus a row-collocation quadrature of L_K for cross-checks;
//! * [`variational`] — Gagliardo seminorms, energy functional, Sobolev
//!   embedding ratio, and fractional norms computed spectrally;
//! * [`spectral`] — zero-padded periodic supercube Fourier transforms;
//! * [`solve`] — conjugate-gradient minimization of the quadratic energy
//!   with maximum-principle / comparison / weak-form checks;
//! * [`fundamental`] — mollified point sources solved over an exhaustion
//!   of growing balls, radial decay fits, and scaling diagnostics.
//!
//! All floating-point work is generic over [`Scalar`] (implemented for
//! `f32` and `f64`); concrete aliases at the crate root fix `f64` for the
//! report-producing layers.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, Signed};

mod fft;
pub mod fundamental;
pub mod grid;
pub mod kernel;
pub mod op;
pub mod quad;
pub mod solve;
pub mod spectral;
pub mod variational;

/// Floating-point scalar the numerical kernels are generic over.
///
/// The bounds cover everything the crate needs: `Float + FloatConst` for
/// the analysis, `FromPrimitive` for exact small constants, and
/// `Signed + Send + Sync + Debug + 'static` so that FFT plans (rustfft's
/// blanket `FftNum` impl) and shared immutable operators work for any
/// `Scalar` type.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + Signed
    + Sum
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Shorthand for lossless conversion from `f64` literals; panics only
    /// if the target type cannot represent any finite value, which cannot
    /// happen for `f32`/`f64`.
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant must convert")
    }

    /// Conversion from small integer counts (node numbers, dimensions).
    fn from_count(v: usize) -> Self {
        Self::from_usize(v).expect("usize count must convert")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Default concrete scalar for report-producing layers and the CLI.
pub type Real = f64;

/// Discrete field over the default scalar.
pub type Field = grid::DiscreteField<Real>;

/// Assembled operator over the default scalar.
pub type Operator = op::AssembledOperator<Real>;

/// Error type shared by every module of the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A quadrature failed to reach its requested relative tolerance.
    #[error("quadrature did not converge: achieved relative error {achieved:.3e}, required {required:.3e}")]
    QuadratureNonConvergence { achieved: f64, required: f64 },

    /// Kernel evaluated at the origin, where it is singular.
    #[error("kernel is singular at the origin; evaluation requires y != 0")]
    KernelSingularAtOrigin,

    /// A structurally invalid input (wrong grid, inactive node, empty
    /// region, zero field where a nonzero one is required).
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid construction parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// A precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Conjugate gradient exhausted its iteration budget.
    #[error("solver did not converge after {iterations} iterations: relative residual {final_residual:.3e} > tolerance {tolerance:.3e}")]
    NonConvergence {
        iterations: usize,
        final_residual: f64,
        tolerance: f64,
        /// Relative residual after each iteration.
        history: Vec<f64>,
    },

    /// CG met a direction of nonpositive curvature: the assembled operator
    /// is not positive definite, which indicates an assembly bug.
    #[error("operator is not positive definite (curvature {curvature:.3e} at iteration {iteration}); assembly is inconsistent")]
    NotPositiveDefinite { iteration: usize, curvature: f64 },

    /// A field decayed below the floor where log-log fitting is possible.
    #[error("degenerate field: shell values at or below the floor {floor:.1e} admit no log-log fit")]
    DegenerateField { floor: f64 },
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
