//! # rkzero
//!
//! Expected numbers of complex zeros of Gaussian random analytic systems.
//!
//! A *kernel space* here is a Hilbert space of holomorphic functions on an
//! open subset of ℂⁿ whose point evaluations are continuous and nowhere
//! zero. Every such space carries a reproducing kernel K(x, y), and drawing
//! a function with iid standard complex Gaussian coefficients in any
//! orthonormal basis makes the zero set a well-defined point process. The
//! expected number of isolated zeros of the system f₁ = … = fₙ = 0 over a
//! region 𝒦 is
//!
//! ```text
//! E = π⁻ⁿ ∫_𝒦  ω₁ ∧ ⋯ ∧ ωₙ,      ωᵢ = (√−1/2) ∂∂̄ log Kᵢ(x, x),
//! ```
//!
//! which this crate evaluates three independent ways:
//!
//! * [`quad`] — adaptive Gauss–Legendre quadrature of the density
//!   π⁻ⁿ·Mdet(H₁, …, Hₙ), where Hᵢ is the Hessian ∂²/∂xⱼ∂x̄ₖ log Kᵢ(x, x)
//!   and Mdet is the mixed-determinant (permanental) pairing computed in
//!   [`density`];
//! * [`montecarlo`] — direct simulation: sample coefficients, count zeros
//!   in a disk by the argument principle, and average;
//! * [`polytope`] — for sparse Laurent spaces, the Kushnirenko/Bernstein
//!   combinatorial counts from Newton polytopes.
//!
//! The supported spaces form a small closed algebra described by
//! [`space::SpaceExpr`]: weighted polynomial spaces, spans of exponentials,
//! sparse Laurent spaces, the hyperbolic Gaussian analytic function and the
//! Gaussian entire function, closed under pointwise products, powers, and
//! coordinate-wise tensoring. Kernels multiply under products, so the
//! Hessians — and therefore expected counts — add; that additivity is what
//! connects mixed and unmixed systems and is exercised heavily by the test
//! suite.
//!
//! The `rkzero` binary exposes the whole pipeline over a small declarative
//! document format; see [`specdoc`] and the repository README.

pub mod density;
pub mod montecarlo;
pub mod polytope;
pub mod quad;
pub mod space;
pub mod specdoc;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("sparse Laurent kernels require nonzero coordinates")]
    ZeroCoordinate,
    #[error("numeric overflow while evaluating {0}")]
    Overflow(&'static str),
    #[error("singular evaluation: {0}")]
    SingularEvaluation(String),
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("invalid support weights: {0}")]
    InvalidWeights(String),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("tolerance {0} below the supported minimum 1e-12")]
    InvalidTolerance(f64),
    #[error("unsupported dimension {0} for polytope computations (supported: 1, 2)")]
    UnsupportedDimension(usize),
    #[error("operation requires a univariate space")]
    NonUnivariate,
    #[error("subset-value table has {found} entries, expected {expected}")]
    MissingSubsetValue { expected: usize, found: usize },
    #[error("density {value:e} is more negative than the round-off clamp -1e-12")]
    NegativeDensity { value: f64 },
    #[error("discarded {discarded} of {samples} Monte Carlo samples (limit 0.1%)")]
    ExcessiveDiscards { discarded: usize, samples: usize },
    #[error("series truncation bias {bias:e} exceeds stderr/3 = {limit:e}; raise the truncation order")]
    TruncationBias { bias: f64, limit: f64 },
    #[error("winding number did not stabilize on the contour")]
    WindingUnresolved,
    #[error("a zero lies too close to the contour after {0} radius retries")]
    ContourZero(usize),
    #[error("winding number {0} is negative (the function has poles inside the contour)")]
    NegativeWinding(i64),
    #[error("line {line}, column {col}: {message}")]
    Parse {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{0}")]
    Document(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
