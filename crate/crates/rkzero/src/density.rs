//! Mixed expected-zero densities and multilinear coefficient extraction.
//!
//! For a system of n independent Gaussian functions with log-kernel
//! Hessians H₁(x), …, Hₙ(x), the expected number of isolated common zeros
//! per unit Lebesgue volume of ℂⁿ ≅ ℝ²ⁿ at x is
//!
//! ```text
//! ρ(x) = π⁻ⁿ · Mdet(H₁(x), …, Hₙ(x))
//! ```
//!
//! where `Mdet` is the symmetric multilinear form that picks the
//! coefficient of λ₁λ₂⋯λₙ out of det(λ₁H₁ + ⋯ + λₙHₙ). It is computed by
//! inclusion–exclusion over the 2ⁿ subsets of matrices, which is exact for
//! the homogeneous degree-n determinant and costs 2ⁿ small determinant
//! evaluations. When all matrices coincide, Mdet(H, …, H) = n!·det H.
//!
//! The same polarization identity, applied to expected counts instead of
//! determinants, converts unmixed counts (all equations drawn from one
//! product space) into mixed counts; [`theorem_main_check`] runs both
//! routes and returns the pair.


use crate::quad::{integrate_density, CountEstimate, Domain, QuadOptions};
use crate::space::{CMatrix, ComplexPoint, SpaceExpr};
use crate::{Error, Result};

/// Negative densities above this threshold are round-off and clamp to 0;
/// anything more negative is reported as an error.
const NEGATIVE_DENSITY_CLAMP: f64 = -1e-12;

/// An n-equation system: one space per equation, each in n variables.
#[derive(Clone, Debug)]
pub struct MixedDensityQuery {
    spaces: Vec<SpaceExpr>,
}

impl MixedDensityQuery {
    pub fn new(spaces: Vec<SpaceExpr>) -> Result<Self> {
        let n = match spaces.first() {
            Some(s) => s.nvars(),
            None => return Err(Error::InvalidQuery("query needs at least one space".into())),
        };
        if spaces.iter().any(|s| s.nvars() != n) {
            return Err(Error::InvalidQuery(
                "all spaces in a query must have the same number of variables".into(),
            ));
        }
        if spaces.len() != n {
            return Err(Error::InvalidQuery(format!(
                "query has {} equations for {} variables",
                spaces.len(),
                n
            )));
        }
        Ok(MixedDensityQuery { spaces })
    }

    /// The unmixed system: n equations all drawn from `space`.
    pub fn unmixed(space: SpaceExpr) -> Result<Self> {
        let n = space.nvars();
        Self::new(vec![space; n])
    }

    pub fn nvars(&self) -> usize {
        self.spaces.len()
    }

    pub fn spaces(&self) -> &[SpaceExpr] {
        &self.spaces
    }
}

/// Coefficient of λ₁λ₂⋯λₙ in det(λ₁M₁ + ⋯ + λₙMₙ), by inclusion–exclusion:
/// Σ_{S⊆[n]} (−1)^{n−|S|} det(Σ_{i∈S} Mᵢ). Symmetric and multilinear in
/// the arguments; returns n!·det(M) when all arguments are equal.
pub fn mixed_determinant(matrices: &[CMatrix]) -> Result<f64> {
    let n = matrices.len();
    if n == 0 {
        return Err(Error::InvalidQuery("mixed determinant of zero matrices".into()));
    }
    for m in matrices {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch {
                what: "mixed determinant",
                expected: n,
                found: m.nrows(),
            });
        }
    }
    let mut acc = 0.0;
    for mask in 1u32..(1 << n) {
        let mut sum = CMatrix::zeros(n, n);
        for (i, m) in matrices.iter().enumerate() {
            if mask & (1 << i) != 0 {
                sum += m;
            }
        }
        let det = sum.determinant();
        let sign = if (n as u32 - mask.count_ones()) % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * det.re;
    }
    Ok(acc)
}

/// Expected-zero density of the system at x, with respect to Lebesgue
/// measure on ℂⁿ. Nonnegative up to round-off; values in
/// [−1e-12, 0) clamp to 0 and anything lower is an error.
pub fn density_at(query: &MixedDensityQuery, x: &ComplexPoint) -> Result<f64> {
    let n = query.nvars();
    let mats: Vec<CMatrix> = query
        .spaces
        .iter()
        .map(|s| Ok(s.log_hessian(x)?.into_matrix()))
        .collect::<Result<_>>()?;
    let m = mixed_determinant(&mats)?;
    finish_density(m, n)
}

/// Torus-gauge density evaluation used by the compactified-torus
/// quadrature: works on log-radii and angles, with the |xⱼ|² volume
/// factors already cancelled against the Jacobian.
pub(crate) fn density_at_torus_gauge(
    query: &MixedDensityQuery,
    s: &[f64],
    theta: &[f64],
) -> Result<f64> {
    let n = query.nvars();
    let mats: Vec<CMatrix> = query
        .spaces
        .iter()
        .map(|sp| sp.torus_gauge_hessian(s, theta))
        .collect::<Result<_>>()?;
    let m = mixed_determinant(&mats)?;
    finish_density(m, n)
}

fn finish_density(mdet: f64, n: usize) -> Result<f64> {
    let v = mdet / std::f64::consts::PI.powi(n as i32);
    if v < NEGATIVE_DENSITY_CLAMP {
        return Err(Error::NegativeDensity { value: v });
    }
    Ok(v.max(0.0))
}

/// Extract the coefficient of λ₁λ₂⋯λₙ from a homogeneous degree-n
/// polynomial p given its values on 0/1 indicator vectors: `values[mask]`
/// must hold p(χ_S) for the subset S encoded by `mask`, for all 2ⁿ masks.
/// Returns Σ_S (−1)^{n−|S|} p(χ_S).
pub fn multilinear_coefficient(n: usize, values: &[f64]) -> Result<f64> {
    let expected = 1usize << n;
    if values.len() != expected {
        return Err(Error::MissingSubsetValue { expected, found: values.len() });
    }
    let mut acc = 0.0;
    for (mask, &v) in values.iter().enumerate() {
        let sign = if (n as u32 - (mask as u32).count_ones()) % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * v;
    }
    Ok(acc)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Compute the expected mixed count two ways: directly, by integrating the
/// mixed density of `spaces`, and indirectly, by integrating the unmixed
/// density of Π_{i∈S} ℱᵢ for every subset S, dividing by n!, and extracting
/// the multilinear coefficient. The two must agree within combined
/// quadrature error.
pub fn theorem_main_check(
    spaces: &[SpaceExpr],
    domain: &Domain,
    opts: &QuadOptions,
) -> Result<(CountEstimate, CountEstimate)> {
    let query = MixedDensityQuery::new(spaces.to_vec())?;
    let n = query.nvars();
    let direct = integrate_density(&query, domain, opts)?;

    let nfact = factorial(n);
    let mut values = vec![0.0; 1 << n];
    let mut error = 0.0;
    let mut evaluations = direct.evaluations;
    let mut exhausted = direct.budget_exhausted;
    for mask in 1usize..(1 << n) {
        let mut product: Option<SpaceExpr> = None;
        for (i, s) in spaces.iter().enumerate() {
            if mask & (1 << i) != 0 {
                product = Some(match product {
                    None => s.clone(),
                    Some(p) => SpaceExpr::product(p, s.clone())?,
                });
            }
        }
        let unmixed = MixedDensityQuery::unmixed(product.expect("nonempty mask"))?;
        let est = integrate_density(&unmixed, domain, opts)?;
        values[mask] = est.value / nfact;
        error += est.error / nfact;
        evaluations += est.evaluations;
        exhausted |= est.budget_exhausted;
    }
    let value = multilinear_coefficient(n, &values)?;
    let extracted = CountEstimate {
        value,
        error,
        evaluations,
        method: direct.method,
        budget_exhausted: exhausted,
    };
    Ok((direct, extracted))
}
