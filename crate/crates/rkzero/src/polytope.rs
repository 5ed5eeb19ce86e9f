//! Newton-polytope root counts: Kushnirenko and Bernstein numbers.
//!
//! For sparse Laurent systems the generic — and, under Gaussian
//! coefficients, expected — number of zeros in the torus (ℂ∖{0})ⁿ is a
//! purely combinatorial quantity: n!·Vol(𝒜) when all equations share the
//! support with convex hull 𝒜 (Kushnirenko), and n! times the mixed volume
//! of the per-equation hulls in general (Bernstein). These counts are
//! independent of the basis weights, which makes them a sharp cross-check
//! on the density quadrature over the compactified torus.
//!
//! Everything here is exact: hulls and shoelace areas are computed in
//! integer arithmetic (volumes are half-integers in 2-D) and converted to
//! floating point only at the boundary. Supported in one and two
//! dimensions; mixed volumes use the same inclusion–exclusion over
//! Minkowski sums of supports as the multilinear coefficient extraction.

use std::collections::BTreeSet;

use crate::density::MixedDensityQuery;
use crate::quad::{integrate_density, CountEstimate, Domain, QuadOptions};
use crate::space::{SpaceExpr, SupportWeights};
use crate::{Error, Result};

/// A finite set of lattice points in ℤⁿ (deduplicated, nonempty).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeSupport {
    points: BTreeSet<Vec<i64>>,
    nvars: usize,
}

impl LatticeSupport {
    pub fn new(points: impl IntoIterator<Item = Vec<i64>>) -> Result<Self> {
        let mut set = BTreeSet::new();
        let mut nvars = None;
        for p in points {
            let n = *nvars.get_or_insert(p.len());
            if p.len() != n || p.is_empty() {
                return Err(Error::InvalidWeights(
                    "lattice points have inconsistent dimensions".into(),
                ));
            }
            set.insert(p);
        }
        match nvars {
            Some(n) => Ok(LatticeSupport { points: set, nvars: n }),
            None => Err(Error::InvalidWeights("support must be nonempty".into())),
        }
    }

    pub fn univariate(points: impl IntoIterator<Item = i64>) -> Result<Self> {
        Self::new(points.into_iter().map(|a| vec![a]))
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn points(&self) -> impl Iterator<Item = &[i64]> {
        self.points.iter().map(|p| p.as_slice())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Pointwise Minkowski sum of the two supports.
    pub fn minkowski_sum(&self, other: &LatticeSupport) -> Result<LatticeSupport> {
        if self.nvars != other.nvars {
            return Err(Error::DimensionMismatch {
                what: "Minkowski sum",
                expected: self.nvars,
                found: other.nvars,
            });
        }
        LatticeSupport::new(self.points.iter().flat_map(|a| {
            other
                .points
                .iter()
                .map(move |b| a.iter().zip(b).map(|(x, y)| x + y).collect())
        }))
    }

    pub fn translate(&self, shift: &[i64]) -> Result<LatticeSupport> {
        if shift.len() != self.nvars {
            return Err(Error::DimensionMismatch {
                what: "translation vector",
                expected: self.nvars,
                found: shift.len(),
            });
        }
        LatticeSupport::new(
            self.points
                .iter()
                .map(|p| p.iter().zip(shift).map(|(a, s)| a + s).collect()),
        )
    }
}

/// Twice the area of the convex hull (exact, integer). Monotone-chain
/// hull with i128 cross products and shoelace sum.
fn hull_twice_area(points: &LatticeSupport) -> i128 {
    let pts: Vec<[i64; 2]> = points.points().map(|p| [p[0], p[1]]).collect();
    if pts.len() < 3 {
        return 0;
    }
    // pts is sorted lexicographically already (BTreeSet order)
    let cross = |o: [i64; 2], a: [i64; 2], b: [i64; 2]| -> i128 {
        (a[0] - o[0]) as i128 * (b[1] - o[1]) as i128 - (a[1] - o[1]) as i128 * (b[0] - o[0]) as i128
    };
    let mut hull: Vec<[i64; 2]> = Vec::new();
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev() {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    if hull.len() < 3 {
        return 0;
    }
    let mut twice = 0i128;
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        twice += a[0] as i128 * b[1] as i128 - b[0] as i128 * a[1] as i128;
    }
    twice.abs()
}

/// Euclidean volume of the convex hull of the support: max − min in one
/// dimension, the shoelace area of the hull in two.
pub fn hull_volume(support: &LatticeSupport) -> Result<f64> {
    match support.nvars() {
        1 => {
            let lo = support.points().map(|p| p[0]).min().unwrap();
            let hi = support.points().map(|p| p[0]).max().unwrap();
            Ok((hi - lo) as f64)
        }
        2 => Ok(hull_twice_area(support) as f64 / 2.0),
        n => Err(Error::UnsupportedDimension(n)),
    }
}

/// The generic (and expected) root count in the torus for one equation per
/// support: n! times the mixed volume of the convex hulls, computed by
/// inclusion–exclusion over Minkowski sums,
/// Σ_{S⊆[n]} (−1)^{n−|S|} Vol(hull(Σ_{i∈S} Aᵢ)).
pub fn bernstein_count(supports: &[LatticeSupport]) -> Result<f64> {
    let n = supports.len();
    if n == 0 || n > 2 {
        return Err(Error::UnsupportedDimension(n));
    }
    for s in supports {
        if s.nvars() != n {
            return Err(Error::DimensionMismatch {
                what: "support dimension",
                expected: n,
                found: s.nvars(),
            });
        }
    }
    match n {
        1 => hull_volume(&supports[0]),
        2 => {
            // volumes are half-integers; stay in twice-area integers
            let mut acc: i128 = 0;
            for mask in 1u32..4 {
                let mut sum: Option<LatticeSupport> = None;
                for (i, s) in supports.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        sum = Some(match sum {
                            None => s.clone(),
                            Some(t) => t.minkowski_sum(s)?,
                        });
                    }
                }
                let twice = hull_twice_area(&sum.unwrap());
                if mask.count_ones() == 2 {
                    acc += twice;
                } else {
                    acc -= twice;
                }
            }
            Ok(acc as f64 / 2.0)
        }
        _ => unreachable!(),
    }
}

/// Compare the Kushnirenko number n!·Vol(hull A) against the density
/// integral of the unmixed sparse system over the compactified torus.
/// The expected count does not depend on the weights, only on the
/// support, so any positive weight assignment must reproduce the
/// combinatorial value.
pub fn kushnirenko_check(
    support: &LatticeSupport,
    weights: &SupportWeights,
    opts: &QuadOptions,
) -> Result<(f64, CountEstimate)> {
    let n = support.nvars();
    if n > 2 {
        return Err(Error::UnsupportedDimension(n));
    }
    let weight_support: BTreeSet<Vec<i64>> = weights.iter().map(|(a, _)| a.to_vec()).collect();
    let support_set: BTreeSet<Vec<i64>> = support.points().map(|p| p.to_vec()).collect();
    if weight_support != support_set {
        return Err(Error::InvalidWeights(
            "weight support does not match the lattice support".into(),
        ));
    }
    let factorial: f64 = (1..=n).map(|k| k as f64).product();
    let combinatorial = factorial * hull_volume(support)?;
    let space = SpaceExpr::sparse_laurent(weights.clone());
    let query = MixedDensityQuery::unmixed(space)?;
    let integral = integrate_density(&query, &Domain::torus(n)?, opts)?;
    Ok((combinatorial, integral))
}
