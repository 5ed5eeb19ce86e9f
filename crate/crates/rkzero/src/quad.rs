//! Adaptive quadrature of expected-zero densities over integration domains.
//!
//! Domains are products of per-coordinate regions (disks, annuli,
//! rectangles, and the compactified plane or punctured plane), each mapped
//! onto a 2-real-parameter box with its volume Jacobian:
//!
//! * disks and annuli use polar coordinates with the r·dr Jacobian;
//! * the full plane substitutes r = t/(1 − t), t ∈ [0, 1);
//! * the full punctured plane (torus) substitutes log-radius s = tan u,
//!   u ∈ (−π/2, π/2). On this path the e^{2s} volume factor is cancelled
//!   analytically against the 1/|xⱼ|² in sparse-Laurent Hessians, so the
//!   integrand stays finite arbitrarily deep into the compactification.
//!
//! Integration is tensor-product Gauss–Legendre with dyadic adaptive
//! subdivision: each cell is integrated at two orders, the difference is
//! the cell's error estimate, and the worst cell is split along its widest
//! axis until the summed estimate meets the tolerance or the evaluation
//! budget runs out (the result is then flagged, not failed). Gauss nodes
//! are interior, so substitution endpoints are never evaluated.
//! Accumulation uses compensated summation and a deterministic refinement
//! order, so identical inputs reproduce identical results.

use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::density::{density_at, density_at_torus_gauge, MixedDensityQuery};
use crate::space::{ComplexPoint, SpaceExpr};
use crate::{Error, Result};

/// How a [`CountEstimate`] was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    #[serde(rename = "quadrature")]
    Quadrature,
    #[serde(rename = "monte-carlo")]
    MonteCarlo,
    #[serde(rename = "polytope")]
    Polytope,
}

/// An expected-count result with its error estimate and cost accounting.
#[derive(Clone, Debug, Serialize)]
pub struct CountEstimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: u64,
    pub method: Method,
    /// Set when the evaluation budget ran out before the tolerance was
    /// met; `value`/`error` still hold the best available estimate.
    pub budget_exhausted: bool,
}

/// One complex coordinate's worth of integration region.
#[derive(Clone, Debug, PartialEq)]
pub enum CoordRegion {
    Disk { center: Complex64, radius: f64 },
    Annulus { inner: f64, outer: f64 },
    Rect { re_lo: f64, re_hi: f64, im_lo: f64, im_hi: f64 },
    PlaneFull,
    TorusFull,
}

impl CoordRegion {
    fn param_ranges(&self) -> [(f64, f64); 2] {
        match self {
            CoordRegion::Disk { .. } => [(0.0, 1.0), (0.0, 2.0 * PI)],
            CoordRegion::Annulus { inner, outer } => [(*inner, *outer), (0.0, 2.0 * PI)],
            CoordRegion::Rect { re_lo, re_hi, im_lo, im_hi } => [(*re_lo, *re_hi), (*im_lo, *im_hi)],
            CoordRegion::PlaneFull => [(0.0, 1.0), (0.0, 2.0 * PI)],
            CoordRegion::TorusFull => [(-PI / 2.0, PI / 2.0), (0.0, 2.0 * PI)],
        }
    }

    /// Map parameters (p, q) to the complex coordinate and the area
    /// Jacobian dV = jac · dp dq.
    fn map(&self, p: f64, q: f64) -> (Complex64, f64) {
        match self {
            CoordRegion::Disk { center, radius } => {
                (center + Complex64::from_polar(radius * p, q), radius * radius * p)
            }
            CoordRegion::Annulus { .. } => (Complex64::from_polar(p, q), p),
            CoordRegion::Rect { .. } => (Complex64::new(p, q), 1.0),
            CoordRegion::PlaneFull => {
                let r = p / (1.0 - p);
                (Complex64::from_polar(r, q), p / ((1.0 - p) * (1.0 - p) * (1.0 - p)))
            }
            CoordRegion::TorusFull => {
                let s = p.tan();
                let r = s.exp();
                (Complex64::from_polar(r, q), r * r * (1.0 + s * s))
            }
        }
    }
}

/// An integration region of ℂⁿ: the product of one [`CoordRegion`]
/// per coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    regions: Vec<CoordRegion>,
}

impl Domain {
    pub fn from_regions(regions: Vec<CoordRegion>) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::InvalidDomain("domain needs at least one coordinate".into()));
        }
        for r in &regions {
            match *r {
                CoordRegion::Disk { radius, center } => {
                    if !(radius > 0.0 && radius.is_finite() && center.is_finite()) {
                        return Err(Error::InvalidDomain(format!("disk radius {radius} invalid")));
                    }
                }
                CoordRegion::Annulus { inner, outer } => {
                    if !(inner > 0.0 && outer.is_finite() && inner < outer) {
                        return Err(Error::InvalidDomain(format!(
                            "annulus radii ({inner}, {outer}) must satisfy 0 < inner < outer"
                        )));
                    }
                }
                CoordRegion::Rect { re_lo, re_hi, im_lo, im_hi } => {
                    if !(re_lo < re_hi && im_lo < im_hi)
                        || ![re_lo, re_hi, im_lo, im_hi].iter().all(|v| v.is_finite())
                    {
                        return Err(Error::InvalidDomain("rectangle intervals are empty".into()));
                    }
                }
                CoordRegion::PlaneFull | CoordRegion::TorusFull => {}
            }
        }
        let torus_count = regions.iter().filter(|r| matches!(r, CoordRegion::TorusFull)).count();
        if torus_count > 0 && torus_count != regions.len() {
            return Err(Error::InvalidDomain(
                "the compactified torus cannot be mixed with other regions".into(),
            ));
        }
        Ok(Domain { regions })
    }

    pub fn disk(center: Complex64, radius: f64) -> Result<Self> {
        Self::from_regions(vec![CoordRegion::Disk { center, radius }])
    }

    pub fn unit_disk() -> Self {
        Self::disk(Complex64::new(0.0, 0.0), 1.0).expect("unit disk is valid")
    }

    pub fn polydisk(disks: Vec<(Complex64, f64)>) -> Result<Self> {
        Self::from_regions(
            disks
                .into_iter()
                .map(|(center, radius)| CoordRegion::Disk { center, radius })
                .collect(),
        )
    }

    pub fn unit_polydisk(n: usize) -> Result<Self> {
        Self::polydisk(vec![(Complex64::new(0.0, 0.0), 1.0); n])
    }

    pub fn annulus(inner: f64, outer: f64) -> Result<Self> {
        Self::from_regions(vec![CoordRegion::Annulus { inner, outer }])
    }

    /// Axis-aligned box: one (re_lo, re_hi, im_lo, im_hi) per coordinate.
    pub fn rectangle(intervals: Vec<(f64, f64, f64, f64)>) -> Result<Self> {
        Self::from_regions(
            intervals
                .into_iter()
                .map(|(re_lo, re_hi, im_lo, im_hi)| CoordRegion::Rect { re_lo, re_hi, im_lo, im_hi })
                .collect(),
        )
    }

    /// All of ℂⁿ through the radial substitution r = t/(1−t).
    pub fn plane(n: usize) -> Result<Self> {
        Self::from_regions(vec![CoordRegion::PlaneFull; n])
    }

    /// All of (ℂ∖{0})ⁿ through the log-radial substitution s = tan u.
    pub fn torus(n: usize) -> Result<Self> {
        Self::from_regions(vec![CoordRegion::TorusFull; n])
    }

    pub fn dimension(&self) -> usize {
        self.regions.len()
    }

    pub fn regions(&self) -> &[CoordRegion] {
        &self.regions
    }

    fn is_full_torus(&self) -> bool {
        self.regions.iter().all(|r| matches!(r, CoordRegion::TorusFull))
    }
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let n = self.regions.len();
        let all = |pred: fn(&CoordRegion) -> bool| self.regions.iter().all(pred);
        if all(|r| matches!(r, CoordRegion::TorusFull)) {
            return write!(f, "torus({n})");
        }
        if all(|r| matches!(r, CoordRegion::PlaneFull)) {
            return write!(f, "plane({n})");
        }
        if n > 1 && all(|r| matches!(r, CoordRegion::Disk { .. })) {
            write!(f, "polydisk(")?;
            for (i, r) in self.regions.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{r}")?;
            }
            return write!(f, ")");
        }
        if n > 1 && all(|r| matches!(r, CoordRegion::Rect { .. })) {
            write!(f, "rectangle(")?;
            for (i, r) in self.regions.iter().enumerate() {
                if let CoordRegion::Rect { re_lo, re_hi, im_lo, im_hi } = r {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{re_lo}, {re_hi}, {im_lo}, {im_hi}")?;
                }
            }
            return write!(f, ")");
        }
        write!(f, "{}", self.regions[0])
    }
}

impl std::fmt::Display for CoordRegion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CoordRegion::Disk { center, radius } => {
                write!(f, "disk({}, {}, {})", center.re, center.im, radius)
            }
            CoordRegion::Annulus { inner, outer } => write!(f, "annulus({inner}, {outer})"),
            CoordRegion::Rect { re_lo, re_hi, im_lo, im_hi } => {
                write!(f, "rectangle({re_lo}, {re_hi}, {im_lo}, {im_hi})")
            }
            CoordRegion::PlaneFull => write!(f, "plane(1)"),
            CoordRegion::TorusFull => write!(f, "torus(1)"),
        }
    }
}

/// Quadrature controls.
#[derive(Clone, Debug)]
pub struct QuadOptions {
    /// Target absolute error of the estimate.
    pub tol: f64,
    /// Maximum number of density evaluations before giving up and
    /// flagging the estimate.
    pub budget: u64,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { tol: 1e-7, budget: 10_000_000 }
    }
}

impl QuadOptions {
    pub fn with_tol(tol: f64) -> Self {
        QuadOptions { tol, ..Default::default() }
    }
}

/// Integrate the expected-zero density of `query` over `domain`.
pub fn integrate_density(
    query: &MixedDensityQuery,
    domain: &Domain,
    opts: &QuadOptions,
) -> Result<CountEstimate> {
    if domain.dimension() != query.nvars() {
        return Err(Error::DimensionMismatch {
            what: "integration domain",
            expected: query.nvars(),
            found: domain.dimension(),
        });
    }
    if !(opts.tol >= 1e-12) {
        return Err(Error::InvalidTolerance(opts.tol));
    }
    let n = query.nvars();
    let ranges: Vec<(f64, f64)> = domain.regions.iter().flat_map(|r| r.param_ranges()).collect();

    let result = if domain.is_full_torus() {
        let integrand = |p: &[f64]| -> Result<f64> {
            let mut s = vec![0.0; n];
            let mut theta = vec![0.0; n];
            let mut jac = 1.0;
            for j in 0..n {
                let u = p[2 * j];
                let sj = u.tan();
                s[j] = sj;
                theta[j] = p[2 * j + 1];
                jac *= 1.0 + sj * sj;
            }
            Ok(density_at_torus_gauge(query, &s, &theta)? * jac)
        };
        adaptive_integrate(&integrand, &ranges, opts)?
    } else {
        let regions = domain.regions.clone();
        let integrand = |p: &[f64]| -> Result<f64> {
            let mut coords = Vec::with_capacity(n);
            let mut jac = 1.0;
            for (j, region) in regions.iter().enumerate() {
                let (z, jr) = region.map(p[2 * j], p[2 * j + 1]);
                coords.push(z);
                jac *= jr;
            }
            Ok(density_at(query, &ComplexPoint::new(coords)?)? * jac)
        };
        adaptive_integrate(&integrand, &ranges, opts)?
    };

    Ok(CountEstimate {
        value: result.value,
        error: result.error,
        evaluations: result.evaluations,
        method: Method::Quadrature,
        budget_exhausted: result.budget_exhausted,
    })
}

/// Expected count for the unmixed power system: every equation drawn from
/// ℱ₁^{λ₁} ⋯ ℱₙ^{λₙ}.
pub fn unmixed_power_count(
    bases: &[SpaceExpr],
    lambdas: &[u32],
    domain: &Domain,
    opts: &QuadOptions,
) -> Result<CountEstimate> {
    if bases.len() != lambdas.len() {
        return Err(Error::DimensionMismatch {
            what: "power exponents",
            expected: bases.len(),
            found: lambdas.len(),
        });
    }
    let mut product: Option<SpaceExpr> = None;
    for (base, &lambda) in bases.iter().zip(lambdas) {
        let powered = SpaceExpr::power(base.clone(), lambda)?;
        product = Some(match product {
            None => powered,
            Some(p) => SpaceExpr::product(p, powered)?,
        });
    }
    let space = product.ok_or_else(|| Error::InvalidQuery("no base spaces".into()))?;
    integrate_density(&MixedDensityQuery::unmixed(space)?, domain, opts)
}

struct AdaptiveResult {
    value: f64,
    error: f64,
    evaluations: u64,
    budget_exhausted: bool,
}

struct Cell {
    lo: Vec<f64>,
    hi: Vec<f64>,
    value: f64,
    err: f64,
    alive: bool,
}

struct HeapEntry {
    err: f64,
    id: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err && self.id == other.id
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // max-heap on error, oldest cell first on ties
        self.err
            .total_cmp(&other.err)
            .then(other.id.cmp(&self.id))
    }
}

/// Neumaier compensated accumulator.
#[derive(Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(self) -> f64 {
        self.sum + self.comp
    }
}

/// Gauss–Legendre nodes and weights on [−1, 1], by Newton iteration on
/// the Legendre recurrence.
fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    for i in 0..order {
        let mut x = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // P_order(x) and its derivative via the three-term recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=order {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn orders_for_dim(dims: usize) -> (usize, usize) {
    // even orders only: no node ever lands on an interval midpoint
    match dims {
        0..=2 => (16, 8),
        3..=4 => (8, 4),
        _ => (6, 4),
    }
}

fn tensor_rule(
    f: &dyn Fn(&[f64]) -> Result<f64>,
    lo: &[f64],
    hi: &[f64],
    nodes: &[f64],
    weights: &[f64],
) -> Result<(f64, u64)> {
    let dims = lo.len();
    let order = nodes.len();
    let mid: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let half: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
    let scale: f64 = half.iter().product();
    let mut idx = vec![0usize; dims];
    let mut point = vec![0.0; dims];
    let mut acc = Compensated::default();
    let mut evals = 0u64;
    loop {
        let mut w = scale;
        for d in 0..dims {
            point[d] = mid[d] + half[d] * nodes[idx[d]];
            w *= weights[idx[d]];
        }
        acc.add(w * f(&point)?);
        evals += 1;
        // odometer
        let mut d = 0;
        loop {
            if d == dims {
                return Ok((acc.total(), evals));
            }
            idx[d] += 1;
            if idx[d] < order {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

fn adaptive_integrate(
    f: &dyn Fn(&[f64]) -> Result<f64>,
    ranges: &[(f64, f64)],
    opts: &QuadOptions,
) -> Result<AdaptiveResult> {
    let dims = ranges.len();
    let (hi_order, lo_order) = orders_for_dim(dims);
    let (hi_nodes, hi_weights) = gauss_legendre(hi_order);
    let (lo_nodes, lo_weights) = gauss_legendre(lo_order);
    let initial_width: Vec<f64> = ranges.iter().map(|(a, b)| b - a).collect();

    let eval_cell = |lo: &[f64], hi: &[f64]| -> Result<(f64, f64, u64)> {
        let (vh, eh) = tensor_rule(f, lo, hi, &hi_nodes, &hi_weights)?;
        let (vl, el) = tensor_rule(f, lo, hi, &lo_nodes, &lo_weights)?;
        Ok((vh, (vh - vl).abs(), eh + el))
    };

    let mut evaluations = 0u64;
    let lo0: Vec<f64> = ranges.iter().map(|r| r.0).collect();
    let hi0: Vec<f64> = ranges.iter().map(|r| r.1).collect();
    let (v0, e0, n0) = eval_cell(&lo0, &hi0)?;
    evaluations += n0;

    let mut cells = vec![Cell { lo: lo0, hi: hi0, value: v0, err: e0, alive: true }];
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry { err: e0, id: 0 });
    let mut total_err = e0;
    let mut budget_exhausted = false;

    let cost_per_cell = (hi_order as u64).pow(dims as u32) + (lo_order as u64).pow(dims as u32);

    while total_err > opts.tol {
        if evaluations + 2 * cost_per_cell > opts.budget {
            budget_exhausted = true;
            break;
        }
        let worst = match heap.pop() {
            Some(w) if cells[w.id].alive && w.err == cells[w.id].err => w,
            Some(_) => continue,
            None => break,
        };
        if worst.err <= f64::EPSILON * cells[worst.id].value.abs() {
            // converged to round-off; splitting further cannot help
            heap.push(worst);
            break;
        }
        let id = worst.id;
        let (lo, hi) = (cells[id].lo.clone(), cells[id].hi.clone());
        // split along the axis that is widest relative to the whole domain
        let axis = (0..dims)
            .max_by(|&a, &b| {
                let wa = (hi[a] - lo[a]) / initial_width[a];
                let wb = (hi[b] - lo[b]) / initial_width[b];
                wa.total_cmp(&wb).then(b.cmp(&a))
            })
            .unwrap();
        let mid = 0.5 * (lo[axis] + hi[axis]);
        cells[id].alive = false;
        total_err -= cells[id].err;
        for half in 0..2 {
            let mut clo = lo.clone();
            let mut chi = hi.clone();
            if half == 0 {
                chi[axis] = mid;
            } else {
                clo[axis] = mid;
            }
            let (v, e, evals) = eval_cell(&clo, &chi)?;
            evaluations += evals;
            let cid = cells.len();
            cells.push(Cell { lo: clo, hi: chi, value: v, err: e, alive: true });
            heap.push(HeapEntry { err: e, id: cid });
            total_err += e;
        }
    }

    let mut value = Compensated::default();
    let mut error = Compensated::default();
    for cell in &cells {
        if cell.alive {
            value.add(cell.value);
            error.add(cell.err);
        }
    }
    Ok(AdaptiveResult {
        value: value.total(),
        error: error.total(),
        evaluations,
        budget_exhausted,
    })
}
