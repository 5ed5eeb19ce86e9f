//! Monte Carlo estimation of expected zero counts in a disk.
//!
//! This is the stochastic counterpart to the quadrature path: draw a
//! function from the space with iid standard complex Gaussian coefficients
//! (E|a|² = 1, real and imaginary parts each N(0, ½)) in an explicit
//! orthonormal basis, count its zeros inside |z| < ρ with the argument
//! principle, and average over many draws. Quadrature and Monte Carlo
//! approach the same expectation from unrelated directions, so their
//! agreement is a strong end-to-end check.
//!
//! Univariate diagonal spaces have orthonormal bases of weighted
//! exponential-monomials √c · zᵃ e^{bz}; products of spaces convolve these
//! term lists, merging colinear terms (equal (a, b) keys) by adding
//! weights. The two infinite-dimensional atoms are truncated at a
//! configurable series order, and the induced bias is estimated by
//! comparing pilot runs at N and 2N terms.
//!
//! Zero counting walks the circle and accumulates principal-value phase
//! increments of f, subdividing every arc whose phase step reaches π/2.
//! When a zero sits on or nearly on the contour the radius is retried with
//! a tiny random perturbation; samples that keep failing are discarded and
//! accounted for (an excessive discard rate aborts the run). Sampling is
//! reproducible: sample i draws from a counter-based stream keyed by
//! (seed, i), so results do not depend on thread scheduling.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::space::{binomial, SpaceExpr};
use crate::{Error, Result};

/// One orthonormal basis element √weight · zᵃ e^{bz} of a univariate
/// diagonal space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisTerm {
    pub exponent: i64,
    pub frequency: Complex64,
    pub weight: f64,
}

/// A function drawn from a space: f(z) = Σᵢ aᵢ √wᵢ z^{eᵢ} e^{bᵢ z}.
#[derive(Clone, Debug)]
pub struct SampledFunction {
    terms: Vec<BasisTerm>,
    coefficients: Vec<Complex64>,
}

impl SampledFunction {
    pub fn terms(&self) -> &[BasisTerm] {
        &self.terms
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        eval_terms(&self.terms, &self.coefficients, z)
    }

    /// Analytic derivative f′(z) from the explicit basis.
    pub fn eval_deriv(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (t, a) in self.terms.iter().zip(&self.coefficients) {
            let ebz = (t.frequency * z).exp();
            let za = z.powi(t.exponent as i32);
            let dza = if t.exponent == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                t.exponent as f64 * z.powi(t.exponent as i32 - 1)
            };
            acc += a * t.weight.sqrt() * (dza + t.frequency * za) * ebz;
        }
        acc
    }
}

fn eval_terms(terms: &[BasisTerm], coeffs: &[Complex64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (t, a) in terms.iter().zip(coeffs) {
        acc += a * t.weight.sqrt() * z.powi(t.exponent as i32) * (t.frequency * z).exp();
    }
    acc
}

/// Orthonormal exponential-monomial basis of a univariate diagonal space.
/// Infinite atoms contribute their first `truncation + 1` terms; products
/// convolve term lists and merge equal (exponent, frequency) keys by
/// summing weights. Terms come out sorted by (exponent, frequency).
pub fn expand_basis(space: &SpaceExpr, truncation: usize) -> Result<Vec<BasisTerm>> {
    if space.nvars() != 1 {
        return Err(Error::NonUnivariate);
    }
    if !space.has_diagonal_basis() {
        return Err(Error::InvalidSpace("space has no diagonal basis".into()));
    }
    type Key = (i64, u64, u64);
    fn key_of(e: i64, b: Complex64) -> Key {
        // normalize -0.0 so equal frequencies always collide
        let norm = |v: f64| if v == 0.0 { 0.0f64.to_bits() } else { v.to_bits() };
        (e, norm(b.re), norm(b.im))
    }
    fn rec(space: &SpaceExpr, truncation: usize) -> Result<BTreeMap<Key, (Complex64, f64)>> {
        let mut out = BTreeMap::new();
        match space {
            SpaceExpr::Weyl { degree, .. } => {
                for j in 0..=*degree {
                    let b = Complex64::new(0.0, 0.0);
                    out.insert(key_of(j as i64, b), (b, binomial(*degree as u64, j as u64)));
                }
            }
            SpaceExpr::SparseLaurent { weights } => {
                for (a, c) in weights.iter() {
                    let b = Complex64::new(0.0, 0.0);
                    out.insert(key_of(a[0], b), (b, c));
                }
            }
            SpaceExpr::ExpSpan { frequencies } => {
                for f in frequencies {
                    out.insert(key_of(0, f[0]), (f[0], 1.0));
                }
            }
            SpaceExpr::HyperbolicGaf => {
                for n in 0..=truncation {
                    let b = Complex64::new(0.0, 0.0);
                    out.insert(key_of(n as i64, b), (b, 1.0));
                }
            }
            SpaceExpr::Gef => {
                let mut w = 1.0;
                for n in 0..=truncation {
                    if n > 0 {
                        w /= n as f64;
                    }
                    let b = Complex64::new(0.0, 0.0);
                    out.insert(key_of(n as i64, b), (b, w));
                }
            }
            SpaceExpr::Product(l, r) => {
                // products of basis elements are colinear exactly when their
                // (exponent, frequency) keys coincide; colliding weights add
                let left = rec(l, truncation)?;
                let right = rec(r, truncation)?;
                for ((el, _, _), &(bl, wl)) in &left {
                    for ((er, _, _), &(br, wr)) in &right {
                        let b = bl + br;
                        let entry = out.entry(key_of(el + er, b)).or_insert((b, 0.0));
                        entry.1 += wl * wr;
                    }
                }
            }
            SpaceExpr::Power(base, lambda) => {
                let b = rec(base, truncation)?;
                let mut acc = b.clone();
                for _ in 1..*lambda {
                    let mut next: BTreeMap<Key, (Complex64, f64)> = BTreeMap::new();
                    for ((ea, _, _), &(ba, wa)) in &acc {
                        for ((eb, _, _), &(bb, wb)) in &b {
                            let fr = ba + bb;
                            let entry = next.entry(key_of(ea + eb, fr)).or_insert((fr, 0.0));
                            entry.1 += wa * wb;
                        }
                    }
                    acc = next;
                }
                out = acc;
            }
            SpaceExpr::Tensor(_) => unreachable!("tensor is never univariate here"),
        }
        Ok(out)
    }
    let map = rec(space, truncation)?;
    Ok(map
        .into_iter()
        .map(|((e, _, _), (b, w))| BasisTerm { exponent: e, frequency: b, weight: w })
        .collect())
}

/// Counter-based per-sample stream: sample `index` under `seed` always
/// sees the same generator state regardless of execution order.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn standard_complex<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draw a function from the space with iid standard complex Gaussian
/// coefficients; infinite atoms are truncated at series order `truncation`.
pub fn sample_function(
    space: &SpaceExpr,
    truncation: usize,
    rng: &mut impl Rng,
) -> Result<SampledFunction> {
    let terms = expand_basis(space, truncation)?;
    let coefficients = (0..terms.len()).map(|_| standard_complex(rng)).collect();
    Ok(SampledFunction { terms, coefficients })
}

/// Contour-walking controls for [`count_zeros_disk`].
#[derive(Clone, Debug)]
pub struct WindingOptions {
    /// Arcs the circle starts divided into; adaptive splitting refines
    /// from there.
    pub initial_arcs: usize,
    /// Hard cap on contour evaluations per attempt.
    pub max_evals: usize,
    /// A contour is rejected (and the radius retried) when
    /// min |f| < ratio · max |f| over the sampled points.
    pub min_modulus_ratio: f64,
}

impl Default for WindingOptions {
    fn default() -> Self {
        WindingOptions { initial_arcs: 32, max_evals: 1 << 20, min_modulus_ratio: 1e-12 }
    }
}

enum Winding {
    Count(i64),
    NearZero,
}

fn winding_number(
    f: &dyn Fn(Complex64) -> Complex64,
    rho: f64,
    opts: &WindingOptions,
) -> Result<Winding> {
    struct Moduli {
        min: f64,
        max: f64,
    }
    impl Moduli {
        fn observe(&mut self, v: Complex64) {
            let m = v.norm();
            self.min = self.min.min(m);
            self.max = self.max.max(m);
        }
        fn degenerate(&self, ratio: f64) -> bool {
            self.min <= ratio * self.max
        }
    }

    let eval = |theta: f64| f(Complex64::from_polar(rho, theta));
    let mut arcs = opts.initial_arcs.max(4);
    loop {
        let mut evals = 0usize;
        let mut moduli = Moduli { min: f64::INFINITY, max: 0.0 };
        let mut points: Vec<(f64, Complex64)> = (0..=arcs)
            .map(|k| {
                let theta = 2.0 * PI * k as f64 / arcs as f64;
                (theta, eval(theta))
            })
            .collect();
        evals += arcs + 1;
        // close the loop exactly
        points.last_mut().unwrap().1 = points[0].1;
        for &(_, v) in &points[..arcs] {
            moduli.observe(v);
        }
        if moduli.degenerate(opts.min_modulus_ratio) {
            return Ok(Winding::NearZero);
        }

        let mut total = 0.0f64;
        let mut stack: Vec<(f64, Complex64, f64, Complex64)> = points
            .windows(2)
            .map(|w| (w[0].0, w[0].1, w[1].0, w[1].1))
            .collect();
        let mut ok = true;
        while let Some((t0, f0, t1, f1)) = stack.pop() {
            let dphi = (f1 / f0).arg();
            if dphi.abs() < PI / 2.0 {
                total += dphi;
                continue;
            }
            if evals >= opts.max_evals {
                ok = false;
                break;
            }
            let tm = 0.5 * (t0 + t1);
            let fm = eval(tm);
            evals += 1;
            moduli.observe(fm);
            if moduli.degenerate(opts.min_modulus_ratio) {
                return Ok(Winding::NearZero);
            }
            stack.push((t0, f0, tm, fm));
            stack.push((tm, fm, t1, f1));
        }
        if ok {
            let w = total / (2.0 * PI);
            let k = w.round();
            if (w - k).abs() < 0.25 {
                return Ok(Winding::Count(k as i64));
            }
        }
        // unresolved: refine the whole contour and try again
        if arcs >= 1 << 14 {
            return Err(Error::WindingUnresolved);
        }
        arcs *= 2;
    }
}

/// Count the zeros of f inside |z| < ρ by the argument principle: the
/// winding number of f around the circle. When f nearly vanishes on the
/// contour, the radius is retried with a random relative perturbation in
/// [1e-7, 1e-6]; after 5 failed retries the sample is rejected with
/// [`Error::ContourZero`]. A negative winding number (possible only for
/// functions with poles, i.e. negative Laurent exponents) is an error.
pub fn count_zeros_disk(
    f: &SampledFunction,
    rho: f64,
    opts: &WindingOptions,
    rng: &mut impl Rng,
) -> Result<usize> {
    count_zeros_impl(&|z| f.eval(z), rho, opts, rng)
}

fn count_zeros_impl(
    f: &dyn Fn(Complex64) -> Complex64,
    rho: f64,
    opts: &WindingOptions,
    rng: &mut impl Rng,
) -> Result<usize> {
    const MAX_RETRIES: usize = 5;
    for attempt in 0..=MAX_RETRIES {
        let r = if attempt == 0 {
            rho
        } else {
            let u: f64 = rng.gen_range(1e-7..=1e-6);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            rho * (1.0 + sign * u)
        };
        match winding_number(f, r, opts)? {
            Winding::Count(k) if k < 0 => return Err(Error::NegativeWinding(k)),
            Winding::Count(k) => return Ok(k as usize),
            Winding::NearZero => continue,
        }
    }
    Err(Error::ContourZero(MAX_RETRIES))
}

/// Monte Carlo controls.
#[derive(Clone, Debug)]
pub struct McOptions {
    /// Series order for the infinite-dimensional atoms.
    pub truncation: usize,
    pub winding: WindingOptions,
    /// Estimate truncation bias by a pilot comparison at twice the order
    /// (only runs when the space has an infinite atom).
    pub check_truncation_bias: bool,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            truncation: 64,
            winding: WindingOptions::default(),
            check_truncation_bias: true,
        }
    }
}

/// Monte Carlo estimate of an expected zero count.
#[derive(Clone, Debug, Serialize)]
pub struct McReport {
    /// Sample mean of the zero count.
    pub mean: f64,
    /// Sample standard deviation / √samples.
    pub stderr: f64,
    /// Retained samples (requested minus discarded).
    pub samples: usize,
    pub seed: u64,
    /// count → frequency over retained samples.
    pub histogram: BTreeMap<usize, u64>,
    pub discarded: usize,
    /// |pilot mean at N − pilot mean at 2N| for truncated spaces.
    pub truncation_bias: Option<f64>,
}

/// Estimate the expected number of zeros of the space in |z| < ρ from
/// `samples` independent draws. Deterministic for fixed
/// (seed, samples, space, ρ) on a fixed build, independent of thread
/// count: sample i always uses the stream keyed by (seed, i).
pub fn mc_expected_count(
    space: &SpaceExpr,
    rho: f64,
    samples: usize,
    seed: u64,
    opts: &McOptions,
) -> Result<McReport> {
    if samples == 0 {
        return Err(Error::InvalidQuery("sample count must be positive".into()));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidQuery(format!("disk radius {rho} invalid")));
    }
    let terms = expand_basis(space, opts.truncation)?;
    let counts = run_batch(&terms, rho, 0..samples, seed, &opts.winding)?;

    let discarded = counts.iter().filter(|c| c.is_none()).count();
    if discarded * 1000 > samples {
        return Err(Error::ExcessiveDiscards { discarded, samples });
    }
    let retained: Vec<usize> = counts.iter().flatten().copied().collect();
    let n = retained.len();
    let mean = retained.iter().sum::<usize>() as f64 / n as f64;
    let stderr = if n > 1 {
        let var = retained.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    let mut histogram = BTreeMap::new();
    for c in &retained {
        *histogram.entry(*c).or_insert(0u64) += 1;
    }

    let truncation_bias = if space.has_infinite_atom() && opts.check_truncation_bias {
        let pilot = samples.min(1000);
        let fine_terms = expand_basis(space, 2 * opts.truncation)?;
        let fine = run_batch(&fine_terms, rho, 0..pilot, seed, &opts.winding)?;
        let coarse_mean = batch_mean(&counts[..pilot]);
        let fine_mean = batch_mean(&fine);
        let bias = (coarse_mean - fine_mean).abs();
        let limit = (stderr / 3.0).max(f64::EPSILON);
        if bias > limit {
            return Err(Error::TruncationBias { bias, limit });
        }
        Some(bias)
    } else {
        None
    };

    Ok(McReport {
        mean,
        stderr,
        samples: n,
        seed,
        histogram,
        discarded,
        truncation_bias,
    })
}

fn batch_mean(counts: &[Option<usize>]) -> f64 {
    let kept: Vec<usize> = counts.iter().flatten().copied().collect();
    kept.iter().sum::<usize>() as f64 / kept.len().max(1) as f64
}

fn run_batch(
    terms: &[BasisTerm],
    rho: f64,
    range: std::ops::Range<usize>,
    seed: u64,
    winding: &WindingOptions,
) -> Result<Vec<Option<usize>>> {
    range
        .into_par_iter()
        .map(|idx| {
            let mut rng = sample_rng(seed, idx as u64);
            let coeffs: Vec<Complex64> = (0..terms.len()).map(|_| standard_complex(&mut rng)).collect();
            let f = |z: Complex64| eval_terms(terms, &coeffs, z);
            match count_zeros_impl(&f, rho, winding, &mut rng) {
                Ok(k) => Ok(Some(k)),
                Err(Error::ContourZero(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn z(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn exp01() -> SpaceExpr {
        SpaceExpr::exp_span(vec![vec![z(0.0, 0.0)], vec![z(1.0, 0.0)]]).unwrap()
    }

    fn poly_function(coeffs: &[Complex64]) -> SampledFunction {
        SampledFunction {
            terms: (0..coeffs.len())
                .map(|j| BasisTerm {
                    exponent: j as i64,
                    frequency: z(0.0, 0.0),
                    weight: 1.0,
                })
                .collect(),
            coefficients: coeffs.to_vec(),
        }
    }

    #[test]
    fn winding_counts_monomial_and_shifted_zeros() {
        let opts = WindingOptions::default();
        let mut rng = sample_rng(1, 0);
        // z³ on the unit circle
        let f = poly_function(&[z(0.0, 0.0), z(0.0, 0.0), z(0.0, 0.0), z(1.0, 0.0)]);
        assert_eq!(count_zeros_disk(&f, 1.0, &opts, &mut rng).unwrap(), 3);
        // z − 2 has its zero outside
        let f = poly_function(&[z(-2.0, 0.0), z(1.0, 0.0)]);
        assert_eq!(count_zeros_disk(&f, 1.0, &opts, &mut rng).unwrap(), 0);
        // e^z never vanishes
        let f = SampledFunction {
            terms: vec![BasisTerm { exponent: 0, frequency: z(1.0, 0.0), weight: 1.0 }],
            coefficients: vec![z(1.0, 0.0)],
        };
        assert_eq!(count_zeros_disk(&f, 1.0, &opts, &mut rng).unwrap(), 0);
    }

    #[test]
    fn zero_on_contour_retries_with_perturbed_radius() {
        let opts = WindingOptions::default();
        let mut rng = sample_rng(7, 3);
        // z − 1 vanishes exactly on |z| = 1; retry must resolve either way
        let f = poly_function(&[z(-1.0, 0.0), z(1.0, 0.0)]);
        let k = count_zeros_disk(&f, 1.0, &opts, &mut rng).unwrap();
        assert!(k <= 1);
    }

    #[test]
    fn weyl_basis_terms() {
        let terms = expand_basis(&SpaceExpr::weyl(3, 1).unwrap(), 64).unwrap();
        let got: Vec<(i64, f64)> = terms.iter().map(|t| (t.exponent, t.weight)).collect();
        assert_eq!(got, vec![(0, 1.0), (1, 3.0), (2, 3.0), (3, 1.0)]);
    }

    #[test]
    fn product_basis_pairs_monomials_with_exponentials() {
        let space = SpaceExpr::product(exp01(), SpaceExpr::weyl(2, 1).unwrap()).unwrap();
        let terms = expand_basis(&space, 64).unwrap();
        // {z^j} ∪ {z^j e^z} with binomial weights, six terms in all
        assert_eq!(terms.len(), 6);
        let plain: Vec<(i64, f64)> = terms
            .iter()
            .filter(|t| t.frequency == z(0.0, 0.0))
            .map(|t| (t.exponent, t.weight))
            .collect();
        assert_eq!(plain, vec![(0, 1.0), (1, 2.0), (2, 1.0)]);
        let expo: Vec<(i64, f64)> = terms
            .iter()
            .filter(|t| t.frequency == z(1.0, 0.0))
            .map(|t| (t.exponent, t.weight))
            .collect();
        assert_eq!(expo, vec![(0, 1.0), (1, 2.0), (2, 1.0)]);
    }

    #[test]
    fn gaf_truncation_is_plain_power_series() {
        let terms = expand_basis(&SpaceExpr::hyperbolic_gaf(), 8).unwrap();
        assert_eq!(terms.len(), 9);
        assert!(terms.iter().all(|t| t.weight == 1.0 && t.frequency == z(0.0, 0.0)));
        let gef = expand_basis(&SpaceExpr::gef(), 4).unwrap();
        let w: Vec<f64> = gef.iter().map(|t| t.weight).collect();
        assert_eq!(w, vec![1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0]);
    }

    #[test]
    fn square_power_matches_self_product() {
        let s = exp01();
        let squared = expand_basis(&SpaceExpr::power(s.clone(), 2).unwrap(), 8).unwrap();
        let prod = expand_basis(&SpaceExpr::product(s.clone(), s).unwrap(), 8).unwrap();
        assert_eq!(squared, prod);
    }

    #[test]
    fn scale_invariance_of_counts() {
        let space = SpaceExpr::product(exp01(), SpaceExpr::weyl(4, 1).unwrap()).unwrap();
        let opts = WindingOptions::default();
        for idx in 0..20 {
            let mut rng = sample_rng(11, idx);
            let f = sample_function(&space, 64, &mut rng).unwrap();
            let mut scaled = f.clone();
            for c in &mut scaled.coefficients {
                *c *= z(-3.7, 1.9);
            }
            let mut r1 = sample_rng(999, idx);
            let mut r2 = sample_rng(999, idx);
            let k1 = count_zeros_disk(&f, 1.0, &opts, &mut r1).unwrap();
            let k2 = count_zeros_disk(&scaled, 1.0, &opts, &mut r2).unwrap();
            assert_eq!(k1, k2);
        }
    }

    #[test]
    fn winding_stable_under_halved_initial_arcs() {
        let space = SpaceExpr::product(exp01(), SpaceExpr::weyl(3, 1).unwrap()).unwrap();
        let coarse = WindingOptions { initial_arcs: 16, ..Default::default() };
        let fine = WindingOptions { initial_arcs: 32, ..Default::default() };
        for idx in 0..50 {
            let mut rng = sample_rng(5150, idx);
            let f = sample_function(&space, 64, &mut rng).unwrap();
            let mut r1 = sample_rng(1, idx);
            let mut r2 = sample_rng(1, idx);
            assert_eq!(
                count_zeros_disk(&f, 1.0, &coarse, &mut r1).unwrap(),
                count_zeros_disk(&f, 1.0, &fine, &mut r2).unwrap()
            );
        }
    }

    /// Companion-matrix eigenvalue oracle: roots of Σ aⱼ zʲ are the
    /// eigenvalues of the companion matrix of the monic polynomial.
    /// The complex matrix is embedded as the real 2d×2d block matrix
    /// [[Re, −Im], [Im, Re]], whose spectrum is the roots plus their
    /// conjugates — same moduli, so inside-counts just halve.
    fn companion_count_inside(coeffs: &[Complex64], rho: f64) -> usize {
        let d = coeffs.len() - 1;
        assert!(coeffs[d].norm() > 0.0);
        let mut comp = DMatrix::<Complex64>::zeros(d, d);
        for j in 1..d {
            comp[(j, j - 1)] = z(1.0, 0.0);
        }
        for j in 0..d {
            comp[(j, d - 1)] = -coeffs[j] / coeffs[d];
        }
        let mut real = DMatrix::<f64>::zeros(2 * d, 2 * d);
        for j in 0..d {
            for k in 0..d {
                let v = comp[(j, k)];
                real[(j, k)] = v.re;
                real[(j, d + k)] = -v.im;
                real[(d + j, k)] = v.im;
                real[(d + j, d + k)] = v.re;
            }
        }
        let eig = real.complex_eigenvalues();
        let inside = eig.iter().filter(|l| l.norm() < rho).count();
        assert_eq!(inside % 2, 0);
        inside / 2
    }

    #[test]
    fn winding_matches_companion_oracle_on_seeded_corpus() {
        // full 1000-sample run lives in the acceptance suite
        let opts = WindingOptions::default();
        for idx in 0..200u64 {
            let mut rng = sample_rng(20240601, idx);
            let coeffs: Vec<Complex64> = (0..7).map(|_| standard_complex(&mut rng)).collect();
            let f = poly_function(&coeffs);
            let got = count_zeros_disk(&f, 1.0, &opts, &mut rng).unwrap();
            assert_eq!(got, companion_count_inside(&coeffs, 1.0), "sample {idx}");
        }
    }

    #[test]
    fn weyl_counts_never_exceed_degree() {
        let opts = WindingOptions::default();
        let space = SpaceExpr::weyl(4, 1).unwrap();
        for idx in 0..100 {
            let mut rng = sample_rng(31337, idx);
            let f = sample_function(&space, 64, &mut rng).unwrap();
            let k = count_zeros_disk(&f, 1.9, &opts, &mut rng).unwrap();
            assert!(k <= 4);
        }
    }

    #[test]
    fn mc_agrees_with_half_degree_on_small_run() {
        let report = mc_expected_count(
            &SpaceExpr::weyl(4, 1).unwrap(),
            1.0,
            2000,
            42,
            &McOptions::default(),
        )
        .unwrap();
        assert!((report.mean - 2.0).abs() <= 4.0 * report.stderr, "{report:?}");
        assert_eq!(report.histogram.values().sum::<u64>() as usize, report.samples);
    }

    #[test]
    fn mc_is_reproducible() {
        let space = SpaceExpr::product(exp01(), SpaceExpr::weyl(2, 1).unwrap()).unwrap();
        let a = mc_expected_count(&space, 1.0, 500, 7, &McOptions::default()).unwrap();
        let b = mc_expected_count(&space, 1.0, 500, 7, &McOptions::default()).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.histogram, b.histogram);
    }

    #[test]
    fn gaf_truncation_bias_check_passes_at_default_order() {
        let report = mc_expected_count(
            &SpaceExpr::hyperbolic_gaf(),
            0.5,
            1500,
            99,
            &McOptions::default(),
        )
        .unwrap();
        let bias = report.truncation_bias.expect("bias estimated for infinite atom");
        assert!(bias <= report.stderr / 3.0 + f64::EPSILON);
        // ρ²/(1−ρ²) = 1/3 at ρ = 0.5
        assert!((report.mean - 1.0 / 3.0).abs() <= 4.0 * report.stderr);
    }

    #[test]
    fn multivariate_space_is_rejected() {
        let t = SpaceExpr::tensor(vec![SpaceExpr::weyl(1, 1).unwrap(); 2]).unwrap();
        assert!(matches!(expand_basis(&t, 8), Err(Error::NonUnivariate)));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let space = SpaceExpr::product(exp01(), SpaceExpr::weyl(3, 1).unwrap()).unwrap();
        let mut rng = sample_rng(2, 0);
        let f = sample_function(&space, 64, &mut rng).unwrap();
        let p = z(0.4, -0.3);
        let h = 1e-6;
        let fd = (f.eval(p + z(h, 0.0)) - f.eval(p - z(h, 0.0))) / (2.0 * h);
        assert_relative_eq!(f.eval_deriv(p).re, fd.re, epsilon = 1e-6);
        assert_relative_eq!(f.eval_deriv(p).im, fd.im, epsilon = 1e-6);
    }
}
