//! Moment integrals of a two-point estimator under a homogeneous Poisson
//! process, where the `i`th product density is the constant `λⁱ`:
//!
//! ```text
//! E θ̂ = λ² ∫∫ f          s₂ = λ² ∫∫ f²
//! s₃  = λ³ ∫_W (∫_W f(x₁, x₂) dx₂)² dx₁
//! s₄  = λ⁴ ∫∫∫∫ f(x₁, x₂) f(x₃, x₄)
//! ```
//!
//! Two independent integrators are provided. Radial pair functions with
//! bounded support are integrated in polar offset coordinates, which keeps
//! small-support kernels cheap; anything else is integrated over `W²`
//! directly.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;

use crate::bootstrap::AlphaCoefficients;
use crate::error::{Error, Result};
use crate::geometry::{Domain, Window2};
use crate::numeric::{composite_rule, NeumaierSum};
use crate::rng::RngSeed;
use crate::two_point::PairFunction;

pub const MIN_MC_SAMPLES: usize = 1_000;
pub const MIN_QUADRATURE_NODES: usize = 8;
const MC_CHUNK: usize = 4_096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntegrationSpec {
    MonteCarlo { samples: usize, seed: RngSeed },
    /// Gauss–Legendre product rule, `nodes_per_axis` nodes per panel. The
    /// error estimate is the change when the order is doubled.
    ProductQuadrature { nodes_per_axis: usize },
}

impl IntegrationSpec {
    pub fn monte_carlo(samples: usize, seed: RngSeed) -> Result<Self> {
        if samples < MIN_MC_SAMPLES {
            return Err(Error::invalid(format!("monte carlo needs >= {MIN_MC_SAMPLES} samples, got {samples}")));
        }
        Ok(IntegrationSpec::MonteCarlo { samples, seed })
    }

    pub fn quadrature(nodes_per_axis: usize) -> Result<Self> {
        if nodes_per_axis < MIN_QUADRATURE_NODES {
            return Err(Error::invalid(format!(
                "quadrature needs >= {MIN_QUADRATURE_NODES} nodes per axis, got {nodes_per_axis}"
            )));
        }
        Ok(IntegrationSpec::ProductQuadrature { nodes_per_axis })
    }
}

/// Absolute error estimates, one per component.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentErrors {
    pub s2: f64,
    pub s3: f64,
    pub s4: f64,
    pub e_theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub s2: f64,
    pub s3: f64,
    pub s4: f64,
    pub e_theta: f64,
    pub lambda: f64,
    pub f_description: String,
    pub window: Window2,
    pub errors: MomentErrors,
}

impl MomentSet {
    /// Error bound of `c₄s₄ + c₃s₃ + c₂s₂`.
    pub fn linear_error(&self, c4: f64, c3: f64, c2: f64) -> f64 {
        c4.abs() * self.errors.s4 + c3.abs() * self.errors.s3 + c2.abs() * self.errors.s2
    }

    /// `4s₃ + 6s₂ / 4s₃ + 2s₂`, the predicted bootstrap-to-truth ratio.
    pub fn poissonized_ratio(&self) -> f64 {
        (4.0 * self.s3 + 6.0 * self.s2) / (4.0 * self.s3 + 2.0 * self.s2)
    }
}

/// Raw integrals over window powers, before scaling by `λⁱ`.
#[derive(Debug, Clone, Copy, Default)]
struct RawIntegrals {
    i1: f64,
    i2: f64,
    i3: f64,
    i4: f64,
    err: [f64; 4],
}

pub fn s_moments_poisson(
    lambda: f64,
    window: &Window2,
    f: &PairFunction,
    spec: &IntegrationSpec,
) -> Result<MomentSet> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::invalid(format!("intensity {lambda} must be finite and >= 0")));
    }
    if f.window() != window {
        return Err(Error::invalid("pair function window differs from the integration window"));
    }
    let raw = if f.is_zero() {
        RawIntegrals::default()
    } else {
        match *spec {
            IntegrationSpec::MonteCarlo { samples, seed } => {
                if samples < MIN_MC_SAMPLES {
                    return Err(Error::invalid(format!("monte carlo needs >= {MIN_MC_SAMPLES} samples")));
                }
                monte_carlo(window, f, samples, seed)?
            }
            IntegrationSpec::ProductQuadrature { nodes_per_axis } => {
                if nodes_per_axis < MIN_QUADRATURE_NODES {
                    return Err(Error::invalid(format!("quadrature needs >= {MIN_QUADRATURE_NODES} nodes")));
                }
                let coarse = quadrature(window, f, nodes_per_axis)?;
                let fine = quadrature(window, f, 2 * nodes_per_axis)?;
                RawIntegrals {
                    err: [
                        (fine.i1 - coarse.i1).abs(),
                        (fine.i2 - coarse.i2).abs(),
                        (fine.i3 - coarse.i3).abs(),
                        (fine.i4 - coarse.i4).abs(),
                    ],
                    ..fine
                }
            }
        }
    };
    let l2 = lambda * lambda;
    let l3 = l2 * lambda;
    let l4 = l2 * l2;
    Ok(MomentSet {
        s2: l2 * raw.i2,
        s3: l3 * raw.i3,
        s4: l4 * raw.i4,
        e_theta: l2 * raw.i1,
        lambda,
        f_description: f.describe(),
        window: *window,
        errors: MomentErrors {
            s2: l2 * raw.err[1],
            s3: l3 * raw.err[2],
            s4: l4 * raw.err[3],
            e_theta: l2 * raw.err[0],
        },
    })
}

/// True variance of `θ̂` for the Poisson process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueVariance {
    /// `4s₃ + 2s₂`.
    pub variance: f64,
    pub error: f64,
    /// `s₄ + 4s₃ + 2s₂ − (E θ̂)²`.
    pub full_form: f64,
    /// `s₄ − (E θ̂)²`, zero up to integration error.
    pub cancellation_residual: f64,
}

pub fn true_variance_poisson(m: &MomentSet) -> TrueVariance {
    let variance = 4.0 * m.s3 + 2.0 * m.s2;
    let full_form = m.s4 + 4.0 * m.s3 + 2.0 * m.s2 - m.e_theta * m.e_theta;
    TrueVariance {
        variance,
        error: m.linear_error(0.0, 4.0, 2.0),
        full_form,
        cancellation_residual: m.s4 - m.e_theta * m.e_theta,
    }
}

/// `E v̂* = α₄s₄ + 4α₃s₃ + 2α₂s₂`.
pub fn expected_bootstrap_variance(m: &MomentSet, a: &AlphaCoefficients) -> f64 {
    a.alpha4 * m.s4 + 4.0 * a.alpha3 * m.s3 + 2.0 * a.alpha2 * m.s2
}

pub fn expected_bootstrap_variance_error(m: &MomentSet, a: &AlphaCoefficients) -> f64 {
    m.linear_error(a.alpha4, 4.0 * a.alpha3, 2.0 * a.alpha2)
}

fn check_finite(v: f64, location: impl FnOnce() -> Vec<f64>) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteIntegrand { location: location() })
    }
}

#[derive(Clone, Copy, Default)]
struct Moments4 {
    sum: [NeumaierSum; 4],
    sum_sq: [NeumaierSum; 4],
}

impl Moments4 {
    fn push(&mut self, v: [f64; 4]) {
        for k in 0..4 {
            self.sum[k].add(v[k]);
            self.sum_sq[k].add(v[k] * v[k]);
        }
    }

    fn merge(&mut self, other: &Moments4) {
        for k in 0..4 {
            self.sum[k].add(other.sum[k].value());
            self.sum_sq[k].add(other.sum_sq[k].value());
        }
    }
}

fn monte_carlo(window: &Window2, f: &PairFunction, samples: usize, seed: RngSeed) -> Result<RawIntegrals> {
    let nu = window.area();
    let chunks = samples.div_ceil(MC_CHUNK);
    let radial = f.radial_support();

    let per_chunk: Vec<Result<Moments4>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seed.child(c as u64).rng();
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut acc = Moments4::default();
            for _ in 0..count {
                let v = match radial {
                    Some((lo, hi)) => radial_sample(window, f, lo, hi, nu, &mut rng)?,
                    None => uniform_sample(window, f, nu, &mut rng)?,
                };
                acc.push(v);
            }
            Ok(acc)
        })
        .collect();

    let mut total = Moments4::default();
    for chunk in per_chunk {
        total.merge(&chunk?);
    }
    let m = samples as f64;
    let mut mean = [0.0; 4];
    let mut err = [0.0; 4];
    for k in 0..4 {
        mean[k] = total.sum[k].value() / m;
        let var = (total.sum_sq[k].value() / m - mean[k] * mean[k]).max(0.0) * m / (m - 1.0);
        err[k] = (var / m).sqrt();
    }
    Ok(RawIntegrals { i1: mean[0], i2: mean[1], i3: mean[2], i4: mean[3], err })
}

/// One importance sample: `x` uniform in `W`, offsets with radius uniform on
/// the support and uniform direction.
fn radial_sample<R: Rng + ?Sized>(
    window: &Window2,
    f: &PairFunction,
    lo: f64,
    hi: f64,
    nu: f64,
    rng: &mut R,
) -> Result<[f64; 4]> {
    let span = 2.0 * PI * (hi - lo);
    let offset = |x: [f64; 2], rng: &mut R| -> Result<(f64, f64)> {
        let rho = lo + (hi - lo) * rng.random::<f64>();
        let phi = 2.0 * PI * rng.random::<f64>();
        let y = [x[0] + rho * phi.cos(), x[1] + rho * phi.sin()];
        if !window.contains(&y) {
            return Ok((0.0, 0.0));
        }
        let g = check_finite(f.radial_profile(rho), || vec![x[0], x[1], y[0], y[1]])?;
        Ok((span * rho * g, span * rho * g * g))
    };
    let x = window.sample_uniform(rng);
    let (w1, w1_sq) = offset(x, rng)?;
    let (w2, _) = offset(x, rng)?;
    let x2 = window.sample_uniform(rng);
    let (w3, _) = offset(x2, rng)?;
    Ok([nu * w1, nu * w1_sq, nu * w1 * w2, nu * w1 * nu * w3])
}

fn uniform_sample<R: Rng + ?Sized>(window: &Window2, f: &PairFunction, nu: f64, rng: &mut R) -> Result<[f64; 4]> {
    let mut draw = || window.sample_uniform(rng);
    let (x, y1, y2, x2, y3) = (draw(), draw(), draw(), draw(), draw());
    let at = |a: [f64; 2], b: [f64; 2]| check_finite(f.eval(a, b), || vec![a[0], a[1], b[0], b[1]]);
    let f1 = at(x, y1)?;
    let f2 = at(x, y2)?;
    let f3 = at(x2, y3)?;
    let nu2 = nu * nu;
    Ok([nu2 * f1, nu2 * f1 * f1, nu2 * nu * f1 * f2, nu2 * f1 * nu2 * f3])
}

fn quadrature(window: &Window2, f: &PairFunction, order: usize) -> Result<RawIntegrals> {
    match f.radial_support() {
        Some((lo, hi)) => Ok(polar_quadrature(window, f, lo, hi, order)),
        None => cartesian_quadrature(window, f, order),
    }
}

/// Set covariance `ν(W ∩ (W − u))` of a rectangle.
fn set_covariance(w: &Window2, u: [f64; 2]) -> f64 {
    (w.width() - u[0].abs()).max(0.0) * (w.height() - u[1].abs()).max(0.0)
}

/// `ν(W ∩ (W − u) ∩ (W − v))`.
fn triple_covariance(w: &Window2, u: [f64; 2], v: [f64; 2]) -> f64 {
    let side = |len: f64, a: f64, b: f64| (len - (0f64.max(a).max(b) - 0f64.min(a).min(b))).max(0.0);
    side(w.width(), u[0], v[0]) * side(w.height(), u[1], v[1])
}

fn polar_quadrature(window: &Window2, f: &PairFunction, lo: f64, hi: f64, order: usize) -> RawIntegrals {
    let mut rho_breaks = vec![];
    if let Some(c) = f.radial_center() {
        rho_breaks.push(c);
    }
    let rho_rule = composite_rule(lo, hi, &rho_breaks, order);
    let phi_rule = composite_rule(0.0, 2.0 * PI, &[0.5 * PI, PI, 1.5 * PI], order);
    // (offset, measure weight including the Jacobian, g(ρ))
    let nodes: Vec<([f64; 2], f64, f64)> = rho_rule
        .iter()
        .flat_map(|&(rho, wr)| {
            let g = f.radial_profile(rho);
            phi_rule
                .iter()
                .map(move |&(phi, wp)| ([rho * phi.cos(), rho * phi.sin()], wr * wp * rho, g))
        })
        .collect();

    let mut i1 = NeumaierSum::new();
    let mut i2 = NeumaierSum::new();
    for &(u, w, g) in &nodes {
        let gamma = set_covariance(window, u);
        i1.add(w * g * gamma);
        i2.add(w * g * g * gamma);
    }
    let rows: Vec<f64> = nodes
        .par_iter()
        .map(|&(u, wu, gu)| {
            let mut acc = NeumaierSum::new();
            for &(v, wv, gv) in &nodes {
                acc.add(wv * gv * triple_covariance(window, u, v));
            }
            wu * gu * acc.value()
        })
        .collect();
    let i3 = rows.iter().copied().sum::<NeumaierSum>().value();
    let i1 = i1.value();
    RawIntegrals { i1, i2: i2.value(), i3, i4: i1 * i1, err: [0.0; 4] }
}

fn cartesian_quadrature(window: &Window2, f: &PairFunction, order: usize) -> Result<RawIntegrals> {
    let xs = composite_rule(window.x_min, window.x_max, &[], order);
    let ys = composite_rule(window.y_min, window.y_max, &[], order);
    let nodes: Vec<([f64; 2], f64)> = xs
        .iter()
        .flat_map(|&(x, wx)| ys.iter().map(move |&(y, wy)| ([x, y], wx * wy)))
        .collect();
    let rows: Vec<Result<(f64, f64, f64)>> = nodes
        .par_iter()
        .map(|&(a, wa)| {
            let mut inner = NeumaierSum::new();
            let mut inner_sq = NeumaierSum::new();
            for &(b, wb) in &nodes {
                let v = check_finite(f.eval(a, b), || vec![a[0], a[1], b[0], b[1]])?;
                inner.add(wb * v);
                inner_sq.add(wb * v * v);
            }
            let j = inner.value();
            Ok((wa * j, wa * inner_sq.value(), wa * j * j))
        })
        .collect();
    let (mut i1, mut i2, mut i3) = (NeumaierSum::new(), NeumaierSum::new(), NeumaierSum::new());
    for row in rows {
        let (a, b, c) = row?;
        i1.add(a);
        i2.add(b);
        i3.add(c);
    }
    let i1 = i1.value();
    Ok(RawIntegrals { i1, i2: i2.value(), i3: i3.value(), i4: i1 * i1, err: [0.0; 4] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bootstrap::{alpha_coefficients, ResampleScheme};
    use crate::kernel::{KernelFunction, KernelKind};

    fn unit() -> Window2 {
        Window2::unit_square()
    }

    fn box_f(r: f64, b: f64) -> PairFunction {
        PairFunction::product_density(unit(), r, KernelFunction::new(KernelKind::Box, b).unwrap()).unwrap()
    }

    #[test]
    fn zero_function_gives_zero_moments() {
        let m = s_moments_poisson(100.0, &unit(), &PairFunction::zero(unit()), &IntegrationSpec::quadrature(8).unwrap())
            .unwrap();
        assert_eq!((m.s2, m.s3, m.s4, m.e_theta), (0.0, 0.0, 0.0, 0.0));
        let tv = true_variance_poisson(&m);
        assert_eq!(tv.variance, 0.0);
        let a = alpha_coefficients(None, ResampleScheme::Poissonized).unwrap();
        assert_eq!(expected_bootstrap_variance(&m, &a), 0.0);
    }

    #[test]
    fn unit_function_unit_square() {
        let f = PairFunction::constant(unit(), 1.0).unwrap();
        for spec in [
            IntegrationSpec::quadrature(8).unwrap(),
            IntegrationSpec::monte_carlo(2_000, RngSeed::new(1)).unwrap(),
        ] {
            let m = s_moments_poisson(1.0, &unit(), &f, &spec).unwrap();
            for v in [m.s2, m.s3, m.s4, m.e_theta] {
                assert!((v - 1.0).abs() < 1e-12, "{spec:?}: {v}");
            }
        }
    }

    #[test]
    fn spec_validation() {
        assert!(IntegrationSpec::monte_carlo(999, RngSeed::new(0)).is_err());
        assert!(IntegrationSpec::quadrature(7).is_err());
        let f = PairFunction::constant(unit(), 1.0).unwrap();
        let spec = IntegrationSpec::quadrature(8).unwrap();
        assert!(s_moments_poisson(-1.0, &unit(), &f, &spec).is_err());
        let other = Window2::new(0.0, 2.0, 0.0, 1.0).unwrap();
        assert!(s_moments_poisson(1.0, &other, &f, &spec).is_err());
    }

    #[test]
    fn non_finite_integrand_reports_location() {
        let f = PairFunction::custom(unit(), |x, _| if x[0] > 0.5 { f64::NAN } else { 1.0 });
        let err = s_moments_poisson(1.0, &unit(), &f, &IntegrationSpec::quadrature(8).unwrap()).unwrap_err();
        match err {
            Error::NonFiniteIntegrand { location } => {
                assert_eq!(location.len(), 4);
                assert!(location[0] > 0.5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn set_covariances() {
        let w = Window2::new(0.0, 2.0, 0.0, 1.0).unwrap();
        assert_eq!(set_covariance(&w, [0.0, 0.0]), 2.0);
        assert_eq!(set_covariance(&w, [0.5, -0.5]), 1.5 * 0.5);
        assert_eq!(set_covariance(&w, [2.5, 0.0]), 0.0);
        assert_eq!(triple_covariance(&w, [0.5, 0.0], [0.0, 0.0]), set_covariance(&w, [0.5, 0.0]));
        assert_eq!(triple_covariance(&w, [0.5, 0.2], [-0.5, 0.1]), 1.0 * 0.8);
    }

    #[test]
    fn polar_quadrature_matches_isotropized_covariance() {
        // For ρ below both side lengths the angular integral of the set
        // covariance is 2πLxLy − 4ρ(Lx + Ly) + 2ρ²; with a box kernel the
        // radial integral is then a polynomial integral.
        let (r, b) = (0.05, 0.01);
        let f = box_f(r, b);
        let m = s_moments_poisson(1.0, &unit(), &f, &IntegrationSpec::quadrature(8).unwrap()).unwrap();
        let c = 1.0 / (2.0 * b) / (2.0 * PI * r);
        let antideriv = |p: f64| 2.0 * PI * p * p / 2.0 - 8.0 * p * p * p / 3.0 + 2.0 * p.powi(4) / 4.0;
        let want = c * (antideriv(r + b) - antideriv(r - b));
        assert!((m.e_theta - want).abs() < 1e-12 * want, "{} vs {want}", m.e_theta);
        assert!((m.s2 - c * want).abs() < 1e-12 * c * want);
    }

    #[test]
    fn scaling_in_lambda() {
        let f = box_f(0.05, 0.01);
        let spec = IntegrationSpec::quadrature(8).unwrap();
        let base = s_moments_poisson(100.0, &unit(), &f, &spec).unwrap();
        for c in [0.5, 2.0] {
            let m = s_moments_poisson(100.0 * c, &unit(), &f, &spec).unwrap();
            assert!((m.s2 / base.s2 - c.powi(2)).abs() < 1e-12);
            assert!((m.s3 / base.s3 - c.powi(3)).abs() < 1e-12);
            assert!((m.s4 / base.s4 - c.powi(4)).abs() < 1e-12);
        }
    }

    #[test]
    fn methods_agree_within_errors() {
        let fs = [
            box_f(0.05, 0.01),
            PairFunction::product_density(unit(), 0.1, KernelFunction::new(KernelKind::Epanechnikov, 0.03).unwrap())
                .unwrap(),
            PairFunction::custom(unit(), |x, y| (-(x[0] - y[0]).powi(2) - (x[1] - y[1]).powi(2)).exp()),
        ];
        for f in &fs {
            let q = s_moments_poisson(100.0, &unit(), f, &IntegrationSpec::quadrature(12).unwrap()).unwrap();
            let mc = s_moments_poisson(100.0, &unit(), f, &IntegrationSpec::monte_carlo(400_000, RngSeed::new(5)).unwrap())
                .unwrap();
            let pairs = [
                (q.e_theta, mc.e_theta, q.errors.e_theta + 3.0 * mc.errors.e_theta),
                (q.s2, mc.s2, q.errors.s2 + 3.0 * mc.errors.s2),
                (q.s3, mc.s3, q.errors.s3 + 3.0 * mc.errors.s3),
                (q.s4, mc.s4, q.errors.s4 + 3.0 * mc.errors.s4),
            ];
            for (i, (a, b, tol)) in pairs.iter().enumerate() {
                assert!((a - b).abs() <= *tol, "{:?} component {i}: {a} vs {b} (tol {tol})", f);
            }
            let tv = true_variance_poisson(&mc);
            assert!(tv.cancellation_residual.abs() <= 3.0 * (mc.errors.s4 + 2.0 * mc.e_theta * mc.errors.e_theta));
            let tq = true_variance_poisson(&q);
            assert!(tq.cancellation_residual.abs() <= 1e-12 * q.s4);
        }
    }

    #[test]
    fn multinomial_limit_close_to_poissonized() {
        let f = box_f(0.05, 0.01);
        let m = s_moments_poisson(100.0, &unit(), &f, &IntegrationSpec::quadrature(8).unwrap()).unwrap();
        let pois = expected_bootstrap_variance(&m, &alpha_coefficients(None, ResampleScheme::Poissonized).unwrap());
        assert!((pois - (4.0 * m.s3 + 6.0 * m.s2)).abs() < 1e-12 * pois);
        let multi = expected_bootstrap_variance(
            &m,
            &alpha_coefficients(Some(10_000), ResampleScheme::Multinomial).unwrap(),
        );
        assert!((multi / pois - 1.0).abs() < 0.01, "{multi} vs {pois}");
    }
}
