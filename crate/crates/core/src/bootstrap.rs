//! Pointwise bootstrap of a planar pattern.
//!
//! A resample is encoded by occurrence counts `w(i)`. The bootstrap statistic
//! is `θ̂* = Σ_{i≠j} f(x_i, x_j) w(i) w(j)`, and as the number of resamples
//! grows its sample variance converges to
//!
//! ```text
//! α₄·Q4 + 4·α₃·T3 + 2·α₂·R
//! ```
//!
//! with the distinct-index sums of [`TwoPointSums`] and the moment
//! differences `α₄ = E w₁w₂w₃w₄ − (E w₁w₂)²`, `α₃ = E w₁²w₂w₃ − (E w₁w₂)²`,
//! `α₂ = E (w₁w₂)² − (E w₁w₂)²`.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::PlanarPattern;
use crate::numeric::{mean_and_variance, variance_standard_error};
use crate::rng::RngSeed;
use crate::two_point::{PairFunction, PairTable, TwoPointSums};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResampleScheme {
    /// `n` draws with replacement: `w ~ Multinomial(n; 1/n, …, 1/n)`.
    Multinomial,
    /// `w(i)` i.i.d. Poisson(1), i.e. a Poisson(n) number of draws.
    Poissonized,
}

impl FromStr for ResampleScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multinomial" => Ok(ResampleScheme::Multinomial),
            "poissonized" | "poisson" => Ok(ResampleScheme::Poissonized),
            other => Err(Error::invalid(format!(
                "unknown scheme {other:?} (expected multinomial|poissonized)"
            ))),
        }
    }
}

impl fmt::Display for ResampleScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResampleScheme::Multinomial => "multinomial",
            ResampleScheme::Poissonized => "poissonized",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightVector {
    weights: Vec<u32>,
    scheme: ResampleScheme,
}

impl WeightVector {
    pub fn new(weights: Vec<u32>, scheme: ResampleScheme) -> Result<Self> {
        if scheme == ResampleScheme::Multinomial {
            let total: u64 = weights.iter().map(|&w| w as u64).sum();
            if total != weights.len() as u64 {
                return Err(Error::invalid(format!(
                    "multinomial weights sum to {total}, expected {}",
                    weights.len()
                )));
            }
        }
        Ok(Self { weights, scheme })
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn scheme(&self) -> ResampleScheme {
        self.scheme
    }
}

fn fill_weights<R: Rng + ?Sized>(rng: &mut R, scheme: ResampleScheme, out: &mut [u32]) {
    out.fill(0);
    let n = out.len();
    match scheme {
        ResampleScheme::Multinomial => {
            for _ in 0..n {
                out[rng.random_range(0..n)] += 1;
            }
        }
        ResampleScheme::Poissonized => {
            let unit = Poisson::new(1.0).expect("unit mean");
            for w in out.iter_mut() {
                *w = unit.sample(rng) as u32;
            }
        }
    }
}

/// One resample's occurrence counts for `n` points.
pub fn draw_weights(n: usize, scheme: ResampleScheme, seed: RngSeed) -> Result<WeightVector> {
    if n == 0 {
        return Err(Error::invalid("cannot resample an empty pattern"));
    }
    let mut weights = vec![0; n];
    fill_weights(&mut seed.rng(), scheme, &mut weights);
    Ok(WeightVector { weights, scheme })
}

/// `θ̂* = Σ_{i≠j} f(x_i, x_j) w(i) w(j)` for one weight vector.
pub fn bootstrap_statistic(pattern: &PlanarPattern, f: &PairFunction, weights: &WeightVector) -> Result<f64> {
    if weights.len() != pattern.len() {
        return Err(Error::LengthMismatch { expected: pattern.len(), found: weights.len() });
    }
    Ok(PairTable::new(pattern, f).weighted_statistic(weights.as_slice()))
}

/// Summary of `N` bootstrap replicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapVariance {
    /// `v̂*_N`, the unbiased sample variance of the `θ̂*_k`.
    pub variance: f64,
    /// Approximate standard error of `variance`.
    pub standard_error: f64,
    /// Mean of the `θ̂*_k`.
    pub mean: f64,
    pub replicates: usize,
}

/// The `N` replicate values `θ̂*_k`, `k = 0..N`, replicate `k` drawn from
/// substream `seed.child(k)`.
pub fn bootstrap_replicates(
    table: &PairTable,
    replicates: usize,
    scheme: ResampleScheme,
    seed: RngSeed,
) -> Vec<f64> {
    let n = table.n();
    if n == 0 {
        return vec![0.0; replicates];
    }
    (0..replicates as u64)
        .into_par_iter()
        .map_init(
            || vec![0u32; n],
            |buf, k| {
                fill_weights(&mut seed.child(k).rng(), scheme, buf);
                table.weighted_statistic(buf)
            },
        )
        .collect()
}

pub fn bootstrap_variance_of_table(
    table: &PairTable,
    replicates: usize,
    scheme: ResampleScheme,
    seed: RngSeed,
) -> Result<BootstrapVariance> {
    if replicates < 2 {
        return Err(Error::invalid(format!("need at least 2 resamples, got {replicates}")));
    }
    let values = bootstrap_replicates(table, replicates, scheme, seed);
    let (mean, variance) = mean_and_variance(&values);
    Ok(BootstrapVariance {
        variance,
        standard_error: variance_standard_error(&values),
        mean,
        replicates,
    })
}

/// `v̂*_N` from `replicates` resamples of `pattern`.
pub fn bootstrap_variance(
    pattern: &PlanarPattern,
    f: &PairFunction,
    replicates: usize,
    scheme: ResampleScheme,
    seed: RngSeed,
) -> Result<BootstrapVariance> {
    bootstrap_variance_of_table(&PairTable::new(pattern, f), replicates, scheme, seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaCoefficients {
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
    /// `None` stands for the `n → ∞` limit.
    pub n: Option<u64>,
    pub scheme: ResampleScheme,
}

/// Closed-form α's. Multinomial weights give
///
/// ```text
/// α₄ = (−4n² + 10n − 6)/n³
/// α₃ = (n³ − 7n² + 12n − 6)/n³
/// α₂ = (3n³ − 11n² + 14n − 6)/n³
/// ```
///
/// while Poissonized weights (and `n = ∞`) give `(α₂, α₃, α₄) = (3, 1, 0)`.
pub fn alpha_coefficients(n: Option<u64>, scheme: ResampleScheme) -> Result<AlphaCoefficients> {
    if n == Some(0) {
        return Err(Error::invalid("alpha coefficients need n >= 1"));
    }
    let (alpha2, alpha3, alpha4) = match (scheme, n) {
        (ResampleScheme::Multinomial, Some(n)) => {
            let x = n as f64;
            let x3 = x * x * x;
            (
                (3.0 * x3 - 11.0 * x * x + 14.0 * x - 6.0) / x3,
                (x3 - 7.0 * x * x + 12.0 * x - 6.0) / x3,
                (-4.0 * x * x + 10.0 * x - 6.0) / x3,
            )
        }
        _ => (3.0, 1.0, 0.0),
    };
    Ok(AlphaCoefficients { alpha2, alpha3, alpha4, n, scheme })
}

/// The multinomial polynomials as exact rationals `[α₂, α₃, α₄]`.
pub fn alpha_coefficients_exact(n: u64) -> Result<[Ratio<i128>; 3]> {
    if n == 0 || n > 1_000_000 {
        return Err(Error::invalid(format!("exact alpha coefficients need 1 <= n <= 10^6, got {n}")));
    }
    let x = n as i128;
    let d = x * x * x;
    Ok([
        Ratio::new(3 * d - 11 * x * x + 14 * x - 6, d),
        Ratio::new(d - 7 * x * x + 12 * x - 6, d),
        Ratio::new(-4 * x * x + 10 * x - 6, d),
    ])
}

/// Exact `E Π_c w(c)^{e_c}` for multinomial weights with `n` draws over `n`
/// equiprobable categories; `exponents[c]` belongs to category `c`.
///
/// Enumerates the counts of the referenced categories, weighting each count
/// vector by the number of the `nⁿ` draw sequences producing it.
pub fn multinomial_moment_oracle(n: u64, exponents: &[u32]) -> Result<Ratio<i128>> {
    let k = exponents.len();
    if k as u64 > n {
        return Err(Error::UndefinedMoment { categories: k, n });
    }
    if n > 12 || k > 4 {
        return Err(Error::invalid(format!(
            "moment oracle supports n <= 12 and at most 4 categories (n = {n}, {k} categories)"
        )));
    }
    let n = n as usize;
    let fact: Vec<i128> = (0..=n as i128).scan(1i128, |acc, i| {
        if i > 0 {
            *acc *= i;
        }
        Some(*acc)
    }).collect();
    let others = (n - k) as i128;

    let mut total: i128 = 0;
    let mut counts = vec![0usize; k];
    loop {
        let used: usize = counts.iter().sum();
        if used <= n {
            let rest = n - used;
            let mut ways = fact[n] / fact[rest];
            for &c in &counts {
                ways /= fact[c];
            }
            ways *= others.pow(rest as u32);
            let value: i128 = counts
                .iter()
                .zip(exponents)
                .map(|(&c, &e)| (c as i128).pow(e))
                .product();
            total += ways * value;
        }
        // Odometer over [0, n]^k.
        let mut pos = 0;
        loop {
            if pos == k {
                return Ok(Ratio::new(total, (n as i128).pow(n as u32)));
            }
            counts[pos] += 1;
            if counts[pos] <= n {
                break;
            }
            counts[pos] = 0;
            pos += 1;
        }
    }
}

/// `α₄·Q4 + 4α₃·T3 + 2α₂·R`.
pub fn variance_limit_from_sums(sums: &TwoPointSums, alphas: &AlphaCoefficients) -> f64 {
    alphas.alpha4 * sums.q4 + 4.0 * alphas.alpha3 * sums.t3 + 2.0 * alphas.alpha2 * sums.r
}

/// `lim_{N→∞} v̂*_N`, computed directly without resampling.
pub fn bootstrap_variance_limit(pattern: &PlanarPattern, f: &PairFunction, scheme: ResampleScheme) -> f64 {
    bootstrap_variance_limit_of_table(&PairTable::new(pattern, f), scheme)
}

pub fn bootstrap_variance_limit_of_table(table: &PairTable, scheme: ResampleScheme) -> f64 {
    if table.n() == 0 {
        return 0.0;
    }
    let alphas = alpha_coefficients(Some(table.n() as u64), scheme).expect("n >= 1");
    variance_limit_from_sums(&table.distinct_index_sums(), &alphas)
}
