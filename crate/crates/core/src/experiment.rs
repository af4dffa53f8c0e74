//! End-to-end experiment runs used by the CLI and the acceptance suite.

use rayon::prelude::*;

use crate::bootstrap::{alpha_coefficients, bootstrap_variance_limit_of_table, ResampleScheme};
use crate::error::{Error, Result};
use crate::geometry::{simulate_homogeneous_poisson, simulate_inhomogeneous_poisson, Interval1, IntensityFunction, Window2};
use crate::intensity::{
    confidence_band, coverage_experiment, midpoint_grid, t_star_closed_form, t_star_monte_carlo_raw, BandKind, BandMethod,
    ConfidenceBand, CoverageTable, TStarQuery,
};
use crate::moments::{
    expected_bootstrap_variance, expected_bootstrap_variance_error, s_moments_poisson, true_variance_poisson,
    IntegrationSpec, MomentSet, TrueVariance,
};
use crate::numeric::{mean_and_variance, variance_standard_error};
use crate::rng::RngSeed;
use crate::two_point::{PairSpec, PairTable};

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceComparisonConfig {
    pub lambda: f64,
    pub window: Window2,
    pub pair: PairSpec,
    pub reps: usize,
    pub scheme: ResampleScheme,
    pub integration: IntegrationSpec,
    pub seed: RngSeed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceComparison {
    pub reps: usize,
    pub mean_theta: f64,
    pub mean_theta_se: f64,
    /// Sample variance of `θ̂` over the simulated patterns.
    pub mc_variance_theta: f64,
    pub mc_variance_theta_se: f64,
    /// Mean over patterns of the closed-form `N → ∞` bootstrap variance.
    pub mean_bootstrap_limit: f64,
    pub mean_bootstrap_limit_se: f64,
    pub moments: MomentSet,
    /// `4s₃ + 2s₂`.
    pub true_variance: TrueVariance,
    /// `4s₃ + 6s₂`.
    pub predicted_bootstrap: f64,
    pub predicted_bootstrap_error: f64,
    /// `α₄s₄ + 4α₃s₃ + 2α₂s₂` with the configured scheme at `n = round(λν(W))`.
    pub predicted_bootstrap_scheme: f64,
    pub predicted_bootstrap_scheme_error: f64,
    /// `(4s₃ + 6s₂)/(4s₃ + 2s₂)`.
    pub ratio_predicted: f64,
    /// `mean_bootstrap_limit / mc_variance_theta`.
    pub ratio_empirical: f64,
    pub s3_over_s2: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Simulates `reps` Poisson patterns and sets the sample variance of `θ̂`
/// and the average closed-form bootstrap limit against the integrated
/// `4s₃ + 2s₂` and `4s₃ + 6s₂`.
pub fn run_variance_comparison(cfg: &VarianceComparisonConfig) -> Result<VarianceComparison> {
    if cfg.reps < 2 {
        return Err(Error::invalid(format!("need at least 2 replications, got {}", cfg.reps)));
    }
    let f = cfg.pair.on(cfg.window)?;
    let per_rep: Vec<(f64, f64)> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|k| {
            let pattern = simulate_homogeneous_poisson(cfg.lambda, &cfg.window, cfg.seed.child(k))?;
            let table = PairTable::new(&pattern, &f);
            Ok((table.statistic(), bootstrap_variance_limit_of_table(&table, cfg.scheme)))
        })
        .collect::<Result<_>>()?;
    let thetas: Vec<f64> = per_rep.iter().map(|r| r.0).collect();
    let limits: Vec<f64> = per_rep.iter().map(|r| r.1).collect();
    let n = cfg.reps as f64;
    let (mean_theta, var_theta) = mean_and_variance(&thetas);
    let (mean_limit, var_limit) = mean_and_variance(&limits);

    let moments = s_moments_poisson(cfg.lambda, &cfg.window, &f, &cfg.integration)?;
    let true_variance = true_variance_poisson(&moments);
    let poissonized = alpha_coefficients(None, ResampleScheme::Poissonized)?;
    let expected_n = (cfg.lambda * cfg.window.area()).round().max(1.0) as u64;
    let scheme_alphas = alpha_coefficients(Some(expected_n), cfg.scheme)?;
    let predicted_bootstrap = expected_bootstrap_variance(&moments, &poissonized);

    Ok(VarianceComparison {
        reps: cfg.reps,
        mean_theta,
        mean_theta_se: (var_theta / n).sqrt(),
        mc_variance_theta: var_theta,
        mc_variance_theta_se: variance_standard_error(&thetas),
        mean_bootstrap_limit: mean_limit,
        mean_bootstrap_limit_se: (var_limit / n).sqrt(),
        predicted_bootstrap,
        predicted_bootstrap_error: expected_bootstrap_variance_error(&moments, &poissonized),
        predicted_bootstrap_scheme: expected_bootstrap_variance(&moments, &scheme_alphas),
        predicted_bootstrap_scheme_error: expected_bootstrap_variance_error(&moments, &scheme_alphas),
        ratio_predicted: ratio(predicted_bootstrap, true_variance.variance),
        ratio_empirical: ratio(mean_limit, var_theta),
        s3_over_s2: ratio(moments.s3, moments.s2),
        true_variance,
        moments,
    })
}

#[derive(Debug, Clone)]
pub struct CiSuiteConfig {
    pub intensity: IntensityFunction,
    pub interval: Interval1,
    pub h: f64,
    pub alpha: f64,
    pub methods: Vec<BandKind>,
    pub reps: usize,
    pub grid_steps: usize,
    /// Resamples per Monte Carlo `t*`.
    pub resamples: usize,
    pub seed: RngSeed,
}

/// Closed-form and Monte Carlo `t*` side by side for one count. `None`
/// stands for `+∞` (level not reached).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TStarComparison {
    pub p: u64,
    pub closed_form: Option<f64>,
    pub monte_carlo: Option<f64>,
    pub mc_band_lo: Option<f64>,
    pub mc_band_hi: Option<f64>,
    /// Closed form inside the Monte Carlo 3σ band.
    pub agree: bool,
}

#[derive(Debug, Clone)]
pub struct CiSuiteResult {
    /// Bands for one simulated pattern, per method.
    pub bands: Vec<ConfidenceBand>,
    pub coverage: Vec<CoverageTable>,
    pub t_star: Vec<TStarComparison>,
    pub pattern_size: usize,
}

impl CiSuiteConfig {
    fn method(&self, kind: BandKind, seed: RngSeed) -> BandMethod {
        match kind {
            BandKind::BootstrapMonteCarlo => BandMethod::BootstrapMonteCarlo { resamples: self.resamples, seed },
            BandKind::BootstrapClosedForm => BandMethod::BootstrapClosedForm,
            BandKind::ExactPoisson => BandMethod::ExactPoisson,
            BandKind::OracleTrueT => BandMethod::OracleTrueT(self.intensity.clone()),
        }
    }
}

/// Bands for one simulated pattern, coverage tables and a `t*` comparison.
///
/// Substreams: the example pattern uses `seed.child(0)`, coverage runs use
/// `seed.child(1)` and Monte Carlo critical values `seed.child(2)`.
pub fn run_ci_suite(cfg: &CiSuiteConfig) -> Result<CiSuiteResult> {
    if cfg.grid_steps == 0 {
        return Err(Error::invalid("grid_steps must be positive"));
    }
    let grid = midpoint_grid(&cfg.interval, cfg.grid_steps);
    let pattern = simulate_inhomogeneous_poisson(&cfg.intensity, &cfg.interval, cfg.seed.child(0))?;
    let t_seed = cfg.seed.child(2);

    let mut bands = Vec::new();
    let mut coverage = Vec::new();
    for &kind in &cfg.methods {
        let method = cfg.method(kind, t_seed);
        bands.push(confidence_band(&pattern, cfg.h, cfg.alpha, &grid, &method)?);
        coverage.push(coverage_experiment(
            &cfg.intensity,
            &cfg.interval,
            cfg.h,
            cfg.alpha,
            &method,
            cfg.reps,
            &grid,
            cfg.seed.child(1),
        )?);
    }

    let max_p = bands.iter().flat_map(|b| b.counts.iter().copied()).max().unwrap_or(0);
    let t_star = (1..=max_p)
        .map(|p| {
            let attainable = |r: Result<f64>| match r {
                Ok(t) => Ok(Some(t)),
                Err(Error::UnattainableLevel { .. }) => Ok(None),
                Err(e) => Err(e),
            };
            let closed_form = attainable(t_star_closed_form(&TStarQuery::new(p, cfg.h, cfg.alpha)?))?;
            let mc = t_star_monte_carlo_raw(p, cfg.h, cfg.alpha, cfg.resamples, t_seed.child(p))?;
            let finite = |v: f64| v.is_finite().then_some(v);
            let upper = closed_form.unwrap_or(f64::INFINITY);
            Ok(TStarComparison {
                p,
                closed_form,
                monte_carlo: finite(mc.estimate),
                mc_band_lo: finite(mc.band_lo),
                mc_band_hi: finite(mc.band_hi),
                agree: mc.band_lo <= upper && upper <= mc.band_hi,
            })
        })
        .collect::<Result<_>>()?;

    Ok(CiSuiteResult { bands, coverage, t_star, pattern_size: pattern.len() })
}
