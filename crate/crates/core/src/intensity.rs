//! Kernel intensity estimation on an interval and pointwise confidence bands.
//!
//! With the rectangular kernel `K(x) = ½·1_[−1,1](x)` the estimate is
//! `λ̂(x) = p(x)/(2h)`, where `p(x)` counts the points in `[x − h, x + h]`.
//! The studentized quantity `T = (λ̂ − E λ̂)/√λ̂` then reduces to
//! `(N − m)/√(2hN)` for a Poisson count `N` with mean `m`, and
//! `|T| ≤ t` holds exactly when `t ≥ τ(N) = |N − m|/√(2hN)`.
//!
//! So the coverage `P{|T| ≤ t}` is a step function jumping by the Poisson
//! mass of `k` at `τ(k)`, and the smallest `t` reaching `1 − α` is found by
//! visiting the `k` in increasing order of `τ(k)`. A count of zero has
//! `|T| = ∞` and never enters the region.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Poisson as PoissonSampler};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, DiscreteCDF, Discrete, Gamma, Poisson};

use crate::error::{Error, Result};
use crate::geometry::{count_points_in, simulate_inhomogeneous_poisson, Domain, Interval1, IntensityFunction, LinePattern};
use crate::numeric::NeumaierSum;
use crate::rng::RngSeed;

/// `λ̂` on a grid with the rectangular kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityEstimate {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// `p(x)`, the count in `[x − h, x + h]`.
    pub counts: Vec<u64>,
    pub bandwidth: f64,
}

fn check_bandwidth(h: f64) -> Result<()> {
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::invalid(format!("bandwidth h = {h} must be finite and > 0")));
    }
    Ok(())
}

fn count_window(pattern: &LinePattern, x: f64, h: f64) -> u64 {
    count_points_in(pattern, &Interval1 { lo: x - h, hi: x + h }) as u64
}

pub fn kernel_intensity_estimate(pattern: &LinePattern, h: f64, grid: &[f64]) -> Result<IntensityEstimate> {
    check_bandwidth(h)?;
    if let Some(x) = grid.iter().find(|x| !pattern.window().contains(x)) {
        return Err(Error::invalid(format!("grid point {x} lies outside the interval")));
    }
    let counts: Vec<u64> = grid.iter().map(|&x| count_window(pattern, x, h)).collect();
    Ok(IntensityEstimate {
        grid: grid.to_vec(),
        values: counts.iter().map(|&p| p as f64 / (2.0 * h)).collect(),
        counts,
        bandwidth: h,
    })
}

/// `n` midpoints of equal cells of `interval`.
pub fn midpoint_grid(interval: &Interval1, n: usize) -> Vec<f64> {
    let step = interval.length() / n as f64;
    (0..n).map(|i| interval.lo + (i as f64 + 0.5) * step).collect()
}

/// Observed count `p`, bandwidth and level of one `t*` computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TStarQuery {
    pub p: u64,
    pub h: f64,
    pub alpha: f64,
}

impl TStarQuery {
    pub fn new(p: u64, h: f64, alpha: f64) -> Result<Self> {
        check_bandwidth(h)?;
        check_alpha(alpha)?;
        Ok(Self { p, h, alpha })
    }

    /// `a(t) = p + h t²`.
    pub fn a(&self, t: f64) -> f64 {
        self.p as f64 + self.h * t * t
    }

    /// `b(t) = t √(2hp + h²t²)`.
    pub fn b(&self, t: f64) -> f64 {
        t * (2.0 * self.h * self.p as f64 + self.h * self.h * t * t).sqrt()
    }

    /// `P{a − b ≤ p* ≤ a + b}` for `p* ~ Poisson(p)`, evaluated as
    /// `F(⌊a + b⌋) − F(⌈a − b⌉ − 1)`.
    pub fn coverage(&self, t: f64) -> f64 {
        let mean = self.p as f64;
        if mean == 0.0 {
            return 1.0;
        }
        let dist = Poisson::new(mean).expect("positive mean");
        let (a, b) = (self.a(t), self.b(t));
        // Endpoints land on integers exactly at candidate t values; absorb
        // the rounding so the closed interval keeps its endpoint.
        let tol = 1e-10 * (1.0 + a);
        let upper = (a + b + tol).floor();
        let lower = (a - b - tol).ceil() - 1.0;
        let cdf = |m: f64| if m < 0.0 { 0.0 } else { dist.cdf(m as u64) };
        cdf(upper) - cdf(lower)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha = {alpha} must lie in [0, 1]")));
    }
    Ok(())
}

/// `τ(k) = |k − center| / √(2hk)`, infinite at `k = 0`.
pub fn studentized_threshold(k: u64, center: f64, h: f64) -> f64 {
    if k == 0 {
        return f64::INFINITY;
    }
    (k as f64 - center).abs() / (2.0 * h * k as f64).sqrt()
}

/// Smallest `t ≥ 0` with `P{|N − m| ≤ t √(2hN)} ≥ 1 − α`, `N ~ Poisson(m)`.
fn studentized_quantile(mean: f64, h: f64, alpha: f64) -> Result<f64> {
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(Error::DegenerateCount);
    }
    let target = 1.0 - alpha;
    if target <= 0.0 {
        return Ok(0.0);
    }
    let dist = Poisson::new(mean).expect("positive mean");
    let supremum = 1.0 - (-mean).exp();
    if alpha == 0.0 {
        return Err(Error::UnattainableLevel { level: target, supremum });
    }

    // Counts below the mean have τ increasing as k decreases, counts above it
    // have τ increasing in k; merge the two monotone sequences.
    let mut down = mean.floor() as u64;
    let mut up = down + 1;
    let tail_end = mean + 40.0 * mean.sqrt() + 60.0;
    let mut covered = NeumaierSum::new();
    loop {
        let tau_down = if down >= 1 { studentized_threshold(down, mean, h) } else { f64::INFINITY };
        let tau_up = if (up as f64) <= tail_end { studentized_threshold(up, mean, h) } else { f64::INFINITY };
        if tau_down.is_infinite() && tau_up.is_infinite() {
            return Err(Error::UnattainableLevel { level: target, supremum });
        }
        let (k, tau) = if tau_down <= tau_up {
            down -= 1;
            (down + 1, tau_down)
        } else {
            up += 1;
            (up - 1, tau_up)
        };
        covered.add(dist.pmf(k));
        if covered.value() >= target {
            return Ok(tau);
        }
    }
}

/// Closed-form bootstrap critical value `t*_α` for an observed count `p`.
///
/// The bootstrap count `p*` is Poisson with mean `p`, so `t*` is the smallest
/// `t` with `P{a(t) − b(t) ≤ p* ≤ a(t) + b(t)} ≥ 1 − α`.
pub fn t_star_closed_form(query: &TStarQuery) -> Result<f64> {
    check_bandwidth(query.h)?;
    check_alpha(query.alpha)?;
    if query.alpha == 1.0 {
        return Ok(0.0);
    }
    if query.p == 0 {
        return Err(Error::DegenerateCount);
    }
    studentized_quantile(query.p as f64, query.h, query.alpha)
}

/// Empirical `t*` with a 3σ order-statistic band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloTStar {
    pub estimate: f64,
    pub band_lo: f64,
    pub band_hi: f64,
    pub draws: usize,
}

const DRAW_CHUNK: usize = 8_192;

/// `|T*|` for `draws` resamples: `p* = Σ_{i ≤ p} w(i)` with `w(i)` i.i.d.
/// Poisson(1); chunk `c` of the draws uses substream `seed.child(c)`.
pub fn bootstrap_t_draws(p: u64, h: f64, draws: usize, seed: RngSeed) -> Vec<f64> {
    let unit = PoissonSampler::new(1.0).expect("unit mean");
    (0..draws.div_ceil(DRAW_CHUNK))
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = seed.child(c as u64).rng();
            let count = DRAW_CHUNK.min(draws - c * DRAW_CHUNK);
            (0..count)
                .map(|_| {
                    let p_star: u64 = (0..p).map(|_| unit.sample(&mut rng) as u64).sum();
                    studentized_threshold(p_star, p as f64, h)
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

pub const MIN_T_DRAWS: usize = 1_000;

/// Monte Carlo `t*`: the empirical `1 − α` quantile of `|T*|`.
pub fn t_star_monte_carlo(p: u64, h: f64, alpha: f64, draws: usize, seed: RngSeed) -> Result<MonteCarloTStar> {
    let (mc, finite) = monte_carlo_quantile(p, h, alpha, draws, seed)?;
    if mc.estimate.is_infinite() {
        return Err(Error::UnattainableLevel { level: 1.0 - alpha, supremum: finite as f64 / draws as f64 });
    }
    Ok(mc)
}

/// As [`t_star_monte_carlo`], but an unreachable level shows up as an
/// infinite estimate (and band end) instead of an error.
pub fn t_star_monte_carlo_raw(p: u64, h: f64, alpha: f64, draws: usize, seed: RngSeed) -> Result<MonteCarloTStar> {
    monte_carlo_quantile(p, h, alpha, draws, seed).map(|(mc, _)| mc)
}

/// Quantile, band and the number of finite draws.
fn monte_carlo_quantile(p: u64, h: f64, alpha: f64, draws: usize, seed: RngSeed) -> Result<(MonteCarloTStar, usize)> {
    check_bandwidth(h)?;
    check_alpha(alpha)?;
    if draws < MIN_T_DRAWS {
        return Err(Error::invalid(format!("need at least {MIN_T_DRAWS} draws, got {draws}")));
    }
    if alpha == 1.0 {
        return Ok((MonteCarloTStar { estimate: 0.0, band_lo: 0.0, band_hi: 0.0, draws }, draws));
    }
    if p == 0 {
        return Err(Error::DegenerateCount);
    }
    let mut values = bootstrap_t_draws(p, h, draws, seed);
    values.sort_by(f64::total_cmp);
    let finite = values.partition_point(|v| v.is_finite());
    let n = draws as f64;
    let q = 1.0 - alpha;
    // Smallest t with (#{|T*| ≤ t} / N) ≥ 1 − α is the ⌈(1 − α)N⌉-th order statistic.
    let rank = ((q * n - 1e-9).ceil() as usize).clamp(1, draws);
    let spread = (3.0 * (n * q * alpha).sqrt()).ceil() as usize;
    let mc = MonteCarloTStar {
        estimate: values[rank - 1],
        band_lo: values[rank.saturating_sub(1 + spread)],
        band_hi: values[(rank - 1 + spread).min(draws - 1)],
        draws,
    };
    Ok((mc, finite))
}

/// Exact (Garwood) interval for a Poisson mean given an observed count:
/// `[½χ²(α/2; 2p), ½χ²(1 − α/2; 2p + 2)]`, lower end 0 when `p = 0`.
pub fn garwood_interval(count: u64, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    let lower = if count == 0 {
        0.0
    } else {
        Gamma::new(count as f64, 1.0).expect("positive shape").inverse_cdf(alpha / 2.0)
    };
    let upper = Gamma::new(count as f64 + 1.0, 1.0).expect("positive shape").inverse_cdf(1.0 - alpha / 2.0);
    Ok((lower, upper))
}

/// True `t_α(x)` for a known intensity: the same minimization as the
/// bootstrap closed form, with the Poisson mean `m = ∫_{[x−h, x+h] ∩ I} λ`.
pub fn t_alpha_oracle(
    intensity: &IntensityFunction,
    interval: &Interval1,
    x: f64,
    h: f64,
    alpha: f64,
) -> Result<f64> {
    check_bandwidth(h)?;
    check_alpha(alpha)?;
    if alpha == 1.0 {
        return Ok(0.0);
    }
    let m = window_mean(intensity, interval, x, h)?;
    studentized_quantile(m, h, alpha)
}

/// `∫ λ` over `[x − h, x + h] ∩ interval`, i.e. `2h·E λ̂(x)`.
pub fn window_mean(intensity: &IntensityFunction, interval: &Interval1, x: f64, h: f64) -> Result<f64> {
    match interval.intersect(&Interval1 { lo: x - h, hi: x + h }) {
        Some(part) => intensity.integral(part.lo, part.hi),
        None => Ok(0.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BandKind {
    BootstrapMonteCarlo,
    BootstrapClosedForm,
    ExactPoisson,
    OracleTrueT,
}

impl fmt::Display for BandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BandKind::BootstrapMonteCarlo => "mc",
            BandKind::BootstrapClosedForm => "closed",
            BandKind::ExactPoisson => "exact",
            BandKind::OracleTrueT => "oracle",
        })
    }
}

impl FromStr for BandKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mc" | "bootstrap_mc" => Ok(BandKind::BootstrapMonteCarlo),
            "closed" | "bootstrap_closed_form" => Ok(BandKind::BootstrapClosedForm),
            "exact" | "exact_poisson" => Ok(BandKind::ExactPoisson),
            "oracle" | "oracle_true_t" => Ok(BandKind::OracleTrueT),
            other => Err(Error::invalid(format!("unknown band method {other:?} (expected mc|closed|exact|oracle)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum BandMethod {
    /// `t*` from `resamples` Poissonized resamples; the table for count `p`
    /// uses substream `seed.child(p)`.
    BootstrapMonteCarlo { resamples: usize, seed: RngSeed },
    BootstrapClosedForm,
    ExactPoisson,
    /// Uses the true `t_α(x)` of a known intensity on the pattern's interval.
    OracleTrueT(IntensityFunction),
}

impl BandMethod {
    pub fn kind(&self) -> BandKind {
        match self {
            BandMethod::BootstrapMonteCarlo { .. } => BandKind::BootstrapMonteCarlo,
            BandMethod::BootstrapClosedForm => BandKind::BootstrapClosedForm,
            BandMethod::ExactPoisson => BandKind::ExactPoisson,
            BandMethod::OracleTrueT(_) => BandKind::OracleTrueT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PointFlags {
    /// `[x − h, x + h]` sticks out of the interval.
    pub edge: bool,
    /// No points in the window; the exact band was substituted.
    pub zero_count: bool,
    /// No finite `t` reaches the level; the exact band was substituted.
    pub unattainable: bool,
}

impl PointFlags {
    pub fn is_clean(&self) -> bool {
        *self == PointFlags::default()
    }
}

impl fmt::Display for PointFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_clean() {
            return f.write_str("ok");
        }
        let parts: Vec<&str> = [(self.edge, "edge"), (self.zero_count, "zero_count"), (self.unattainable, "unattainable")]
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, name)| *name)
            .collect();
        f.write_str(&parts.join("|"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBand {
    pub grid: Vec<f64>,
    pub lambda_hat: Vec<f64>,
    pub counts: Vec<u64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Critical value used at each point (`None` where the exact band was used).
    pub t: Vec<Option<f64>>,
    pub flags: Vec<PointFlags>,
    pub level: f64,
    pub method: BandKind,
}

/// Per-count / per-point critical values, shared across replications.
struct CriticalValues {
    h: f64,
    alpha: f64,
    method: BandKind,
    by_count: BTreeMap<u64, Option<f64>>,
    by_point: Vec<Option<f64>>,
}

impl CriticalValues {
    fn build(method: &BandMethod, h: f64, alpha: f64, counts: impl IntoIterator<Item = u64>, oracle_means: &[f64]) -> Result<Self> {
        let mut distinct: Vec<u64> = counts.into_iter().filter(|&p| p > 0).collect();
        distinct.sort_unstable();
        distinct.dedup();
        let lift = |r: Result<f64>| match r {
            Ok(t) => Ok(Some(t)),
            Err(Error::UnattainableLevel { .. }) => Ok(None),
            Err(e) => Err(e),
        };
        let by_count = match method {
            BandMethod::BootstrapClosedForm => distinct
                .iter()
                .map(|&p| Ok((p, lift(t_star_closed_form(&TStarQuery::new(p, h, alpha)?))?)))
                .collect::<Result<_>>()?,
            BandMethod::BootstrapMonteCarlo { resamples, seed } => distinct
                .par_iter()
                .map(|&p| Ok((p, lift(t_star_monte_carlo(p, h, alpha, *resamples, seed.child(p)).map(|m| m.estimate))?)))
                .collect::<Result<_>>()?,
            _ => BTreeMap::new(),
        };
        let by_point = match method {
            BandMethod::OracleTrueT(_) => oracle_means
                .iter()
                .map(|&m| if alpha == 1.0 { Ok(Some(0.0)) } else { lift(studentized_quantile(m, h, alpha)) })
                .collect::<Result<_>>()?,
            _ => Vec::new(),
        };
        Ok(Self { h, alpha, method: method.kind(), by_count, by_point })
    }

    fn band(&self, i: usize, p: u64) -> Result<PointBand> {
        let t = match self.method {
            BandKind::ExactPoisson => return self.exact(p, false, false),
            BandKind::OracleTrueT => self.by_point[i],
            _ if self.alpha == 1.0 => Some(0.0),
            _ if p == 0 => return self.exact(p, true, false),
            _ => self.by_count[&p],
        };
        match t {
            Some(t) => {
                // [λ̂ − t√λ̂, λ̂ + t√λ̂], lower end clipped at zero.
                let lam = p as f64 / (2.0 * self.h);
                let half = t * lam.sqrt();
                Ok(PointBand { lo: (lam - half).max(0.0), hi: lam + half, t: Some(t), zero_count: p == 0, unattainable: false })
            }
            None => self.exact(p, p == 0, true),
        }
    }

    fn exact(&self, p: u64, zero_count: bool, unattainable: bool) -> Result<PointBand> {
        let (lo, hi) = garwood_interval(p, self.alpha)?;
        Ok(PointBand { lo: lo / (2.0 * self.h), hi: hi / (2.0 * self.h), t: None, zero_count, unattainable })
    }
}

struct PointBand {
    lo: f64,
    hi: f64,
    t: Option<f64>,
    zero_count: bool,
    unattainable: bool,
}

fn oracle_means(method: &BandMethod, interval: &Interval1, grid: &[f64], h: f64) -> Result<Vec<f64>> {
    match method {
        BandMethod::OracleTrueT(intensity) => grid.iter().map(|&x| window_mean(intensity, interval, x, h)).collect(),
        _ => Ok(Vec::new()),
    }
}

fn check_band_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    Ok(())
}

fn assemble(
    crit: &CriticalValues,
    grid: &[f64],
    counts: &[u64],
    interval: &Interval1,
    h: f64,
) -> Result<ConfidenceBand> {
    let n = grid.len();
    let mut band = ConfidenceBand {
        grid: grid.to_vec(),
        lambda_hat: counts.iter().map(|&p| p as f64 / (2.0 * h)).collect(),
        counts: counts.to_vec(),
        lo: Vec::with_capacity(n),
        hi: Vec::with_capacity(n),
        t: Vec::with_capacity(n),
        flags: Vec::with_capacity(n),
        level: 1.0 - crit.alpha,
        method: crit.method,
    };
    for (i, (&x, &p)) in grid.iter().zip(counts).enumerate() {
        let point = crit.band(i, p)?;
        band.lo.push(point.lo);
        band.hi.push(point.hi);
        band.t.push(point.t);
        band.flags.push(PointFlags {
            edge: x - h < interval.lo || x + h > interval.hi,
            zero_count: point.zero_count,
            unattainable: point.unattainable,
        });
    }
    Ok(band)
}

/// Pointwise band for `λ(x)` on `grid` by one of the four routes.
pub fn confidence_band(
    pattern: &LinePattern,
    h: f64,
    alpha: f64,
    grid: &[f64],
    method: &BandMethod,
) -> Result<ConfidenceBand> {
    check_band_alpha(alpha)?;
    let estimate = kernel_intensity_estimate(pattern, h, grid)?;
    let interval = *pattern.window();
    let means = oracle_means(method, &interval, grid, h)?;
    let crit = CriticalValues::build(method, h, alpha, estimate.counts.iter().copied(), &means)?;
    assemble(&crit, grid, &estimate.counts, &interval, h)
}

/// Empirical pointwise coverage of a band method.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageTable {
    pub grid: Vec<f64>,
    /// Fraction of replications with `λ(x)` inside the band.
    pub coverage_true_lambda: Vec<f64>,
    /// Fraction with `E λ̂(x) = ∫_{x−h}^{x+h} λ / (2h)` inside the band.
    pub coverage_mean_estimate: Vec<f64>,
    pub se_true_lambda: Vec<f64>,
    pub se_mean_estimate: Vec<f64>,
    pub interior: Vec<bool>,
    pub reps: usize,
    pub method: BandKind,
    pub level: f64,
}

pub const MIN_COVERAGE_REPS: usize = 100;

/// Simulates `reps` patterns (replication `k` from `seed.child(k)`) and
/// records how often each band covers the true intensity and `E λ̂`.
#[allow(clippy::too_many_arguments)]
pub fn coverage_experiment(
    intensity: &IntensityFunction,
    interval: &Interval1,
    h: f64,
    alpha: f64,
    method: &BandMethod,
    reps: usize,
    grid: &[f64],
    seed: RngSeed,
) -> Result<CoverageTable> {
    check_bandwidth(h)?;
    check_band_alpha(alpha)?;
    if reps < MIN_COVERAGE_REPS {
        return Err(Error::invalid(format!("need at least {MIN_COVERAGE_REPS} replications, got {reps}")));
    }
    if let Some(x) = grid.iter().find(|x| !interval.contains(x)) {
        return Err(Error::invalid(format!("grid point {x} lies outside the interval")));
    }
    let truth: Vec<f64> = grid.iter().map(|&x| intensity.evaluate(x)).collect::<Result<_>>()?;
    let means = grid
        .iter()
        .map(|&x| window_mean(intensity, interval, x, h))
        .collect::<Result<Vec<_>>>()?;
    let mean_targets: Vec<f64> = means.iter().map(|m| m / (2.0 * h)).collect();

    let counts: Vec<Vec<u64>> = (0..reps as u64)
        .into_par_iter()
        .map(|k| {
            let pattern = simulate_inhomogeneous_poisson(intensity, interval, seed.child(k))?;
            Ok(grid.iter().map(|&x| count_window(&pattern, x, h)).collect())
        })
        .collect::<Result<_>>()?;

    let crit = CriticalValues::build(method, h, alpha, counts.iter().flatten().copied(), &means)?;
    let mut hits_true = vec![0usize; grid.len()];
    let mut hits_mean = vec![0usize; grid.len()];
    for rep in &counts {
        let band = assemble(&crit, grid, rep, interval, h)?;
        for i in 0..grid.len() {
            // Closed band up to rounding: with the oracle t an endpoint can
            // equal the target exactly.
            let inside = |v: f64| {
                let slack = 1e-12 * v.abs().max(1.0);
                band.lo[i] - slack <= v && v <= band.hi[i] + slack
            };
            hits_true[i] += inside(truth[i]) as usize;
            hits_mean[i] += inside(mean_targets[i]) as usize;
        }
    }
    let n = reps as f64;
    let frac = |hits: &[usize]| hits.iter().map(|&c| c as f64 / n).collect::<Vec<_>>();
    let se = |cov: &[f64]| cov.iter().map(|c| (c * (1.0 - c) / n).sqrt()).collect::<Vec<_>>();
    let coverage_true_lambda = frac(&hits_true);
    let coverage_mean_estimate = frac(&hits_mean);
    Ok(CoverageTable {
        grid: grid.to_vec(),
        se_true_lambda: se(&coverage_true_lambda),
        se_mean_estimate: se(&coverage_mean_estimate),
        coverage_true_lambda,
        coverage_mean_estimate,
        interior: grid.iter().map(|&x| x - h >= interval.lo && x + h <= interval.hi).collect(),
        reps,
        method: method.kind(),
        level: 1.0 - alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PointPattern;
    use proptest::prelude::*;

    fn line(points: &[f64]) -> LinePattern {
        PointPattern::new(points.to_vec(), Interval1::unit()).unwrap()
    }

    #[test]
    fn estimate_examples() {
        let est = kernel_intensity_estimate(&line(&[]), 0.1, &[0.2, 0.5]).unwrap();
        assert_eq!(est.values, vec![0.0, 0.0]);
        let est = kernel_intensity_estimate(&line(&[0.5]), 0.1, &[0.5]).unwrap();
        assert!((est.values[0] - 5.0).abs() < 1e-12);
        assert!(kernel_intensity_estimate(&line(&[0.5]), 0.0, &[0.5]).is_err());
        assert!(kernel_intensity_estimate(&line(&[0.5]), -0.1, &[0.5]).is_err());
        assert!(kernel_intensity_estimate(&line(&[0.5]), 0.1, &[1.5]).is_err());
    }

    #[test]
    fn alpha_one_gives_zero() {
        assert_eq!(t_star_closed_form(&TStarQuery::new(7, 0.1, 1.0).unwrap()).unwrap(), 0.0);
        let f = IntensityFunction::constant(10.0).unwrap();
        assert_eq!(t_alpha_oracle(&f, &Interval1::unit(), 0.5, 0.1, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn alpha_zero_and_zero_count_are_errors() {
        assert!(matches!(
            t_star_closed_form(&TStarQuery::new(7, 0.1, 0.0).unwrap()),
            Err(Error::UnattainableLevel { .. })
        ));
        assert_eq!(t_star_closed_form(&TStarQuery::new(0, 0.1, 0.05).unwrap()), Err(Error::DegenerateCount));
        let zero = IntensityFunction::constant(0.0).unwrap();
        assert_eq!(t_alpha_oracle(&zero, &Interval1::unit(), 0.5, 0.1, 0.05), Err(Error::DegenerateCount));
    }

    #[test]
    fn small_counts_cannot_reach_level() {
        // p* = 0 is never inside the region, so coverage is capped at 1 − e^{−p}.
        for p in [1u64, 2] {
            let err = t_star_closed_form(&TStarQuery::new(p, 0.1, 0.05).unwrap()).unwrap_err();
            match err {
                Error::UnattainableLevel { supremum, .. } => {
                    assert!((supremum - (1.0 - (-(p as f64)).exp())).abs() < 1e-12)
                }
                other => panic!("unexpected {other:?}"),
            }
        }
        assert!(t_star_closed_form(&TStarQuery::new(3, 0.1, 0.05).unwrap()).is_ok());
    }

    #[test]
    fn closed_form_is_minimal() {
        for p in 3..=40u64 {
            for &h in &[0.02, 0.1, 0.5] {
                for &alpha in &[0.05, 0.1, 0.3] {
                    let q = TStarQuery::new(p, h, alpha).unwrap();
                    let Ok(t) = t_star_closed_form(&q) else { continue };
                    let eps = 1e-9 * t.max(1.0);
                    assert!(q.coverage(t + eps) >= 1.0 - alpha, "p={p} h={h} a={alpha}");
                    assert!(q.coverage(t - eps) < 1.0 - alpha, "p={p} h={h} a={alpha}");
                }
            }
        }
    }

    #[test]
    fn t_star_is_monotone_in_alpha() {
        for p in 1..=50u64 {
            let strict = t_star_closed_form(&TStarQuery::new(p, 0.1, 0.01).unwrap());
            let loose = t_star_closed_form(&TStarQuery::new(p, 0.1, 0.10).unwrap());
            match (strict, loose) {
                (Ok(s), Ok(l)) => assert!(s >= l),
                (Err(_), _) => assert!((-(p as f64)).exp() > 0.01),
                (Ok(_), Err(e)) => panic!("looser level failed for p={p}: {e}"),
            }
        }
    }

    #[test]
    fn oracle_matches_closed_form_for_integer_mean() {
        // λ = 40 on [0.375, 0.625] has mean exactly 10.
        let f = IntensityFunction::constant(40.0).unwrap();
        let oracle = t_alpha_oracle(&f, &Interval1::unit(), 0.5, 0.125, 0.05).unwrap();
        let closed = t_star_closed_form(&TStarQuery::new(10, 0.125, 0.05).unwrap()).unwrap();
        assert_eq!(oracle, closed);
    }

    #[test]
    fn garwood_zero_count() {
        let (lo, hi) = garwood_interval(0, 0.05).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - 0.025f64.ln().abs()).abs() < 1e-9, "{hi}");
        let band = confidence_band(&line(&[0.05]), 0.5, 0.05, &[0.9], &BandMethod::ExactPoisson);
        // [0.4, 1.4] contains no point.
        let band = band.unwrap();
        assert_eq!(band.lo[0], 0.0);
        assert!((band.hi[0] - 3.689).abs() < 1e-3);
    }

    #[test]
    fn garwood_inverts_poisson_tails() {
        for p in [1u64, 2, 5, 17, 60] {
            for alpha in [0.01, 0.05, 0.2] {
                let (lo, hi) = garwood_interval(p, alpha).unwrap();
                let upper_tail = 1.0 - Poisson::new(lo).unwrap().cdf(p - 1);
                let lower_tail = Poisson::new(hi).unwrap().cdf(p);
                assert!((upper_tail - alpha / 2.0).abs() < 1e-8, "p={p} a={alpha}: {upper_tail}");
                assert!((lower_tail - alpha / 2.0).abs() < 1e-8, "p={p} a={alpha}: {lower_tail}");
            }
        }
    }

    #[test]
    fn bootstrap_bands_fall_back_at_zero_count() {
        let pat = line(&[0.1, 0.12, 0.5, 0.51, 0.52, 0.53, 0.55]);
        let grid = [0.1, 0.5, 0.8];
        let band = confidence_band(&pat, 0.05, 0.05, &grid, &BandMethod::BootstrapClosedForm).unwrap();
        assert!(band.flags[2].zero_count);
        let (_, hi) = garwood_interval(0, 0.05).unwrap();
        assert_eq!((band.lo[2], band.hi[2]), (0.0, hi / 0.1));
        // p = 2 cannot reach 95% coverage.
        assert!(band.flags[0].unattainable);
        assert!(!band.flags[0].edge);
        let t = band.t[1].unwrap();
        let lam = band.lambda_hat[1];
        assert!((band.hi[1] - band.lo[1] - 2.0 * t * lam.sqrt()).abs() < 1e-9);
        assert!(band.lo.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn alpha_one_bands_have_zero_width() {
        let pat = line(&[0.1, 0.12, 0.5, 0.51]);
        for method in [BandMethod::BootstrapClosedForm, BandMethod::BootstrapMonteCarlo { resamples: 1000, seed: RngSeed::new(1) }] {
            let band = confidence_band(&pat, 0.05, 1.0, &[0.1, 0.5, 0.8], &method).unwrap();
            for i in 0..3 {
                assert_eq!(band.lo[i], band.lambda_hat[i]);
                assert_eq!(band.hi[i], band.lambda_hat[i]);
            }
        }
    }

    #[test]
    fn monte_carlo_t_star_is_reproducible() {
        let a = t_star_monte_carlo(10, 0.1, 0.05, 20_000, RngSeed::new(3)).unwrap();
        let b = t_star_monte_carlo(10, 0.1, 0.05, 20_000, RngSeed::new(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.band_lo <= a.estimate && a.estimate <= a.band_hi);
        assert!(t_star_monte_carlo(10, 0.1, 0.05, 999, RngSeed::new(3)).is_err());
    }

    #[test]
    fn exact_band_nesting_example() {
        let pat = line(&[0.2, 0.3, 0.31, 0.5, 0.52, 0.7]);
        let grid = midpoint_grid(&Interval1::unit(), 10);
        let wide = confidence_band(&pat, 0.1, 0.01, &grid, &BandMethod::ExactPoisson).unwrap();
        let narrow = confidence_band(&pat, 0.1, 0.2, &grid, &BandMethod::ExactPoisson).unwrap();
        for i in 0..grid.len() {
            assert!(wide.lo[i] <= narrow.lo[i] && narrow.hi[i] <= wide.hi[i]);
        }
    }

    #[test]
    fn coverage_needs_enough_reps() {
        let f = IntensityFunction::constant(50.0).unwrap();
        let err = coverage_experiment(&f, &Interval1::unit(), 0.1, 0.05, &BandMethod::ExactPoisson, 99, &[0.5], RngSeed::new(0));
        assert!(err.is_err());
    }

    proptest! {
        #[test]
        fn region_equivalence(p in 1u64..200, p_star in 0u64..200, h in 0.01f64..1.0, t in 0.0f64..10.0) {
            let q = TStarQuery::new(p, h, 0.05).unwrap();
            let direct = (p_star as f64 - p as f64).abs() <= t * (2.0 * h * p_star as f64).sqrt();
            let shifted = (p_star as f64 - q.a(t)).abs() <= q.b(t);
            // Skip ties within rounding of the boundary.
            let gap = (p_star as f64 - p as f64).powi(2) - 2.0 * h * t * t * p_star as f64;
            prop_assume!(gap.abs() > 1e-9 * (1.0 + (p_star * p_star) as f64));
            prop_assert_eq!(direct, shifted);
        }

        #[test]
        fn a_and_b_are_nondecreasing(p in 0u64..500, h in 0.001f64..2.0, t in 0.0f64..20.0, dt in 0.0f64..5.0) {
            let q = TStarQuery { p, h, alpha: 0.05 };
            prop_assert!(q.a(t) >= p as f64);
            prop_assert!(q.b(t) >= 0.0);
            prop_assert!(q.a(t + dt) >= q.a(t));
            prop_assert!(q.b(t + dt) >= q.b(t));
        }

        #[test]
        fn garwood_nesting(p in 0u64..300, a1 in 0.001f64..0.5, da in 0.0f64..0.49) {
            let a2 = a1 + da;
            let (lo1, hi1) = garwood_interval(p, a1).unwrap();
            let (lo2, hi2) = garwood_interval(p, a2).unwrap();
            prop_assert!(lo1 <= lo2 + 1e-9 && hi2 <= hi1 + 1e-9);
        }
    }
}
