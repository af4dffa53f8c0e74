use std::path::{Path, PathBuf};

use ppboot_core::bootstrap::{
    alpha_coefficients, bootstrap_variance_limit_of_table, bootstrap_variance_of_table, ResampleScheme,
};
use ppboot_core::experiment::{
    run_ci_suite, run_variance_comparison, CiSuiteConfig, CiSuiteResult, VarianceComparison,
    VarianceComparisonConfig,
};
use ppboot_core::geometry::{simulate_homogeneous_poisson, simulate_inhomogeneous_poisson};
use ppboot_core::intensity::{confidence_band, coverage_experiment, midpoint_grid, BandKind, BandMethod};
use ppboot_core::moments::{s_moments_poisson, IntegrationSpec};
use ppboot_core::two_point::estimate_product_density;
use ppboot_core::{Interval1, KernelFunction, KernelKind, PairSpec, PairTable, RngSeed, Window2};
use serde_json::{json, Value};

use crate::config::{CiSuiteFile, IntegrationFile, VarianceComparisonFile};
use crate::error::{CliError, CliResult};
use crate::io::{
    default_window_path, digest_bytes, fmt_opt, ingest_pattern, line, planar, resolve_interval, resolve_planar,
    resolve_window,
    to_json, write_output, Region, Table, WindowSpec,
};
use crate::record::ResultRecord;
use crate::specs::{parse_config, parse_intensity};

pub const DEFAULT_SEED: u64 = 0;
const DEFAULT_NODES: usize = 32;
const DEFAULT_SAMPLES: usize = 200_000;

/// What a command hands back to `main` for writing.
pub enum Emit {
    Bytes(Vec<u8>),
    Record(ResultRecord),
}

fn integration(file: &IntegrationFile, seed: u64) -> CliResult<IntegrationSpec> {
    // Integration draws from stream 1; replications use stream 0.
    match file.method.as_str() {
        "quad" => Ok(IntegrationSpec::quadrature(file.nodes.unwrap_or(DEFAULT_NODES))?),
        "mc" => Ok(IntegrationSpec::monte_carlo(
            file.samples.unwrap_or(DEFAULT_SAMPLES),
            RngSeed::with_stream(seed, 1),
        )?),
        other => Err(CliError::Config(format!("unknown integration method {other:?} (expected quad|mc)"))),
    }
}

pub fn simulate(
    lambda: Option<f64>,
    lambda_spec: Option<&str>,
    window: &str,
    seed: u64,
    out: Option<&Path>,
) -> CliResult<Emit> {
    let out = out.ok_or_else(|| CliError::Config("simulate needs --out for the pattern CSV".into()))?;
    let spec = resolve_window(window)?;
    let mut table;
    match (spec.region()?, lambda, lambda_spec) {
        (Region::Planar(w), Some(lambda), None) => {
            let pattern = simulate_homogeneous_poisson(lambda, &w, RngSeed::new(seed))?;
            table = Table::new(&["x", "y"]);
            for p in pattern.points() {
                table.row([p[0].to_string(), p[1].to_string()]);
            }
        }
        (Region::Line(i), lambda, spec_str) => {
            let intensity = match (lambda, spec_str) {
                (Some(l), None) => ppboot_core::IntensityFunction::constant(l)?,
                (None, Some(s)) => parse_intensity(s, &i)?,
                _ => return Err(CliError::Config("give exactly one of --lambda and --lambda-spec".into())),
            };
            let pattern = simulate_inhomogeneous_poisson(&intensity, &i, RngSeed::new(seed))?;
            table = Table::new(&["x"]);
            for x in pattern.points() {
                table.row([x.to_string()]);
            }
        }
        (Region::Planar(_), _, _) => {
            return Err(CliError::Config("a rectangle window needs --lambda (homogeneous only)".into()))
        }
    }
    let sidecar = json!({ "window": spec });
    write_output(Some(&default_window_path(out)), &to_json(&sidecar))?;
    Ok(Emit::Bytes(table.into_bytes()))
}

pub struct PcfArgs<'a> {
    pub input: &'a Path,
    pub window: Option<&'a Path>,
    pub rmin: f64,
    pub rmax: f64,
    pub rsteps: usize,
    pub bandwidth: f64,
    pub kernel: &'a str,
}

pub fn pcf(a: &PcfArgs) -> CliResult<Emit> {
    let (pattern, _) = planar(ingest_pattern(a.input, a.window)?)?;
    if a.rsteps == 0 || !(a.rmax >= a.rmin) {
        return Err(CliError::Config("need rsteps >= 1 and rmax >= rmin".into()));
    }
    let grid: Vec<f64> = if a.rsteps == 1 {
        vec![a.rmin]
    } else {
        (0..a.rsteps).map(|i| a.rmin + (a.rmax - a.rmin) * i as f64 / (a.rsteps - 1) as f64).collect()
    };
    let kernel = KernelFunction::new(parse_config::<KernelKind>(a.kernel)?, a.bandwidth)?;
    let mut table = Table::new(&["r", "rho_hat"]);
    for (r, rho) in estimate_product_density(&pattern, &grid, &kernel)? {
        table.row([r.to_string(), rho.to_string()]);
    }
    Ok(Emit::Bytes(table.into_bytes()))
}

pub fn alpha_table(nmin: u64, nmax: u64, scheme: &str) -> CliResult<Emit> {
    let scheme: ResampleScheme = parse_config(scheme)?;
    if nmin == 0 || nmax < nmin {
        return Err(CliError::Config("need 1 <= nmin <= nmax".into()));
    }
    let mut table = Table::new(&["n", "alpha2", "alpha3", "alpha4"]);
    for n in nmin..=nmax {
        let a = alpha_coefficients(Some(n), scheme)?;
        table.row([n.to_string(), a.alpha2.to_string(), a.alpha3.to_string(), a.alpha4.to_string()]);
    }
    Ok(Emit::Bytes(table.into_bytes()))
}

pub fn boot_var(
    input: &Path,
    window: Option<&Path>,
    f_spec: &str,
    resamples: usize,
    scheme: &str,
    seed: u64,
) -> CliResult<Emit> {
    let (pattern, digest) = planar(ingest_pattern(input, window)?)?;
    let scheme: ResampleScheme = parse_config(scheme)?;
    let f = parse_config::<PairSpec>(f_spec)?.on(*pattern.window())?;
    let table = PairTable::new(&pattern, &f);
    let boot = bootstrap_variance_of_table(&table, resamples, scheme, RngSeed::new(seed))?;
    let limit = bootstrap_variance_limit_of_table(&table, scheme);
    let value = json!({
        "input_digest": digest,
        "seed": seed,
        "n": pattern.len(),
        "f": f.describe(),
        "scheme": scheme.to_string(),
        "N": resamples,
        "theta_hat": table.statistic(),
        "v_hat_N": boot.variance,
        "v_hat_N_se": boot.standard_error,
        "bootstrap_mean": boot.mean,
        "limit": limit,
        "relative_deviation": if limit != 0.0 { boot.variance / limit - 1.0 } else { 0.0 },
    });
    Ok(Emit::Bytes(to_json(&value)))
}

pub fn moments(lambda: f64, window: &str, f_spec: &str, method: &IntegrationFile, seed: u64) -> CliResult<Emit> {
    let w = resolve_planar(window)?;
    let f = parse_config::<PairSpec>(f_spec)?.on(w)?;
    let spec = integration(method, seed)?;
    let m = s_moments_poisson(lambda, &w, &f, &spec)?;
    let value = json!({
        "s2": m.s2,
        "s3": m.s3,
        "s4": m.s4,
        "e_theta": m.e_theta,
        "errors": { "s2": m.errors.s2, "s3": m.errors.s3, "s4": m.errors.s4, "e_theta": m.errors.e_theta },
        "lambda": lambda,
        "f": m.f_description,
        "window": WindowSpec::from_planar(&w),
        "integration": method,
        "seed": if method.method == "mc" { Some(seed) } else { None },
    });
    Ok(Emit::Bytes(to_json(&value)))
}

fn band_method(kind: BandKind, resamples: usize, seed: u64, truth: Option<&str>, i: &Interval1) -> CliResult<BandMethod> {
    Ok(match kind {
        BandKind::BootstrapMonteCarlo => BandMethod::BootstrapMonteCarlo { resamples, seed: RngSeed::new(seed) },
        BandKind::BootstrapClosedForm => BandMethod::BootstrapClosedForm,
        BandKind::ExactPoisson => BandMethod::ExactPoisson,
        BandKind::OracleTrueT => {
            let spec = truth.ok_or_else(|| CliError::Config("the oracle method needs --lambda-spec".into()))?;
            BandMethod::OracleTrueT(parse_intensity(spec, i)?)
        }
    })
}

pub struct CiBandArgs<'a> {
    pub input: &'a Path,
    pub window: Option<&'a Path>,
    pub h: f64,
    pub alpha: f64,
    pub method: &'a str,
    pub grid_steps: usize,
    pub resamples: usize,
    pub lambda_spec: Option<&'a str>,
}

pub fn ci_band(a: &CiBandArgs, seed: u64) -> CliResult<Emit> {
    let (pattern, _) = line(ingest_pattern(a.input, a.window)?)?;
    let interval = *pattern.window();
    let method = band_method(parse_config(a.method)?, a.resamples, seed, a.lambda_spec, &interval)?;
    let grid = steps_grid(&interval, a.grid_steps)?;
    let band = confidence_band(&pattern, a.h, a.alpha, &grid, &method)?;
    let mut table = Table::new(&["x", "lambda_hat", "lo", "hi", "flag", "count", "t"]);
    for i in 0..grid.len() {
        table.row([
            grid[i].to_string(),
            band.lambda_hat[i].to_string(),
            band.lo[i].to_string(),
            band.hi[i].to_string(),
            band.flags[i].to_string(),
            band.counts[i].to_string(),
            fmt_opt(band.t[i]),
        ]);
    }
    Ok(Emit::Bytes(table.into_bytes()))
}

fn steps_grid(interval: &Interval1, steps: usize) -> CliResult<Vec<f64>> {
    if steps == 0 {
        return Err(CliError::Config("grid-steps must be positive".into()));
    }
    Ok(midpoint_grid(interval, steps))
}

pub struct CoverageArgs<'a> {
    pub lambda_spec: &'a str,
    pub interval: &'a str,
    pub h: f64,
    pub alpha: f64,
    pub method: &'a str,
    pub reps: usize,
    pub grid_steps: usize,
    pub resamples: usize,
}

pub fn coverage(a: &CoverageArgs, seed: u64) -> CliResult<Emit> {
    let interval = resolve_interval(a.interval)?;
    let intensity = parse_intensity(a.lambda_spec, &interval)?;
    let method = band_method(parse_config(a.method)?, a.resamples, seed, Some(a.lambda_spec), &interval)?;
    let grid = steps_grid(&interval, a.grid_steps)?;
    let cov = coverage_experiment(&intensity, &interval, a.h, a.alpha, &method, a.reps, &grid, RngSeed::new(seed))?;
    let mut table = Table::new(&[
        "x",
        "coverage_true_lambda",
        "coverage_e_lambda_hat",
        "se_true_lambda",
        "se_e_lambda_hat",
        "interior",
    ]);
    for i in 0..grid.len() {
        table.row([
            grid[i].to_string(),
            cov.coverage_true_lambda[i].to_string(),
            cov.coverage_mean_estimate[i].to_string(),
            cov.se_true_lambda[i].to_string(),
            cov.se_mean_estimate[i].to_string(),
            cov.interior[i].to_string(),
        ]);
    }
    Ok(Emit::Bytes(table.into_bytes()))
}

fn ratio_error(num: f64, num_err: f64, den: f64, den_err: f64) -> f64 {
    if num == 0.0 || den == 0.0 {
        return 0.0;
    }
    (num / den).abs() * (num_err / num.abs() + den_err / den.abs())
}

fn ratio_se(num: f64, num_se: f64, den: f64, den_se: f64) -> f64 {
    if num == 0.0 || den == 0.0 {
        return 0.0;
    }
    (num / den).abs() * ((num_se / num).powi(2) + (den_se / den).powi(2)).sqrt()
}

fn variance_results(r: &VarianceComparison) -> (Value, Value) {
    let m = &r.moments;
    let results = json!({
        "reps": r.reps,
        "mean_theta": r.mean_theta,
        "mc_variance_theta": r.mc_variance_theta,
        "mean_bootstrap_limit": r.mean_bootstrap_limit,
        "s2": m.s2,
        "s3": m.s3,
        "s4": m.s4,
        "e_theta": m.e_theta,
        "true_variance_4s3_2s2": r.true_variance.variance,
        "true_variance_full_form": r.true_variance.full_form,
        "cancellation_residual": r.true_variance.cancellation_residual,
        "bootstrap_variance_4s3_6s2": r.predicted_bootstrap,
        "bootstrap_variance_scheme": r.predicted_bootstrap_scheme,
        "ratio_predicted": r.ratio_predicted,
        "ratio_empirical": r.ratio_empirical,
        "s3_over_s2": r.s3_over_s2,
        "factor_three": {
            "ratio_predicted": r.ratio_predicted,
            "ratio_empirical": r.ratio_empirical,
            "within_2_5_3_5": r.ratio_empirical > 2.5 && r.ratio_empirical < 3.5,
        },
    });
    let errors = json!({
        "mean_theta_se": r.mean_theta_se,
        "mc_variance_theta_se": r.mc_variance_theta_se,
        "mean_bootstrap_limit_se": r.mean_bootstrap_limit_se,
        "s2": m.errors.s2,
        "s3": m.errors.s3,
        "s4": m.errors.s4,
        "e_theta": m.errors.e_theta,
        "true_variance_4s3_2s2": r.true_variance.error,
        "bootstrap_variance_4s3_6s2": r.predicted_bootstrap_error,
        "bootstrap_variance_scheme": r.predicted_bootstrap_scheme_error,
        "ratio_predicted": ratio_error(r.predicted_bootstrap, r.predicted_bootstrap_error, r.true_variance.variance, r.true_variance.error),
        "ratio_empirical_se": ratio_se(r.mean_bootstrap_limit, r.mean_bootstrap_limit_se, r.mc_variance_theta, r.mc_variance_theta_se),
    });
    (results, errors)
}

pub fn variance_comparison(file: &VarianceComparisonFile, seed: u64, digest: Option<String>) -> CliResult<Emit> {
    let [x0, x1, y0, y1] = file.window;
    let cfg = VarianceComparisonConfig {
        lambda: file.lambda,
        window: Window2::new(x0, x1, y0, y1)?,
        pair: parse_config(&file.f)?,
        reps: file.reps,
        scheme: parse_config(&file.scheme)?,
        integration: integration(&file.integration, seed)?,
        seed: RngSeed::new(seed),
    };
    let result = run_variance_comparison(&cfg)?;
    let (results, errors) = variance_results(&result);
    let mut config = serde_json::to_value(file).expect("config serializes");
    config["experiment"] = json!("variance_comparison");
    let input_digest = digest.unwrap_or_else(|| digest_bytes(&[&to_json(&config)]));
    Ok(Emit::Record(ResultRecord {
        experiment: "variance_comparison".into(),
        input_digest,
        seed: Some(seed),
        config,
        results,
        errors,
        wall_clock_seconds: None,
    }))
}

fn ci_results(r: &CiSuiteResult) -> (Value, Value) {
    let bands: Vec<Value> = r
        .bands
        .iter()
        .map(|b| {
            json!({
                "method": b.method.to_string(),
                "level": b.level,
                "x": b.grid,
                "lambda_hat": b.lambda_hat,
                "lo": b.lo,
                "hi": b.hi,
                "count": b.counts,
                "t": b.t,
                "flag": b.flags.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
            })
        })
        .collect();
    let coverage: Vec<Value> = r
        .coverage
        .iter()
        .map(|c| {
            json!({
                "method": c.method.to_string(),
                "level": c.level,
                "reps": c.reps,
                "x": c.grid,
                "coverage_true_lambda": c.coverage_true_lambda,
                "coverage_e_lambda_hat": c.coverage_mean_estimate,
                "se_true_lambda": c.se_true_lambda,
                "se_e_lambda_hat": c.se_mean_estimate,
                "interior": c.interior,
            })
        })
        .collect();
    let mut max_diff: f64 = 0.0;
    let mut outside = 0usize;
    let t_star: Vec<Value> = r
        .t_star
        .iter()
        .map(|row| {
            let agree = row.agree;
            if let (Some(a), Some(b)) = (row.closed_form, row.monte_carlo) {
                max_diff = max_diff.max((a - b).abs());
            }
            outside += usize::from(!agree);
            json!({
                "p": row.p,
                "closed_form": row.closed_form,
                "monte_carlo": row.monte_carlo,
                "mc_band_lo": row.mc_band_lo,
                "mc_band_hi": row.mc_band_hi,
                "agree": agree,
            })
        })
        .collect();
    let max_se = r
        .coverage
        .iter()
        .flat_map(|c| c.se_true_lambda.iter().chain(&c.se_mean_estimate))
        .copied()
        .fold(0.0, f64::max);
    (
        json!({ "pattern_size": r.pattern_size, "bands": bands, "coverage": coverage, "t_star": t_star }),
        json!({
            "coverage_max_se": max_se,
            "t_star_max_abs_difference": max_diff,
            "t_star_outside_mc_band": outside,
        }),
    )
}

fn series_csv(r: &CiSuiteResult) -> Vec<u8> {
    let mut table = Table::new(&[
        "method",
        "x",
        "lambda_hat",
        "lo",
        "hi",
        "flag",
        "count",
        "t",
        "coverage_true_lambda",
        "coverage_e_lambda_hat",
        "se_true_lambda",
        "se_e_lambda_hat",
        "interior",
    ]);
    for (b, c) in r.bands.iter().zip(&r.coverage) {
        for i in 0..b.grid.len() {
            table.row([
                b.method.to_string(),
                b.grid[i].to_string(),
                b.lambda_hat[i].to_string(),
                b.lo[i].to_string(),
                b.hi[i].to_string(),
                b.flags[i].to_string(),
                b.counts[i].to_string(),
                fmt_opt(b.t[i]),
                c.coverage_true_lambda[i].to_string(),
                c.coverage_mean_estimate[i].to_string(),
                c.se_true_lambda[i].to_string(),
                c.se_mean_estimate[i].to_string(),
                c.interior[i].to_string(),
            ]);
        }
    }
    table.into_bytes()
}

pub fn ci_suite(file: &CiSuiteFile, seed: u64, digest: String) -> CliResult<Emit> {
    let interval = Interval1::new(file.interval[0], file.interval[1])?;
    let cfg = CiSuiteConfig {
        intensity: parse_intensity(&file.intensity, &interval)?,
        interval,
        h: file.h,
        alpha: file.alpha,
        methods: file.methods.iter().map(|m| parse_config(m)).collect::<CliResult<_>>()?,
        reps: file.reps,
        grid_steps: file.grid_steps,
        resamples: file.resamples,
        seed: RngSeed::new(seed),
    };
    let result = run_ci_suite(&cfg)?;
    if let Some(path) = &file.series_out {
        write_output(Some(path), &series_csv(&result))?;
    }
    let (results, errors) = ci_results(&result);
    let mut config = serde_json::to_value(file).expect("config serializes");
    config["experiment"] = json!("ci_suite");
    Ok(Emit::Record(ResultRecord {
        experiment: "ci_suite".into(),
        input_digest: digest,
        seed: Some(seed),
        config,
        results,
        errors,
        wall_clock_seconds: None,
    }))
}

/// Output path for config-driven runs: `--out` wins over the file's `out`.
pub fn config_out(cli: Option<&Path>, file: Option<&PathBuf>) -> Option<PathBuf> {
    cli.map(Path::to_path_buf).or_else(|| file.cloned())
}
