use ppboot_core::{IntensityFunction, Interval1};

use crate::error::{CliError, CliResult};

/// `linear:a,b` (λ(x) = a + b·x) or `const:c`.
pub fn parse_intensity(spec: &str, interval: &Interval1) -> CliResult<IntensityFunction> {
    let bad = || CliError::Config(format!("bad intensity spec {spec:?} (expected linear:a,b or const:c)"));
    let (kind, args) = spec.split_once(':').ok_or_else(bad)?;
    let nums: Vec<f64> =
        args.split(',').map(|s| s.trim().parse::<f64>().map_err(|_| bad())).collect::<CliResult<_>>()?;
    match (kind.trim(), nums.as_slice()) {
        ("linear", [a, b]) => Ok(IntensityFunction::linear(*a, *b, interval)?),
        ("const" | "constant", [c]) => Ok(IntensityFunction::constant(*c)?),
        _ => Err(bad()),
    }
}

pub fn parse_config<T: std::str::FromStr<Err = ppboot_core::Error>>(s: &str) -> CliResult<T> {
    s.parse::<T>().map_err(CliError::from)
}
