//! Smoothing kernels with explicit bandwidth: `K_b(u) = k(u/b)/b`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    /// `k(t) = 1/2` on `[-1, 1]`.
    Box,
    /// `k(t) = 3/4 (1 - t²)` on `[-1, 1]`.
    Epanechnikov,
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box" | "rect" | "rectangular" => Ok(KernelKind::Box),
            "epa" | "epanechnikov" => Ok(KernelKind::Epanechnikov),
            other => Err(Error::invalid(format!("unknown kernel {other:?} (expected box|epa)"))),
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Box => "box",
            KernelKind::Epanechnikov => "epa",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelFunction {
    kind: KernelKind,
    bandwidth: f64,
}

impl KernelFunction {
    pub fn new(kind: KernelKind, bandwidth: f64) -> Result<Self> {
        if !bandwidth.is_finite() || bandwidth <= 0.0 {
            return Err(Error::invalid(format!("bandwidth {bandwidth} must be finite and > 0")));
        }
        Ok(Self { kind, bandwidth })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        let t = u / self.bandwidth;
        if t.abs() > 1.0 {
            return 0.0;
        }
        let k = match self.kind {
            KernelKind::Box => 0.5,
            KernelKind::Epanechnikov => 0.75 * (1.0 - t * t),
        };
        k / self.bandwidth
    }
}
