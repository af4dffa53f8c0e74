//! Two-point statistics `Σ_{i≠j} f(x_i, x_j)`, the product-density estimator
//! and the distinct-index sums that drive the bootstrap variance limit.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Domain, PlanarPattern, Window2};
use crate::kernel::{KernelFunction, KernelKind};
use crate::numeric::{compensated_sum, NeumaierSum};

type PairEvaluator = Arc<dyn Fn([f64; 2], [f64; 2]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum PairKind {
    Zero,
    Constant(f64),
    /// `K_b(r - ‖x - y‖) / (2π r ν(W))`.
    ProductDensity { r: f64, kernel: KernelFunction },
    Custom(PairEvaluator),
}

/// Symmetric pair function `f(x, y) = 1_W(x) 1_W(y) h(x, y)`.
#[derive(Clone)]
pub struct PairFunction {
    window: Window2,
    kind: PairKind,
}

impl fmt::Debug for PairFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PairFunction")
            .field("window", &self.window)
            .field("h", &self.describe())
            .finish()
    }
}

impl PairFunction {
    pub fn zero(window: Window2) -> Self {
        Self { window, kind: PairKind::Zero }
    }

    pub fn constant(window: Window2, value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::invalid("constant pair function must be finite"));
        }
        Ok(Self { window, kind: PairKind::Constant(value) })
    }

    /// The summand of the product-density estimator at radius `r`.
    pub fn product_density(window: Window2, r: f64, kernel: KernelFunction) -> Result<Self> {
        if !r.is_finite() || r <= 0.0 {
            return Err(Error::invalid(format!("radius {r} must be finite and > 0")));
        }
        Ok(Self { window, kind: PairKind::ProductDensity { r, kernel } })
    }

    /// Arbitrary `h`; the caller guarantees `h(x, y) = h(y, x)`.
    pub fn custom<F>(window: Window2, h: F) -> Self
    where
        F: Fn([f64; 2], [f64; 2]) -> f64 + Send + Sync + 'static,
    {
        Self { window, kind: PairKind::Custom(Arc::new(h)) }
    }

    pub fn window(&self) -> &Window2 {
        &self.window
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, PairKind::Zero) || matches!(self.kind, PairKind::Constant(c) if c == 0.0)
    }

    #[inline]
    pub fn eval(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        if !self.window.contains(&x) || !self.window.contains(&y) {
            return 0.0;
        }
        self.eval_inside(x, y)
    }

    #[inline]
    fn eval_inside(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        match &self.kind {
            PairKind::Zero => 0.0,
            PairKind::Constant(c) => *c,
            PairKind::ProductDensity { .. } => {
                let d = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
                self.radial_profile(d)
            }
            PairKind::Custom(h) => h(x, y),
        }
    }

    /// Closed support `[ρ_lo, ρ_hi]` in the inter-point distance, when `f`
    /// depends on `‖x − y‖` only and vanishes outside a bounded range.
    pub fn radial_support(&self) -> Option<(f64, f64)> {
        match &self.kind {
            PairKind::ProductDensity { r, kernel } => {
                Some(((r - kernel.bandwidth()).max(0.0), r + kernel.bandwidth()))
            }
            _ => None,
        }
    }

    /// Kernel center, a natural quadrature breakpoint for radial functions.
    pub(crate) fn radial_center(&self) -> Option<f64> {
        match &self.kind {
            PairKind::ProductDensity { r, .. } => Some(*r),
            _ => None,
        }
    }

    /// `g(ρ)` with `f(x, y) = g(‖x − y‖)` inside the window (radial kinds only).
    #[inline]
    pub fn radial_profile(&self, rho: f64) -> f64 {
        match &self.kind {
            PairKind::ProductDensity { r, kernel } => {
                kernel.eval(r - rho) / (2.0 * PI * r * self.window.area())
            }
            PairKind::Zero => 0.0,
            PairKind::Constant(c) => *c,
            PairKind::Custom(_) => f64::NAN,
        }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            PairKind::Zero => "zero".into(),
            PairKind::Constant(c) => format!("const:{c}"),
            PairKind::ProductDensity { r, kernel } => {
                format!("pcf:r={r},b={},kernel={}", kernel.bandwidth(), kernel.kind())
            }
            PairKind::Custom(_) => "custom".into(),
        }
    }
}

/// Window-free description of a pair function, parsed from strings such as
/// `zero`, `const:1.5` or `pcf:r=0.05,b=0.01,kernel=box`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairSpec {
    Zero,
    Constant(f64),
    ProductDensity { r: f64, kernel: KernelFunction },
}

impl PairSpec {
    pub fn on(&self, window: Window2) -> Result<PairFunction> {
        match *self {
            PairSpec::Zero => Ok(PairFunction::zero(window)),
            PairSpec::Constant(c) => PairFunction::constant(window, c),
            PairSpec::ProductDensity { r, kernel } => PairFunction::product_density(window, r, kernel),
        }
    }
}

impl FromStr for PairSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        let num = |v: &str| -> Result<f64> {
            v.trim().parse::<f64>().map_err(|_| Error::invalid(format!("bad number {v:?} in f-spec {s:?}")))
        };
        match head {
            "zero" => Ok(PairSpec::Zero),
            "const" => Ok(PairSpec::Constant(num(rest)?)),
            "pcf" => {
                let (mut r, mut b, mut kind) = (None, None, KernelKind::Box);
                for item in rest.split(',').filter(|t| !t.trim().is_empty()) {
                    let (k, v) = item
                        .split_once('=')
                        .ok_or_else(|| Error::invalid(format!("expected key=value in f-spec, got {item:?}")))?;
                    match k.trim() {
                        "r" => r = Some(num(v)?),
                        "b" => b = Some(num(v)?),
                        "kernel" => kind = v.trim().parse()?,
                        other => return Err(Error::invalid(format!("unknown f-spec key {other:?}"))),
                    }
                }
                let r = r.ok_or_else(|| Error::invalid("pcf f-spec needs r="))?;
                let b = b.ok_or_else(|| Error::invalid("pcf f-spec needs b="))?;
                if !r.is_finite() || r <= 0.0 {
                    return Err(Error::invalid(format!("radius {r} must be finite and > 0")));
                }
                Ok(PairSpec::ProductDensity { r, kernel: KernelFunction::new(kind, b)? })
            }
            other => Err(Error::invalid(format!("unknown f-spec {other:?} (expected zero|const:c|pcf:r=..,b=..)"))),
        }
    }
}

impl fmt::Display for PairSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairSpec::Zero => write!(f, "zero"),
            PairSpec::Constant(c) => write!(f, "const:{c}"),
            PairSpec::ProductDensity { r, kernel } => {
                write!(f, "pcf:r={r},b={},kernel={}", kernel.bandwidth(), kernel.kind())
            }
        }
    }
}

/// Sums over ordered tuples of pairwise distinct indices.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TwoPointSums {
    /// `Σ_{i≠j} f(x_i, x_j)`
    pub p: f64,
    /// `Σ_{i,j,k distinct} f(x_i, x_j) f(x_i, x_k)`
    pub t3: f64,
    /// `Σ_{i,j,k,l distinct} f(x_i, x_j) f(x_k, x_l)`
    pub q4: f64,
    /// `Σ_{i≠j} f(x_i, x_j)²`
    pub r: f64,
}

/// Nonzero values `f(x_i, x_j)` for `i < j`, in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable {
    n: usize,
    entries: Vec<(u32, u32, f64)>,
}

impl PairTable {
    pub fn new(pattern: &PlanarPattern, f: &PairFunction) -> Self {
        let pts = pattern.points();
        let n = pts.len();
        if f.is_zero() || n < 2 {
            return Self { n, entries: Vec::new() };
        }
        let reach = f.radial_support().map(|(_, hi)| hi * hi);
        let row = |i: usize| -> Vec<(u32, u32, f64)> {
            let xi = pts[i];
            let mut out = Vec::new();
            for (j, &xj) in pts.iter().enumerate().skip(i + 1) {
                if let Some(reach2) = reach {
                    let d2 = (xi[0] - xj[0]).powi(2) + (xi[1] - xj[1]).powi(2);
                    if d2 > reach2 {
                        continue;
                    }
                }
                let v = f.eval(xi, xj);
                if v != 0.0 {
                    out.push((i as u32, j as u32, v));
                }
            }
            out
        };
        let entries = if n > 256 {
            (0..n).into_par_iter().map(row).collect::<Vec<_>>().concat()
        } else {
            (0..n).flat_map(row).collect()
        };
        Self { n, entries }
    }

    /// Table of an explicit symmetric function of indices.
    pub fn from_index_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                if v != 0.0 {
                    entries.push((i as u32, j as u32, v));
                }
            }
        }
        Self { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(u32, u32, f64)] {
        &self.entries
    }

    /// `θ̂ = Σ_{i≠j} f(x_i, x_j)`.
    pub fn statistic(&self) -> f64 {
        2.0 * compensated_sum(self.entries.iter().map(|e| e.2))
    }

    /// `Σ_{i≠j} f(x_i, x_j) w(i) w(j)`; `weights.len()` must equal `n`.
    pub fn weighted_statistic(&self, weights: &[u32]) -> f64 {
        debug_assert_eq!(weights.len(), self.n);
        let mut acc = NeumaierSum::new();
        for &(i, j, v) in &self.entries {
            let w = weights[i as usize] as u64 * weights[j as usize] as u64;
            if w != 0 {
                acc.add(v * w as f64);
            }
        }
        2.0 * acc.value()
    }

    /// All four distinct-index sums in `O(n²)` from the row sums
    /// `Q_i = Σ_{j≠i} f_ij` and `R_i = Σ_{j≠i} f_ij²`.
    pub fn distinct_index_sums(&self) -> TwoPointSums {
        let mut q = vec![NeumaierSum::new(); self.n];
        let mut r = vec![NeumaierSum::new(); self.n];
        for &(i, j, v) in &self.entries {
            let (i, j) = (i as usize, j as usize);
            q[i].add(v);
            q[j].add(v);
            r[i].add(v * v);
            r[j].add(v * v);
        }
        let qv: Vec<f64> = q.iter().map(NeumaierSum::value).collect();
        let rv: Vec<f64> = r.iter().map(NeumaierSum::value).collect();
        let p = compensated_sum(qv.iter().copied());
        let r_total = compensated_sum(rv.iter().copied());
        let t3 = compensated_sum(qv.iter().zip(&rv).map(|(qi, ri)| qi * qi - ri));
        // Quadruples need four distinct indices.
        let q4 = if self.n >= 4 {
            compensated_sum([p * p, -4.0 * t3, -2.0 * r_total])
        } else {
            0.0
        };
        TwoPointSums { p, t3, q4, r: r_total }
    }
}

/// `θ̂ = Σ_{i≠j} f(x_i, x_j)` over ordered pairs of distinct points.
pub fn two_point_statistic(pattern: &PlanarPattern, f: &PairFunction) -> f64 {
    PairTable::new(pattern, f).statistic()
}

pub fn distinct_index_sums(pattern: &PlanarPattern, f: &PairFunction) -> TwoPointSums {
    PairTable::new(pattern, f).distinct_index_sums()
}

/// Product-density estimate without border correction at each radius:
/// `ρ̂(r) = Σ_{i≠j} K_b(r − ‖x_i − x_j‖) / (2π r ν(W))`.
pub fn estimate_product_density(
    pattern: &PlanarPattern,
    r_grid: &[f64],
    kernel: &KernelFunction,
) -> Result<Vec<(f64, f64)>> {
    if let Some(&bad) = r_grid.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(Error::invalid(format!("radius {bad} must be finite and > 0")));
    }
    let reach = r_grid.iter().copied().fold(0.0, f64::max) + kernel.bandwidth();
    let pts = pattern.points();
    let mut dists = Vec::new();
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            if d <= reach {
                dists.push(d);
            }
        }
    }
    let area = pattern.window().area();
    Ok(r_grid
        .iter()
        .map(|&r| {
            let s = compensated_sum(dists.iter().map(|&d| kernel.eval(r - d)));
            (r, 2.0 * s / (2.0 * PI * r * area))
        })
        .collect())
}
