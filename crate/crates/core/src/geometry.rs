//! Observation windows, point patterns and Poisson simulators.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::numeric::{composite_rule, NeumaierSum};
use crate::rng::RngSeed;

/// A region that can hold a point pattern.
pub trait Domain: Clone + fmt::Debug + Send + Sync {
    type Point: Copy + fmt::Debug + PartialEq + Send + Sync;

    /// Closed membership test.
    fn contains(&self, p: &Self::Point) -> bool;

    fn measure(&self) -> f64;

    /// Uniform point strictly inside the domain.
    fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Point;

    /// Total order on points, used to detect duplicates.
    fn cmp_points(a: &Self::Point, b: &Self::Point) -> Ordering;
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window2 {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Window2 {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let finite = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite());
        if !finite || x_min >= x_max || y_min >= y_max {
            return Err(Error::invalid(format!(
                "window [{x_min}, {x_max}] x [{y_min}, {y_max}] is empty or non-finite"
            )));
        }
        Ok(Self { x_min, x_max, y_min, y_max })
    }

    pub fn unit_square() -> Self {
        Self { x_min: 0.0, x_max: 1.0, y_min: 0.0, y_max: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            x_min: self.x_min + dx,
            x_max: self.x_max + dx,
            y_min: self.y_min + dy,
            y_max: self.y_max + dy,
        }
    }
}

impl Domain for Window2 {
    type Point = [f64; 2];

    fn contains(&self, p: &[f64; 2]) -> bool {
        (self.x_min..=self.x_max).contains(&p[0]) && (self.y_min..=self.y_max).contains(&p[1])
    }

    fn measure(&self) -> f64 {
        self.area()
    }

    fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        [
            open_uniform(rng, self.x_min, self.x_max),
            open_uniform(rng, self.y_min, self.y_max),
        ]
    }

    fn cmp_points(a: &[f64; 2], b: &[f64; 2]) -> Ordering {
        a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1]))
    }
}

/// Closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval1 {
    pub lo: f64,
    pub hi: f64,
}

impl Interval1 {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::invalid(format!("interval [{lo}, {hi}] is empty or non-finite")));
        }
        Ok(Self { lo, hi })
    }

    pub fn unit() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    /// Intersection with another interval, `None` when it has no interior.
    pub fn intersect(&self, other: &Interval1) -> Option<Interval1> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo < hi).then_some(Interval1 { lo, hi })
    }
}

impl Domain for Interval1 {
    type Point = f64;

    fn contains(&self, p: &f64) -> bool {
        (self.lo..=self.hi).contains(p)
    }

    fn measure(&self) -> f64 {
        self.length()
    }

    fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        open_uniform(rng, self.lo, self.hi)
    }

    fn cmp_points(a: &f64, b: &f64) -> Ordering {
        a.total_cmp(b)
    }
}

fn open_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    loop {
        let x = lo + (hi - lo) * rng.random::<f64>();
        if x > lo && x < hi {
            return x;
        }
    }
}

/// Finite set of pairwise distinct points inside a window.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern<D: Domain> {
    points: Vec<D::Point>,
    window: D,
}

pub type PlanarPattern = PointPattern<Window2>;
pub type LinePattern = PointPattern<Interval1>;

impl<D: Domain> PointPattern<D> {
    /// Validates membership and distinctness. Row indices in errors are
    /// zero-based positions in `points`.
    pub fn new(points: Vec<D::Point>, window: D) -> Result<Self> {
        if let Some(index) = points.iter().position(|p| !window.contains(p)) {
            return Err(Error::OutOfWindow { index });
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| D::cmp_points(&points[a], &points[b]).then(a.cmp(&b)));
        for w in order.windows(2) {
            if D::cmp_points(&points[w[0]], &points[w[1]]) == Ordering::Equal {
                return Err(Error::DuplicatePoint { first: w[0].min(w[1]), second: w[0].max(w[1]) });
            }
        }
        Ok(Self { points, window })
    }

    pub fn empty(window: D) -> Self {
        Self { points: Vec::new(), window }
    }

    pub fn points(&self) -> &[D::Point] {
        &self.points
    }

    pub fn window(&self) -> &D {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same pattern with points reordered by `perm` (`perm[k]` is the old index).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), found: perm.len() });
        }
        Self::new(perm.iter().map(|&i| self.points[i]).collect(), self.window.clone())
    }
}

impl PlanarPattern {
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            points: self.points.iter().map(|p| [p[0] + dx, p[1] + dy]).collect(),
            window: self.window.translated(dx, dy),
        }
    }
}

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Shape {
    Constant(f64),
    Linear { intercept: f64, slope: f64 },
    Custom(Evaluator),
}

/// Bounded, nonnegative intensity function of a one-dimensional Poisson process.
#[derive(Clone)]
pub struct IntensityFunction {
    shape: Shape,
    lambda_max: f64,
}

impl fmt::Debug for IntensityFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntensityFunction")
            .field("shape", &self.describe())
            .field("lambda_max", &self.lambda_max)
            .finish()
    }
}

impl IntensityFunction {
    pub fn constant(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::invalid(format!("constant intensity {value} must be finite and >= 0")));
        }
        Ok(Self { shape: Shape::Constant(value), lambda_max: value })
    }

    /// `λ(x) = intercept + slope·x`, bounded on `interval`.
    pub fn linear(intercept: f64, slope: f64, interval: &Interval1) -> Result<Self> {
        let at_lo = intercept + slope * interval.lo;
        let at_hi = intercept + slope * interval.hi;
        if !at_lo.is_finite() || !at_hi.is_finite() || at_lo < 0.0 || at_hi < 0.0 {
            return Err(Error::invalid(format!(
                "linear intensity {intercept} + {slope}x is negative or non-finite on the interval"
            )));
        }
        Ok(Self { shape: Shape::Linear { intercept, slope }, lambda_max: at_lo.max(at_hi) })
    }

    /// Arbitrary evaluator with a caller-supplied bound; violations surface
    /// when the function is evaluated.
    pub fn from_fn<F>(f: F, lambda_max: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !lambda_max.is_finite() || lambda_max < 0.0 {
            return Err(Error::invalid(format!("lambda_max {lambda_max} must be finite and >= 0")));
        }
        Ok(Self { shape: Shape::Custom(Arc::new(f)), lambda_max })
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        let value = match &self.shape {
            Shape::Constant(c) => *c,
            Shape::Linear { intercept, slope } => intercept + slope * x,
            Shape::Custom(f) => f(x),
        };
        if !(0.0..=self.lambda_max).contains(&value) {
            return Err(Error::InvalidBound { x, value, bound: self.lambda_max });
        }
        Ok(value)
    }

    /// `∫ λ` over `[lo, hi]`; exact for constant and linear shapes.
    pub fn integral(&self, lo: f64, hi: f64) -> Result<f64> {
        match &self.shape {
            Shape::Constant(c) => Ok(c * (hi - lo)),
            Shape::Linear { intercept, slope } => {
                Ok(intercept * (hi - lo) + 0.5 * slope * (hi * hi - lo * lo))
            }
            Shape::Custom(_) => {
                let panels: Vec<f64> = (1..32).map(|k| lo + (hi - lo) * k as f64 / 32.0).collect();
                let mut acc = NeumaierSum::new();
                for (x, w) in composite_rule(lo, hi, &panels, 8) {
                    acc.add(w * self.evaluate(x)?);
                }
                Ok(acc.value())
            }
        }
    }

    /// Short textual form, e.g. `linear:50,20`.
    pub fn describe(&self) -> String {
        match &self.shape {
            Shape::Constant(c) => format!("constant:{c}"),
            Shape::Linear { intercept, slope } => format!("linear:{intercept},{slope}"),
            Shape::Custom(_) => format!("custom(max={})", self.lambda_max),
        }
    }
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    // Poisson::new only fails for non-positive or non-finite means.
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}

/// Homogeneous Poisson process of intensity `lambda` on `window`.
pub fn simulate_homogeneous_poisson<D: Domain>(
    lambda: f64,
    window: &D,
    seed: RngSeed,
) -> Result<PointPattern<D>> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::invalid(format!("intensity {lambda} must be finite and >= 0")));
    }
    let mut rng = seed.rng();
    let count = poisson_count(lambda * window.measure(), &mut rng);
    let points = (0..count).map(|_| window.sample_uniform(&mut rng)).collect();
    PointPattern::new(points, window.clone())
}

/// Inhomogeneous Poisson process on `interval` by Lewis–Shedler thinning of a
/// homogeneous proposal at `lambda_max`. Points are returned in increasing order.
pub fn simulate_inhomogeneous_poisson(
    intensity: &IntensityFunction,
    interval: &Interval1,
    seed: RngSeed,
) -> Result<LinePattern> {
    let bound = intensity.lambda_max();
    let mut rng = seed.rng();
    let count = poisson_count(bound * interval.length(), &mut rng);
    let mut points = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let x = interval.sample_uniform(&mut rng);
        let keep_prob = intensity.evaluate(x)? / bound;
        if rng.random::<f64>() < keep_prob {
            points.push(x);
        }
    }
    points.sort_by(f64::total_cmp);
    PointPattern::new(points, *interval)
}

/// Number of points `x` with `interval.lo <= x <= interval.hi`.
pub fn count_points_in(pattern: &LinePattern, interval: &Interval1) -> usize {
    pattern.points().iter().filter(|x| interval.contains(x)).count()
}
