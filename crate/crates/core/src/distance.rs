//! Empirical spectral distributions and the Kolmogorov and Lévy distances
//! between distribution functions.

use serde::{Deserialize, Serialize};

/// A right-continuous distribution function on the real line.
///
/// Implementors report where they jump; between jumps they are either
/// constant (`has_continuous_part == false`) or continuous and
/// nondecreasing.
pub trait DistributionFunction {
    fn cdf(&self, x: f64) -> f64;

    /// Left limit `F(x−)`.
    fn cdf_left(&self, x: f64) -> f64;

    /// Sorted jump locations.
    fn jumps(&self) -> Vec<f64>;

    fn has_continuous_part(&self) -> bool;

    /// An interval outside of which the function is constant 0 or 1.
    fn span(&self) -> (f64, f64);
}

/// Empirical spectral distribution: mass `1/N` on each eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Esd {
    /// Nonincreasing.
    eigenvalues: Vec<f64>,
}

impl Esd {
    /// Panics on non-finite eigenvalues or an empty list.
    pub fn new(mut eigenvalues: Vec<f64>) -> Self {
        assert!(!eigenvalues.is_empty(), "esd of an empty spectrum");
        assert!(
            eigenvalues.iter().all(|v| v.is_finite()),
            "esd requires finite eigenvalues"
        );
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        Self { eigenvalues }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    fn count_le(&self, x: f64) -> usize {
        // nonincreasing order: the values <= x form a suffix
        self.eigenvalues.len() - self.eigenvalues.partition_point(|&v| v > x)
    }

    fn count_lt(&self, x: f64) -> usize {
        self.eigenvalues.len() - self.eigenvalues.partition_point(|&v| v >= x)
    }
}

impl DistributionFunction for Esd {
    fn cdf(&self, x: f64) -> f64 {
        self.count_le(x) as f64 / self.eigenvalues.len() as f64
    }

    fn cdf_left(&self, x: f64) -> f64 {
        self.count_lt(x) as f64 / self.eigenvalues.len() as f64
    }

    fn jumps(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.eigenvalues.iter().rev().copied().collect();
        v.dedup();
        v
    }

    fn has_continuous_part(&self) -> bool {
        false
    }

    fn span(&self) -> (f64, f64) {
        (
            *self.eigenvalues.last().expect("nonempty"),
            self.eigenvalues[0],
        )
    }
}

impl<T: DistributionFunction + ?Sized> DistributionFunction for &T {
    fn cdf(&self, x: f64) -> f64 {
        (**self).cdf(x)
    }
    fn cdf_left(&self, x: f64) -> f64 {
        (**self).cdf_left(x)
    }
    fn jumps(&self) -> Vec<f64> {
        (**self).jumps()
    }
    fn has_continuous_part(&self) -> bool {
        (**self).has_continuous_part()
    }
    fn span(&self) -> (f64, f64) {
        (**self).span()
    }
}

/// Points at which continuous parts are probed when both arguments have one.
const CONTINUOUS_GRID: usize = 4096;

fn merged_jumps(f1: &dyn DistributionFunction, f2: &dyn DistributionFunction) -> Vec<f64> {
    let mut pts = f1.jumps();
    pts.extend(f2.jumps());
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn continuous_grid(f1: &dyn DistributionFunction, f2: &dyn DistributionFunction) -> Vec<f64> {
    if !(f1.has_continuous_part() && f2.has_continuous_part()) {
        return Vec::new();
    }
    let (a1, b1) = f1.span();
    let (a2, b2) = f2.span();
    let lo = a1.min(a2);
    let hi = b1.max(b2);
    if hi <= lo {
        return vec![lo];
    }
    let step = (hi - lo) / CONTINUOUS_GRID as f64;
    (0..=CONTINUOUS_GRID)
        .map(|k| lo + step * k as f64)
        .collect()
}

/// `sup_x |F1(x) − F2(x)|`.
///
/// Exact whenever at least one argument is a pure step function: between
/// consecutive jumps the difference is monotone, so the supremum is attained
/// at a jump either as a value or as a left limit. When both arguments have
/// continuous parts a uniform grid over their spans is added.
pub fn kolmogorov_distance<F1, F2>(f1: &F1, f2: &F2) -> f64
where
    F1: DistributionFunction + ?Sized,
    F2: DistributionFunction + ?Sized,
{
    let f1: &dyn DistributionFunction = &f1;
    let f2: &dyn DistributionFunction = &f2;
    let mut pts = merged_jumps(f1, f2);
    pts.extend(continuous_grid(f1, f2));
    let mut best = 0.0f64;
    for &x in &pts {
        best = best
            .max((f1.cdf(x) - f2.cdf(x)).abs())
            .max((f1.cdf_left(x) - f2.cdf_left(x)).abs());
    }
    best
}

/// Absolute tolerance of the bisection in [`levy_distance`].
pub const LEVY_TOL: f64 = 1e-6;

fn levy_feasible(
    f1: &dyn DistributionFunction,
    f2: &dyn DistributionFunction,
    jumps: &[f64],
    grid: &[f64],
    eps: f64,
) -> bool {
    // F1(x−ε) − ε ≤ F2(x) ≤ F1(x+ε) + ε, checked on values and left limits at
    // every jump, every jump shifted by ±ε, and the continuous grid.
    let check = |x: f64| {
        let lower_ok = f1.cdf(x - eps) - eps <= f2.cdf(x) + 1e-15
            && f1.cdf_left(x - eps) - eps <= f2.cdf_left(x) + 1e-15;
        let upper_ok = f2.cdf(x) <= f1.cdf(x + eps) + eps + 1e-15
            && f2.cdf_left(x) <= f1.cdf_left(x + eps) + eps + 1e-15;
        lower_ok && upper_ok
    };
    jumps
        .iter()
        .flat_map(|&j| [j - eps, j, j + eps])
        .chain(grid.iter().copied())
        .all(check)
}

/// `inf{ε > 0 : F1(x−ε) − ε ≤ F2(x) ≤ F1(x+ε) + ε for all x}`, by bisection
/// on `ε ∈ [0, 1]` to within [`LEVY_TOL`]. The returned value is feasible.
pub fn levy_distance<F1, F2>(f1: &F1, f2: &F2) -> f64
where
    F1: DistributionFunction + ?Sized,
    F2: DistributionFunction + ?Sized,
{
    let f1: &dyn DistributionFunction = &f1;
    let f2: &dyn DistributionFunction = &f2;
    let jumps = merged_jumps(f1, f2);
    let grid = continuous_grid(f1, f2);
    if levy_feasible(f1, f2, &jumps, &grid, 0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > LEVY_TOL {
        let mid = 0.5 * (lo + hi);
        if levy_feasible(f1, f2, &jumps, &grid, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
