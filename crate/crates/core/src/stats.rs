//! Summary statistics and goodness-of-fit tests shared by the simulations.

use serde::{Deserialize, Serialize};

/// Running first and second moments.
///
/// Merging is associative up to floating-point rounding; callers that need
/// bit-identical results merge partials in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Moments::new();
        xs.iter().for_each(|&x| m.push(x));
        m
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        self.mean += delta * w;
        self.m2 += other.m2 + delta * delta * self.n as f64 * w;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            return f64::INFINITY;
        }
        (self.variance() / self.n as f64).sqrt()
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            value: self.mean(),
            std_error: self.std_error(),
            replications: self.n,
        }
    }
}

/// A Monte Carlo point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub replications: u64,
}

impl Estimate {
    /// Estimate of a proportion from a success count, with binomial s.e.
    pub fn proportion(successes: u64, replications: u64) -> Self {
        let n = replications as f64;
        let p = successes as f64 / n;
        Estimate {
            value: p,
            std_error: (p * (1.0 - p) / n).sqrt(),
            replications,
        }
    }

    /// Whether `target` lies within `z` standard errors of the estimate.
    pub fn covers(&self, target: f64, z: f64) -> bool {
        (self.value - target).abs() <= z * self.std_error
    }
}

/// One-sample Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(mut samples: Vec<f64>, cdf: F) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Large-sample critical value of the one-sample KS statistic at level `alpha`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    kolmogorov_quantile(alpha) / (n as f64).sqrt()
}

/// Large-sample critical value of the two-sample KS statistic.
pub fn ks_two_sample_critical_value(n: usize, m: usize, alpha: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    kolmogorov_quantile(alpha) * ((n + m) / (n * m)).sqrt()
}

/// c(α) = sqrt(-ln(α/2) / 2), the Kolmogorov limit quantile.
fn kolmogorov_quantile(alpha: f64) -> f64 {
    (-(0.5 * alpha).ln() / 2.0).sqrt()
}

/// Sample quantile by linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}
