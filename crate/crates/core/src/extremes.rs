//! Extreme-value diagnostics for maxima of Student-t triangular arrays.
//!
//! For each k the maximum of k i.i.d. draws (of t_ν, or of a sum of two
//! independent t_ν) is simulated, then Gumbel and three-parameter Fréchet
//! laws are fitted by maximum likelihood and compared through
//! Anderson–Darling distances. Nothing here asserts a limit law when ν grows
//! with k; the report is raw material for studying that question.
//!
//! Replication r draws from `stream.replication(r)` for every k, so with a
//! fixed ν the maxima are coupled: the draws for k + 1 extend those for k.

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::distributions::{t_sampler, DegreesOfFreedom};
use crate::efficiency::Schedule;
use crate::error::{Error, Result};
use crate::parallel;
use crate::root::{brent, expand_increasing, Stop};
use crate::stats::quantile_sorted;
use crate::stream::RandomStream;

pub const MIN_REPLICATIONS: u64 = 100;
pub const DEFAULT_HILL_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    MaxOfT,
    MaxOfTSum,
}

impl Statistic {
    pub fn label(self) -> &'static str {
        match self {
            Statistic::MaxOfT => "max-of-t",
            Statistic::MaxOfTSum => "max-of-t-sum",
        }
    }
}

impl std::fmt::Display for Statistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max-of-t" | "t" => Ok(Statistic::MaxOfT),
            "max-of-t-sum" | "t-sum" => Ok(Statistic::MaxOfTSum),
            other => Err(Error::invalid("statistic", format!("unknown statistic {other:?}"))),
        }
    }
}

/// One summand of the maximum: t_ν, or the sum of two independent t_ν.
pub fn sample_summand<R: Rng + ?Sized>(nu: DegreesOfFreedom, statistic: Statistic, rng: &mut R) -> f64 {
    let t = t_sampler(nu);
    match statistic {
        Statistic::MaxOfT => t.sample(rng),
        Statistic::MaxOfTSum => t.sample(rng) + t.sample(rng),
    }
}

/// Maximum of k i.i.d. summands, drawn in order from `rng`.
///
/// Panics if k is 0.
pub fn sample_max<R: Rng + ?Sized>(k: u64, nu: DegreesOfFreedom, statistic: Statistic, rng: &mut R) -> f64 {
    assert!(k >= 1, "sample_max needs k >= 1");
    let t = t_sampler(nu);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..k {
        let x = match statistic {
            Statistic::MaxOfT => t.sample(rng),
            Statistic::MaxOfTSum => t.sample(rng) + t.sample(rng),
        };
        best = best.max(x);
    }
    best
}

/// Degrees of freedom as a function of k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NuSchedule {
    Fixed {
        nu: DegreesOfFreedom,
    },
    EqualsK,
    /// ν_k = N0(k) − 1 for a first-stage schedule.
    FirstStage {
        schedule: Schedule,
    },
}

impl NuSchedule {
    pub fn nu(&self, k: u64) -> Result<DegreesOfFreedom> {
        match *self {
            NuSchedule::Fixed { nu } => Ok(nu),
            NuSchedule::EqualsK => DegreesOfFreedom::new(k),
            NuSchedule::FirstStage { schedule } => schedule.nu(k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangularArraySpec {
    pub ks: Vec<u64>,
    pub nu: NuSchedule,
    pub statistic: Statistic,
    pub replications: u64,
    /// Fraction of the upper order statistics used by the Hill estimator.
    #[serde(default = "default_hill_fraction")]
    pub hill_fraction: f64,
}

fn default_hill_fraction() -> f64 {
    DEFAULT_HILL_FRACTION
}

impl TriangularArraySpec {
    pub fn new(ks: Vec<u64>, nu: NuSchedule, statistic: Statistic, replications: u64) -> Result<Self> {
        let spec = TriangularArraySpec {
            ks,
            nu,
            statistic,
            replications,
            hill_fraction: DEFAULT_HILL_FRACTION,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(Error::invalid("ks", "need at least one positive k"));
        }
        if self.ks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("ks", "must be strictly ascending"));
        }
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::invalid(
                "replications",
                format!("need at least {MIN_REPLICATIONS}, got {}", self.replications),
            ));
        }
        if !(self.hill_fraction > 0.0 && self.hill_fraction < 1.0) {
            return Err(Error::invalid(
                "hill_fraction",
                format!("must lie in (0, 1), got {}", self.hill_fraction),
            ));
        }
        for &k in &self.ks {
            self.nu.nu(k)?;
        }
        Ok(())
    }
}

/// F(x) = exp(−exp(−(x − location)/scale)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GumbelFit {
    pub location: f64,
    pub scale: f64,
}

impl GumbelFit {
    /// ln(−ln F(x)).
    fn ln_neg_ln_cdf(&self, x: f64) -> f64 {
        -(x - self.location) / self.scale
    }

    pub fn cdf(&self, x: f64) -> f64 {
        (-self.ln_neg_ln_cdf(x).exp()).exp()
    }
}

/// F(x) = exp(−((x − location)/scale)^(−shape)) for x > location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrechetFit {
    pub location: f64,
    pub scale: f64,
    pub shape: f64,
}

impl FrechetFit {
    fn ln_neg_ln_cdf(&self, x: f64) -> f64 {
        if x <= self.location {
            return f64::INFINITY;
        }
        -self.shape * ((x - self.location) / self.scale).ln()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        (-self.ln_neg_ln_cdf(x).exp()).exp()
    }

    fn log_likelihood(&self, xs: &[f64]) -> f64 {
        let (a, s) = (self.shape, self.scale);
        xs.iter()
            .map(|&x| {
                let ln_y = ((x - self.location) / s).ln();
                a.ln() - s.ln() - (a + 1.0) * ln_y - (-a * ln_y).exp()
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremeFitRow {
    pub k: u64,
    pub nu: DegreesOfFreedom,
    pub replications: u64,
    pub median: f64,
    /// Interquartile range of the simulated maxima.
    pub iqr: f64,
    pub quantile_99: f64,
    pub gumbel: GumbelFit,
    pub frechet: FrechetFit,
    pub ad_gumbel: f64,
    pub ad_frechet: f64,
    /// Hill estimate of the tail index; None when the threshold order
    /// statistic is not positive.
    pub hill_index: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeFitReport {
    pub spec: TriangularArraySpec,
    pub rows: Vec<ExtremeFitRow>,
}

/// Simulated maxima for one k, in replication order.
pub fn simulate_maxima(
    k: u64,
    nu: DegreesOfFreedom,
    statistic: Statistic,
    replications: u64,
    stream: RandomStream,
) -> Vec<f64> {
    parallel::replicate(
        replications,
        Vec::new,
        |acc: &mut Vec<f64>, r| {
            let mut rng = stream.replication(r).rng();
            acc.push(sample_max(k, nu, statistic, &mut rng));
        },
        |acc, part| acc.extend(part),
    )
}

pub fn fit_extremes(spec: &TriangularArraySpec, stream: RandomStream) -> Result<ExtremeFitReport> {
    spec.validate()?;
    let mut rows = Vec::with_capacity(spec.ks.len());
    for &k in &spec.ks {
        let nu = spec.nu.nu(k)?;
        let maxima = simulate_maxima(k, nu, spec.statistic, spec.replications, stream);
        let row = fit_sample(k, nu, maxima, spec.hill_fraction).map_err(|e| Error::AtK { k, source: Box::new(e) })?;
        rows.push(row);
    }
    Ok(ExtremeFitReport {
        spec: spec.clone(),
        rows,
    })
}

fn fit_sample(k: u64, nu: DegreesOfFreedom, mut xs: Vec<f64>, hill_fraction: f64) -> Result<ExtremeFitRow> {
    xs.sort_by(f64::total_cmp);
    let gumbel = fit_gumbel(&xs)?;
    let frechet = fit_frechet(&xs)?;
    Ok(ExtremeFitRow {
        k,
        nu,
        replications: xs.len() as u64,
        median: quantile_sorted(&xs, 0.5),
        iqr: quantile_sorted(&xs, 0.75) - quantile_sorted(&xs, 0.25),
        quantile_99: quantile_sorted(&xs, 0.99),
        gumbel,
        frechet,
        ad_gumbel: anderson_darling(&xs, |x| gumbel.ln_neg_ln_cdf(x)),
        ad_frechet: anderson_darling(&xs, |x| frechet.ln_neg_ln_cdf(x)),
        hill_index: hill_index(&xs, hill_fraction),
    })
}

/// ln(1 − F) given t = ln(−ln F).
fn ln_survival(t: f64) -> f64 {
    if t < -20.0 {
        // 1 − exp(−u) = u − u²/2 + … with u = eᵗ tiny
        t - 0.5 * t.exp()
    } else {
        (-(-t.exp()).exp_m1()).ln()
    }
}

/// Anderson–Darling A² of a sorted sample against a continuous law given
/// through t(x) = ln(−ln F(x)).
///
/// Working with t keeps both ln F and ln(1 − F) finite far into either tail.
pub fn anderson_darling<G: Fn(f64) -> f64>(sorted: &[f64], ln_neg_ln_cdf: G) -> f64 {
    let n = sorted.len();
    let t: Vec<f64> = sorted.iter().map(|&x| ln_neg_ln_cdf(x)).collect();
    let mut sum = 0.0;
    for i in 0..n {
        let ln_f = -t[i].exp();
        let ln_s = ln_survival(t[n - 1 - i]);
        sum += (2 * i + 1) as f64 * (ln_f + ln_s);
    }
    (-(n as f64) - sum / n as f64).max(0.0)
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// ln Σ exp(vᵢ)
fn log_sum_exp<I: Iterator<Item = f64> + Clone>(vs: I) -> f64 {
    let m = vs.clone().fold(f64::NEG_INFINITY, f64::max);
    m + vs.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Gumbel maximum likelihood. The scale solves
/// β = x̄ − Σ xᵢ e^(−xᵢ/β) / Σ e^(−xᵢ/β).
pub fn fit_gumbel(xs: &[f64]) -> Result<GumbelFit> {
    if xs.len() < 2 {
        return Err(Error::invalid("sample", "need at least two points"));
    }
    let (mean, sd) = mean_sd(xs);
    if !(sd > 0.0) {
        return Err(Error::invalid("sample", "degenerate sample"));
    }
    let c: Vec<f64> = xs.iter().map(|x| (x - mean) / sd).collect();
    let score = |beta: f64| {
        let m = c.iter().map(|&v| -v / beta).fold(f64::NEG_INFINITY, f64::max);
        let (mut num, mut den) = (0.0, 0.0);
        for &v in &c {
            let w = (-v / beta - m).exp();
            num += v * w;
            den += w;
        }
        beta + num / den
    };
    let bracket = expand_increasing(score, 1e-3, 1.0, 64)?;
    let beta = brent(score, bracket, Stop::default())?.x;
    let location = -beta * (log_sum_exp(c.iter().map(|&v| -v / beta)) - (c.len() as f64).ln());
    Ok(GumbelFit {
        location: mean + sd * location,
        scale: sd * beta,
    })
}

/// Two-parameter Fréchet fit at a fixed location m (every x > m).
///
/// z = 1/(x − m) is Weibull(shape, 1/scale), so the shape solves the usual
/// Weibull score Σ zᵃ ln z / Σ zᵃ − 1/a − mean(ln z) = 0.
fn fit_frechet_at(xs: &[f64], location: f64) -> Result<FrechetFit> {
    let ln_z: Vec<f64> = xs.iter().map(|&x| -(x - location).ln()).collect();
    let centre = ln_z.iter().sum::<f64>() / ln_z.len() as f64;
    let l: Vec<f64> = ln_z.iter().map(|v| v - centre).collect();
    let score = |a: f64| {
        let m = l.iter().fold(f64::NEG_INFINITY, |acc, &v| acc.max(a * v));
        let (mut num, mut den) = (0.0, 0.0);
        for &v in &l {
            let w = (a * v - m).exp();
            num += v * w;
            den += w;
        }
        num / den - 1.0 / a
    };
    let bracket = expand_increasing(score, 1e-3, 1.0, 200)?;
    let shape = brent(score, bracket, Stop::default())?.x;
    // λᵃ = mean(zᵃ), scale = 1/λ
    let ln_lambda = (log_sum_exp(l.iter().map(|&v| shape * v)) - (l.len() as f64).ln()) / shape + centre;
    Ok(FrechetFit {
        location,
        scale: (-ln_lambda).exp(),
        shape,
    })
}

/// Three-parameter Fréchet maximum likelihood by profiling the location.
///
/// The location is searched as m = min(x) − w·eᵘ on a grid of u (w is the
/// interquartile range), then refined by golden-section search around the
/// best grid point.
pub fn fit_frechet(sorted: &[f64]) -> Result<FrechetFit> {
    if sorted.len() < 3 {
        return Err(Error::invalid("sample", "need at least three points"));
    }
    let lo = sorted[0];
    let width = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    if !(width > 0.0) {
        return Err(Error::invalid("sample", "degenerate sample"));
    }
    let profile = |u: f64| -> Option<(f64, FrechetFit)> {
        let fit = fit_frechet_at(sorted, lo - width * u.exp()).ok()?;
        let ll = fit.log_likelihood(sorted);
        ll.is_finite().then_some((ll, fit))
    };
    const U_MIN: f64 = -10.0;
    const U_MAX: f64 = 8.0;
    const STEP: f64 = 0.5;
    let mut best: Option<(f64, f64, FrechetFit)> = None;
    let mut u = U_MIN;
    while u <= U_MAX {
        if let Some((ll, fit)) = profile(u) {
            if best.as_ref().is_none_or(|b| ll > b.1) {
                best = Some((u, ll, fit));
            }
        }
        u += STEP;
    }
    let (u0, mut best_ll, mut best_fit) = best.ok_or(Error::NoConvergence { iterations: 0 })?;
    let neg = |u: f64| profile(u).map_or(f64::INFINITY, |(ll, _)| -ll);
    let (mut a, mut b) = (u0 - STEP, u0 + STEP);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (neg(c), neg(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = neg(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = neg(d);
        }
        if b - a < 1e-7 {
            break;
        }
    }
    if let Some((ll, fit)) = profile(0.5 * (a + b)) {
        if ll > best_ll {
            best_ll = ll;
            best_fit = fit;
        }
    }
    debug_assert!(best_ll.is_finite());
    Ok(best_fit)
}

/// Hill estimate of the tail index from the top `fraction` of a sorted sample.
pub fn hill_index(sorted: &[f64], fraction: f64) -> Option<f64> {
    let n = sorted.len();
    let m = ((fraction * n as f64).floor() as usize).max(2);
    if m >= n {
        return None;
    }
    let threshold = sorted[n - 1 - m];
    if !(threshold > 0.0) {
        return None;
    }
    let ln_t = threshold.ln();
    let h = sorted[n - m..].iter().map(|x| x.ln() - ln_t).sum::<f64>() / m as f64;
    (h > 0.0).then(|| 1.0 / h)
}
