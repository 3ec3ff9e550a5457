//! Simulation of the two-stage selection procedures.
//!
//! Populations are Gaussian given their variances; the variances themselves
//! are drawn i.i.d. from a [`VariancePrior`]. Stage 1 takes `n0` observations
//! per population and estimates each variance; stage 2 tops every population
//! up to `max{n0 + 1, ⌈(h/Δ)² S²⌉}` observations. Dudewicz–Dalal then ranks
//! two-block weighted means, Rinott ranks plain means.
//!
//! Two sampling paths are available. [`SamplingMode::Direct`] draws every
//! observation. [`SamplingMode::Fast`] draws the sufficient statistics
//! instead: the stage means as Gaussians and S² as σ²·χ²_{n0-1}/(n0-1).
//! Both paths produce identically distributed outcomes.

use rand::Rng;
use rand_distr::{Distribution, Gamma, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::distributions::{chi2_sampler, DegreesOfFreedom, Probability};
use crate::error::{Error, Result};
use crate::hconst::{self, HConstant, HEquationSpec, Variant};
use crate::parallel;
use crate::stats::{Estimate, Moments};
use crate::stream::RandomStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcedureParams {
    pub p: Probability,
    /// Indifference level Δ.
    pub delta: f64,
    /// Number of competitors; k + 1 populations.
    pub k: u64,
    /// First-stage sample size N₀.
    pub n0: u64,
    pub variant: Variant,
}

impl ProcedureParams {
    pub fn new(p: f64, delta: f64, k: u64, n0: u64, variant: Variant) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::invalid("delta", format!("must be positive, got {delta}")));
        }
        if k == 0 {
            return Err(Error::invalid("k", "need at least one competitor"));
        }
        DegreesOfFreedom::from_first_stage(n0)?;
        Ok(ProcedureParams {
            p: Probability::new(p)?,
            delta,
            k,
            n0,
            variant,
        })
    }

    pub fn nu(&self) -> DegreesOfFreedom {
        DegreesOfFreedom::from_first_stage(self.n0).expect("validated at construction")
    }

    pub fn populations(&self) -> usize {
        self.k as usize + 1
    }

    pub fn h_spec(&self) -> HEquationSpec {
        HEquationSpec {
            k: self.k,
            nu: self.nu(),
            p: self.p,
            variant: self.variant,
        }
    }

    pub fn solve_h(&self) -> Result<HConstant> {
        hconst::solve_h(&self.h_spec())
    }
}

/// Distribution of the unobserved population variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VariancePrior {
    Fixed {
        variance: f64,
    },
    /// σ² = scale / Gamma(shape, 1); shape > 2 keeps E[(σ²)²] finite.
    InverseGamma {
        shape: f64,
        scale: f64,
    },
    /// ln σ² ~ N(mu, sigma²).
    LogNormal {
        mu: f64,
        sigma: f64,
    },
}

impl VariancePrior {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
            }
        };
        match *self {
            VariancePrior::Fixed { variance } => positive("variance", variance),
            VariancePrior::InverseGamma { shape, scale } => {
                positive("scale", scale)?;
                if shape > 2.0 && shape.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid(
                        "shape",
                        format!("inverse-gamma shape must exceed 2 for a finite second moment, got {shape}"),
                    ))
                }
            }
            VariancePrior::LogNormal { mu, sigma } => {
                if !mu.is_finite() {
                    return Err(Error::invalid("mu", "must be finite"));
                }
                positive("sigma", sigma)
            }
        }
    }

    /// E σ².
    pub fn mean(&self) -> f64 {
        match *self {
            VariancePrior::Fixed { variance } => variance,
            VariancePrior::InverseGamma { shape, scale } => scale / (shape - 1.0),
            VariancePrior::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
        }
    }

    /// E (σ²)².
    pub fn second_moment(&self) -> f64 {
        match *self {
            VariancePrior::Fixed { variance } => variance * variance,
            VariancePrior::InverseGamma { shape, scale } => scale * scale / ((shape - 1.0) * (shape - 2.0)),
            VariancePrior::LogNormal { mu, sigma } => (2.0 * mu + 2.0 * sigma * sigma).exp(),
        }
    }

    /// Density of σ²; `None` for the degenerate fixed prior.
    pub fn pdf(&self, x: f64) -> Option<f64> {
        if x <= 0.0 {
            return match self {
                VariancePrior::Fixed { .. } => None,
                _ => Some(0.0),
            };
        }
        match *self {
            VariancePrior::Fixed { .. } => None,
            VariancePrior::InverseGamma { shape, scale } => {
                Some((shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x).exp())
            }
            VariancePrior::LogNormal { mu, sigma } => {
                let z = (x.ln() - mu) / sigma;
                Some((-0.5 * z * z).exp() / (x * sigma * (2.0 * std::f64::consts::PI).sqrt()))
            }
        }
    }

    pub fn sampler(&self) -> Result<PriorSampler> {
        self.validate()?;
        Ok(match *self {
            VariancePrior::Fixed { variance } => PriorSampler::Fixed(variance),
            VariancePrior::InverseGamma { shape, scale } => {
                PriorSampler::InverseGamma(scale, Gamma::new(shape, 1.0).expect("validated"))
            }
            VariancePrior::LogNormal { mu, sigma } => {
                PriorSampler::LogNormal(LogNormal::new(mu, sigma).expect("validated"))
            }
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub enum PriorSampler {
    Fixed(f64),
    InverseGamma(f64, Gamma<f64>),
    LogNormal(LogNormal<f64>),
}

impl Distribution<f64> for PriorSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            PriorSampler::Fixed(v) => *v,
            PriorSampler::InverseGamma(scale, gamma) => scale / gamma.sample(rng),
            PriorSampler::LogNormal(ln) => ln.sample(rng),
        }
    }
}

/// `count` i.i.d. variances from the prior.
pub fn draw_variances<R: Rng + ?Sized>(prior: &VariancePrior, count: usize, rng: &mut R) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::invalid("count", "must be at least 1"));
    }
    let sampler = prior.sampler()?;
    Ok((0..count).map(|_| sampler.sample(rng)).collect())
}

/// Means and variances of the k + 1 populations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub best_index: usize,
}

impl ProblemInstance {
    /// Validates membership in Θ(Δ): every pairwise mean gap exceeds Δ.
    pub fn new(means: Vec<f64>, variances: Vec<f64>, delta: f64) -> Result<Self> {
        if means.len() != variances.len() {
            return Err(Error::DimensionMismatch {
                expected: means.len(),
                actual: variances.len(),
            });
        }
        if means.len() < 2 {
            return Err(Error::invalid("means", "need at least two populations"));
        }
        if let Some(&v) = variances.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(
                "variances",
                format!("all variances must be positive, got {v}"),
            ));
        }
        let mut sorted = means.clone();
        sorted.sort_by(f64::total_cmp);
        let min_gap = sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        if !(min_gap > delta) {
            return Err(Error::OutsideIndifferenceZone { gap: min_gap, delta });
        }
        let best_index = argmax(&means);
        Ok(ProblemInstance {
            means,
            variances,
            best_index,
        })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Same instance with every mean shifted by `c`.
    pub fn shifted(&self, c: f64) -> ProblemInstance {
        ProblemInstance {
            means: self.means.iter().map(|m| m + c).collect(),
            ..self.clone()
        }
    }
}

/// Means 0, −gap, −2·gap, …; population 0 is best.
pub fn make_slippage_instance(params: &ProcedureParams, gap: f64, variances: Vec<f64>) -> Result<ProblemInstance> {
    if !(gap > params.delta) {
        return Err(Error::OutsideIndifferenceZone {
            gap,
            delta: params.delta,
        });
    }
    if variances.len() != params.populations() {
        return Err(Error::DimensionMismatch {
            expected: params.populations(),
            actual: variances.len(),
        });
    }
    let means = (0..variances.len()).map(|i| -(i as f64) * gap).collect();
    ProblemInstance::new(means, variances, params.delta)
}

/// Lowest index among the maxima.
fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// Draw every observation.
    Direct,
    /// Draw stage means and S² from their exact sampling distributions.
    #[default]
    Fast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Summary {
    pub means: Vec<f64>,
    /// Unbiased sample variances S².
    pub variances: Vec<f64>,
    pub n0: u64,
}

pub fn run_stage1<R: Rng + ?Sized>(
    instance: &ProblemInstance,
    n0: u64,
    rng: &mut R,
    mode: SamplingMode,
) -> Result<Stage1Summary> {
    let nu = DegreesOfFreedom::from_first_stage(n0)?;
    let mut means = Vec::with_capacity(instance.len());
    let mut variances = Vec::with_capacity(instance.len());
    match mode {
        SamplingMode::Direct => {
            let mut buf = vec![0.0; n0 as usize];
            for (&theta, &var) in instance.means.iter().zip(&instance.variances) {
                let sd = var.sqrt();
                for x in buf.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *x = theta + sd * z;
                }
                let mean = buf.iter().sum::<f64>() / n0 as f64;
                let ss: f64 = buf.iter().map(|x| (x - mean) * (x - mean)).sum();
                means.push(mean);
                variances.push(ss / nu.as_f64());
            }
        }
        SamplingMode::Fast => {
            let chi2 = chi2_sampler(nu.get())?;
            let n0f = n0 as f64;
            for (&theta, &var) in instance.means.iter().zip(&instance.variances) {
                let z: f64 = StandardNormal.sample(rng);
                means.push(theta + (var / n0f).sqrt() * z);
                variances.push(var * chi2.sample(rng) / nu.as_f64());
            }
        }
    }
    Ok(Stage1Summary { means, variances, n0 })
}

/// N = max{n0 + 1, ⌈(h/Δ)² S²⌉}.
///
/// A zero S² (impossible under the model) yields n0 + 1.
pub fn second_stage_size(s2: f64, h: f64, delta: f64, n0: u64) -> Result<u64> {
    if !(s2 >= 0.0) || !s2.is_finite() {
        return Err(Error::invalid(
            "s2",
            format!("sample variance must be nonnegative, got {s2}"),
        ));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid("delta", format!("must be positive, got {delta}")));
    }
    let ratio = h / delta;
    let target = (ratio * ratio * s2).ceil();
    if !(target < 9.0e15) {
        return Err(Error::invalid(
            "h",
            format!("sample size {target} is not representable"),
        ));
    }
    Ok((n0 + 1).max(target as u64))
}

/// Dudewicz–Dalal weights: `first` on each of the n0 stage-1 observations,
/// `second` on each of the N − n0 stage-2 observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoBlockWeights {
    pub n0: u64,
    pub n: u64,
    pub first: f64,
    pub second: f64,
}

impl TwoBlockWeights {
    pub fn sum(&self) -> f64 {
        self.n0 as f64 * self.first + (self.n - self.n0) as f64 * self.second
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.n0 as f64 * self.first * self.first + (self.n - self.n0) as f64 * self.second * self.second
    }

    /// Expanded weight vector a₁..a_N.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.first; self.n0 as usize];
        v.resize(self.n as usize, self.second);
        v
    }

    /// Weighted mean given the two stage means.
    pub fn combine(&self, stage1_mean: f64, stage2_mean: f64) -> f64 {
        self.n0 as f64 * self.first * stage1_mean + (self.n - self.n0) as f64 * self.second * stage2_mean
    }
}

/// Solves Σa = 1, S²·Σa² = (Δ/h)² with weights constant within each stage.
///
/// Eliminating the stage-2 weight leaves a quadratic with roots
/// `first = (1 ± sqrt((N − n0)(N z − 1) / n0)) / N`, z = (Δ/h)²/S². Both roots
/// sit at the same distance from uniform weights; the `+` root (stage-1
/// weight at least 1/N) is the classical choice and is returned.
pub fn dd_weights(n0: u64, n: u64, s2: f64, h: f64, delta: f64) -> Result<TwoBlockWeights> {
    if n0 < 2 {
        return Err(Error::invalid("n0", "first-stage size must be at least 2"));
    }
    if n <= n0 {
        return Err(Error::invalid("n", format!("total size {n} must exceed n0 = {n0}")));
    }
    if !(s2 > 0.0 && s2.is_finite()) {
        return Err(Error::invalid(
            "s2",
            format!("sample variance must be positive, got {s2}"),
        ));
    }
    if !(delta > 0.0) || h == 0.0 || !h.is_finite() {
        return Err(Error::invalid("h", "need finite nonzero h and positive delta"));
    }
    let ratio = delta / h;
    let target = ratio * ratio / s2;
    let nf = n as f64;
    let m = (n - n0) as f64;
    let n0f = n0 as f64;
    let mut excess = nf * target - 1.0;
    if excess < 0.0 {
        if excess > -1e-12 {
            excess = 0.0;
        } else {
            return Err(Error::InfeasibleWeights {
                target,
                floor: 1.0 / nf,
            });
        }
    }
    let first = (1.0 + (m * excess / n0f).sqrt()) / nf;
    let second = (1.0 - n0f * first) / m;
    Ok(TwoBlockWeights { n0, n, first, second })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcedureOutcome {
    pub selected_index: usize,
    pub sample_sizes: Vec<u64>,
    pub total_samples: u64,
    pub correct: bool,
    /// The ranked statistic per population (weighted or plain mean).
    pub statistics: Vec<f64>,
}

fn stage_mean<R: Rng + ?Sized>(theta: f64, variance: f64, count: u64, rng: &mut R, mode: SamplingMode) -> f64 {
    match mode {
        SamplingMode::Direct => {
            let sd = variance.sqrt();
            let sum: f64 = (0..count)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    theta + sd * z
                })
                .sum();
            sum / count as f64
        }
        SamplingMode::Fast => {
            let z: f64 = StandardNormal.sample(rng);
            theta + (variance / count as f64).sqrt() * z
        }
    }
}

/// Runs one replication of the procedure named by `params.variant`.
pub fn run_procedure<R: Rng + ?Sized>(
    instance: &ProblemInstance,
    params: &ProcedureParams,
    h: &HConstant,
    rng: &mut R,
    mode: SamplingMode,
) -> Result<ProcedureOutcome> {
    if instance.len() != params.populations() {
        return Err(Error::DimensionMismatch {
            expected: params.populations(),
            actual: instance.len(),
        });
    }
    if !(h.value > 0.0) {
        return Err(Error::invalid(
            "h",
            format!("procedures need a positive h, got {}", h.value),
        ));
    }
    let stage1 = run_stage1(instance, params.n0, rng, mode)?;
    let mut sample_sizes = Vec::with_capacity(instance.len());
    let mut statistics = Vec::with_capacity(instance.len());
    for i in 0..instance.len() {
        let s2 = stage1.variances[i];
        let n = second_stage_size(s2, h.value, params.delta, params.n0)?;
        let extra = n - params.n0;
        let stage2 = stage_mean(instance.means[i], instance.variances[i], extra, rng, mode);
        let stat = match params.variant {
            Variant::DudewiczDalal => {
                dd_weights(params.n0, n, s2, h.value, params.delta)?.combine(stage1.means[i], stage2)
            }
            Variant::Rinott => (params.n0 as f64 * stage1.means[i] + extra as f64 * stage2) / n as f64,
        };
        sample_sizes.push(n);
        statistics.push(stat);
    }
    let selected_index = argmax(&statistics);
    Ok(ProcedureOutcome {
        selected_index,
        total_samples: sample_sizes.iter().sum(),
        sample_sizes,
        correct: selected_index == instance.best_index,
        statistics,
    })
}

/// Slippage configuration with variances redrawn from `prior` every replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub gap: f64,
    pub prior: VariancePrior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcsEstimate {
    pub pcs: Estimate,
    pub mean_total_samples: Estimate,
    pub h: HConstant,
}

/// Estimates the probability of correct selection, solving h first.
pub fn estimate_pcs(
    params: &ProcedureParams,
    spec: &InstanceSpec,
    replications: u64,
    stream: RandomStream,
) -> Result<PcsEstimate> {
    let h = params.solve_h()?;
    estimate_pcs_with_h(params, spec, &h, replications, stream, SamplingMode::Fast)
}

/// Replication r uses `stream.replication(r)`; the result is independent of
/// thread count and scheduling.
pub fn estimate_pcs_with_h(
    params: &ProcedureParams,
    spec: &InstanceSpec,
    h: &HConstant,
    replications: u64,
    stream: RandomStream,
    mode: SamplingMode,
) -> Result<PcsEstimate> {
    if replications == 0 {
        return Err(Error::invalid("replications", "must be at least 1"));
    }
    let prior = spec.prior.sampler()?;
    // Validate the configuration once so per-replication failures cannot occur.
    make_slippage_instance(params, spec.gap, vec![spec.prior.mean(); params.populations()])?;

    struct Acc {
        hits: u64,
        totals: Moments,
        error: Option<Error>,
    }
    let acc = parallel::replicate(
        replications,
        || Acc {
            hits: 0,
            totals: Moments::new(),
            error: None,
        },
        |acc, r| {
            if acc.error.is_some() {
                return;
            }
            let mut rng = stream.replication(r).rng();
            let variances = (0..params.populations()).map(|_| prior.sample(&mut rng)).collect();
            let outcome = make_slippage_instance(params, spec.gap, variances)
                .and_then(|inst| run_procedure(&inst, params, h, &mut rng, mode));
            match outcome {
                Ok(o) => {
                    acc.hits += o.correct as u64;
                    acc.totals.push(o.total_samples as f64);
                }
                Err(e) => acc.error = Some(e),
            }
        },
        |total, part| {
            if total.error.is_none() {
                total.error = part.error;
            }
            total.hits += part.hits;
            total.totals.merge(&part.totals);
        },
    );
    if let Some(e) = acc.error {
        return Err(e);
    }
    Ok(PcsEstimate {
        pcs: Estimate::proportion(acc.hits, replications),
        mean_total_samples: acc.totals.estimate(),
        h: *h,
    })
}
