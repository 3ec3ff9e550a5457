//! Expected sample sizes and the relative efficiency of the two procedures.
//!
//! With exchangeable populations the normalized expected total size is
//!
//! ```text
//! α = Σᵢ E Nᵢ / ((k + 1)(h/Δ)²) = E max{(n0 + 1)(Δ/h)², ⌈S²(h/Δ)²⌉(Δ/h)²}
//! ```
//!
//! so α is estimated from one population per replication. Replication r
//! always draws σ² and then the χ² for S² from `stream.replication(r)`, which
//! couples estimates across variants and across k (common random numbers)
//! whenever the first-stage size agrees.

use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::distributions::{chi2_sampler, DegreesOfFreedom, Probability};
use crate::error::{Error, Result};
use crate::hconst::{solve_h, HConstant, HEquationSpec, Variant};
use crate::parallel;
use crate::procedures::{second_stage_size, VariancePrior};
use crate::quadrature::{self, Tolerance};
use crate::stats::{Estimate, Moments};
use crate::stream::RandomStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub k: u64,
    pub variant: Variant,
    pub n0: u64,
    pub alpha: Estimate,
    pub h: HConstant,
}

/// 2^(2/ν), the limiting ratio of expected total sizes for a constant first stage.
pub fn theoretical_eta(nu: DegreesOfFreedom) -> f64 {
    (2.0 / nu.as_f64()).exp2()
}

fn check_alpha_inputs(h: &HConstant, n0: u64, delta: f64, prior: &VariancePrior, replications: u64) -> Result<()> {
    prior.validate()?;
    DegreesOfFreedom::from_first_stage(n0)?;
    if !(delta > 0.0) {
        return Err(Error::invalid("delta", format!("must be positive, got {delta}")));
    }
    if !(h.value > 0.0) {
        return Err(Error::invalid(
            "h",
            format!("alpha needs a positive h, got {}", h.value),
        ));
    }
    if replications == 0 {
        return Err(Error::invalid("replications", "must be at least 1"));
    }
    Ok(())
}

/// Monte Carlo α at a given h from `populations` exchangeable populations per
/// replication (1 uses the exchangeability shortcut).
pub fn alpha_at(
    h: &HConstant,
    n0: u64,
    delta: f64,
    prior: &VariancePrior,
    populations: usize,
    replications: u64,
    stream: RandomStream,
) -> Result<Estimate> {
    check_alpha_inputs(h, n0, delta, prior, replications)?;
    if populations == 0 {
        return Err(Error::invalid("populations", "must be at least 1"));
    }
    let prior_sampler = prior.sampler()?;
    let nu = n0 - 1;
    let chi2 = chi2_sampler(nu)?;
    let scale = (delta / h.value).powi(2);
    let moments = parallel::replicate(
        replications,
        Moments::new,
        |acc, r| {
            let mut rng = stream.replication(r).rng();
            let mut total = 0.0;
            for _ in 0..populations {
                let sigma2 = prior_sampler.sample(&mut rng);
                let s2 = sigma2 * chi2.sample(&mut rng) / nu as f64;
                let n = second_stage_size(s2, h.value, delta, n0).expect("inputs validated");
                total += n as f64 * scale;
            }
            acc.push(total / populations as f64);
        },
        |acc, part| acc.merge(&part),
    );
    Ok(moments.estimate())
}

/// Solves h for (k, ν, p, variant) and estimates α with first stage n0 = ν + 1.
#[allow(clippy::too_many_arguments)]
pub fn estimate_alpha(
    k: u64,
    nu: DegreesOfFreedom,
    p: f64,
    delta: f64,
    prior: &VariancePrior,
    variant: Variant,
    replications: u64,
    stream: RandomStream,
) -> Result<AlphaEstimate> {
    let h = solve_h(&HEquationSpec::new(k, nu, p, variant)?)?;
    let n0 = nu.get() + 1;
    let alpha = alpha_at(&h, n0, delta, prior, 1, replications, stream)?;
    Ok(AlphaEstimate {
        k,
        variant,
        n0,
        alpha,
        h,
    })
}

/// E max{L, σ²} by quadrature against the prior density.
///
/// Uses E max{L, σ²} = E σ² + ∫₀ᴸ (L − x) f(x) dx with x = eˢ.
pub fn limit_maxmix(l: f64, prior: &VariancePrior) -> Result<f64> {
    prior.validate()?;
    if !(l >= 0.0) || !l.is_finite() {
        return Err(Error::invalid("l", format!("must be nonnegative and finite, got {l}")));
    }
    let mean = prior.mean();
    let s_lo = match *prior {
        VariancePrior::Fixed { variance } => return Ok(l.max(variance)),
        // P(σ² < scale·e⁻¹²) = P(Gamma(shape) > e¹²): negligible
        VariancePrior::InverseGamma { scale, .. } => scale.ln() - 12.0,
        VariancePrior::LogNormal { mu, sigma } => mu - 40.0 * sigma,
    };
    if l == 0.0 {
        return Ok(mean);
    }
    let s_hi = l.ln();
    if s_hi <= s_lo {
        return Ok(mean);
    }
    let tol = Tolerance {
        abs: 1e-13 * l.max(1.0),
        ..Tolerance::default()
    };
    let gain = quadrature::integrate(
        |s: f64| {
            let x = s.exp();
            (l - x) * prior.pdf(x).unwrap_or(0.0) * x
        },
        s_lo,
        s_hi,
        tol,
    )?;
    Ok(mean + gain.value)
}

/// Monte Carlo cross-check of [`limit_maxmix`].
pub fn limit_maxmix_mc(l: f64, prior: &VariancePrior, replications: u64, stream: RandomStream) -> Result<Estimate> {
    if replications == 0 {
        return Err(Error::invalid("replications", "must be at least 1"));
    }
    let sampler = prior.sampler()?;
    let moments = parallel::replicate(
        replications,
        Moments::new,
        |acc, r| {
            let mut rng = stream.replication(r).rng();
            acc.push(l.max(sampler.sample(&mut rng)));
        },
        |acc, part| acc.merge(&part),
    );
    Ok(moments.estimate())
}

/// First-stage size as a function of k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Schedule {
    Constant {
        n0: u64,
    },
    /// ⌈ln k⌉ + offset
    Log {
        offset: u64,
    },
    /// ⌈k^exponent⌉ + offset
    Power {
        exponent: f64,
        offset: u64,
    },
}

impl Schedule {
    pub fn n0(&self, k: u64) -> u64 {
        let kf = k as f64;
        match *self {
            Schedule::Constant { n0 } => n0,
            Schedule::Log { offset } => kf.ln().ceil().max(0.0) as u64 + offset,
            Schedule::Power { exponent, offset } => kf.powf(exponent).ceil() as u64 + offset,
        }
    }

    pub fn nu(&self, k: u64) -> Result<DegreesOfFreedom> {
        DegreesOfFreedom::from_first_stage(self.n0(k))
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Schedule::Constant { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub schedule: Schedule,
    pub ks: Vec<u64>,
}

impl ScheduleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty() {
            return Err(Error::invalid("ks", "need at least one k"));
        }
        if self.ks.contains(&0) {
            return Err(Error::invalid("ks", "k must be positive"));
        }
        if self.ks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("ks", "must be strictly ascending"));
        }
        if let Schedule::Power { exponent, .. } = self.schedule {
            if !(exponent > 0.0 && exponent.is_finite()) {
                return Err(Error::invalid("exponent", "must be positive"));
            }
        }
        let sizes: Vec<u64> = self.ks.iter().map(|&k| self.schedule.n0(k)).collect();
        if let Some(&bad) = sizes.iter().find(|&&n| n < 2) {
            return Err(Error::invalid("schedule", format!("first-stage size {bad} is below 2")));
        }
        if sizes.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid(
                "schedule",
                "first-stage sizes must be nondecreasing in k",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub k: u64,
    pub nu: DegreesOfFreedom,
    pub n0: u64,
    pub h_dd: HConstant,
    pub h_rinott: HConstant,
    pub alpha_dd: Estimate,
    pub alpha_rinott: Estimate,
}

impl EfficiencyRow {
    /// h_Rinott / h_DD.
    pub fn h_ratio(&self) -> f64 {
        if self.k == 1 {
            1.0
        } else {
            self.h_rinott.value / self.h_dd.value
        }
    }

    pub fn h_ratio_squared(&self) -> f64 {
        self.h_ratio().powi(2)
    }

    pub fn alpha_ratio(&self) -> f64 {
        self.alpha_rinott.value / self.alpha_dd.value
    }

    /// Σ E N_Rinott / Σ E N_DD = (h_R/h_DD)² · α_R/α_DD.
    pub fn total_ratio(&self) -> f64 {
        self.h_ratio_squared() * self.alpha_ratio()
    }

    /// Empirical n0/(h/Δ)² for the given variant.
    pub fn l_hat(&self, variant: Variant, delta: f64) -> f64 {
        let h = match variant {
            Variant::DudewiczDalal => self.h_dd.value,
            Variant::Rinott => self.h_rinott.value,
        };
        self.n0 as f64 * (delta / h).powi(2)
    }

    /// Ceiling slack (Δ/h)² for the given variant.
    pub fn ceiling_slack(&self, variant: Variant, delta: f64) -> f64 {
        let h = match variant {
            Variant::DudewiczDalal => self.h_dd.value,
            Variant::Rinott => self.h_rinott.value,
        };
        (delta / h).powi(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub schedule: ScheduleSpec,
    pub p: Probability,
    pub delta: f64,
    pub prior: VariancePrior,
    pub rows: Vec<EfficiencyRow>,
    /// 2^(2/ν) for a constant schedule; undefined when n0 grows with k.
    pub theoretical_eta: Option<f64>,
}

impl EfficiencyReport {
    /// E max{L̂, σ²} for the row's empirical L̂.
    pub fn maxmix(&self, row: &EfficiencyRow, variant: Variant) -> Result<f64> {
        limit_maxmix(row.l_hat(variant, self.delta), &self.prior)
    }
}

pub fn efficiency_curve(
    schedule: &ScheduleSpec,
    p: f64,
    delta: f64,
    prior: &VariancePrior,
    replications: u64,
    stream: RandomStream,
) -> Result<EfficiencyReport> {
    schedule.validate()?;
    prior.validate()?;
    let p = Probability::new(p)?;
    let mut rows = Vec::with_capacity(schedule.ks.len());
    for &k in &schedule.ks {
        let row = || -> Result<EfficiencyRow> {
            let nu = schedule.schedule.nu(k)?;
            let n0 = nu.get() + 1;
            let h_dd = solve_h(&HEquationSpec::new(k, nu, p.get(), Variant::DudewiczDalal)?)?;
            let h_rinott = solve_h(&HEquationSpec::new(k, nu, p.get(), Variant::Rinott)?)?;
            let alpha_dd = alpha_at(&h_dd, n0, delta, prior, 1, replications, stream)?;
            let alpha_rinott = alpha_at(&h_rinott, n0, delta, prior, 1, replications, stream)?;
            Ok(EfficiencyRow {
                k,
                nu,
                n0,
                h_dd,
                h_rinott,
                alpha_dd,
                alpha_rinott,
            })
        };
        rows.push(row().map_err(|e| Error::AtK { k, source: Box::new(e) })?);
    }
    let theoretical_eta = match schedule.schedule {
        Schedule::Constant { n0 } => Some(theoretical_eta(DegreesOfFreedom::from_first_stage(n0)?)),
        _ => None,
    };
    Ok(EfficiencyReport {
        schedule: schedule.clone(),
        p,
        delta,
        prior: *prior,
        rows,
        theoretical_eta,
    })
}
