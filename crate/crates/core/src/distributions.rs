//! Student-t, normal and chi-square primitives.
//!
//! The t distribution function is evaluated through the regularized
//! incomplete beta function, `P(|T| > t) = I_x(ν/2, 1/2)` with
//! `x = ν / (ν + t²)`, using a Lentz continued fraction. Tails are returned
//! directly rather than as `1 - cdf`, so upper-tail probabilities keep full
//! relative precision; the h-constant solvers depend on this for large k.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Normal, StudentT as TSampler};
use serde::{Deserialize, Serialize};
use statrs::function::{erf, gamma::ln_gamma};

use crate::error::{Error, Result};
use crate::root::{self, Stop};

/// Integer degrees of freedom, at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct DegreesOfFreedom(u64);

impl DegreesOfFreedom {
    pub fn new(value: u64) -> Result<Self> {
        if value == 0 {
            return Err(Error::InvalidDegreesOfFreedom(value));
        }
        Ok(DegreesOfFreedom(value))
    }

    /// Degrees of freedom of a first stage with `n0` observations.
    pub fn from_first_stage(n0: u64) -> Result<Self> {
        if n0 < 2 {
            return Err(Error::invalid(
                "n0",
                format!("first-stage size must be at least 2, got {n0}"),
            ));
        }
        Ok(DegreesOfFreedom(n0 - 1))
    }

    pub fn get(self) -> u64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }
}

impl TryFrom<u64> for DegreesOfFreedom {
    type Error = Error;
    fn try_from(value: u64) -> Result<Self> {
        DegreesOfFreedom::new(value)
    }
}

impl From<DegreesOfFreedom> for u64 {
    fn from(nu: DegreesOfFreedom) -> u64 {
        nu.0
    }
}

impl std::fmt::Display for DegreesOfFreedom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// A confidence level strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Probability(value))
        } else {
            Err(Error::InvalidProbability(value))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 20_000;

/// Continued fraction part of I_x(a, b) (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let guard = |v: f64| if v.abs() < CF_TINY { CF_TINY } else { v };
    let mut c = 1.0;
    let mut d = 1.0 / guard(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b), with `y = 1 - x` supplied by the
/// caller so that neither argument loses precision to cancellation.
pub fn beta_regularized(a: f64, b: f64, x: f64, y: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    let ln_front = a * x.ln() + b * y.ln() - ln_beta;
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, y) / b
    }
}

/// Student-t distribution with integer degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentT {
    nu: f64,
    ln_pdf_norm: f64,
    ln_beta: f64,
}

impl StudentT {
    pub fn new(nu: DegreesOfFreedom) -> Self {
        let nu = nu.as_f64();
        let half = 0.5 * nu;
        let ln_beta = ln_gamma(half) + ln_gamma(0.5) - ln_gamma(half + 0.5);
        StudentT {
            nu,
            ln_pdf_norm: -ln_beta - 0.5 * nu.ln(),
            ln_beta,
        }
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.ln_pdf_norm - 0.5 * (self.nu + 1.0) * (x * x / self.nu).ln_1p()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// P(|T| > |x|) = I_{ν/(ν+x²)}(ν/2, 1/2).
    fn two_sided_tail(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 1.0;
        }
        if x.is_infinite() {
            return 0.0;
        }
        let x2 = x * x;
        let (w, w_c) = if x2 > self.nu {
            let r = self.nu / x2;
            (r / (1.0 + r), 1.0 / (1.0 + r))
        } else {
            let r = x2 / self.nu;
            (1.0 / (1.0 + r), r / (1.0 + r))
        };
        let a = 0.5 * self.nu;
        let b = 0.5;
        let ln_front_direct = |w: f64, w_c: f64| a * w.ln() + b * w_c.ln() - self.ln_beta;
        if w < (a + 1.0) / (a + 1.5) {
            ln_front_direct(w, w_c).exp() * beta_cf(a, b, w) / a
        } else {
            1.0 - ln_front_direct(w, w_c).exp() * beta_cf(b, a, w_c) / b
        }
    }

    /// Upper tail P(T > x).
    pub fn sf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        let half = 0.5 * self.two_sided_tail(x);
        if x >= 0.0 {
            half
        } else {
            1.0 - half
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.sf(-x)
    }

    /// ln P(T <= x), accurate in both tails.
    pub fn ln_cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            (0.5 * self.two_sided_tail(x)).ln()
        } else {
            (-0.5 * self.two_sided_tail(x)).ln_1p()
        }
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidProbability(q));
        }
        if q == 0.5 {
            return Ok(0.0);
        }
        if q > 0.5 {
            self.upper_quantile(1.0 - q)
        } else {
            self.upper_quantile(q).map(|x| -x)
        }
    }

    /// The x >= 0 with P(T > x) = `tail`, for `tail` in (0, 1/2].
    ///
    /// Seeded by the normal quantile, which never exceeds the t quantile in
    /// the upper tail, then refined by Brent's method on ln P(T > x).
    pub fn upper_quantile(&self, tail: f64) -> Result<f64> {
        if !(tail > 0.0 && tail <= 0.5) {
            return Err(Error::InvalidProbability(tail));
        }
        if tail == 0.5 {
            return Ok(0.0);
        }
        let seed = normal_upper_quantile(tail).max(1.0);
        let target = tail.ln();
        let f = |x: f64| target - (0.5 * self.two_sided_tail(x)).ln();
        let bracket = root::expand_increasing(f, 0.0, seed, 200)?;
        let stop = Stop {
            f_tol: 0.0,
            x_tol: 4.0 * f64::EPSILON,
            max_iter: 300,
        };
        Ok(root::brent(f, bracket, stop)?.x)
    }
}

pub fn t_pdf(x: f64, nu: DegreesOfFreedom) -> f64 {
    StudentT::new(nu).pdf(x)
}

pub fn t_cdf(x: f64, nu: DegreesOfFreedom) -> f64 {
    StudentT::new(nu).cdf(x)
}

pub fn t_quantile(q: f64, nu: DegreesOfFreedom) -> Result<f64> {
    StudentT::new(nu).quantile(q)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// The z with P(Z > z) = `tail`.
pub fn normal_upper_quantile(tail: f64) -> f64 {
    std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * tail)
}

pub fn normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidProbability(q));
    }
    Ok(-normal_upper_quantile(q))
}

/// Reusable sampler for t variates; construct once per hot loop.
pub fn t_sampler(nu: DegreesOfFreedom) -> TSampler<f64> {
    TSampler::new(nu.as_f64()).expect("degrees of freedom are positive")
}

pub fn chi2_sampler(df: u64) -> Result<ChiSquared<f64>> {
    if df == 0 {
        return Err(Error::invalid("df", "chi-square degrees of freedom must be positive"));
    }
    Ok(ChiSquared::new(df as f64).expect("positive degrees of freedom"))
}

pub fn sample_t<R: Rng + ?Sized>(nu: DegreesOfFreedom, rng: &mut R) -> f64 {
    t_sampler(nu).sample(rng)
}

pub fn sample_normal<R: Rng + ?Sized>(mean: f64, variance: f64, rng: &mut R) -> Result<f64> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::invalid(
            "variance",
            format!("must be positive and finite, got {variance}"),
        ));
    }
    Ok(Normal::new(mean, variance.sqrt()).expect("validated").sample(rng))
}

pub fn sample_chi2<R: Rng + ?Sized>(df: u64, rng: &mut R) -> Result<f64> {
    Ok(chi2_sampler(df)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use crate::stream::RandomStream;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn dof(v: u64) -> DegreesOfFreedom {
        DegreesOfFreedom::new(v).unwrap()
    }

    #[test]
    fn pdf_closed_forms() {
        assert_abs_diff_eq!(t_pdf(0.0, dof(1)), 1.0 / PI, epsilon = 1e-15);
        // g_2(x) = (2 + x²)^(-3/2)
        assert_abs_diff_eq!(t_pdf(1.0, dof(2)), 1.0 / (3.0 * 3f64.sqrt()), epsilon = 1e-15);
        assert_abs_diff_eq!(t_pdf(1.0, dof(2)), 0.1924500897298753, epsilon = 1e-15);
        for nu in [1, 3, 17, 250] {
            assert_eq!(t_pdf(1.7, dof(nu)), t_pdf(-1.7, dof(nu)));
        }
    }

    #[test]
    fn cdf_closed_forms() {
        for nu in [1, 2, 5, 100, 5000] {
            assert_eq!(t_cdf(0.0, dof(nu)), 0.5);
        }
        assert_abs_diff_eq!(t_cdf(1.0, dof(1)), 0.75, epsilon = 1e-15);
        let r2 = 2f64.sqrt();
        assert_abs_diff_eq!(t_cdf(r2, dof(2)), 0.5 + r2 / (2.0 * 4f64.sqrt()), epsilon = 1e-15);
        assert_abs_diff_eq!(t_cdf(r2, dof(2)), 0.8535533905932737, epsilon = 1e-14);
        // Cauchy and ν = 2 closed forms across both tails
        for &x in &[-1e8_f64, -350.0, -3.0, -0.2, 0.01, 0.7, 12.0, 4e5] {
            let cauchy = 0.5 + x.atan() / PI;
            assert_abs_diff_eq!(t_cdf(x, dof(1)), cauchy, epsilon = 1e-14);
            let two = 0.5 + x / (2.0 * (2.0 + x * x).sqrt());
            assert_abs_diff_eq!(t_cdf(x, dof(2)), two, epsilon = 1e-14);
        }
    }

    #[test]
    fn upper_tail_keeps_relative_precision() {
        // ν = 2: P(T > x) = 1/2 - x / (2 sqrt(2 + x²)) = 1 / (sqrt(2+x²) (sqrt(2+x²) + x))
        let t = StudentT::new(dof(2));
        for &x in &[10.0, 1e3, 1e6] {
            let s = (2.0f64 + x * x).sqrt();
            let exact = 1.0 / (s * (s + x));
            assert!(((t.sf(x) - exact) / exact).abs() < 1e-12, "x = {x}");
            assert!((t.ln_cdf(-x) - exact.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn cdf_matches_independent_implementation() {
        for nu in [1u64, 2, 3, 4, 9, 30, 120, 1000] {
            let reference = statrs::distribution::StudentsT::new(0.0, 1.0, nu as f64).unwrap();
            let t = StudentT::new(dof(nu));
            for i in -60..=60 {
                let x = i as f64 * 0.25;
                let expected = statrs::distribution::ContinuousCDF::cdf(&reference, x);
                assert_abs_diff_eq!(t.cdf(x), expected, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn cdf_matches_integrated_density() {
        // G(x) = 1/2 + ∫_0^x g, integrated independently of the beta route.
        for nu in [1u64, 3, 7, 40] {
            let t = StudentT::new(dof(nu));
            for &x in &[0.3, 1.0, 2.5, 6.0] {
                let area = crate::quadrature::integrate(
                    |s| t.pdf(s),
                    0.0,
                    x,
                    crate::quadrature::Tolerance {
                        abs: 1e-15,
                        ..Default::default()
                    },
                )
                .unwrap();
                assert_abs_diff_eq!(t.cdf(x), 0.5 + area.value, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn pdf_integrates_to_one() {
        for nu in [1u64, 2, 4, 30] {
            let t = StudentT::new(dof(nu));
            let big = t.quantile(1.0 - 1e-12).unwrap();
            // Substitute s = atan(x) so the heavy-tailed range stays resolvable.
            let area = crate::quadrature::integrate(
                |s: f64| {
                    let x = s.tan();
                    t.pdf(x) * (1.0 + x * x)
                },
                -big.atan(),
                big.atan(),
                crate::quadrature::Tolerance {
                    abs: 1e-13,
                    ..Default::default()
                },
            )
            .unwrap();
            assert_abs_diff_eq!(area.value, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn quantile_examples() {
        for nu in [1, 4, 50] {
            assert_eq!(t_quantile(0.5, dof(nu)).unwrap(), 0.0);
        }
        assert_abs_diff_eq!(t_quantile(0.75, dof(1)).unwrap(), 1.0, epsilon = 1e-13);
        let v = t_quantile(0.9, dof(4)).unwrap();
        assert!((t_cdf(v, dof(4)) - 0.9).abs() < 1e-10);
        // Cauchy far tail: x = 1 / tan(π·tail)
        let tail: f64 = 1.0 - (1.0 - 1e-12);
        let x = StudentT::new(dof(1)).upper_quantile(tail).unwrap();
        let exact = 1.0 / (PI * tail).tan();
        assert!(((x - exact) / exact).abs() < 1e-12);
        assert!(t_quantile(0.0, dof(3)).is_err());
        assert!(t_quantile(1.0, dof(3)).is_err());
        assert!(t_quantile(f64::NAN, dof(3)).is_err());
    }

    #[test]
    fn newtypes_validate() {
        assert!(DegreesOfFreedom::new(0).is_err());
        assert!(DegreesOfFreedom::from_first_stage(1).is_err());
        assert_eq!(DegreesOfFreedom::from_first_stage(5).unwrap().get(), 4);
        assert!(Probability::new(0.0).is_err());
        assert!(Probability::new(1.0).is_err());
        assert!(Probability::new(0.3).is_ok());
    }

    #[test]
    fn chi2_moments() {
        let n = 1_000_000;
        let mut rng = RandomStream::new(11).rng();
        let draws: Vec<f64> = (0..n).map(|_| sample_chi2(1, &mut rng).unwrap()).collect();
        let m = stats::Moments::from_slice(&draws);
        // Var(χ²_1) = 2
        let se = (2.0 / n as f64).sqrt();
        assert!((m.mean() - 1.0).abs() < 3.0 * se, "mean {}", m.mean());

        let mut rng = RandomStream::new(12).rng();
        let draws: Vec<f64> = (0..n).map(|_| sample_chi2(5, &mut rng).unwrap()).collect();
        let m = stats::Moments::from_slice(&draws);
        // Var(s²) ≈ (μ4 - σ⁴)/n; for χ²_k the fourth central moment is 12k(k+4) = 540
        let se = ((540.0 - 100.0) / n as f64).sqrt();
        assert!((m.variance() - 10.0).abs() < 3.0 * se, "variance {}", m.variance());
        assert!(sample_chi2(0, &mut rng).is_err());
    }

    #[test]
    fn samplers_are_deterministic() {
        let s = RandomStream::new(5).replication(3);
        let a: Vec<f64> = {
            let mut rng = s.rng();
            (0..50)
                .map(|_| sample_chi2(3, &mut rng).unwrap() + sample_t(dof(4), &mut rng))
                .collect()
        };
        let b: Vec<f64> = {
            let mut rng = s.rng();
            (0..50)
                .map(|_| sample_chi2(3, &mut rng).unwrap() + sample_t(dof(4), &mut rng))
                .collect()
        };
        assert_eq!(a, b);
        assert!(sample_normal(0.0, 0.0, &mut s.rng()).is_err());
        assert!(sample_normal(0.0, -1.0, &mut s.rng()).is_err());
    }

    #[test]
    fn t_draws_pass_ks() {
        for nu in [1u64, 4, 25] {
            let t = StudentT::new(dof(nu));
            let sampler = t_sampler(dof(nu));
            let mut rng = RandomStream::new(77).experiment(nu).rng();
            let draws: Vec<f64> = (0..100_000).map(|_| sampler.sample(&mut rng)).collect();
            let d = stats::ks_statistic(draws, |x| t.cdf(x));
            assert!(d < stats::ks_critical_value(100_000, 0.001), "ν = {nu}: D = {d}");
        }
    }

    proptest! {
        #[test]
        fn cdf_symmetry(x in -1e6f64..1e6, nu in 1u64..400) {
            let t = StudentT::new(dof(nu));
            prop_assert!((t.cdf(x) + t.cdf(-x) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn cdf_monotone(x in -50f64..50.0, dx in 0f64..5.0, nu in 1u64..200) {
            let t = StudentT::new(dof(nu));
            prop_assert!(t.cdf(x) <= t.cdf(x + dx));
        }

        #[test]
        fn quantile_round_trip(q in 1e-9f64..(1.0 - 1e-9), nu in 1u64..300) {
            let t = StudentT::new(dof(nu));
            let x = t.quantile(q).unwrap();
            let back = if q > 0.5 { 1.0 - t.sf(x) } else { t.cdf(x) };
            prop_assert!((back - q).abs() < 1e-12 * q.max(1e-3));
        }
    }
}
