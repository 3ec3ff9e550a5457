//! The h-constants of the Dudewicz–Dalal and Rinott procedures.
//!
//! For k competitors and ν degrees of freedom the constants solve
//!
//! ```text
//! Dudewicz–Dalal:  p = ∫ G_ν(t + h)^k g_ν(t) dt
//! Rinott:          p = [∫ G_ν(t + h) g_ν(t) dt]^k
//! ```
//!
//! Integrals over the real line are evaluated after the substitution
//! t = tan θ, which maps the heavy t tails onto a bounded smooth integrand,
//! with adaptive Gauss–Legendre panels on (-π/2, π/2). The Rinott equation
//! is solved in log form, `k · ln P(T₂ - T₁ ≤ h) = ln p`, with the pairwise
//! probability carried as its complement so that p^(1/k) ≈ 1 costs no
//! precision.

use std::f64::consts::FRAC_PI_2;

use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{t_sampler, DegreesOfFreedom, Probability, StudentT};
use crate::error::{Error, Result};
use crate::parallel;
use crate::quadrature::{self, Integral, Tolerance};
use crate::root::{self, Stop};
use crate::stats::Estimate;
use crate::stream::RandomStream;

/// Which of the two procedures a constant belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Dudewicz and Dalal (1975), weighted means.
    #[serde(rename = "dd")]
    DudewiczDalal,
    /// Rinott (1978), plain means.
    Rinott,
}

impl Variant {
    pub const BOTH: [Variant; 2] = [Variant::DudewiczDalal, Variant::Rinott];

    pub fn label(self) -> &'static str {
        match self {
            Variant::DudewiczDalal => "dd",
            Variant::Rinott => "rinott",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dd" | "dudewicz-dalal" => Ok(Variant::DudewiczDalal),
            "rinott" => Ok(Variant::Rinott),
            other => Err(Error::invalid(
                "variant",
                format!("unknown variant `{other}` (expected dd or rinott)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HEquationSpec {
    /// Number of competitors; k + 1 populations in total.
    pub k: u64,
    pub nu: DegreesOfFreedom,
    pub p: Probability,
    pub variant: Variant,
}

impl HEquationSpec {
    pub fn new(k: u64, nu: DegreesOfFreedom, p: f64, variant: Variant) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k", "need at least one competitor"));
        }
        Ok(HEquationSpec {
            k,
            nu,
            p: Probability::new(p)?,
            variant,
        })
    }
}

/// A solved h value with solver diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HConstant {
    pub value: f64,
    /// |left-hand side at `value` − p|.
    pub residual: f64,
    pub bracket: (f64, f64),
    pub iterations: u32,
    /// Integrand evaluations spent on the final left-hand-side evaluation.
    pub quadrature_nodes: usize,
}

/// Every returned constant satisfies `residual < RESIDUAL_TOLERANCE`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;
/// Upper-end doublings allowed before a spec is declared pathological.
pub const MAX_BRACKET_EXPANSIONS: u32 = 64;

fn line_tolerance() -> Tolerance {
    Tolerance {
        abs: 1e-13,
        rel: 0.0,
        max_panels: 20_000,
        initial_panels: 16,
    }
}

fn tail_tolerance() -> Tolerance {
    Tolerance {
        abs: 1e-300,
        rel: 1e-12,
        max_panels: 20_000,
        initial_panels: 16,
    }
}

/// ∫ f(t) g_ν(t) dt over the real line, via t = tan θ.
fn expect_over_t<F: Fn(f64) -> f64>(t: &StudentT, f: F, tol: Tolerance) -> Result<Integral> {
    quadrature::integrate(
        |theta: f64| {
            let x = theta.tan();
            let w = t.pdf(x) * (1.0 + x * x);
            if w == 0.0 {
                0.0
            } else {
                f(x) * w
            }
        },
        -FRAC_PI_2,
        FRAC_PI_2,
        tol,
    )
}

/// P(T₂ − T₁ > h) for h ≥ 0, to relative precision.
fn pairwise_upper_tail(h: f64, t: &StudentT) -> Result<Integral> {
    debug_assert!(h >= 0.0);
    expect_over_t(t, |x| t.sf(x + h), tail_tolerance())
}

/// ln P(T₂ − T₁ ≤ h) and the node count used.
fn ln_pairwise(h: f64, t: &StudentT) -> Result<(f64, usize)> {
    if h >= 0.0 {
        let tail = pairwise_upper_tail(h, t)?;
        Ok(((-tail.value).ln_1p(), tail.evaluations))
    } else {
        let lower = pairwise_upper_tail(-h, t)?;
        Ok((lower.value.ln(), lower.evaluations))
    }
}

/// P(T₂ − T₁ ≤ h) for independent t_ν variables: ∫ G_ν(t + h) g_ν(t) dt.
pub fn pairwise_prob(h: f64, nu: DegreesOfFreedom) -> Result<f64> {
    let t = StudentT::new(nu);
    if h >= 0.0 {
        Ok(1.0 - pairwise_upper_tail(h, &t)?.value)
    } else {
        Ok(pairwise_upper_tail(-h, &t)?.value)
    }
}

fn dd_integral(h: f64, k: u64, t: &StudentT) -> Result<Integral> {
    let kf = k as f64;
    expect_over_t(t, |x| (kf * t.ln_cdf(x + h)).exp(), line_tolerance())
}

/// P(max_{i≤k} T_i − T₀ ≤ h) = ∫ G_ν(t + h)^k g_ν(t) dt.
///
/// G^k is formed as exp(k · ln G) per node.
pub fn dd_prob(h: f64, k: u64, nu: DegreesOfFreedom) -> Result<f64> {
    Ok(dd_integral(h, k, &StudentT::new(nu))?.value)
}

/// Solves the spec's defining equation for h.
pub fn solve_h(spec: &HEquationSpec) -> Result<HConstant> {
    let t = StudentT::new(spec.nu);
    let p = spec.p.get();
    let k = spec.k;
    let stop = Stop {
        f_tol: 1e-15,
        x_tol: 1e-13,
        max_iter: 200,
    };

    // Quadrature failures inside the closure surface as NaN and are re-raised below.
    let failure = std::cell::Cell::new(None);
    let note = |r: Result<f64>| -> f64 {
        r.unwrap_or_else(|e| {
            failure.set(Some(e));
            f64::NAN
        })
    };

    let (solution, lhs_at, nodes) = match spec.variant {
        Variant::DudewiczDalal => {
            let f = |h: f64| note(dd_integral(h, k, &t).map(|i| i.value)) - p;
            let bracket = root::expand_increasing(f, 0.0, 1.0, MAX_BRACKET_EXPANSIONS);
            let solution = bracket.and_then(|b| root::brent(f, b, stop));
            if let Some(e) = failure.take() {
                return Err(e);
            }
            let solution = solution?;
            let final_eval = dd_integral(solution.x, k, &t)?;
            (solution, final_eval.value, final_eval.evaluations)
        }
        Variant::Rinott => {
            let ln_p = p.ln();
            let kf = k as f64;
            let f = |h: f64| kf * note(ln_pairwise(h, &t).map(|v| v.0)) - ln_p;
            let bracket = root::expand_increasing(f, 0.0, 1.0, MAX_BRACKET_EXPANSIONS);
            let solution = bracket.and_then(|b| root::brent(f, b, stop));
            if let Some(e) = failure.take() {
                return Err(e);
            }
            let solution = solution?;
            let (ln_pw, nodes) = ln_pairwise(solution.x, &t)?;
            (solution, (kf * ln_pw).exp(), nodes)
        }
    };

    let residual = (lhs_at - p).abs();
    if !(residual < RESIDUAL_TOLERANCE) {
        return Err(Error::NoConvergence {
            iterations: solution.iterations,
        });
    }
    Ok(HConstant {
        value: solution.x,
        residual,
        bracket: solution.bracket,
        iterations: solution.iterations,
        quadrature_nodes: nodes,
    })
}

/// Monte Carlo estimate of the spec's left-hand side at `h`.
///
/// Dudewicz–Dalal: indicator of max(T₁..T_k) − T₀ ≤ h with k + 1 draws.
/// Rinott: indicator that k independent pairs all satisfy T₂ − T₁ ≤ h.
/// Replication r draws from `stream.replication(r)`.
pub fn mc_oracle(spec: &HEquationSpec, h: f64, replications: u64, stream: RandomStream) -> Result<Estimate> {
    if replications == 0 {
        return Err(Error::invalid("replications", "must be at least 1"));
    }
    let sampler = t_sampler(spec.nu);
    let k = spec.k;
    let variant = spec.variant;
    let hits = parallel::replicate(
        replications,
        || 0u64,
        |acc, r| {
            let mut rng = stream.replication(r).rng();
            let ok = match variant {
                Variant::DudewiczDalal => {
                    let bar = sampler.sample(&mut rng) + h;
                    let mut ok = true;
                    for _ in 0..k {
                        if sampler.sample(&mut rng) > bar {
                            ok = false;
                            break;
                        }
                    }
                    ok
                }
                Variant::Rinott => {
                    let mut ok = true;
                    for _ in 0..k {
                        let a = sampler.sample(&mut rng);
                        let b = sampler.sample(&mut rng);
                        if b - a > h {
                            ok = false;
                            break;
                        }
                    }
                    ok
                }
            };
            *acc += ok as u64;
        },
        |acc, part| *acc += part,
    );
    Ok(Estimate::proportion(hits, replications))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HRow {
    pub k: u64,
    pub nu: DegreesOfFreedom,
    pub p: Probability,
    pub dd: HConstant,
    pub rinott: HConstant,
}

impl HRow {
    /// h_Rinott / h_DD; exactly 1 at k = 1 where the two equations coincide.
    pub fn ratio(&self) -> f64 {
        if self.k == 1 || self.dd.value == self.rinott.value {
            1.0
        } else {
            self.rinott.value / self.dd.value
        }
    }
}

/// Solves both constants for every k; rows are computed concurrently.
pub fn h_table<S>(ks: &[u64], nu_schedule: S, p: f64) -> Result<Vec<HRow>>
where
    S: Fn(u64) -> Result<DegreesOfFreedom> + Sync,
{
    if ks.is_empty() {
        return Err(Error::invalid("ks", "need at least one k"));
    }
    if ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("ks", "must be strictly ascending"));
    }
    let p = Probability::new(p)?;
    ks.par_iter()
        .map(|&k| {
            let row = || -> Result<HRow> {
                let nu = nu_schedule(k)?;
                let dd = solve_h(&HEquationSpec::new(k, nu, p.get(), Variant::DudewiczDalal)?)?;
                let rinott = solve_h(&HEquationSpec::new(k, nu, p.get(), Variant::Rinott)?)?;
                Ok(HRow { k, nu, p, dd, rinott })
            };
            row().map_err(|e| Error::AtK { k, source: Box::new(e) })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dof(v: u64) -> DegreesOfFreedom {
        DegreesOfFreedom::new(v).unwrap()
    }

    fn solve(k: u64, nu: u64, p: f64, variant: Variant) -> HConstant {
        solve_h(&HEquationSpec::new(k, dof(nu), p, variant).unwrap()).unwrap()
    }

    #[test]
    fn pairwise_symmetry() {
        for nu in [1, 4, 30] {
            assert_abs_diff_eq!(pairwise_prob(0.0, dof(nu)).unwrap(), 0.5, epsilon = 1e-13);
            for h in [0.3, 2.0, 17.0] {
                let sum = pairwise_prob(h, dof(nu)).unwrap() + pairwise_prob(-h, dof(nu)).unwrap();
                assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn pairwise_cauchy_closed_form() {
        // The difference of two standard Cauchy variables is Cauchy with scale 2.
        for h in [0.5, 3.0, 40.0] {
            let exact = 0.5 + (h / 2.0f64).atan() / std::f64::consts::PI;
            assert_abs_diff_eq!(pairwise_prob(h, dof(1)).unwrap(), exact, epsilon = 1e-12);
        }
    }

    #[test]
    fn pairwise_matches_monte_carlo() {
        let n = 10_000_000u64;
        let sampler = t_sampler(dof(4));
        let stream = RandomStream::new(2024).experiment(1);
        let hits = parallel::replicate(
            n,
            || 0u64,
            |acc, r| {
                let mut rng = stream.replication(r).rng();
                let d = sampler.sample(&mut rng) - sampler.sample(&mut rng);
                *acc += (d <= 2.0) as u64;
            },
            |a, b| *a += b,
        );
        let est = Estimate::proportion(hits, n);
        let exact = pairwise_prob(2.0, dof(4)).unwrap();
        assert!(est.covers(exact, 3.0), "{exact} vs {est:?}");
    }

    #[test]
    fn dd_prob_basics() {
        for nu in [1, 3, 9] {
            for h in [-1.0, 0.0, 0.7, 5.0] {
                assert_abs_diff_eq!(
                    dd_prob(h, 1, dof(nu)).unwrap(),
                    pairwise_prob(h, dof(nu)).unwrap(),
                    epsilon = 1e-12
                );
            }
            assert_abs_diff_eq!(dd_prob(0.0, 1, dof(nu)).unwrap(), 0.5, epsilon = 1e-12);
            // At h = 0 all k + 1 variables are exchangeable.
            assert_abs_diff_eq!(dd_prob(0.0, 7, dof(nu)).unwrap(), 1.0 / 8.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn dd_prob_matches_monte_carlo() {
        let spec = HEquationSpec::new(50, dof(4), 0.5, Variant::DudewiczDalal).unwrap();
        let est = mc_oracle(&spec, 3.0, 1_000_000, RandomStream::new(7)).unwrap();
        let exact = dd_prob(3.0, 50, dof(4)).unwrap();
        assert!(est.covers(exact, 3.0), "{exact} vs {est:?}");
    }

    #[test]
    fn dd_prob_survives_huge_k() {
        for h in [5.0, 20.0, 60.0] {
            let v = dd_prob(h, 100_000, dof(4)).unwrap();
            assert!(v.is_finite() && v > 0.0 && v < 1.0, "h = {h}: {v}");
        }
    }

    #[test]
    fn symmetric_and_coincident_cases() {
        for nu in [1, 4, 12] {
            for v in Variant::BOTH {
                assert_abs_diff_eq!(solve(1, nu, 0.5, v).value, 0.0, epsilon = 1e-10);
            }
        }
        let dd = solve(1, 4, 0.9, Variant::DudewiczDalal);
        let ri = solve(1, 4, 0.9, Variant::Rinott);
        assert_abs_diff_eq!(dd.value, ri.value, epsilon = 1e-10);
    }

    #[test]
    fn matches_frozen_reference_values() {
        // Reference values from an independent general-purpose quadrature and
        // Brent solve of both equations (p = 0.9); the k = 10⁴ DD value was
        // re-checked at 30 significant digits.
        let cases = [
            (10, 2, Variant::DudewiczDalal, 7.750272147041538),
            (10, 2, Variant::Rinott, 10.0431697876915),
            (100, 4, Variant::DudewiczDalal, 7.636528895119279),
            (100, 4, Variant::Rinott, 9.004645903345113),
            (10_000, 4, Variant::DudewiczDalal, 23.23123199443615),
            (10_000, 4, Variant::Rinott, 27.60077730618901),
        ];
        for (k, nu, v, expected) in cases {
            let h = solve(k, nu, 0.9, v);
            assert_abs_diff_eq!(h.value, expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn residual_contract_and_bracket() {
        for k in [1, 3, 40, 2000] {
            for nu in [1, 2, 6, 50] {
                for p in [0.1, 0.5, 0.9, 0.999] {
                    for v in Variant::BOTH {
                        let h = solve(k, nu, p, v);
                        assert!(h.residual < RESIDUAL_TOLERANCE, "k={k} ν={nu} p={p} {v}: {h:?}");
                        assert!(h.bracket.0 <= h.value && h.value <= h.bracket.1);
                    }
                }
            }
        }
    }

    #[test]
    fn negative_h_for_small_p() {
        // dd_prob(0, k) = 1/(k+1), so p below that needs h < 0.
        let h = solve(3, 5, 0.1, Variant::DudewiczDalal);
        assert!(h.value < 0.0);
        assert_abs_diff_eq!(dd_prob(h.value, 3, dof(5)).unwrap(), 0.1, epsilon = 1e-10);
        let h = solve(3, 5, 0.05, Variant::Rinott);
        assert!(h.value < 0.0);
    }

    #[test]
    fn rinott_solution_matches_monte_carlo() {
        let spec = HEquationSpec::new(10, dof(9), 0.9, Variant::Rinott).unwrap();
        let h = solve_h(&spec).unwrap();
        let est = mc_oracle(&spec, h.value, 1_000_000, RandomStream::new(99)).unwrap();
        assert!(est.covers(0.9, 3.0), "{est:?}");
    }

    #[test]
    fn dd_solution_matches_monte_carlo() {
        let spec = HEquationSpec::new(10, dof(9), 0.9, Variant::DudewiczDalal).unwrap();
        let h = solve_h(&spec).unwrap();
        let est = mc_oracle(&spec, h.value, 1_000_000, RandomStream::new(98)).unwrap();
        assert!(est.covers(0.9, 3.0), "{est:?}");
    }

    #[test]
    fn oracle_trivial_cases() {
        let spec = HEquationSpec::new(1, dof(1), 0.5, Variant::DudewiczDalal).unwrap();
        let est = mc_oracle(&spec, 0.0, 1_000_000, RandomStream::new(3)).unwrap();
        assert!(est.covers(0.5, 3.0));
        for v in Variant::BOTH {
            let spec = HEquationSpec::new(20, dof(3), 0.9, v).unwrap();
            let est = mc_oracle(&spec, 1e6, 10_000, RandomStream::new(4)).unwrap();
            assert!(est.value > 0.999);
        }
        assert!(mc_oracle(&spec, 0.0, 0, RandomStream::new(3)).is_err());
    }

    #[test]
    fn rinott_never_below_dd() {
        for k in [2, 5, 30, 300] {
            for nu in [2, 5, 30] {
                for p in [0.6, 0.9, 0.99] {
                    let dd = solve(k, nu, p, Variant::DudewiczDalal).value;
                    let ri = solve(k, nu, p, Variant::Rinott).value;
                    assert!(ri > dd, "k={k} ν={nu} p={p}: {ri} <= {dd}");
                }
            }
        }
    }

    #[test]
    fn monotone_in_p_and_k() {
        for v in Variant::BOTH {
            let by_p: Vec<f64> = [0.55, 0.75, 0.9, 0.95, 0.99]
                .iter()
                .map(|&p| solve(10, 5, p, v).value)
                .collect();
            assert!(by_p.windows(2).all(|w| w[0] < w[1]), "{v}: {by_p:?}");
            let by_k: Vec<f64> = [1, 2, 10, 100, 1000]
                .iter()
                .map(|&k| solve(k, 5, 0.9, v).value)
                .collect();
            assert!(by_k.windows(2).all(|w| w[0] < w[1]), "{v}: {by_k:?}");
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(HEquationSpec::new(0, dof(3), 0.9, Variant::Rinott).is_err());
        assert!(HEquationSpec::new(2, dof(3), 1.0, Variant::Rinott).is_err());
        assert!(HEquationSpec::new(2, dof(3), 0.0, Variant::DudewiczDalal).is_err());
    }

    #[test]
    fn table_rows() {
        let rows = h_table(&[1], |_| DegreesOfFreedom::new(4), 0.8).unwrap();
        assert_eq!(rows[0].ratio(), 1.0);

        let rows = h_table(&[2, 10, 100, 1000], |_| DegreesOfFreedom::new(4), 0.9).unwrap();
        assert!(rows.windows(2).all(|w| w[0].dd.value < w[1].dd.value));
        assert!(rows.windows(2).all(|w| w[0].rinott.value < w[1].rinott.value));
        assert!(rows.iter().all(|r| r.ratio() > 1.0));

        assert!(h_table(&[], |_| DegreesOfFreedom::new(4), 0.9).is_err());
        assert!(h_table(&[10, 5], |_| DegreesOfFreedom::new(4), 0.9).is_err());
        let err = h_table(&[3, 7], |k| DegreesOfFreedom::new(if k == 7 { 0 } else { 2 }), 0.9).unwrap_err();
        assert!(matches!(err, Error::AtK { k: 7, .. }));
    }

    #[test]
    fn squared_ratio_drifts_toward_two_to_the_two_over_nu() {
        let rows = h_table(&[10, 100, 1000, 10_000], |_| DegreesOfFreedom::new(4), 0.9).unwrap();
        let eta = 2f64.powf(0.5);
        let gaps: Vec<f64> = rows.iter().map(|r| (eta - r.ratio().powi(2)).abs()).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    }
}
