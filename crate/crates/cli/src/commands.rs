//! Runs a `RunConfig` and produces rows.

use ranksel_core::distributions::DegreesOfFreedom;
use ranksel_core::efficiency::{efficiency_curve, ScheduleSpec};
use ranksel_core::extremes::{fit_extremes, NuSchedule, TriangularArraySpec};
use ranksel_core::hconst::{h_table, Variant};
use ranksel_core::procedures::{estimate_pcs_with_h, InstanceSpec, ProcedureParams};
use ranksel_core::stream::RandomStream;
use serde::Serialize;

use crate::config::{CommandConfig, EfficiencyConfig, HconstConfig, PcsConfig, RunConfig};
use crate::error::CliError;
use crate::output;

// Experiment ids keep the random streams of different commands apart.
const PCS_EXPERIMENT: u64 = 1;
const EFFICIENCY_EXPERIMENT: u64 = 2;
const EXTREMES_EXPERIMENT: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HconstRow {
    pub k: u64,
    pub nu: u64,
    pub p: f64,
    pub h_dd: f64,
    pub h_rinott: f64,
    pub ratio: f64,
    pub residual_dd: f64,
    pub residual_rinott: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcsRow {
    pub variant: Variant,
    pub k: u64,
    pub nu: u64,
    pub n0: u64,
    pub p: f64,
    pub delta: f64,
    pub gap: f64,
    pub replications: u64,
    pub h: f64,
    pub pcs: f64,
    pub pcs_se: f64,
    pub mean_total_samples: f64,
    pub mean_total_samples_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyRow {
    pub k: u64,
    pub nu: u64,
    pub n0: u64,
    pub h_dd: f64,
    pub h_rinott: f64,
    pub h_ratio: f64,
    pub h_ratio_sq: f64,
    pub alpha_dd: f64,
    pub alpha_dd_se: f64,
    pub alpha_rinott: f64,
    pub alpha_rinott_se: f64,
    pub alpha_ratio: f64,
    pub total_ratio: f64,
    pub l_hat_dd: f64,
    pub l_hat_rinott: f64,
    pub maxmix_dd: f64,
    pub maxmix_rinott: f64,
    pub slack_dd: f64,
    pub slack_rinott: f64,
    pub theoretical_eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremesRow {
    pub k: u64,
    pub nu: u64,
    pub statistic: String,
    pub replications: u64,
    pub median: f64,
    pub iqr: f64,
    pub quantile_99: f64,
    pub gumbel_location: f64,
    pub gumbel_scale: f64,
    pub frechet_location: f64,
    pub frechet_scale: f64,
    pub frechet_shape: f64,
    pub ad_gumbel: f64,
    pub ad_frechet: f64,
    pub hill_index: Option<f64>,
}

/// Runs the command and renders the complete output file.
pub fn execute(config: &RunConfig, timestamp: u64) -> Result<String, CliError> {
    let root = RandomStream::new(config.seed);
    match &config.command {
        CommandConfig::Hconst(c) => {
            let rows = hconst(c)?;
            output::render(config, &rows, &[], timestamp)
        }
        CommandConfig::Pcs(c) => {
            let rows = pcs(c, root.experiment(PCS_EXPERIMENT))?;
            output::render(config, &rows, &[], timestamp)
        }
        CommandConfig::Efficiency(c) => {
            let (rows, notes) = efficiency(c, root.experiment(EFFICIENCY_EXPERIMENT))?;
            output::render(config, &rows, &notes, timestamp)
        }
        CommandConfig::Extremes(spec) => {
            let (rows, notes) = extremes(spec, root.experiment(EXTREMES_EXPERIMENT))?;
            output::render(config, &rows, &notes, timestamp)
        }
    }
}

pub fn hconst(c: &HconstConfig) -> Result<Vec<HconstRow>, CliError> {
    let nu = DegreesOfFreedom::new(c.nu)?;
    let table = h_table(&c.ks, |_| Ok(nu), c.p)?;
    Ok(table
        .iter()
        .map(|r| HconstRow {
            k: r.k,
            nu: r.nu.get(),
            p: r.p.get(),
            h_dd: r.dd.value,
            h_rinott: r.rinott.value,
            ratio: r.ratio(),
            residual_dd: r.dd.residual,
            residual_rinott: r.rinott.residual,
        })
        .collect())
}

pub fn pcs(c: &PcsConfig, stream: RandomStream) -> Result<Vec<PcsRow>, CliError> {
    if c.variants.is_empty() {
        return Err(CliError::Usage("no variant selected".into()));
    }
    if c.replications == 0 {
        return Err(CliError::Usage("replications must be at least 1".into()));
    }
    let n0 =
        c.nu.checked_add(1)
            .ok_or_else(|| CliError::Usage("nu is too large".into()))?;
    let spec = InstanceSpec {
        gap: c.gap,
        prior: c.prior,
    };
    let mut rows = Vec::with_capacity(c.variants.len());
    for &variant in &c.variants {
        let params = ProcedureParams::new(c.p, c.delta, c.k, n0, variant)?;
        // Reject a gap outside the indifference zone before the solver runs.
        ranksel_core::procedures::make_slippage_instance(&params, c.gap, vec![1.0; params.populations()])?;
        let h = params.solve_h()?;
        let est = estimate_pcs_with_h(&params, &spec, &h, c.replications, stream, c.mode)?;
        rows.push(PcsRow {
            variant,
            k: c.k,
            nu: c.nu,
            n0,
            p: c.p,
            delta: c.delta,
            gap: c.gap,
            replications: c.replications,
            h: h.value,
            pcs: est.pcs.value,
            pcs_se: est.pcs.std_error,
            mean_total_samples: est.mean_total_samples.value,
            mean_total_samples_se: est.mean_total_samples.std_error,
        });
    }
    Ok(rows)
}

pub fn efficiency(c: &EfficiencyConfig, stream: RandomStream) -> Result<(Vec<EfficiencyRow>, Vec<String>), CliError> {
    let schedule = ScheduleSpec {
        schedule: c.schedule,
        ks: c.ks.clone(),
    };
    let report = efficiency_curve(&schedule, c.p, c.delta, &c.prior, c.replications, stream)?;
    let mut rows = Vec::with_capacity(report.rows.len());
    for r in &report.rows {
        rows.push(EfficiencyRow {
            k: r.k,
            nu: r.nu.get(),
            n0: r.n0,
            h_dd: r.h_dd.value,
            h_rinott: r.h_rinott.value,
            h_ratio: r.h_ratio(),
            h_ratio_sq: r.h_ratio_squared(),
            alpha_dd: r.alpha_dd.value,
            alpha_dd_se: r.alpha_dd.std_error,
            alpha_rinott: r.alpha_rinott.value,
            alpha_rinott_se: r.alpha_rinott.std_error,
            alpha_ratio: r.alpha_ratio(),
            total_ratio: r.total_ratio(),
            l_hat_dd: r.l_hat(Variant::DudewiczDalal, c.delta),
            l_hat_rinott: r.l_hat(Variant::Rinott, c.delta),
            maxmix_dd: report.maxmix(r, Variant::DudewiczDalal)?,
            maxmix_rinott: report.maxmix(r, Variant::Rinott)?,
            slack_dd: r.ceiling_slack(Variant::DudewiczDalal, c.delta),
            slack_rinott: r.ceiling_slack(Variant::Rinott, c.delta),
            theoretical_eta: report.theoretical_eta,
        });
    }
    let notes = match report.theoretical_eta {
        Some(eta) => vec![format!(
            "constant first stage: ratios should drift toward 2^(2/nu) = {eta}"
        )],
        None => vec!["first-stage size grows with k: the ratio sequence is reported without asserting a limit".into()],
    };
    Ok((rows, notes))
}

pub fn extremes(spec: &TriangularArraySpec, stream: RandomStream) -> Result<(Vec<ExtremesRow>, Vec<String>), CliError> {
    let report = fit_extremes(spec, stream)?;
    let rows: Vec<ExtremesRow> = report
        .rows
        .iter()
        .map(|r| ExtremesRow {
            k: r.k,
            nu: r.nu.get(),
            statistic: spec.statistic.label().into(),
            replications: r.replications,
            median: r.median,
            iqr: r.iqr,
            quantile_99: r.quantile_99,
            gumbel_location: r.gumbel.location,
            gumbel_scale: r.gumbel.scale,
            frechet_location: r.frechet.location,
            frechet_scale: r.frechet.scale,
            frechet_shape: r.frechet.shape,
            ad_gumbel: r.ad_gumbel,
            ad_frechet: r.ad_frechet,
            hill_index: r.hill_index,
        })
        .collect();
    let last = rows.last().expect("spec has at least one k");
    let better = if last.ad_gumbel <= last.ad_frechet {
        "Gumbel"
    } else {
        "Frechet"
    };
    let mut notes = vec![format!(
        "largest k = {}: Anderson-Darling Gumbel {} vs Frechet {} ({better} fits better)",
        last.k, last.ad_gumbel, last.ad_frechet
    )];
    match spec.nu {
        NuSchedule::Fixed { nu } => notes.push(format!(
            "fixed nu = {nu}: classical theory gives a Frechet limit with shape {nu}",
            nu = nu.get()
        )),
        _ => notes.push("exploratory: nu grows with k and no limit law is asserted".into()),
    }
    Ok((rows, notes))
}
