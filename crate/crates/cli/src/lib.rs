//! Command-line front end for the `ranksel-core` computations.
//!
//! Every run is described by a [`config::RunConfig`]; the arguments are only
//! a way of building one. The config is embedded in the output header and
//! `--config <file>` replays it.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{ArgGroup, Parser, Subcommand};
use ranksel_core::distributions::DegreesOfFreedom;
use ranksel_core::efficiency::Schedule;
use ranksel_core::extremes::{NuSchedule, Statistic, TriangularArraySpec};
use ranksel_core::hconst::Variant;
use ranksel_core::procedures::{SamplingMode, VariancePrior};

use config::{
    parse_prior, parse_schedule, CommandConfig, EfficiencyConfig, Format, HconstConfig, PcsConfig, RunConfig,
};
use error::{CliError, EXIT_OK};

pub const SEED_ENV: &str = "RANKSEL_SEED";
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "ranksel",
    version,
    about = "Two-stage indifference-zone selection: constants, simulation, efficiency"
)]
pub struct Cli {
    /// Master seed; falls back to the config file, then $RANKSEL_SEED, then 1.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (default: standard output).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Replay a JSON config or the config embedded in an earlier output file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Table of h constants for both procedures.
    #[command(group(ArgGroup::new("sizes").required(true).args(["k", "ks"])))]
    Hconst {
        #[arg(long)]
        k: Option<u64>,
        /// Comma-separated, ascending.
        #[arg(long, value_delimiter = ',')]
        ks: Vec<u64>,
        #[arg(long)]
        nu: u64,
        #[arg(long)]
        p: f64,
    },
    /// Simulated probability of correct selection under slippage.
    Pcs {
        /// Number of competitors; k + 1 populations.
        #[arg(long)]
        k: u64,
        /// First-stage degrees of freedom (N0 = nu + 1).
        #[arg(long)]
        nu: u64,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        /// Best mean minus each other mean; must exceed delta.
        #[arg(long)]
        gap: f64,
        #[arg(long, value_enum, default_value_t = VariantChoice::Both)]
        variant: VariantChoice,
        #[arg(long, default_value = "inverse-gamma:3,4", value_parser = parse_prior)]
        prior: VariancePrior,
        #[arg(long, default_value_t = 10_000)]
        replications: u64,
        /// fast (exact sufficient statistics) or direct (every observation).
        #[arg(long, default_value = "fast", value_parser = parse_mode)]
        mode: SamplingMode,
    },
    /// Expected-sample-size ratios across k.
    Efficiency {
        /// constant:N0, log[:OFFSET] or power:EXPONENT[:OFFSET].
        #[arg(long, default_value = "constant:5", value_parser = parse_schedule)]
        schedule: Schedule,
        #[arg(long, value_delimiter = ',', required = true)]
        ks: Vec<u64>,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(long, default_value = "inverse-gamma:3,4", value_parser = parse_prior)]
        prior: VariancePrior,
        #[arg(long, default_value_t = 100_000)]
        replications: u64,
    },
    /// Gumbel and Frechet fits to simulated maxima.
    #[command(group(ArgGroup::new("dof").required(true).args(["nu", "nu_equals_k", "nu_schedule"])))]
    Extremes {
        #[arg(long, value_delimiter = ',', required = true)]
        ks: Vec<u64>,
        /// Fixed degrees of freedom.
        #[arg(long)]
        nu: Option<u64>,
        /// Use nu = k.
        #[arg(long)]
        nu_equals_k: bool,
        /// nu = N0(k) - 1 for a first-stage schedule (see `efficiency`).
        #[arg(long, value_parser = parse_schedule)]
        nu_schedule: Option<Schedule>,
        /// max-of-t or max-of-t-sum.
        #[arg(long, default_value = "max-of-t", value_parser = parse_statistic)]
        statistic: Statistic,
        #[arg(long, default_value_t = 10_000)]
        replications: u64,
        /// Share of upper order statistics used by the Hill estimator.
        #[arg(long, default_value_t = ranksel_core::extremes::DEFAULT_HILL_FRACTION)]
        hill_fraction: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum VariantChoice {
    Dd,
    Rinott,
    Both,
}

impl VariantChoice {
    fn variants(self) -> Vec<Variant> {
        match self {
            VariantChoice::Dd => vec![Variant::DudewiczDalal],
            VariantChoice::Rinott => vec![Variant::Rinott],
            VariantChoice::Both => Variant::BOTH.to_vec(),
        }
    }
}

fn parse_mode(s: &str) -> Result<SamplingMode, String> {
    match s {
        "fast" => Ok(SamplingMode::Fast),
        "direct" => Ok(SamplingMode::Direct),
        other => Err(format!("unknown mode `{other}` (expected fast or direct)")),
    }
}

fn parse_statistic(s: &str) -> Result<Statistic, String> {
    s.parse().map_err(|e: ranksel_core::Error| e.to_string())
}

impl Command {
    fn into_config(self) -> Result<CommandConfig, CliError> {
        Ok(match self {
            Command::Hconst { k, ks, nu, p } => CommandConfig::Hconst(HconstConfig {
                ks: k.map_or(ks, |k| vec![k]),
                nu,
                p,
            }),
            Command::Pcs {
                k,
                nu,
                p,
                delta,
                gap,
                variant,
                prior,
                replications,
                mode,
            } => CommandConfig::Pcs(PcsConfig {
                k,
                nu,
                p,
                delta,
                gap,
                variants: variant.variants(),
                prior,
                replications,
                mode,
            }),
            Command::Efficiency {
                schedule,
                ks,
                p,
                delta,
                prior,
                replications,
            } => CommandConfig::Efficiency(EfficiencyConfig {
                schedule,
                ks,
                p,
                delta,
                prior,
                replications,
            }),
            Command::Extremes {
                ks,
                nu,
                nu_equals_k,
                nu_schedule,
                statistic,
                replications,
                hill_fraction,
            } => {
                let nu = match (nu, nu_equals_k, nu_schedule) {
                    (Some(v), _, _) => NuSchedule::Fixed {
                        nu: DegreesOfFreedom::new(v)?,
                    },
                    (_, true, _) => NuSchedule::EqualsK,
                    (_, _, Some(schedule)) => NuSchedule::FirstStage { schedule },
                    _ => unreachable!("clap requires one of the group"),
                };
                let mut spec = TriangularArraySpec::new(ks, nu, statistic, replications)?;
                spec.hill_fraction = hill_fraction;
                spec.validate()?;
                CommandConfig::Extremes(spec)
            }
        })
    }
}

fn seed_from_env() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|e| CliError::Usage(format!("{SEED_ENV}=`{v}` is not a valid seed: {e}"))),
        Err(_) => Ok(None),
    }
}

/// Resolves the arguments into a config. Precedence for seed and format:
/// flag, then config file, then environment/default.
pub fn resolve(cli: Cli) -> Result<(RunConfig, Option<PathBuf>, Option<usize>), CliError> {
    let config = match (cli.config, cli.command) {
        (Some(_), Some(_)) => return Err(CliError::Usage("--config cannot be combined with a subcommand".into())),
        (Some(path), None) => {
            let mut config = RunConfig::load(&path)?;
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            if let Some(format) = cli.format {
                config.format = format;
            }
            config
        }
        (None, Some(command)) => RunConfig {
            seed: match cli.seed {
                Some(s) => s,
                None => seed_from_env()?.unwrap_or(DEFAULT_SEED),
            },
            format: cli.format.unwrap_or_default(),
            command: command.into_config()?,
        },
        (None, None) => {
            return Err(CliError::Usage(
                "a subcommand or --config is required (see --help)".into(),
            ))
        }
    };
    if cli.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    Ok((config, cli.output, cli.threads))
}

fn run_config(config: &RunConfig, output: Option<PathBuf>, threads: Option<usize>) -> Result<(), CliError> {
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let text = match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
            pool.install(|| commands::execute(config, timestamp))?
        }
        None => commands::execute(config, timestamp)?,
    };
    match output {
        Some(path) => std::fs::write(&path, text).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        }),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io {
                path: "<stdout>".into(),
                source: e,
            }),
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = resolve(cli).and_then(|(config, output, threads)| run_config(&config, output, threads));
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn argument_definitions_are_consistent() {
        Cli::command().debug_assert();
    }

    fn config_of(args: &[&str]) -> Result<RunConfig, CliError> {
        let cli = Cli::try_parse_from(args).map_err(|e| CliError::Usage(e.to_string()))?;
        resolve(cli).map(|(c, _, _)| c)
    }

    #[test]
    fn flags_build_configs() {
        let c = config_of(&[
            "ranksel", "--seed", "7", "hconst", "--ks", "10,100", "--nu", "9", "--p", "0.9",
        ])
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(
            c.command,
            CommandConfig::Hconst(HconstConfig {
                ks: vec![10, 100],
                nu: 9,
                p: 0.9
            })
        );
        let c = config_of(&[
            "ranksel",
            "pcs",
            "--k",
            "4",
            "--nu",
            "9",
            "--p",
            "0.9",
            "--gap",
            "1.01",
            "--variant",
            "rinott",
        ])
        .unwrap();
        match c.command {
            CommandConfig::Pcs(p) => assert_eq!(p.variants, vec![Variant::Rinott]),
            other => panic!("{other:?}"),
        }
        let c = config_of(&[
            "ranksel",
            "extremes",
            "--ks",
            "10,100",
            "--nu-equals-k",
            "--statistic",
            "max-of-t-sum",
        ])
        .unwrap();
        match c.command {
            CommandConfig::Extremes(s) => {
                assert_eq!(s.nu, NuSchedule::EqualsK);
                assert_eq!(s.statistic, Statistic::MaxOfTSum);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn usage_errors() {
        assert!(config_of(&["ranksel"]).is_err());
        assert!(config_of(&["ranksel", "hconst", "--k", "1", "--nu", "4"]).is_err());
        assert!(config_of(&["ranksel", "extremes", "--ks", "10", "--nu", "3", "--replications", "10"]).is_err());
        let both = config_of(&[
            "ranksel", "--config", "x.json", "hconst", "--k", "1", "--nu", "4", "--p", "0.5",
        ]);
        assert_eq!(both.unwrap_err().exit_code(), error::EXIT_USAGE);
        assert!(config_of(&[
            "ranksel",
            "--threads",
            "0",
            "hconst",
            "--k",
            "1",
            "--nu",
            "4",
            "--p",
            "0.5"
        ])
        .is_err());
    }
}
