use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use brwlab::harness::{
    self, analyze, export_cf_tables, list_scenarios, read_samples, read_weights, run_scenario,
    simulate, write_report, write_samples, ExperimentConfig, HarnessError, RunOptions,
};
use brwlab::models::{calibrate_infinite_example, kappa, OffspringLaw};

#[derive(Parser)]
#[command(name = "brwlab", version, about = "Monte Carlo checks of stable fluctuations of additive martingales")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate and write the raw per-replicate CSV.
    Simulate(RunArgs),
    /// Run the enabled checks on fresh or stored samples and write a report.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        /// Verify a sample file written by `simulate` instead of simulating.
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Run even if the law fails the contraction or supercriticality condition.
        #[arg(long)]
        override_conditions: bool,
    },
    /// Solve m(theta) = target for an infinite-points law.
    Calibrate {
        #[command(flatten)]
        source: Source,
        /// Lattice spacing (defaults to the config's).
        #[arg(long)]
        spacing: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        target: f64,
    },
    /// Write theoretical CF tables (cf_q, cf_u0 and, given weights, mixture).
    CfTable {
        #[command(flatten)]
        source: Source,
        /// Mixing weights: a sample CSV or a file with one weight per line.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List builtin scenarios.
    Scenarios,
    /// Print a scenario's config document.
    Config {
        #[command(flatten)]
        source: Source,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Config document (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Builtin scenario name.
    #[arg(long)]
    scenario: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Source {
    fn load(&self) -> Result<ExperimentConfig, HarnessError> {
        match (&self.config, &self.scenario) {
            (Some(path), _) => ExperimentConfig::load(path),
            (None, Some(name)) => harness::scenario(name)
                .ok_or_else(|| HarnessError::Config(format!("unknown scenario `{name}`"))),
            (None, None) => Err(HarnessError::Config("give --config or --scenario".into())),
        }
    }
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut config = self.source.load()?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(n) = self.replicates {
            config.replicates = n;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

fn json(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("serializable")
}

fn run(cli: Cli) -> Result<bool, HarnessError> {
    match cli.command {
        Command::Scenarios => {
            for entry in list_scenarios() {
                println!("{:<20} {}", entry.name, entry.description);
            }
            Ok(true)
        }
        Command::Config { source } => {
            print!("{}", source.load()?.to_toml()?);
            Ok(true)
        }
        Command::Simulate(args) => {
            let config = args.load()?;
            let samples = simulate(&config, args.threads)?;
            let path = config.output_dir.join("samples.csv");
            write_samples(&path, &config.digest(), &samples)?;
            eprintln!("wrote {} replicates to {}", samples.records.len(), path.display());
            Ok(true)
        }
        Command::Verify {
            run,
            samples,
            override_conditions,
        } => {
            let config = run.load()?;
            let report = match samples {
                None => run_scenario(
                    &config,
                    &RunOptions {
                        threads: run.threads,
                        override_conditions,
                        write_artifacts: true,
                    },
                )?,
                Some(path) => {
                    let started = Instant::now();
                    let (digest, samples) = read_samples(&path)?;
                    if digest != config.digest() {
                        return Err(HarnessError::Config(format!(
                            "{} was produced by config {digest}, not {}",
                            path.display(),
                            config.digest()
                        )));
                    }
                    let analysis = analyze(&config, &samples);
                    let report = harness::report_for(&config, &samples, &analysis, started);
                    write_report(&config.output_dir.join("report.json"), &report)?;
                    report
                }
            };
            for check in &report.checks {
                println!("{:<24} {:<20} {}", check.name, format!("{:?}", check.status), check.message);
            }
            println!("overall: {}", if report.pass { "pass" } else { "fail" });
            Ok(report.pass)
        }
        Command::Calibrate {
            source,
            spacing,
            target,
        } => {
            let config = source.load()?;
            let OffspringLaw::InfinitePoints {
                k_law,
                y_law,
                spacing: configured,
            } = &config.law
            else {
                return Err(HarnessError::Config("calibration needs an infinite_points law".into()));
            };
            let spacing = spacing.unwrap_or(*configured);
            let cal = calibrate_infinite_example(k_law, y_law, spacing, target)?;
            let law = OffspringLaw::InfinitePoints {
                k_law: *k_law,
                y_law: y_law.clone(),
                spacing,
            };
            let k = kappa(&law, cal.theta, config.alpha)?;
            println!(
                "{}",
                json(&serde_json::json!({
                    "theta": cal.theta,
                    "spacing": cal.spacing,
                    "m_theta": cal.m_theta,
                    "residual": cal.residual,
                    "kappa": k,
                }))
            );
            Ok(k < 1.0)
        }
        Command::CfTable {
            source,
            weights,
            out,
        } => {
            let config = source.load()?;
            let weights = weights
                .map(|p| read_weights(&p, config.policy.horizon))
                .transpose()?;
            let dir = out.unwrap_or_else(|| config.output_dir.clone());
            for path in export_cf_tables(&config, &dir, weights.as_deref())? {
                println!("{}", path.display());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
