use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use equilab_cli::config::{parse_list, parse_measure};
use equilab_cli::error::{EXIT_CRITERION_FAIL, EXIT_PASS};
use equilab_cli::{run, ExperimentConfig, ExperimentKind, GridConfig, LabError, RunConfig, RunOptions, RunReport, WeightConfig};

#[derive(Parser)]
#[command(name = "equilab", version, about = "Equilibrium weights, Bergman kernels and random zeros on the Riemann sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Master seed for every random stream.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Parent directory of the run directories.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct WeightArgs {
    /// fs, cap{c}, circle{c}, bump{center,radius,height},
    /// radial-csv:PATH or nodal-csv:PATH.
    #[arg(long, default_value = "fs")]
    weight: String,
    /// Constant added to the weight.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    offset: f64,
    /// Grid resolution NrxNt.
    #[arg(long, default_value = "256x256")]
    grid: String,
    /// Envelope solver tolerance.
    #[arg(long, default_value_t = equilab_core::envelope::DEFAULT_TOL)]
    tol: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the equilibrium weight and compare with the radial oracle.
    Envelope {
        #[command(flatten)]
        weight: WeightArgs,
        #[command(flatten)]
        common: Common,
    },
    /// L1 convergence of the Bergman kernel to the envelope gap.
    Bergman {
        #[command(flatten)]
        weight: WeightArgs,
        /// Degrees a,b,c.
        #[arg(long, default_value = "10,20,40,80")]
        degrees: String,
        /// Also fit the constant of the log p / p rate.
        #[arg(long)]
        rate: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Moments of log|<a, u>| for a coefficient measure.
    Moments {
        /// gaussian-complex, gaussian-real, sphere-complex, sphere-real,
        /// fubini-study{α}, uniform-disk{r}, pareto-log{ρ,c} (add -real to
        /// the last two for real coefficients).
        #[arg(long, default_value = "gaussian-complex")]
        measure: String,
        /// Dimensions a,b,c.
        #[arg(long, default_value = "10,100,1000")]
        dims: String,
        #[arg(long, default_value_t = 2.0)]
        nu: f64,
        #[arg(long, default_value_t = 4000)]
        trials: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Zeros of random sections.
    Zeros {
        #[command(flatten)]
        weight: WeightArgs,
        #[arg(long, default_value = "25,50,100")]
        degrees: String,
        #[arg(long, default_value = "gaussian-complex")]
        measure: String,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        /// Estimate expected region masses instead of per-trial statistics.
        #[arg(long)]
        expectation: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run an experiment described by a TOML file.
    Run {
        config: PathBuf,
        /// Overrides the seed of the file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides the output directory of the file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the report of a finished run.
    Report { dir: PathBuf },
}

fn weight_config(w: &WeightArgs) -> Result<(WeightConfig, GridConfig), LabError> {
    Ok((WeightConfig { descriptor: w.weight.clone(), offset: w.offset }, w.grid.parse()?))
}

fn config_for(command: &Command) -> Result<(ExperimentConfig, Option<usize>, PathBuf), LabError> {
    let here = PathBuf::from(".");
    let build = |kind, w: &WeightArgs, run: RunConfig, c: &Common| -> Result<_, LabError> {
        let (weight, grid) = weight_config(w)?;
        let run = RunConfig { seed: c.seed, out: c.out.clone(), tol: w.tol, ..run };
        Ok(ExperimentConfig { kind, weight, grid, measure: equilab_core::MeasureSpec::GaussianComplex, run })
    };
    match command {
        Command::Envelope { weight, common } => {
            Ok((build(ExperimentKind::Envelope, weight, RunConfig::default(), common)?, common.threads, here))
        }
        Command::Bergman { weight, degrees, rate, common } => {
            let kind = if *rate { ExperimentKind::RateFit } else { ExperimentKind::KernelConvergence };
            let run = RunConfig { degrees: parse_list(degrees)?, ..RunConfig::default() };
            Ok((build(kind, weight, run, common)?, common.threads, here))
        }
        Command::Moments { measure, dims, nu, trials, common } => {
            let run = RunConfig {
                dimensions: parse_list(dims)?,
                nu: *nu,
                trials: *trials,
                seed: common.seed,
                out: common.out.clone(),
                ..RunConfig::default()
            };
            let config = ExperimentConfig {
                kind: ExperimentKind::Moments,
                weight: WeightConfig { descriptor: "fs".into(), offset: 0.0 },
                grid: GridConfig { n_r: 8, n_theta: 8 },
                measure: parse_measure(measure)?,
                run,
            };
            Ok((config, common.threads, here))
        }
        Command::Zeros { weight, degrees, measure, trials, expectation, common } => {
            let kind =
                if *expectation { ExperimentKind::ExpectationCurrent } else { ExperimentKind::ZeroEquidistribution };
            let run = RunConfig { degrees: parse_list(degrees)?, trials: *trials, ..RunConfig::default() };
            let mut config = build(kind, weight, run, common)?;
            config.measure = parse_measure(measure)?;
            Ok((config, common.threads, here))
        }
        Command::Run { config, seed, threads, out } => {
            let mut c = ExperimentConfig::load(config)?;
            if let Some(s) = seed {
                c.run.seed = *s;
            }
            if let Some(o) = out {
                c.run.out = o.clone();
            }
            let base = config.parent().map(Path::to_path_buf).unwrap_or(here);
            Ok((c, *threads, base))
        }
        Command::Report { .. } => unreachable!(),
    }
}

fn verdict_code(report: &RunReport) -> ExitCode {
    ExitCode::from(if report.passed() { EXIT_PASS } else { EXIT_CRITERION_FAIL } as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Command::Report { dir } = &cli.command {
        return match RunReport::load(dir) {
            Ok(r) => {
                print!("{}", r.render());
                verdict_code(&r)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        };
    }
    let outcome = config_for(&cli.command).and_then(|(config, threads, base_dir)| {
        run(&config, &RunOptions { threads, base_dir })
    });
    match outcome {
        Ok(o) => {
            print!("{}", o.report.render());
            println!("outputs in {}", o.dir.display());
            verdict_code(&o.report)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
