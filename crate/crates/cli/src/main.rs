//! `polaron`: batch front end for polaron-core.

mod commands;
mod config;
mod error;
mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polaron_core::validation::Faults;

use config::{parse_list, Format, RunConfig};
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "polaron", version, about = "Polaron energy-momentum estimates from sampled excursions")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Comma-separated floats as a single flag value.
#[derive(Clone, Debug)]
struct List(Vec<f64>);

impl From<List> for Vec<f64> {
    fn from(l: List) -> Self {
        l.0
    }
}

fn parse_floats(s: &str) -> Result<List, String> {
    parse_list(s).map(List)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

/// Flags that override the config file.
#[derive(Args, Debug, Default)]
struct Overrides {
    /// Flat `key = value` config file; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker thread cap (defaults to available cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true, allow_negative_numbers = true)]
    alpha: Option<f64>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    shards: Option<u64>,

    #[arg(long, global = true)]
    per_shard: Option<u64>,

    /// Comma-separated momenta, ascending
    #[arg(long = "p-grid", global = true, value_parser = parse_floats)]
    p_grid: Option<List>,

    #[arg(long, global = true, allow_negative_numbers = true)]
    lambda_min: Option<f64>,

    #[arg(long, global = true, allow_negative_numbers = true)]
    lambda_max: Option<f64>,

    #[arg(long, global = true)]
    lambda_points: Option<usize>,

    /// Renewal grid step
    #[arg(long, global = true)]
    h: Option<f64>,

    /// Renewal horizon
    #[arg(long = "t-max", global = true)]
    t_max: Option<f64>,

    /// Root-finding tolerance
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Comma-separated times for the path-integral oracle
    #[arg(long = "t-values", global = true, value_parser = parse_floats)]
    t_values: Option<List>,

    #[arg(long, global = true)]
    fk_paths: Option<usize>,

    #[arg(long, global = true)]
    fk_steps: Option<usize>,

    /// Ensemble file to read
    #[arg(long, global = true)]
    ensemble: Option<PathBuf>,

    /// Directory for output tables (stdout when absent)
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate and save an ensemble
    Sample {
        /// Output ensemble file
        #[arg(long)]
        out: PathBuf,
    },
    /// Energy curve, ground-state energy and effective mass
    Energy,
    /// Moment functional on the P grid times the lambda grid
    Lambda,
    /// Resolvent from the renewal solution and from the closed formula
    Resolvent,
    /// Ground-state overlap against the renewal plateau
    Overlap,
    /// Renewal-equation solution on [0, T_max]
    Renewal,
    /// Path-integral oracle against the renewal solution
    Oracle,
    /// Tail diagnostics at the continuum threshold
    Probe,
    /// Run the full cross-check suite
    Validate {
        /// Reduced sample sizes
        #[arg(long)]
        quick: bool,

        #[arg(long, hide = true)]
        inject_sigma2_sign_fault: bool,
    },
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        macro_rules! set {
            ($field:ident => $target:expr) => {
                if let Some(v) = &self.$field {
                    $target = v.clone().into();
                }
            };
        }
        set!(alpha => cfg.alpha);
        set!(seed => cfg.base_seed);
        set!(shards => cfg.shards);
        set!(per_shard => cfg.samples_per_shard);
        set!(p_grid => cfg.p_grid);
        set!(lambda_min => cfg.lambda_min);
        set!(lambda_max => cfg.lambda_max);
        set!(lambda_points => cfg.lambda_points);
        set!(h => cfg.h);
        set!(t_max => cfg.t_max);
        set!(tol => cfg.tol);
        set!(t_values => cfg.t_values);
        set!(fk_paths => cfg.fk_paths);
        set!(fk_steps => cfg.fk_steps);
        set!(ensemble => cfg.ensemble);
        set!(out_dir => cfg.out_dir);
        if let Some(f) = self.format {
            cfg.format = match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Jsonl => Format::Jsonl,
            };
        }
    }
}

fn resolve(o: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &o.config {
        let text = fs::read_to_string(path).map_err(|source| CliError::ConfigIo {
            path: path.clone(),
            source,
        })?;
        cfg.apply_file(&text)?;
    }
    o.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.overrides.threads {
        if n == 0 {
            return Err(CliError::Usage("invalid parameter `threads`: must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Failed(e.to_string()))?;
    }
    let cfg = resolve(&cli.overrides)?;
    match cli.command {
        Command::Sample { out } => commands::sample(&cfg, &out),
        Command::Energy => commands::energy(&cfg),
        Command::Lambda => commands::lambda(&cfg),
        Command::Resolvent => commands::resolvent(&cfg),
        Command::Overlap => commands::overlap(&cfg),
        Command::Renewal => commands::renewal(&cfg),
        Command::Oracle => commands::oracle(&cfg),
        Command::Probe => commands::probe(&cfg),
        Command::Validate {
            quick,
            inject_sigma2_sign_fault,
        } => commands::validate(
            quick,
            Faults {
                sigma2_sign: inject_sigma2_sign_fault,
            },
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
