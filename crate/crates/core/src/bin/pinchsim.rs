use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pinchsim::config::{FigureConfig, ScenarioConfig};
use pinchsim::figures::{render_csv, run_figure};
use pinchsim::validate::{run_validation, ValidateOptions};
use pinchsim::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;

#[derive(Parser)]
#[command(name = "pinchsim", version, about = "Pinching-antenna system simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single antenna, users in a square.
    Fig4(RunArgs),
    /// Single antenna, users in a rectangle.
    Fig5(RunArgs),
    /// N antennas on one waveguide, OMA.
    Fig6(RunArgs),
    /// NOMA sum rates for several user counts.
    Fig7(RunArgs),
    /// Individual NOMA rates.
    Fig8(RunArgs),
    /// NOMA minus OMA sum rate.
    Gap(RunArgs),
    /// Two waveguides, two users: beamforming and antenna search.
    Fig9(RunArgs),
    /// min-SINR map over antenna offsets.
    Fig10(RunArgs),
    /// Per-realization MRC, ZF, search and bound rates.
    Table1(RunArgs),
    /// Run the built-in consistency checks.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON scenario file; the figure defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path; overrides the config's `output`, stdout when neither is set.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Monte Carlo trials for the ergodic-rate check.
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
    /// Scales eta on the analytical side of the Monte Carlo check.
    #[arg(long, hide = true, default_value_t = 1.0)]
    debug_eta_scale: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match cli.command {
        Command::Validate(v) => return validate(&v),
        Command::Fig4(a) => ("fig4", a),
        Command::Fig5(a) => ("fig5", a),
        Command::Fig6(a) => ("fig6", a),
        Command::Fig7(a) => ("fig7", a),
        Command::Fig8(a) => ("fig8", a),
        Command::Gap(a) => ("gap", a),
        Command::Fig9(a) => ("fig9", a),
        Command::Fig10(a) => ("fig10", a),
        Command::Table1(a) => ("table1", a),
    };
    match run(name, &args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("pinchsim {name}: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::ParameterDomain(_) | Error::Geometry(_) | Error::Shape { .. } => EXIT_CONFIG,
        Error::Capacity { .. }
        | Error::Infeasible { .. }
        | Error::Singular
        | Error::Degenerate(_)
        | Error::SearchFailure => EXIT_INFEASIBLE,
    }
}

fn load(name: &str, args: &RunArgs) -> Result<ScenarioConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            ScenarioConfig::from_json(&text)?
        }
        None => ScenarioConfig::for_figure(FigureConfig::default_for(name).expect("known subcommand")),
    };
    if cfg.figure.name() != name {
        return Err(Error::Config(format!(
            "at `figure.kind`: config describes {:?} but the subcommand is {name:?}",
            cfg.figure.name()
        )));
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = Some(trials);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(name: &str, args: &RunArgs) -> Result<ExitCode, Error> {
    let cfg = load(name, args)?;
    let out = run_figure(&cfg, None)?;
    let csv = render_csv(&cfg, &out)?;
    let target = args.out.clone().or_else(|| cfg.output.as_ref().map(PathBuf::from));
    write_output(target.as_deref(), &csv)?;
    if out.violations.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    for v in &out.violations {
        eprintln!("ordering violated: {v}");
    }
    eprintln!("{} ordering violation(s)", out.violations.len());
    Ok(ExitCode::from(EXIT_VALIDATION))
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), Error> {
    let io = |e: std::io::Error| Error::Config(format!("cannot write output: {e}"));
    match path {
        Some(p) => fs::write(p, bytes).map_err(io),
        None => std::io::stdout().lock().write_all(bytes).map_err(io),
    }
}

fn validate(args: &ValidateArgs) -> ExitCode {
    let opts = ValidateOptions {
        seed: args.seed,
        mc_trials: args.trials,
        eta_scale: args.debug_eta_scale,
        ..ValidateOptions::default()
    };
    match run_validation(&opts) {
        Ok(report) => {
            println!("{report}");
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VALIDATION)
            }
        }
        Err(e) => {
            eprintln!("pinchsim validate: {e}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}
