//! `riesz`: command-line front end for the interaction-energy toolkit.
//!
//! Every subcommand writes its outputs and a `manifest.json` into `--out`.
//! Exit codes: 0 clean verdict, 1 negative verdict, 2 usage or
//! precondition error, 3 jump detected.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use riesz_core::{Error, KernelSpec};
use serde::Serialize;

mod commands;
mod run;

#[derive(Parser, Debug)]
#[command(name = "riesz", version, about = "Attractive-repulsive interaction energies in one dimension")]
struct Cli {
    /// Directory for reports, CSV files and the run manifest.
    #[arg(long, global = true, default_value = "riesz-out")]
    out: PathBuf,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Print the full JSON report on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

/// Kernel selection: a power law, a JSON spec or a tabulated profile.
#[derive(Args, Debug, Clone, Serialize)]
pub struct KernelArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// JSON kernel spec, e.g. {"form": "power_law", "alpha": 2, "lambda": 0}.
    #[arg(long, conflicts_with_all = ["alpha", "lambda", "tabulated"])]
    pub spec: Option<PathBuf>,
    /// CSV table `x,g` on a grid of positive abscissae.
    #[arg(long, conflicts_with_all = ["alpha", "lambda"])]
    pub tabulated: Option<PathBuf>,
}

impl KernelArgs {
    pub fn given(&self) -> bool {
        self.alpha.is_some() || self.lambda.is_some() || self.spec.is_some() || self.tabulated.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Grid,
    Particles,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaArg {
    Convex,
    Concave,
    Rearrangement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseArg {
    Auto,
    /// Even about the point.
    I,
    /// Odd about the point.
    Ii,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Certify the kernel hypotheses, estimate the singularity ratio and
    /// check integrability of g′(t)·t at the origin.
    CheckKernel {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, default_value_t = 2000)]
        probes: usize,
    },
    /// Minimize the energy on a grid or by particle flow.
    Minimize {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, value_enum, default_value = "grid")]
        method: MethodArg,
        /// Grid points.
        #[arg(long, default_value_t = 401)]
        n: usize,
        /// Initial window.
        #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true, default_values_t = [-2.0, 2.0])]
        window: Vec<f64>,
        /// Particle count.
        #[arg(long = "N", default_value_t = 200)]
        particles: usize,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        el_tol: Option<f64>,
        /// Record particle positions every this many steps.
        #[arg(long, default_value_t = 100)]
        snapshot_every: usize,
        /// Full solver configuration as JSON; overrides the flags above.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Check the Euler-Lagrange conditions of a density CSV.
    VerifyEl {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        density: PathBuf,
        #[arg(long, default_value_t = 1e-2)]
        tol: f64,
    },
    /// Mollify a density and check the derivative bound.
    Mollify {
        #[arg(long)]
        density: PathBuf,
        #[arg(long)]
        delta: f64,
    },
    /// Second derivative of the potential of a mollified density at its
    /// critical points, in three equivalent forms.
    SecondDerivative {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        density: PathBuf,
        #[arg(long)]
        delta: f64,
        /// Critical points; located automatically when omitted.
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        x: Vec<f64>,
    },
    /// Randomized sweeps of the three cancellation inequalities.
    CheckLemmas {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Restrict to one inequality.
        #[arg(long, value_enum)]
        lemma: Option<LemmaArg>,
        /// Re-run a single dumped instance.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Build the critical-point ladder of a density at a jump point.
    BuildLadder {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        density: PathBuf,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        x: f64,
        #[arg(long, value_enum)]
        case: CaseArg,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Skip the second-derivative evaluation at the good couple.
        #[arg(long)]
        no_evaluate: bool,
    },
    /// Continuity diagnostic over one or more refinements of a density.
    Regularity {
        #[command(flatten)]
        kernel: KernelArgs,
        /// Density CSVs, coarse to fine.
        #[arg(long, num_args = 1.., required = true)]
        density: Vec<PathBuf>,
        /// Points to test; 9 interior points when omitted.
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        points: Vec<f64>,
        #[arg(long, value_enum, default_value = "auto")]
        case: CaseArg,
        #[arg(long, default_value_t = 1e-2)]
        el_tol: f64,
        #[arg(long, default_value_t = 1e-3)]
        jump_tol: f64,
        /// Do not attempt a ladder at flagged points.
        #[arg(long)]
        no_ladder: bool,
    },
    /// One-sided essential limits of a grid function at a point.
    EssentialLimits {
        #[arg(long)]
        density: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        /// Fraction of extreme samples discarded per window.
        #[arg(long)]
        tau: Option<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::CheckKernel { .. } => "check-kernel",
            Command::Minimize { .. } => "minimize",
            Command::VerifyEl { .. } => "verify-el",
            Command::Mollify { .. } => "mollify",
            Command::SecondDerivative { .. } => "second-derivative",
            Command::CheckLemmas { .. } => "check-lemmas",
            Command::BuildLadder { .. } => "build-ladder",
            Command::Regularity { .. } => "regularity",
            Command::EssentialLimits { .. } => "essential-limits",
        }
    }
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_NEGATIVE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_JUMP: u8 = 3;

/// Verified-negative outcomes map to 1; everything else the user can fix
/// by changing the input maps to 2.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Diverged(_)
        | Error::NotPotentialConstant { .. }
        | Error::NoJump
        | Error::LadderUnresolved(_)
        | Error::OscillatoryRatio { .. } => EXIT_NEGATIVE,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut run = match run::Run::new(&cli.out, cli.command.name(), &cli.command, cli.seed, cli.json) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let code = commands::dispatch(&cli.command, &mut run).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    });
    if let Err(e) = run.finish(code) {
        eprintln!("error: cannot write manifest: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    ExitCode::from(code)
}

pub fn kernel_spec(args: &KernelArgs) -> riesz_core::Result<(KernelSpec, Option<PathBuf>)> {
    if let Some(path) = &args.spec {
        let base = path.parent().map(|p| p.to_path_buf());
        return Ok((KernelSpec::from_json_file(path)?, base));
    }
    if let Some(file) = &args.tabulated {
        return Ok((KernelSpec::Tabulated { file: file.clone() }, None));
    }
    Ok((KernelSpec::power_law(args.alpha.unwrap_or(2.0), args.lambda.unwrap_or(0.0)), None))
}
