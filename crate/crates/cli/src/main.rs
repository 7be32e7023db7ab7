use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

use hipgraf_cli::{
    cmd_evaluate, cmd_losses, cmd_measure, cmd_phantom, parse_structure, Outcome, PhantomArgs,
    RunConfig,
};
use hipgraf_core::phantom::{AngleRange, MaskFormat, NoiseSpec};
use hipgraf_core::{FitConfig, LossWeights, StdMode, Thresholds};

#[derive(Parser)]
#[command(name = "hipgraf", version, about = "Graf hip-ultrasound measurement and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure alpha/beta and hip type for every scene.
    Measure(Common),
    /// Compare measurements with ground truth and write the report tables.
    Evaluate(Common),
    /// Shape-similarity, bony-rim and composite loss scores.
    Losses(Common),
    /// Generate a synthetic dataset with known angles.
    Phantom(PhantomCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum StdArg {
    Population,
    Sample,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Rle,
    Png,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Ridge weight for the cubic boundary fits.
    #[arg(long, default_value_t = 1e-3)]
    xi: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda1: f64,
    #[arg(long, default_value_t = 0.5)]
    lambda2: f64,
    #[arg(long, default_value_t = 0.5)]
    lambda3: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda4: f64,
    #[arg(long, default_value_t = 5.0)]
    success_deg: f64,
    #[arg(long, default_value_t = 10.0)]
    poor_deg: f64,
    #[arg(long, default_value_t = 60.0)]
    graf_cutoff: f64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, value_enum, default_value = "population")]
    std_mode: StdArg,
    /// Accepted for symmetry with `phantom`; these commands are deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn config(&self) -> RunConfig {
        RunConfig {
            manifest: self.manifest.clone(),
            out: self.out.clone(),
            fit: FitConfig {
                xi: self.xi,
                ..FitConfig::default()
            },
            weights: LossWeights {
                lambda1: self.lambda1,
                lambda2: self.lambda2,
                lambda3: self.lambda3,
                lambda4: self.lambda4,
            },
            thresholds: Thresholds {
                success_deg: self.success_deg,
                poor_deg: self.poor_deg,
            },
            graf_cutoff_deg: self.graf_cutoff,
            workers: self.workers,
            std_mode: match self.std_mode {
                StdArg::Population => StdMode::Population,
                StdArg::Sample => StdMode::Sample,
            },
        }
    }
}

#[derive(Args)]
struct PhantomCmd {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 45.0)]
    alpha_min: f64,
    #[arg(long, default_value_t = 75.0)]
    alpha_max: f64,
    #[arg(long, default_value_t = 35.0)]
    beta_min: f64,
    #[arg(long, default_value_t = 80.0)]
    beta_max: f64,
    #[arg(long, default_value_t = 512)]
    width: usize,
    #[arg(long, default_value_t = 512)]
    height: usize,
    #[arg(long, default_value_t = 0.0)]
    edge_jitter: f64,
    #[arg(long, default_value_t = 0.0)]
    landmark_jitter: f64,
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    /// Comma-separated structure names (flat_ilium, lower_limb, labrum, co_junction).
    #[arg(long, default_value = "labrum", value_delimiter = ',')]
    dropout_structures: Vec<String>,
    #[arg(long, default_value_t = 0.0)]
    rotation: f64,
    /// Join the lower limb to the ilium mask.
    #[arg(long)]
    fused: bool,
    #[arg(long, value_enum, default_value = "rle")]
    format: FormatArg,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

fn report(o: Outcome) -> ExitCode {
    if o.failed > 0 {
        eprintln!("{} of {} scenes failed", o.failed, o.scenes);
    }
    ExitCode::from(o.exit_code() as u8)
}

fn run(cli: Cli) -> Result<ExitCode> {
    Ok(match cli.command {
        Command::Measure(c) => report(cmd_measure(&c.config())?),
        Command::Losses(c) => report(cmd_losses(&c.config())?),
        Command::Evaluate(c) => {
            let r = cmd_evaluate(&c.config())?;
            for (id, msg) in &r.failures {
                eprintln!("{id}: {msg}");
            }
            report(r.outcome)
        }
        Command::Phantom(p) => {
            let mut args = PhantomArgs::new(p.out, p.n, p.seed);
            args.range = AngleRange {
                alpha: (p.alpha_min, p.alpha_max),
                beta: (p.beta_min, p.beta_max),
            };
            args.base.width = p.width;
            args.base.height = p.height;
            args.base.rotation_deg = p.rotation;
            args.base.fused = p.fused;
            args.base.noise = NoiseSpec {
                edge_jitter_px: p.edge_jitter,
                landmark_jitter_px: p.landmark_jitter,
                dropout_fraction: p.dropout,
                dropout_structures: p
                    .dropout_structures
                    .iter()
                    .map(|s| parse_structure(s))
                    .collect::<Result<_>>()?,
            };
            args.format = match p.format {
                FormatArg::Rle => MaskFormat::Rle,
                FormatArg::Png => MaskFormat::Png,
            };
            args.workers = p.workers;
            print!("{}", cmd_phantom(&args)?);
            ExitCode::SUCCESS
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
