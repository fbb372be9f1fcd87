use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fdmask::MaskKind;
use fdmask_cli::commands::{self, GradcheckArgs};
use fdmask_cli::CliResult;

#[derive(Parser)]
#[command(
    name = "fdmask",
    version,
    about = "Temporal frequency masks, frame sampling and a toy trainer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Dynamic,
    Static,
    Combined,
}

impl From<Kind> for MaskKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Dynamic => MaskKind::Dynamic,
            Kind::Static => MaskKind::Static,
            Kind::Combined => MaskKind::Combined,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic motion dataset.
    Gen {
        /// Dataset spec (key = value); defaults apply when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute a saliency mask of a [T, C, H, W] container.
    Mask {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "combined")]
        kind: Kind,
        /// Skip mean normalization of the combined mask.
        #[arg(long)]
        no_normalize: bool,
    },
    /// Select one frame per segment from frame_NNNN.fvt files.
    Sample {
        dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Index list destination; defaults to indices.txt inside DIR.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare analytic and finite-difference gradients.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        frames: usize,
        #[arg(long, default_value_t = 2)]
        mid_channels: usize,
        #[arg(long, default_value_t = 3)]
        pen_channels: usize,
        #[arg(long, default_value_t = 6)]
        mid_size: usize,
        #[arg(long, default_value_t = 3)]
        pen_size: usize,
        #[arg(long, default_value_t = 0.1)]
        lambda_mask: f64,
        #[arg(long, hide = true)]
        inject_gradient_fault: bool,
    },
    /// Train the toy backbone on a generated dataset.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on the eval split.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Also sum predictions from mask-sampled frames.
        #[arg(long)]
        ensemble: bool,
    },
}

fn run(cmd: Command) -> CliResult<String> {
    match cmd {
        Command::Gen { spec, out } => {
            let spec = commands::read_dataset_spec(spec.as_deref())?;
            commands::gen(&spec, &out)
        }
        Command::Mask {
            input,
            out,
            kind,
            no_normalize,
        } => commands::mask(&input, &out, kind.into(), !no_normalize),
        Command::Sample { dir, config, out } => {
            let cfg = commands::read_run_config(config.as_deref())?;
            let out = out.unwrap_or_else(|| dir.join("indices.txt"));
            commands::sample(&dir, &cfg, &out)
        }
        Command::Gradcheck {
            seed,
            frames,
            mid_channels,
            pen_channels,
            mid_size,
            pen_size,
            lambda_mask,
            inject_gradient_fault,
        } => commands::gradcheck(&GradcheckArgs {
            seed,
            frames,
            mid_channels,
            pen_channels,
            mid_size,
            pen_size,
            lambda_mask,
            inject_fault: inject_gradient_fault,
        }),
        Command::Train { config, data, out } => {
            let cfg = commands::read_run_config(config.as_deref())?;
            commands::train(&cfg, &data, &out)
        }
        Command::Eval {
            config,
            data,
            checkpoint,
            ensemble,
        } => {
            let cfg = commands::read_run_config(config.as_deref())?;
            commands::eval(&cfg, &data, &checkpoint, ensemble)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_kind().into()
        }
    }
}
