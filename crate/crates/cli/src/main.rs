//! `prpca`: image denoising, synthetic grids and diagnostics from the shell.
//!
//! Exit codes: 0 on success, 2 for unreadable or malformed input, 3 when the
//! solver or a diagnostic computation fails.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use prpca_core::image::{add_noise, load_pgm, recover, save_pgm, RecoverMetrics, RecoverOptions};
use prpca_core::io::load_instance;
use prpca_core::simulation::{parse_spec, run_grid, write_csv};
use prpca_core::{diagnose, Error, PairKind};

#[derive(Parser)]
#[command(name = "prpca", version, about = "Projected robust PCA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Denoise a binary PGM image.
    Recover {
        #[arg(long = "in")]
        input: PathBuf,
        /// identity, single or double
        #[arg(long)]
        kind: PairKind,
        /// Noise level; sets the default penalties.
        #[arg(long)]
        sigma: f64,
        /// Reference image for the RMSE. Defaults to the input when noise is
        /// synthesised.
        #[arg(long)]
        clean: Option<PathBuf>,
        /// Add N(0, sigma^2) noise drawn with this seed before recovering.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lambda1: Option<f64>,
        #[arg(long)]
        lambda2: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Run a synthetic experiment grid described by a key=value file.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate identifiability and error-bound quantities for a ground truth.
    Diagnose {
        /// Directory holding x0.csv, y0.csv, optional e.csv and config.txt.
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NumericalFailure(_) | Error::NotIdentifiable(_) | Error::BoundNotApplicable(_) => 3,
        _ => 2,
    }
}

#[allow(clippy::too_many_arguments)]
fn run_recover(
    input: PathBuf,
    kind: PairKind,
    sigma: f64,
    clean: Option<PathBuf>,
    seed: Option<u64>,
    lambda1: Option<f64>,
    lambda2: Option<f64>,
    max_iters: Option<usize>,
    out: PathBuf,
    metrics: Option<PathBuf>,
) -> prpca_core::Result<()> {
    if matches!(kind, PairKind::Custom) {
        return Err(Error::InvalidParameter(
            "custom pairs are not available here".into(),
        ));
    }
    let original = load_pgm(&input)?;
    let reference = match clean {
        Some(path) => Some(load_pgm(path)?),
        None if seed.is_some() => Some(original.clone()),
        None => None,
    };
    let noisy = match seed {
        Some(seed) => add_noise(&original, sigma, seed)?,
        None => original,
    };
    let opts = RecoverOptions {
        lambda1,
        lambda2,
        max_iters,
        clean: reference.as_ref(),
    };
    let (img, m) = recover(&noisy, kind, sigma, &opts)?;
    save_pgm(&img, &out)?;
    if let Some(path) = metrics {
        fs::write(
            path,
            format!("{}\n{}\n", RecoverMetrics::CSV_HEADER, m.csv_row()),
        )?;
    }
    eprintln!(
        "{kind}: {} iterations in {:.3}s, {} pixels clamped{}",
        m.iterations,
        m.seconds,
        m.clamped,
        m.rmse
            .map_or_else(String::new, |r| format!(", rmse {r:.5}"))
    );
    Ok(())
}

fn run(cli: Cli) -> prpca_core::Result<()> {
    match cli.command {
        Command::Recover {
            input,
            kind,
            sigma,
            clean,
            seed,
            lambda1,
            lambda2,
            max_iters,
            out,
            metrics,
        } => run_recover(
            input, kind, sigma, clean, seed, lambda1, lambda2, max_iters, out, metrics,
        ),
        Command::Simulate { spec, out } => {
            let grid = parse_spec(&fs::read_to_string(spec)?)?;
            let rows = run_grid(&grid)?;
            let mut buf = Vec::new();
            write_csv(&rows, &mut buf)?;
            fs::write(out, buf)?;
            let failed = rows.iter().filter(|r| !r.ok()).count();
            eprintln!("{} rows, {failed} failed", rows.len());
            Ok(())
        }
        Command::Diagnose { instance, out } => {
            let inst = load_instance(instance)?;
            let report = diagnose(&inst.x0, &inst.y0, &inst.e, &inst.pair, &inst.settings)?;
            fs::write(out, report.to_key_value())?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("prpca: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
