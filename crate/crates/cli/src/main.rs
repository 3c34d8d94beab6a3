use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ulfsim::dataset::{
    evaluate_pairs, generate_dataset, resolve_workers, spectrum_json_file, split_manifest, Config,
    EvalOptions, Manifest, Metric, SplitSpec,
};

#[derive(Parser)]
#[command(
    name = "ulfsim",
    version,
    about = "Synthetic ultra-low-field MRI corpora"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Degrade every volume of a directory and write a manifest.
    Synth {
        #[arg(long)]
        input_dir: PathBuf,
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// TOML configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Worker threads; falls back to ULFSIM_WORKERS, then the CPU count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Partition a manifest's cases into train/val/test lists (JSON).
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "0.8,0.1,0.1")]
        fractions: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare predictions with references, paired by case id (TSV).
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long, default_value = "ssim,ms_ssim,psnr")]
        metrics: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Intensity range for SSIM/PSNR; the reference's max - min if omitted.
        #[arg(long)]
        data_range: Option<f64>,
        /// Label compared by segmentation metrics.
        #[arg(long, default_value_t = 1)]
        label: u32,
    },
    /// Radial power spectrum and band fractions of one volume (JSON).
    Spectrum {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 32)]
        bins: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the tuning HTTP service.
    Serve {
        #[arg(long, env = "ULFSIM_PORT", default_value_t = ulfsim_tune::DEFAULT_PORT)]
        port: u16,
        #[arg(long, env = "ULFSIM_MAX_UPLOAD_BYTES", default_value_t = ulfsim_tune::DEFAULT_MAX_UPLOAD_BYTES)]
        max_upload_bytes: usize,
        #[arg(long, env = "ULFSIM_CACHE_BYTES", default_value_t = ulfsim_tune::DEFAULT_CACHE_BYTES)]
        cache_bytes: usize,
        /// JSON file for persisted presets.
        #[arg(long, env = "ULFSIM_PRESETS")]
        presets: Option<PathBuf>,
    },
}

fn emit(text: &str, out: Option<PathBuf>) -> Result<(), Box<dyn std::error::Error>> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn parse_fractions(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| format!("fraction {p:?}: {e}"))
        })
        .collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(v).map_err(|v| format!("expected three fractions, got {}", v.len()))
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Synth {
            input_dir,
            output_dir,
            seed,
            config,
            workers,
        } => {
            let cfg = match config {
                Some(p) => Config::load(p)?,
                None => Config::default(),
            };
            let m = generate_dataset(
                &input_dir,
                &output_dir,
                seed,
                &cfg,
                resolve_workers(workers)?,
            )?;
            let failed: Vec<_> = m.cases.iter().filter(|c| !c.is_ok()).collect();
            eprintln!("{} cases, {} failed", m.cases.len(), failed.len());
            for c in failed {
                eprintln!("  {}: {}", c.case_id, c.error.as_deref().unwrap_or(""));
            }
        }
        Command::Split {
            manifest,
            fractions,
            seed,
            out,
        } => {
            let spec = SplitSpec::new(parse_fractions(&fractions)?, seed)?;
            let split = split_manifest(&Manifest::load(manifest)?, &spec)?;
            emit(&(serde_json::to_string_pretty(&split)? + "\n"), out)?;
        }
        Command::Eval {
            pred,
            reference,
            metrics,
            out,
            data_range,
            label,
        } => {
            let opts = EvalOptions { data_range, label };
            let report = evaluate_pairs(&pred, &reference, &Metric::parse_list(&metrics)?, &opts)?;
            emit(&report.to_tsv(), out)?;
        }
        Command::Spectrum { input, bins, out } => emit(&spectrum_json_file(input, bins)?, out)?,
        Command::Serve {
            port,
            max_upload_bytes,
            cache_bytes,
            presets,
        } => {
            let cfg = ulfsim_tune::ServiceConfig {
                port,
                max_upload_bytes,
                cache_bytes,
                presets_path: presets,
            };
            tokio::runtime::Runtime::new()?.block_on(ulfsim_tune::serve(cfg))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
