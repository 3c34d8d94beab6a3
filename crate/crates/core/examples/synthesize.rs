//! Draws a parameter record and degrades a phantom into a ULF-like volume.
//!
//! `cargo run --example synthesize -- [seed] [out.nii.gz]`

use ulfsim::kspace::synthesize_ulf;
use ulfsim::nifti::{write_volume, DataType};
use ulfsim::rng::{SeededRng, Stage};
use ulfsim::sampling::sample_params;
use ulfsim::Volume;

fn main() -> ulfsim::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let out = args.next();

    let hf = Volume::from_fn([48, 48, 40], [1.0, 1.0, 1.2], |x, y, z| {
        let (u, v, w) = (
            (x as f64 - 24.0) / 18.0,
            (y as f64 - 24.0) / 20.0,
            (z as f64 - 20.0) / 16.0,
        );
        let r = (u * u + v * v + w * w).sqrt();
        let brain = 0.5 * (1.0 - ((r - 1.0) / 0.05).tanh());
        brain * (0.7 + 0.3 * (6.0 * u).cos() * (5.0 * v).sin())
    })?;
    let params = sample_params(&mut SeededRng::for_case(seed, 0, Stage::Params));
    println!("{}", serde_json::to_string_pretty(&params).unwrap());

    let (ulf, report) = synthesize_ulf(&hf, &params)?;
    println!(
        "achieved sampling fraction: {:.4}",
        report.achieved_fraction
    );
    println!("noise sigma (k-space): {:.4e}", report.noise_sigma_k);
    println!("band energy before: {:?}", report.band_energy_pre);
    println!("band energy after:  {:?}", report.band_energy_post);
    if let Some(path) = out {
        write_volume(&ulf, &path, DataType::Float32)?;
        println!("wrote {path}");
    }
    Ok(())
}
