//! PSNR, SSIM and MS-SSIM between a clean volume and noisy copies.

use rand::Rng;
use ulfsim::metrics::{ms_ssim, psnr, ssim, SsimParams};
use ulfsim::rng::SeededRng;
use ulfsim::Volume;

fn main() -> ulfsim::Result<()> {
    let clean = Volume::from_fn([48, 48, 48], [1.0; 3], |x, y, z| {
        0.5 + 0.3 * (x as f64 * 0.2).sin() * (y as f64 * 0.15).cos() + 0.1 * (z as f64 * 0.1).sin()
    })?;
    let params = SsimParams::with_data_range(1.0);
    let mut rng = SeededRng::new(1, 0);
    for level in [0.01, 0.05, 0.2] {
        let data = clean
            .data()
            .iter()
            .map(|v| v + level * (rng.random::<f64>() - 0.5))
            .collect();
        let noisy = Volume::new(data, clean.shape(), clean.spacing())?;
        let ms = ms_ssim(&noisy, &clean, &params)?;
        println!(
            "noise {level:>4}: psnr {:6.2} dB  ssim {:.4}  ms-ssim {:.4} ({} scales)",
            psnr(&noisy, &clean, 1.0)?,
            ssim(&noisy, &clean, &params)?,
            ms.value,
            ms.scales
        );
    }
    Ok(())
}
