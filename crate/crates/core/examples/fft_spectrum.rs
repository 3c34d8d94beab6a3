//! Centered FFT, radial power spectrum and band energy of a test volume.

use ulfsim::bands::{band_energy_fractions, RadialBandSpec};
use ulfsim::fft::{fft3_real, ifft3_centered};
use ulfsim::metrics::radial_power_spectrum;
use ulfsim::Volume;

fn main() -> ulfsim::Result<()> {
    let v = Volume::from_fn([32, 32, 32], [1.0; 3], |x, y, z| {
        let d = ((x as f64 - 16.0).powi(2) + (y as f64 - 16.0).powi(2) + (z as f64 - 16.0).powi(2))
            .sqrt();
        0.5 * (1.0 - ((d - 10.0) / 1.0).tanh())
    })?;
    let k = fft3_real(&v)?;
    let back = ifft3_centered(&k)?;
    let err = back
        .data()
        .iter()
        .zip(v.data())
        .map(|(a, b)| (a.re - b).abs())
        .fold(0.0, f64::max);
    println!("round-trip max error: {err:.2e}");

    let spectrum = radial_power_spectrum(&v, 16)?;
    for (r, p) in spectrum.bin_centers.iter().zip(spectrum.mean_power()) {
        println!("r = {r:.3}  mean power = {p:.3e}");
    }
    let f = band_energy_fractions(&k, &RadialBandSpec::default())?;
    println!(
        "band fractions low/mid/high: {:.6} {:.6} {:.2e}",
        f[0], f[1], f[2]
    );
    Ok(())
}
