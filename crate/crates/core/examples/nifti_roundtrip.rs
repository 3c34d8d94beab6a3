//! Writes a volume in several NIfTI data types and reads it back.

use ulfsim::nifti::{read_volume, write_volume, DataType};
use ulfsim::Volume;

fn main() -> ulfsim::Result<()> {
    let dir = tempfile::tempdir()?;
    let v = Volume::from_fn([30, 24, 18], [0.9, 0.9, 1.5], |x, y, z| {
        (x as f64 * 0.3).sin() * 100.0 + y as f64 - z as f64 * 0.5
    })?;
    for dt in [
        DataType::Float64,
        DataType::Float32,
        DataType::Int16,
        DataType::Uint8,
    ] {
        for ext in ["nii", "nii.gz"] {
            let path = dir.path().join(format!("volume_{dt:?}.{ext}"));
            write_volume(&v, &path, dt)?;
            let back = read_volume(&path)?;
            let err = back
                .data()
                .iter()
                .zip(v.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let size = std::fs::metadata(&path)?.len();
            println!(
                "{dt:?} .{ext}: {size} bytes, max error {err:.3e}, spacing {:?}",
                back.spacing()
            );
        }
    }
    Ok(())
}
