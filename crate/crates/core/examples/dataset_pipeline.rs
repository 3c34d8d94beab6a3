//! Generates a small corpus, splits it and evaluates degraded against clean.

use ulfsim::dataset::{
    evaluate_pairs, generate_dataset, split_manifest, Config, EvalOptions, Metric, SplitSpec,
};
use ulfsim::nifti::{write_volume, DataType};
use ulfsim::Volume;

fn main() -> ulfsim::Result<()> {
    let input = tempfile::tempdir()?;
    let output = tempfile::tempdir()?;
    for i in 0..6 {
        let v = Volume::from_fn([28, 28, 24], [1.0; 3], |x, y, z| {
            let d = ((x as f64 - 14.0 - i as f64 * 0.5).powi(2)
                + (y as f64 - 14.0).powi(2)
                + (z as f64 - 12.0).powi(2))
            .sqrt();
            0.5 * (1.0 - ((d - 8.0) / 1.5).tanh())
        })?;
        write_volume(
            &v,
            input.path().join(format!("sub-{i:02}.nii.gz")),
            DataType::Float32,
        )?;
    }
    let manifest = generate_dataset(input.path(), output.path(), 2024, &Config::default(), 2)?;
    for case in manifest.ok_cases() {
        let p = case.params.as_ref().unwrap();
        println!(
            "{}: rho {:.3}  R {}  snr {:.2}",
            case.case_id,
            p.kspace.rho,
            p.kspace.r_accel,
            p.kspace.target_snr.unwrap_or(f64::INFINITY)
        );
    }
    let split = split_manifest(&manifest, &SplitSpec::new([0.5, 0.25, 0.25], 7)?)?;
    println!(
        "train {:?}\nval {:?}\ntest {:?}",
        split.train, split.val, split.test
    );

    let report = evaluate_pairs(
        output.path(),
        input.path(),
        &[Metric::Psnr, Metric::Ssim],
        &EvalOptions {
            data_range: Some(1.0),
            label: 1,
        },
    )?;
    print!("{}", report.to_tsv());
    Ok(())
}
