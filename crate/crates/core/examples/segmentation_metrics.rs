//! Dice, HD95, ASSD and RVE between two overlapping spheres.

use ulfsim::metrics::{assd, dice, hd95, rve};
use ulfsim::SegMask;

fn sphere(centre: [f64; 3], radius: f64) -> SegMask {
    SegMask::from_fn([40, 40, 30], [1.0, 1.0, 2.0], |x, y, z| {
        let d2 = (x as f64 - centre[0]).powi(2)
            + (y as f64 - centre[1]).powi(2)
            + (z as f64 - centre[2]).powi(2);
        (d2 <= radius * radius) as u32
    })
    .unwrap()
}

fn main() -> ulfsim::Result<()> {
    let reference = sphere([20.0, 20.0, 15.0], 9.0);
    for (shift, radius) in [(0.0, 9.0), (2.0, 9.0), (0.0, 10.0), (4.0, 8.0)] {
        let pred = sphere([20.0 + shift, 20.0, 15.0], radius);
        println!(
            "shift {shift} radius {radius}: dice {:.4}  hd95 {:.3} mm  assd {:.3} mm  rve {:+.2}%",
            dice(&pred, &reference, 1)?,
            hd95(&pred, &reference, 1)?,
            assd(&pred, &reference, 1)?,
            rve(&pred, &reference, 1)?
        );
    }
    Ok(())
}
