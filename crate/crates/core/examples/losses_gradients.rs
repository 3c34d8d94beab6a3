//! Evaluates the spatial-frequency training objective and takes a few
//! subgradient-descent steps with a decaying step size.

use ulfsim::losses::{loss_total, loss_total_grad, LossConfig};
use ulfsim::Volume;

fn main() -> ulfsim::Result<()> {
    let target = Volume::from_fn([16, 16, 16], [1.0; 3], |x, y, z| {
        ((x as f64 * 0.4).sin() + (y as f64 * 0.3).cos() + z as f64 * 0.05).abs()
    })?;
    let mut pred = target.map(|v| 0.8 * v + 0.1)?;
    let cfg = LossConfig::default();
    for step in 0..8 {
        let l = loss_total(&pred, &target, &cfg)?;
        println!(
            "step {step}: total {:.5}  img {:.5}  k {:.5}  grad {:.5}  bands {:.4} {:.4} {:.4}",
            l.total, l.l_img, l.l_k, l.l_grad, l.per_band[0], l.per_band[1], l.per_band[2]
        );
        let lr = 0.2 / (step + 1) as f64;
        let g = loss_total_grad(&pred, &target, &cfg)?;
        let data = pred
            .data()
            .iter()
            .zip(g.data())
            .map(|(p, d)| p - lr * d)
            .collect();
        pred = Volume::new(data, pred.shape(), pred.spacing())?;
    }
    Ok(())
}
