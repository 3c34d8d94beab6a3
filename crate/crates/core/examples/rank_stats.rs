//! Concordance of reader rankings: Kendall's W, Friedman test and Spearman rho.

use ulfsim::metrics::{midranks, rank_stats};

fn main() -> ulfsim::Result<()> {
    // Five readers score four reconstruction methods; higher score is better.
    let scores = [
        [3.0, 4.0, 2.0, 5.0],
        [2.5, 4.5, 2.0, 4.0],
        [3.0, 3.5, 1.0, 5.0],
        [2.0, 4.0, 3.0, 4.5],
        [3.0, 4.0, 2.0, 4.0],
    ];
    let ranks: Vec<Vec<f64>> = scores.iter().map(|row| midranks(row)).collect();
    for r in &ranks {
        println!("{r:?}");
    }
    let s = rank_stats(&ranks)?;
    println!("Kendall W       {:.4}", s.kendall_w);
    println!("Friedman chi2   {:.4}", s.friedman_chi2);
    println!("p-value         {:.4e}", s.p_value);
    println!("mean Spearman   {:.4}", s.mean_spearman_rho);
    Ok(())
}
