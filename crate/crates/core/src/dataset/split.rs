use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::manifest::Manifest;
use crate::error::{invalid, Result};
use crate::rng::{SeededRng, Stage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Train, validation and test fractions.
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(fractions: [f64; 3], seed: u64) -> Result<Self> {
        let s = Self { fractions, seed };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fractions.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(invalid(format!(
                "split fractions {:?} must be nonnegative",
                self.fractions
            )));
        }
        let sum: f64 = self.fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("split fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// `(floor(f_train N), floor(f_val N), remainder)`.
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        // The epsilon keeps products such as 0.1 * 830 from flooring to 82.
        let take = |f: f64| ((f * n as f64 + 1e-9).floor() as usize).min(n);
        let train = take(self.fractions[0]);
        let val = take(self.fractions[1]).min(n - train);
        [train, val, n - train - val]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

/// Sorts the ids, shuffles them with the split seed and cuts them into
/// train, validation and test lists.
pub fn split_case_ids(ids: &[String], spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    if ids.is_empty() {
        return Err(invalid("cannot split an empty case list"));
    }
    let mut ids = ids.to_vec();
    ids.sort();
    ids.dedup();
    ids.shuffle(&mut SeededRng::for_stage(spec.seed, Stage::Split));
    let [a, b, _] = spec.sizes(ids.len());
    let test = ids.split_off(a + b);
    let val = ids.split_off(a);
    Ok(Split {
        train: ids,
        val,
        test,
    })
}

/// Splits the successfully generated cases of a manifest.
pub fn split_manifest(m: &Manifest, spec: &SplitSpec) -> Result<Split> {
    let ids: Vec<String> = m.ok_cases().map(|c| c.case_id.clone()).collect();
    split_case_ids(&ids, spec)
}
