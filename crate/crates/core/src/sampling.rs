//! Per-volume random draw of degradation parameters.
//!
//! Draw order from the volume's parameter stream is fixed: T2, TE, B0
//! strength, rho, center fraction, acceleration, target SNR. Each continuous
//! value is `lo + u * (hi - lo)` with `u` the generator's uniform `[0, 1)`
//! double, so a degenerate range consumes a draw like any other. The
//! acceleration is a single weighted choice over `r_accel`. The seed of
//! the downstream stages is derived from the parameter stream's identity, not
//! drawn from it.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kspace::{Axis, DegradationParams, KspaceParams};
use crate::physics::{ImagePhysicsParams, DEFAULT_GRAD_COUPLING, DEFAULT_PHASE_SCALE};
use crate::rng::{case_seed, SeededRng};

pub type Range = [f64; 2];

pub const T2_RANGE: Range = [0.06, 0.10];
pub const TE_RANGE: Range = [0.08, 0.15];
pub const B0_STRENGTH_RANGE: Range = [0.02, 0.05];
pub const RHO_RANGE: Range = [0.45, 0.55];
pub const CENTER_FRACTION_RANGE: Range = [0.20, 0.30];
pub const TARGET_SNR_RANGE: Range = [4.0, 12.0];
pub const R_ACCEL_CHOICES: [u32; 2] = [2, 3];
/// Selection weights of [`R_ACCEL_CHOICES`]: R = 2 is preferred 70% of the time.
pub const R_ACCEL_WEIGHTS: [f64; 2] = [0.7, 0.3];

/// Sampling ranges plus the fixed physics constants applied to every draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamRanges {
    pub t2: Range,
    pub te: Range,
    pub b0_strength: Range,
    pub rho: Range,
    pub center_fraction: Range,
    pub target_snr: Range,
    pub r_accel: Vec<u32>,
    /// Relative selection weights, one per `r_accel` choice.
    pub r_accel_weights: Vec<f64>,
    /// When false, sampled records carry no noise stage.
    pub noise: bool,
    pub b0_correlation: Option<f64>,
    pub grad_coupling: f64,
    pub phase_scale: f64,
    pub coil_sensitivity: bool,
    pub readout_axis: Axis,
}

impl Default for ParamRanges {
    fn default() -> Self {
        Self {
            t2: T2_RANGE,
            te: TE_RANGE,
            b0_strength: B0_STRENGTH_RANGE,
            rho: RHO_RANGE,
            center_fraction: CENTER_FRACTION_RANGE,
            target_snr: TARGET_SNR_RANGE,
            r_accel: R_ACCEL_CHOICES.to_vec(),
            r_accel_weights: R_ACCEL_WEIGHTS.to_vec(),
            noise: true,
            b0_correlation: None,
            grad_coupling: DEFAULT_GRAD_COUPLING,
            phase_scale: DEFAULT_PHASE_SCALE,
            coil_sensitivity: true,
            readout_axis: Axis::X,
        }
    }
}

fn check_range(name: &str, r: Range) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(invalid(format!(
            "{name} range {r:?} must be finite with lo <= hi"
        )));
    }
    Ok(())
}

fn in_range(v: f64, r: Range) -> bool {
    v >= r[0] && v <= r[1]
}

impl ParamRanges {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("t2", self.t2),
            ("te", self.te),
            ("b0_strength", self.b0_strength),
            ("rho", self.rho),
            ("center_fraction", self.center_fraction),
            ("target_snr", self.target_snr),
        ] {
            check_range(name, r)?;
        }
        if self.r_accel.is_empty() || self.r_accel.contains(&0) {
            return Err(invalid(
                "r_accel choices must be a non-empty list of positive integers",
            ));
        }
        if self.r_accel_weights.len() != self.r_accel.len() {
            return Err(invalid(format!(
                "r_accel_weights has {} entries for {} r_accel choices",
                self.r_accel_weights.len(),
                self.r_accel.len()
            )));
        }
        WeightedIndex::new(&self.r_accel_weights)
            .map_err(|e| invalid(format!("r_accel_weights {:?}: {e}", self.r_accel_weights)))?;
        // Every corner of the box must yield a valid record.
        self.corner(0).validate()?;
        self.corner(1).validate()
    }

    fn corner(&self, i: usize) -> DegradationParams {
        self.build(
            [
                self.t2[i],
                self.te[i],
                self.b0_strength[i],
                self.rho[i],
                self.center_fraction[i],
                self.target_snr[i],
            ],
            self.r_accel[0],
            0,
        )
    }

    fn build(&self, v: [f64; 6], r_accel: u32, seed: u64) -> DegradationParams {
        DegradationParams {
            image: ImagePhysicsParams {
                t2: v[0],
                te: v[1],
                b0_strength: v[2],
                b0_correlation: self.b0_correlation,
                grad_coupling: self.grad_coupling,
                phase_scale: self.phase_scale,
                coil_sensitivity: self.coil_sensitivity,
            },
            kspace: KspaceParams {
                rho: v[3],
                center_fraction: v[4],
                target_snr: self.noise.then_some(v[5]),
                r_accel,
                readout_axis: self.readout_axis,
            },
            seed,
        }
    }

    /// Ranges that reproduce `p` exactly on every draw (seed aside).
    pub fn fixed(p: &DegradationParams) -> Self {
        let point = |v: f64| [v, v];
        Self {
            t2: point(p.image.t2),
            te: point(p.image.te),
            b0_strength: point(p.image.b0_strength),
            rho: point(p.kspace.rho),
            center_fraction: point(p.kspace.center_fraction),
            target_snr: point(p.kspace.target_snr.unwrap_or(TARGET_SNR_RANGE[0])),
            r_accel: vec![p.kspace.r_accel],
            r_accel_weights: vec![1.0],
            noise: p.kspace.target_snr.is_some(),
            b0_correlation: p.image.b0_correlation,
            grad_coupling: p.image.grad_coupling,
            phase_scale: p.image.phase_scale,
            coil_sensitivity: p.image.coil_sensitivity,
            readout_axis: p.kspace.readout_axis,
        }
    }

    /// Names of sampled fields of `p` that fall outside these ranges.
    pub fn violations(&self, p: &DegradationParams) -> Vec<&'static str> {
        let mut out = Vec::new();
        let checks = [
            ("t2", in_range(p.image.t2, self.t2)),
            ("te", in_range(p.image.te, self.te)),
            (
                "b0_strength",
                in_range(p.image.b0_strength, self.b0_strength),
            ),
            ("rho", in_range(p.kspace.rho, self.rho)),
            (
                "center_fraction",
                in_range(p.kspace.center_fraction, self.center_fraction),
            ),
            ("r_accel", self.r_accel.contains(&p.kspace.r_accel)),
            (
                "target_snr",
                match p.kspace.target_snr {
                    Some(s) => self.noise && in_range(s, self.target_snr),
                    None => !self.noise,
                },
            ),
        ];
        for (name, ok) in checks {
            if !ok {
                out.push(name);
            }
        }
        out
    }
}

fn uniform(rng: &mut SeededRng, r: Range) -> f64 {
    let u: f64 = rng.random();
    r[0] + u * (r[1] - r[0])
}

/// Draws one parameter record using the default ranges.
pub fn sample_params(rng: &mut SeededRng) -> DegradationParams {
    sample_params_with(rng, &ParamRanges::default())
}

pub fn sample_params_with(rng: &mut SeededRng, ranges: &ParamRanges) -> DegradationParams {
    let t2 = uniform(rng, ranges.t2);
    let te = uniform(rng, ranges.te);
    let b0 = uniform(rng, ranges.b0_strength);
    let rho = uniform(rng, ranges.rho);
    let cf = uniform(rng, ranges.center_fraction);
    let choice = WeightedIndex::new(&ranges.r_accel_weights).expect("validated weights");
    let r_accel = ranges.r_accel[choice.sample(rng)];
    let snr = uniform(rng, ranges.target_snr);
    let seed = case_seed(rng.seed(), rng.stream());
    ranges.build([t2, te, b0, rho, cf, snr], r_accel, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stage;

    #[test]
    fn draws_lie_in_ranges() {
        let ranges = ParamRanges::default();
        for i in 0..2000 {
            let mut rng = SeededRng::for_case(5, i, Stage::Params);
            let p = sample_params(&mut rng);
            assert!(ranges.violations(&p).is_empty(), "{p:?}");
            p.validate().unwrap();
        }
    }

    #[test]
    fn same_stream_same_record() {
        let a = sample_params(&mut SeededRng::for_case(1, 3, Stage::Params));
        let b = sample_params(&mut SeededRng::for_case(1, 3, Stage::Params));
        let c = sample_params(&mut SeededRng::for_case(1, 4, Stage::Params));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a.seed, c.seed);
    }

    #[test]
    fn fixed_ranges_reproduce_record() {
        let mut p = sample_params(&mut SeededRng::for_case(2, 0, Stage::Params));
        let fixed = ParamRanges::fixed(&p);
        fixed.validate().unwrap();
        let q = sample_params_with(&mut SeededRng::for_case(9, 1, Stage::Params), &fixed);
        p.seed = q.seed;
        assert_eq!(p, q);
    }

    #[test]
    fn noiseless_ranges() {
        let ranges = ParamRanges {
            noise: false,
            ..Default::default()
        };
        let p = sample_params_with(&mut SeededRng::new(1, 1), &ranges);
        assert_eq!(p.kspace.target_snr, None);
        assert!(ranges.violations(&p).is_empty());
        assert_eq!(ParamRanges::default().violations(&p), vec!["target_snr"]);
    }

    #[test]
    fn invalid_ranges_rejected() {
        let bad = ParamRanges {
            rho: [0.6, 0.5],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ParamRanges {
            rho: [0.5, 1.5],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ParamRanges {
            r_accel: vec![],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ParamRanges {
            r_accel_weights: vec![1.0],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ParamRanges {
            r_accel_weights: vec![0.0, 0.0],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn acceleration_prefers_two() {
        let n = 20_000;
        let twos = (0..n)
            .filter(|&i| {
                sample_params(&mut SeededRng::for_case(8, i, Stage::Params))
                    .kspace
                    .r_accel
                    == 2
            })
            .count() as f64;
        // Binomial(n, 0.7): four standard deviations is about 0.013.
        assert!((twos / n as f64 - 0.7).abs() < 0.013, "{twos}");
    }
}
