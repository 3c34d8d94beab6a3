use approx::assert_relative_eq;
use proptest::prelude::*;

use ulfsim::bands::{band_energy_fractions, band_masks, RadialBandSpec};
use ulfsim::dataset::{split_case_ids, SplitSpec};
use ulfsim::fft::{fft3_centered, fft3_real, ifft3_centered};
use ulfsim::kspace::{bandwidth_crop, make_undersampling_mask_along, Axis};
use ulfsim::losses::{loss_gradient, loss_kspace, loss_l1, loss_total, LossConfig};
use ulfsim::metrics::{
    assd, dice, hd95, midranks, radial_power_spectrum, rank_stats, surface_distances,
};
use ulfsim::metrics::{psnr, ssim, SsimParams};
use ulfsim::nifti::{encode_volume, read_volume_bytes, DataType};
use ulfsim::rng::SeededRng;
use ulfsim::sampling::{sample_params, ParamRanges};
use ulfsim::{SegMask, Shape, Volume};

fn shape_strategy(lo: usize, hi: usize) -> impl Strategy<Value = Shape> {
    [lo..=hi, lo..=hi, lo..=hi]
}

fn volume_strategy(lo: usize, hi: usize) -> impl Strategy<Value = Volume> {
    (shape_strategy(lo, hi), [0.5..2.0f64, 0.5..2.0, 0.5..2.0]).prop_flat_map(|(shape, spacing)| {
        let n = shape.iter().product::<usize>();
        prop::collection::vec(-1.0..1.0f64, n)
            .prop_map(move |d| Volume::new(d, shape, spacing).unwrap())
    })
}

fn pair_strategy(lo: usize, hi: usize) -> impl Strategy<Value = (Volume, Volume)> {
    volume_strategy(lo, hi).prop_flat_map(|a| {
        let (shape, spacing) = (a.shape(), a.spacing());
        prop::collection::vec(-1.0..1.0f64, a.len())
            .prop_map(move |d| (a.clone(), Volume::new(d, shape, spacing).unwrap()))
    })
}

fn mask_pair_strategy() -> impl Strategy<Value = (SegMask, SegMask)> {
    (shape_strategy(3, 8), [0.5..2.0f64, 0.5..2.0, 0.5..2.0]).prop_flat_map(|(shape, spacing)| {
        let n = shape.iter().product::<usize>();
        (
            prop::collection::vec(0..2u32, n),
            prop::collection::vec(0..2u32, n),
        )
            .prop_map(move |(a, b)| {
                (
                    SegMask::new(a, shape, spacing).unwrap(),
                    SegMask::new(b, shape, spacing).unwrap(),
                )
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fft_round_trip_and_parseval(v in volume_strategy(1, 9)) {
        let k = fft3_real(&v).unwrap();
        let back = ifft3_centered(&k).unwrap();
        for (a, b) in back.data().iter().zip(v.data()) {
            prop_assert!((a.re - b).abs() < 1e-12 && a.im.abs() < 1e-12);
        }
        let image: f64 = v.data().iter().map(|x| x * x).sum();
        let spectrum: f64 = k.data().iter().map(|c| c.norm_sqr()).sum();
        prop_assert!((spectrum - v.len() as f64 * image).abs() <= 1e-9 * spectrum.max(1e-300));
        let again = fft3_centered(&back).unwrap();
        for (a, b) in again.data().iter().zip(k.data()) {
            prop_assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn bands_partition_the_grid(shape in shape_strategy(2, 12)) {
        let masks = band_masks(shape, &RadialBandSpec::default()).unwrap();
        for i in 0..shape.iter().product::<usize>() {
            prop_assert_eq!(masks.iter().filter(|m| m[i]).count(), 1);
        }
    }

    #[test]
    fn band_fractions_sum_to_one(v in volume_strategy(2, 10)) {
        let k = fft3_real(&v).unwrap();
        let f = band_energy_fractions(&k, &RadialBandSpec::default()).unwrap();
        prop_assert!(f.iter().all(|x| *x >= 0.0));
        prop_assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectrum_conserves_energy(v in volume_strategy(2, 10), bins in 1usize..20) {
        let s = radial_power_spectrum(&v, bins).unwrap();
        let total: f64 = fft3_real(&v).unwrap().data().iter().map(|c| c.norm_sqr()).sum();
        prop_assert!((s.total() - total).abs() <= 1e-9 * total.max(1e-300));
        prop_assert_eq!(s.counts.iter().sum::<usize>(), v.len());
    }

    #[test]
    fn crop_is_idempotent(v in volume_strategy(2, 10), rho in 0.1..1.0f64) {
        let k = fft3_real(&v).unwrap();
        let once = bandwidth_crop(&k, rho).unwrap();
        prop_assert_eq!(bandwidth_crop(&once, rho).unwrap(), once);
    }

    #[test]
    fn mask_fraction_tracks_acceleration(
        na in 16usize..48,
        nb in 16usize..48,
        r in 2u32..5,
        cf in 0.1..0.3f64,
        seed in any::<u64>(),
    ) {
        let m = make_undersampling_mask_along([na, nb, 3], Axis::Z, r, cf, &mut SeededRng::new(seed, 0)).unwrap();
        let expected = ((na * nb) as f64 / r as f64).round() / (na * nb) as f64;
        prop_assert!((m.achieved_fraction() - expected).abs() < 1e-12);
    }

    #[test]
    fn losses_are_non_negative((a, b) in pair_strategy(2, 7)) {
        let cfg = LossConfig::default();
        prop_assert!(loss_l1(&a, &b).unwrap() >= 0.0);
        prop_assert!(loss_kspace(&a, &b, &cfg).unwrap().value >= 0.0);
        prop_assert!(loss_gradient(&a, &b, a.spacing()).unwrap() >= 0.0);
        let bd = loss_total(&a, &b, &cfg).unwrap();
        prop_assert!(bd.total >= 0.0);
        prop_assert!(bd.per_band.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn l1_is_symmetric((a, b) in pair_strategy(2, 7)) {
        assert_relative_eq!(loss_l1(&a, &b).unwrap(), loss_l1(&b, &a).unwrap(), max_relative = 1e-14);
    }

    #[test]
    fn psnr_and_ssim_identity(v in volume_strategy(11, 13)) {
        prop_assert_eq!(psnr(&v, &v, 2.0).unwrap(), f64::INFINITY);
        let s = ssim(&v, &v, &SsimParams::with_data_range(2.0)).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dice_symmetric_and_bounded((a, b) in mask_pair_strategy()) {
        let d = dice(&a, &b, 1).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, dice(&b, &a, 1).unwrap());
    }

    #[test]
    fn surface_metrics_symmetric_and_ordered((a, b) in mask_pair_strategy()) {
        prop_assume!(a.count(1) > 0 && b.count(1) > 0);
        let h = hd95(&a, &b, 1).unwrap();
        prop_assert!((h - hd95(&b, &a, 1).unwrap()).abs() < 1e-12);
        prop_assert!((assd(&a, &b, 1).unwrap() - assd(&b, &a, 1).unwrap()).abs() < 1e-12);
        let mut d = surface_distances(&a, &b, 1).unwrap();
        d.sort_by(f64::total_cmp);
        let median = ulfsim::metrics::seg::percentile(&d, 0.5);
        prop_assert!(h >= median - 1e-12);
        prop_assert!(h <= d[d.len() - 1] + 1e-12);
    }

    #[test]
    fn surface_distances_scale_with_spacing((a, b) in mask_pair_strategy(), c in 0.5..3.0f64) {
        prop_assume!(a.count(1) > 0 && b.count(1) > 0);
        let s = a.spacing().map(|x| x * c);
        let (sa, sb) = (a.with_spacing(s).unwrap(), b.with_spacing(s).unwrap());
        assert_relative_eq!(hd95(&sa, &sb, 1).unwrap(), c * hd95(&a, &b, 1).unwrap(), max_relative = 1e-12, epsilon = 1e-12);
        assert_relative_eq!(assd(&sa, &sb, 1).unwrap(), c * assd(&a, &b, 1).unwrap(), max_relative = 1e-12, epsilon = 1e-12);
    }

    #[test]
    fn split_is_a_partition(n in 0usize..300, seed in any::<u64>(), a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let (train, val) = (a * (1.0 - b), a * b);
        let spec = SplitSpec::new([train, val, 1.0 - train - val], seed).unwrap();
        let ids: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
        let split = split_case_ids(&ids, &spec).unwrap();
        let [t, v, _] = spec.sizes(n);
        prop_assert_eq!((split.train.len(), split.val.len()), (t, v));
        let mut all: Vec<String> = split.train.into_iter().chain(split.val).chain(split.test).collect();
        all.sort();
        let mut sorted = ids.clone();
        sorted.sort();
        prop_assert_eq!(all, sorted);
    }

    #[test]
    fn kendall_w_in_unit_interval(rows in prop::collection::vec(prop::collection::vec(0..4u8, 5), 2..6)) {
        let matrix: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| midranks(&r.iter().map(|&x| x as f64).collect::<Vec<_>>()))
            .collect();
        if let Ok(s) = rank_stats(&matrix) {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&s.kendall_w));
            prop_assert!((0.0..=1.0).contains(&s.p_value));
        }
    }

    #[test]
    fn sampled_parameters_respect_ranges(global in any::<u64>(), case in 0u64..1000) {
        let p = sample_params(&mut SeededRng::for_case(global, case, ulfsim::rng::Stage::Params));
        prop_assert!(ParamRanges::default().violations(&p).is_empty());
    }

    #[test]
    fn float_nifti_round_trip_is_exact(v in volume_strategy(1, 6)) {
        let back = read_volume_bytes(&encode_volume(&v, DataType::Float64)).unwrap();
        prop_assert_eq!(back.data(), v.data());
        prop_assert_eq!(back.shape(), v.shape());
    }
}
