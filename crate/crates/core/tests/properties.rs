//! Property tests for the spec-level invariants.

use proptest::prelude::*;

use perfquant_core::metrics::*;
use perfquant_core::phantom::concentration_to_signal;
use perfquant_core::series::{SeriesKind, TimeSeries};
use perfquant_core::tracer_kinetics::*;
use perfquant_core::volume::{Mask3D, Volume4D, VolumeHeader};

fn series(values: Vec<f64>, dt: f64, kind: SeriesKind) -> TimeSeries<f64> {
    TimeSeries::new(values, dt, kind).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn voxel_series_matches_four_loop_reference(
        nx in 1usize..5, ny in 1usize..5, nz in 1usize..4, nt in 2usize..6,
        seed in 0u64..1000,
    ) {
        let header = VolumeHeader {
            dims: [nx, ny, nz, nt],
            dt_s: 1.0,
            te_s: 0.03,
            voxel_mm: [1.0, 1.0, 1.0],
        };
        let n = header.n_samples();
        let data: Vec<f64> = (0..n).map(|i| ((i as u64).wrapping_mul(seed + 1) % 97) as f64).collect();
        let v = Volume4D::new(header, data).unwrap();
        // brute-force 4-loop gather must agree with the addressing rule
        for x in 0..nx {
            for y in 0..ny {
                for z in 0..nz {
                    let ts = v.voxel_series(x, y, z);
                    for t in 0..nt {
                        let mut k = 0usize;
                        let mut found = f64::NAN;
                        for tt in 0..nt {
                            for zz in 0..nz {
                                for yy in 0..ny {
                                    for xx in 0..nx {
                                        if xx == x && yy == y && zz == z && tt == t {
                                            found = v.data[k];
                                        }
                                        k += 1;
                                    }
                                }
                            }
                        }
                        prop_assert_eq!(ts.values[t], found);
                    }
                }
            }
        }
    }

    #[test]
    fn cbv_is_linear_in_concentration(
        vals in prop::collection::vec(0.0f64..0.1, 4..30),
        scale in 0.1f64..5.0,
    ) {
        let k = KineticConstants::<f64>::default();
        let c = series(vals.clone(), 1.0, SeriesKind::Concentration);
        let scaled = series(vals.iter().map(|v| v * scale).collect(), 1.0, SeriesKind::Concentration);
        let a = compute_cbv(&c, &k, 0.5);
        let b = compute_cbv(&scaled, &k, 0.5);
        prop_assert!((b - scale * a).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn convolution_is_bilinear(
        a in prop::collection::vec(0.0f64..1.0, 8..16),
        r in prop::collection::vec(-0.5f64..1.0, 8..16),
        lam in 0.1f64..4.0,
    ) {
        let n = a.len().min(r.len());
        let ca = series(a[..n].to_vec(), 1.0, SeriesKind::Concentration);
        let rr = series(r[..n].to_vec(), 1.0, SeriesKind::Residue);
        let base = convolve_forward(&ca, &rr).unwrap();
        let ca2 = series(ca.values.iter().map(|v| v * lam).collect(), 1.0, SeriesKind::Concentration);
        let left = convolve_forward(&ca2, &rr).unwrap();
        let rr2 = series(rr.values.iter().map(|v| v * lam).collect(), 1.0, SeriesKind::Residue);
        let right = convolve_forward(&ca, &rr2).unwrap();
        for i in 0..n {
            prop_assert!((left.values[i] - lam * base.values[i]).abs() < 1e-9);
            prop_assert!((right.values[i] - lam * base.values[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn residue_scaling_scales_cbf_and_fixes_tmax(
        r in prop::collection::vec(0.0f64..0.02, 5..40),
        lam in 0.1f64..10.0,
    ) {
        prop_assume!(r.iter().any(|&v| v > 0.0));
        let k = KineticConstants::<f64>::default();
        let rr = series(r.clone(), 1.5, SeriesKind::Residue);
        let scaled = series(r.iter().map(|v| v * lam).collect(), 1.5, SeriesKind::Residue);
        let f1 = compute_cbf(&rr, &k, 1.0).unwrap();
        let f2 = compute_cbf(&scaled, &k, 1.0).unwrap();
        prop_assert!((f2 - lam * f1).abs() <= 1e-9 * f1.abs().max(1.0));
        prop_assert_eq!(compute_tmax(&rr), compute_tmax(&scaled));
    }

    #[test]
    fn signal_concentration_round_trip(
        conc in prop::collection::vec(0.0f64..20.0, 2..40),
        s0 in 50.0f64..500.0,
        te in 0.01f64..0.1,
    ) {
        let k = KineticConstants::<f64>::default();
        let c = series(conc, 1.0, SeriesKind::Concentration);
        let s = concentration_to_signal(&c, s0, te, &k);
        let back = signal_to_concentration(&s, s0, te, &k).unwrap();
        for (a, b) in c.values.iter().zip(&back.values) {
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }
    }

    #[test]
    fn trapezoid_refinement_converges_quadratically(
        alpha in 1.5f64..4.0,
        beta in 0.8f64..2.0,
    ) {
        // analytic resampling of a gamma-variate bump; successive halvings
        // of dt must shrink the change by at least the second-order factor
        let f = |t: f64| {
            if t <= 0.0 { 0.0 } else {
                (t / (alpha * beta)).powf(alpha) * (alpha - t / beta).exp()
            }
        };
        let span = 40.0;
        let quad = |n: usize| {
            let dt = span / n as f64;
            integrate(&series((0..=n).map(|i| f(i as f64 * dt)).collect(), dt, SeriesKind::Concentration))
        };
        // the two error terms (interior dt^2, corner dt^(alpha+1)) have
        // opposite signs and can cancel at one resolution, so compare
        // error envelopes over pairs of resolutions 16x apart
        let exact = quad(1 << 17);
        let e = |n: usize| (quad(n) - exact).abs();
        let coarse = e(128).max(e(256));
        let fine = e(2048).max(e(4096));
        prop_assert!(fine <= coarse / 100.0 + 1e-13, "errors {coarse} -> {fine}");
    }

    #[test]
    fn pcc_is_invariant_under_positive_affine_maps(
        vals in prop::collection::vec(-10.0f64..10.0, 8..40),
        a in 0.1f64..5.0,
        b in -10.0f64..10.0,
    ) {
        let est: Vec<f64> = vals.iter().map(|v| v * 1.7 - 3.0).collect();
        prop_assume!(vals.iter().any(|&v| v != vals[0]));
        let dims = [vals.len(), 1, 1];
        let mask = Mask3D::new(dims, vec![1; vals.len()]).unwrap();
        let p1 = MaskedPair::new(&vals, &est, &mask, [1.0, 1.0, 1.0]).unwrap();
        let r1 = pcc(&p1).unwrap();
        let mapped: Vec<f64> = est.iter().map(|v| a * v + b).collect();
        let p2 = MaskedPair::new(&vals, &mapped, &mask, [1.0, 1.0, 1.0]).unwrap();
        let r2 = pcc(&p2).unwrap();
        prop_assert!((r1 - r2).abs() < 1e-9);
    }

    #[test]
    fn scc_is_invariant_under_monotone_maps(
        vals in prop::collection::vec(-5.0f64..5.0, 8..30),
    ) {
        prop_assume!(vals.iter().any(|&v| v != vals[0]));
        let est: Vec<f64> = vals.iter().map(|v| v + 0.3 * (v * 3.0).sin()).collect();
        prop_assume!(est.iter().any(|&v| v != est[0]));
        let dims = [vals.len(), 1, 1];
        let mask = Mask3D::new(dims, vec![1; vals.len()]).unwrap();
        let p1 = MaskedPair::new(&vals, &est, &mask, [1.0, 1.0, 1.0]).unwrap();
        let r1 = scc(&p1).unwrap();
        // exp is strictly increasing, so ranks are unchanged
        let mapped: Vec<f64> = est.iter().map(|v| v.exp()).collect();
        let p2 = MaskedPair::new(&vals, &mapped, &mask, [1.0, 1.0, 1.0]).unwrap();
        let r2 = scc(&p2).unwrap();
        prop_assert!((r1 - r2).abs() < 1e-9);
    }

    #[test]
    fn auc_matches_pair_counting_on_random_instances(
        scores in prop::collection::vec(0.0f64..12.0, 6..60),
        lesion_bits in prop::collection::vec(any::<bool>(), 6..60),
    ) {
        let n = scores.len().min(lesion_bits.len());
        let scores = &scores[..n];
        // quantize so ties actually occur
        let scores: Vec<f64> = scores.iter().map(|v| (v * 2.0).round() / 2.0).collect();
        let lesion_bits = &lesion_bits[..n];
        let n_pos = lesion_bits.iter().filter(|&&b| b).count();
        prop_assume!(n_pos > 0 && n_pos < n);

        let dims = [n, 1, 1];
        let brain = Mask3D::new(dims, vec![1; n]).unwrap();
        let lesion = Mask3D::new(dims, lesion_bits.iter().map(|&b| b as u8).collect()).unwrap();
        let (_, auc) = roc_and_auc(&scores, &lesion, &brain).unwrap();

        let mut acc = 0.0;
        let mut pairs = 0.0;
        for i in 0..n {
            if !lesion_bits[i] { continue; }
            for j in 0..n {
                if lesion_bits[j] { continue; }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    acc += 1.0;
                } else if scores[i] == scores[j] {
                    acc += 0.5;
                }
            }
        }
        prop_assert!((auc - acc / pairs).abs() < 1e-9, "auc {} vs oracle {}", auc, acc / pairs);
    }

    #[test]
    fn threshold_selection_is_rescale_invariant(
        scores in prop::collection::vec(0.0f64..12.0, 6..40),
        lesion_bits in prop::collection::vec(any::<bool>(), 6..40),
    ) {
        let n = scores.len().min(lesion_bits.len());
        let scores = &scores[..n];
        let lesion_bits = &lesion_bits[..n];
        let n_pos = lesion_bits.iter().filter(|&&b| b).count();
        prop_assume!(n_pos > 0 && n_pos < n);
        let dims = [n, 1, 1];
        let brain = Mask3D::new(dims, vec![1; n]).unwrap();
        let lesion = Mask3D::new(dims, lesion_bits.iter().map(|&b| b as u8).collect()).unwrap();

        let (roc, _) = roc_and_auc(scores, &lesion, &brain).unwrap();
        let thr = select_threshold(&roc).unwrap();
        let seg = segment_hypoperfusion(scores, &brain, thr.max(0.0)).unwrap();

        // strictly increasing map: the selected operating point induces the
        // same segmentation
        let mapped: Vec<f64> = scores.iter().map(|v| v * v + 2.0 * v).collect();
        let (roc2, _) = roc_and_auc(&mapped, &lesion, &brain).unwrap();
        let thr2 = select_threshold(&roc2).unwrap();
        let seg2 = segment_hypoperfusion(&mapped, &brain, thr2.max(0.0)).unwrap();
        prop_assert_eq!(seg, seg2);
    }

    #[test]
    fn overlap_metrics_are_symmetric(
        a_bits in prop::collection::vec(any::<bool>(), 24),
        b_bits in prop::collection::vec(any::<bool>(), 24),
    ) {
        let dims = [4, 3, 2];
        let a = Mask3D::new(dims, a_bits.iter().map(|&b| b as u8).collect()).unwrap();
        let b = Mask3D::new(dims, b_bits.iter().map(|&b| b as u8).collect()).unwrap();
        prop_assert_eq!(dice(&a, &b).unwrap(), dice(&b, &a).unwrap());
        prop_assert_eq!(iou(&a, &b).unwrap(), iou(&b, &a).unwrap());
        if a.count() > 0 && b.count() > 0 {
            let mm = [1.0, 1.3, 2.0];
            prop_assert_eq!(hd95(&a, &b, mm).unwrap(), hd95(&b, &a, mm).unwrap());
        }
    }

    #[test]
    fn ssim_is_symmetric_with_shared_range(
        vals in prop::collection::vec(0.0f64..10.0, 36),
        other in prop::collection::vec(0.0f64..10.0, 36),
    ) {
        let dims = [6, 6, 1];
        let mask = Mask3D::new(dims, vec![1; 36]).unwrap();
        prop_assume!(vals.iter().any(|&v| v != vals[0]));
        prop_assume!(other.iter().any(|&v| v != other[0]));
        let p1 = MaskedPair::new(&vals, &other, &mask, [1.0, 1.0, 1.0]).unwrap();
        let p2 = MaskedPair::new(&other, &vals, &mask, [1.0, 1.0, 1.0]).unwrap();
        let s1 = ssim_with_range(&p1, SsimRange::Shared).unwrap();
        let s2 = ssim_with_range(&p2, SsimRange::Shared).unwrap();
        prop_assert!((s1 - s2).abs() < 1e-12);
    }
}
