use colorclass::classgrid::{self, ClassMap, GridParams};
use colorclass::classopt::{self, ClassHistogram, Threshold};
use colorclass::colorspace::{lab_pixel_to_rgb, rgb_pixel_to_lab};
use colorclass::harmonize::{self, HarmonizeParams, SegmentMaskSet};
use colorclass::metrics;
use colorclass::weighting::{self, BatchStats, ClassDistribution};
use colorclass::AbPlanes;
use proptest::prelude::*;

fn alpha() -> impl Strategy<Value = u32> {
    prop::sample::select(vec![4u32, 6, 8, 10, 12, 14])
}

proptest! {
    #[test]
    fn rgb_lab_round_trip(r: u8, g: u8, b: u8) {
        prop_assert_eq!(lab_pixel_to_rgb(rgb_pixel_to_lab([r, g, b])), [r, g, b]);
    }

    #[test]
    fn quantization_error_bounded(alpha in alpha(), a in -108.0f64..108.0, b in -108.0f64..108.0) {
        let g = GridParams::new(alpha).unwrap();
        let (da, db) = g.decode(g.encode(a, b)).unwrap();
        let half = f64::from(alpha) / 2.0;
        prop_assert!((da - a).abs() <= half && (db - b).abs() <= half);
    }

    #[test]
    fn same_cell_same_class(alpha in alpha(), ca in 0u32..16, cb in 0u32..16, fa in 0.0f64..1.0, fb in 0.0f64..1.0) {
        let g = GridParams::new(alpha).unwrap();
        let (ca, cb) = (ca % g.delta, cb % g.delta);
        let lo = |c: u32| f64::from(c * alpha) - f64::from(g.beta);
        let a = lo(ca) + fa * f64::from(alpha) * 0.999;
        let b = lo(cb) + fb * f64::from(alpha) * 0.999;
        prop_assert_eq!(g.encode(a, b), g.encode(lo(ca), lo(cb)));
        prop_assert_eq!(g.encode(a, b), cb * g.delta + ca);
    }

    #[test]
    fn histogram_merge_order_free(seed_maps in prop::collection::vec(prop::collection::vec(0u32..256, 1..20), 1..8)) {
        let g = GridParams::new(14).unwrap();
        let maps: Vec<ClassMap> = seed_maps.into_iter().map(|v| ClassMap::new(v.len(), 1, v).unwrap()).collect();
        let forward = classopt::accumulate_histogram(&maps, g).unwrap();
        let mut rev = maps.clone();
        rev.reverse();
        let backward = classopt::accumulate_histogram(&rev, g).unwrap();
        prop_assert_eq!(&forward, &backward);
        let mut merged = ClassHistogram::empty(g);
        for m in maps.iter().rev() {
            merged.merge(&classopt::accumulate_histogram([m], g).unwrap()).unwrap();
        }
        prop_assert_eq!(forward, merged);
    }

    #[test]
    fn selection_monotone_and_remap_idempotent(counts in prop::collection::vec(0u64..40, 256), lo in 1u64..20, extra in 0u64..20) {
        let g = GridParams::new(14).unwrap();
        let h = ClassHistogram::from_counts(g, counts).unwrap();
        let hi = lo + extra;
        if let (Ok(a), Ok(b)) = (classopt::select_classes(&h, Threshold::Count(lo)), classopt::select_classes(&h, Threshold::Count(hi))) {
            prop_assert!(b.approved.iter().all(|c| a.approved.contains(c)));
            let m = ClassMap::new(256, 1, (0..256).collect()).unwrap();
            let once = classopt::remap_map(&m, &a).unwrap();
            prop_assert_eq!(classopt::remap_map(&once, &a).unwrap(), once.clone());
            prop_assert!(once.classes.iter().all(|&c| a.is_approved(c)));
            a.validate().unwrap();
        }
    }

    #[test]
    fn weights_positive_monotone_capped(counts in prop::collection::vec(0u64..1000, 2..40), p in 1.0f64..50.0) {
        prop_assume!(counts.iter().sum::<u64>() > 0);
        let s = BatchStats::from_counts(counts.clone()).unwrap();
        let w = weighting::batch_weights(&s, p).unwrap();
        prop_assert!(w.weights.iter().all(|&x| x > 0.0 && x.is_finite()));
        for i in 0..counts.len() {
            for j in 0..counts.len() {
                if counts[i] <= counts[j] {
                    prop_assert!(w.weights[i] >= w.weights[j]);
                }
            }
        }
        let max_n = *counts.iter().max().unwrap() as f64;
        let cap = s.total as f64 / (w.psi + max_n / w.psi);
        for (i, &n) in counts.iter().enumerate() {
            prop_assert!(w.weights[i] <= cap * (1.0 + 1e-12));
            if (n as f64) <= w.psi {
                prop_assert!((w.weights[i] - cap).abs() <= cap * 1e-12);
            }
        }
    }

    #[test]
    fn softmax_normalized_and_shift_invariant(logits in prop::collection::vec(-30.0f64..30.0, 12), k in -100.0f64..100.0) {
        let d = ClassDistribution::new(2, 1, 6, logits.clone()).unwrap();
        let p = weighting::softmax(&d);
        for row in p.pixels() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
        }
        let shifted = ClassDistribution::new(2, 1, 6, logits.iter().map(|v| v + k).collect()).unwrap();
        let q = weighting::softmax(&shifted);
        for (a, b) in p.data.iter().zip(&q.data) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_weighted_ce_is_scaled_ce(logits in prop::collection::vec(-5.0f64..5.0, 16 * 4), truth in prop::collection::vec(0u32..4, 16)) {
        let d = weighting::softmax(&ClassDistribution::new(4, 4, 4, logits).unwrap());
        let t = ClassMap::new(4, 4, truth).unwrap();
        let uni = weighting::uniform_weights(4).unwrap();
        let ones = uni.scaled(4.0);
        let a = weighting::weighted_ce_loss(&d, &t, &uni, weighting::Reduction::Mean).unwrap();
        let b = weighting::weighted_ce_loss(&d, &t, &ones, weighting::Reduction::Mean).unwrap();
        prop_assert!((a * 4.0 - b).abs() < 1e-12);
    }

    #[test]
    fn metrics_set_semantics(v in prop::collection::vec(0u32..50, 1..200), rot in 0usize..200) {
        let n = v.len();
        let m = ClassMap::new(n, 1, v.clone()).unwrap();
        let mut p = v.clone();
        p.rotate_left(rot % n);
        let pm = ClassMap::new(n, 1, p).unwrap();
        prop_assert_eq!(metrics::cnr(&m, &m).unwrap(), 1.0);
        prop_assert_eq!(metrics::unique_classes(&m), metrics::unique_classes(&pm));
        prop_assert!(metrics::ccar(&m, 50).unwrap().ratio <= 1.0);
        let (m, pm) = ([m], [pm]);
        prop_assert_eq!(metrics::tar(&m, &pm).unwrap(), metrics::tar(&pm, &m).unwrap());
    }

    #[test]
    fn harmonize_locality_and_bound(
        a in prop::collection::vec(-60.0f64..60.0, 48),
        b in prop::collection::vec(-60.0f64..60.0, 48),
        labels in prop::collection::vec(0u16..4, 48),
        da in 0.0f64..20.0,
        db in 0.0f64..20.0,
    ) {
        prop_assume!(labels.iter().any(|&l| l != 0));
        let ab = AbPlanes::new(8, 6, a, b).unwrap();
        let masks = SegmentMaskSet::from_label_map(8, 6, &labels).unwrap();
        let params = HarmonizeParams { delta_a: da, delta_b: db };
        let out = harmonize::harmonize(&ab, &masks, &params).unwrap();
        for (i, &l) in labels.iter().enumerate() {
            if l == 0 {
                prop_assert_eq!(out.a[i].to_bits(), ab.a[i].to_bits());
                prop_assert_eq!(out.b[i].to_bits(), ab.b[i].to_bits());
            }
        }
        for m in masks.masks() {
            let ma = harmonize::segment_mode(&out.a, m).unwrap();
            let mb = harmonize::segment_mode(&out.b, m).unwrap();
            for i in (0..48).filter(|&i| m[i]) {
                prop_assert!((out.a[i] - ma).abs() <= da);
                prop_assert!((out.b[i] - mb).abs() <= db);
            }
        }
        prop_assert_eq!(harmonize::harmonize(&out, &masks, &params).unwrap(), out.clone());
        let huge = HarmonizeParams { delta_a: f64::INFINITY, delta_b: 1e300 };
        prop_assert_eq!(harmonize::harmonize(&ab, &masks, &huge).unwrap(), ab);
    }
}

#[test]
fn decode_map_inverts_encode_on_centers() {
    let g = GridParams::new(6).unwrap();
    let m = ClassMap::new(36, 36, (0..1296).collect()).unwrap();
    let ab = classgrid::decode_map(&m, &g).unwrap();
    assert_eq!(classgrid::encode_planes(&ab, &g), m);
}
