use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use proptest::prelude::*;
use zshar::data::imu::{format_imu, parse_imu};
use zshar::data::semantics::{format_semantics, parse_semantics};
use zshar::data::skeleton::{format_skeleton_csv, parse_skeleton_csv};
use zshar::data::{
    build_semantic_set, kfold_split, resample_skeleton, train_val_split, ClassSemanticSet, ImuWindow,
    SkeletonSequence, SuperClassMap,
};
use zshar::metrics::{avg_accuracy_per_class, dfd, dtw_distance, mahalanobis_cost, CostModel};
use zshar::model::{class_probabilities, similarity_scores};
use zshar::nn::params::clip_global_norm;
use zshar::nn::{Linear, Parameters, Tensor2};

fn seq_strategy(max_frames: usize, width: usize) -> impl Strategy<Value = Tensor2> {
    (1..=max_frames).prop_flat_map(move |n| {
        prop::collection::vec(-1.0f64..1.0, n * width).prop_map(move |d| Tensor2::from_vec(n, width, d).unwrap())
    })
}

fn seq(t: Tensor2) -> SkeletonSequence {
    let w = t.cols();
    SkeletonSequence::unchecked(t, w, 1, "x")
}

fn spd(width: usize) -> impl Strategy<Value = CostModel> {
    prop::collection::vec(-1.0f64..1.0, width * width).prop_map(move |a| {
        let a = Tensor2::from_vec(width, width, a).unwrap();
        let mut s = a.matmul(&a.transpose()).unwrap();
        for i in 0..width {
            for j in 0..i {
                let v = 0.5 * (s.get(i, j) + s.get(j, i));
                s.set(i, j, v);
                s.set(j, i, v);
            }
        }
        CostModel::from_covariance(s, 0.05).unwrap()
    })
}

proptest! {
    #[test]
    fn dtw_is_symmetric_and_zero_on_identity(
        (x, y, model) in (1usize..=4).prop_flat_map(|w| (seq_strategy(8, w), seq_strategy(8, w), spd(w)))
    ) {
        let (x, y) = (seq(x), seq(y));
        let xy = dtw_distance(&x, &y, &model).unwrap();
        let yx = dtw_distance(&y, &x, &model).unwrap();
        prop_assert!(xy >= 0.0);
        prop_assert!((xy - yx).abs() <= 1e-9 * xy.max(1.0));
        prop_assert!(dtw_distance(&x, &x, &model).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn dfd_is_symmetric_and_bounded(
        (p, q) in (1usize..=4).prop_flat_map(|w| (seq_strategy(8, w), seq_strategy(8, w)))
    ) {
        let (p, q) = (seq(p), seq(q));
        let d = dfd(&p, &q).unwrap();
        prop_assert_eq!(d, dfd(&q, &p).unwrap());
        prop_assert_eq!(dfd(&p, &p).unwrap(), 0.0);
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let (n, m) = (p.frames(), q.frames());
        let lower = dist(p.frame(0), q.frame(0)).max(dist(p.frame(n - 1), q.frame(m - 1)));
        let mut upper: f64 = 0.0;
        for i in 0..n {
            for j in 0..m {
                upper = upper.max(dist(p.frame(i), q.frame(j)));
            }
        }
        prop_assert!(d >= lower && d <= upper);
    }

    #[test]
    fn mahalanobis_is_a_symmetric_nonnegative_cost(
        (a, b, model) in (1usize..=5).prop_flat_map(|w| (
            prop::collection::vec(-2.0f64..2.0, w),
            prop::collection::vec(-2.0f64..2.0, w),
            spd(w),
        ))
    ) {
        let ab = mahalanobis_cost(&a, &b, &model).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - mahalanobis_cost(&b, &a, &model).unwrap()).abs() <= 1e-12 * ab.max(1.0));
        prop_assert_eq!(mahalanobis_cost(&a, &a, &model).unwrap(), 0.0);
    }

    #[test]
    fn probabilities_are_a_distribution_and_scale_free(
        (f, vecs, scales) in (1usize..=6, 2usize..=6).prop_flat_map(|(e, k)| (
            prop::collection::vec(-5.0f64..5.0, e),
            prop::collection::vec(prop::collection::vec(0.1f64..1.0, e), k),
            prop::collection::vec(0.01f64..100.0, k),
        ))
    ) {
        let e = f.len();
        let named = |scale: &dyn Fn(usize) -> f64| -> ClassSemanticSet {
            let m: BTreeMap<String, Vec<f64>> = vecs
                .iter()
                .enumerate()
                .map(|(k, v)| (format!("c{k}"), v.iter().map(|x| x * scale(k)).collect()))
                .collect();
            ClassSemanticSet::from_vectors(e, m).unwrap()
        };
        let beta = similarity_scores(&f, &named(&|_| 1.0)).unwrap();
        let p = class_probabilities(&beta).unwrap();
        prop_assert!((p.values().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(p.values().all(|v| (0.0..=1.0).contains(v)));
        let scaled = similarity_scores(&f, &named(&|k| scales[k])).unwrap();
        for (k, b) in &beta {
            prop_assert!((b - scaled[k]).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn macro_accuracy_ignores_duplication(
        pairs in prop::collection::vec((0u8..4, 0u8..4), 1..40),
        copies in 1usize..5,
    ) {
        let named: Vec<(String, String)> = pairs.iter().map(|(t, p)| (format!("c{t}"), format!("c{p}"))).collect();
        let once = avg_accuracy_per_class(&named).unwrap();
        let repeated: Vec<(String, String)> = named.iter().cloned().cycle().take(named.len() * copies).collect();
        prop_assert!((0.0..=1.0).contains(&once));
        prop_assert!((once - avg_accuracy_per_class(&repeated).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn skeleton_csv_round_trips(t in (2usize..10, 1usize..4, 1usize..4).prop_flat_map(|(n, j, k)| {
        prop::collection::vec(-1.5f64..1.5, n * j * k).prop_map(move |d| (Tensor2::from_vec(n, j * k, d).unwrap(), j, k))
    })) {
        let (coords, j, k) = t;
        let s = SkeletonSequence::new(coords, j, k, "walk").unwrap();
        let back = parse_skeleton_csv(&format_skeleton_csv(&s), j, k, "walk", Path::new("x.csv")).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn imu_csv_round_trips(windows in prop::collection::vec(
        (prop::collection::vec(-10.0f64..10.0, 12), prop::option::of(0u8..3)), 1..5
    )) {
        let ws: Vec<ImuWindow> = windows
            .into_iter()
            .enumerate()
            .map(|(i, (d, l))| {
                ImuWindow::new(format!("w{i}"), Tensor2::from_vec(4, 3, d).unwrap(), l.map(|c| format!("c{c}"))).unwrap()
            })
            .collect();
        prop_assert_eq!(parse_imu(&format_imu(&ws), Path::new("imu.csv")).unwrap(), ws);
    }

    #[test]
    fn semantics_json_round_trips_to_class_means(per_class in prop::collection::btree_map(
        "[a-z]{1,6}",
        prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 4), 1..5),
        1..5,
    )) {
        let text = format_semantics(4, &per_class);
        let parsed = parse_semantics(&text, Path::new("s.json")).unwrap();
        let built = build_semantic_set(&per_class).unwrap();
        for (class, list) in &per_class {
            let got = parsed.get(class).unwrap();
            for d in 0..4 {
                let mean = list.iter().map(|v| v[d]).sum::<f64>() / list.len() as f64;
                prop_assert!((got[d] - mean).abs() <= 1e-9);
                prop_assert!((built.get(class).unwrap()[d] - mean).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn resampling_keeps_endpoints_and_range(
        (t, target) in (seq_strategy(12, 3), 2usize..40)
    ) {
        prop_assume!(t.rows() >= 2);
        let s = SkeletonSequence::unchecked(t, 3, 1, "x");
        let r = resample_skeleton(&s, target).unwrap();
        prop_assert_eq!(r.frames(), target);
        prop_assert_eq!(r.frame(0), s.frame(0));
        prop_assert_eq!(r.frame(target - 1), s.frame(s.frames() - 1));
        for c in 0..3 {
            let col: Vec<f64> = (0..s.frames()).map(|t| s.frame(t)[c]).collect();
            let (lo, hi) = col.iter().fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
            for t in 0..target {
                prop_assert!(r.frame(t)[c] >= lo - 1e-12 && r.frame(t)[c] <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn kfold_split_respects_super_classes(
        sizes in prop::collection::vec(2usize..5, 2..5),
        folds in 1usize..6,
        extra in 0usize..4,
        seed in any::<u64>(),
    ) {
        let mut map = BTreeMap::new();
        for (g, &n) in sizes.iter().enumerate() {
            for i in 0..n {
                map.insert(format!("g{g}c{i}"), format!("g{g}"));
            }
        }
        let classes: Vec<String> = map.keys().cloned().collect();
        let groups = sizes.len();
        let unseen = (groups + extra).min(classes.len() - groups);
        let scm = SuperClassMap::new(map.clone()).unwrap();
        let result = kfold_split(&classes, &scm, folds, unseen, seed).unwrap();
        prop_assert_eq!(result.len(), folds);
        let all: BTreeSet<String> = classes.iter().cloned().collect();
        let group_set: BTreeSet<&String> = map.values().collect();
        for f in &result {
            prop_assert!(f.seen.is_disjoint(&f.unseen));
            prop_assert_eq!(f.seen.union(&f.unseen).cloned().collect::<BTreeSet<_>>(), all.clone());
            prop_assert_eq!(f.unseen.len(), unseen);
            prop_assert_eq!(f.seen.iter().map(|c| &map[c]).collect::<BTreeSet<_>>(), group_set.clone());
            prop_assert_eq!(f.unseen.iter().map(|c| &map[c]).collect::<BTreeSet<_>>(), group_set.clone());
        }
        prop_assert_eq!(kfold_split(&classes, &scm, folds, unseen, seed).unwrap(), result);
    }

    #[test]
    fn train_val_split_partitions_and_keeps_training_samples(
        labels in prop::collection::vec(0u8..4, 2..60),
        fraction in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let names: Vec<String> = labels.iter().map(|l| format!("c{l}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let classes: Vec<&str> = refs.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let (train, val) = train_val_split(&refs, &classes, fraction, seed).unwrap();
        let mut all: Vec<usize> = train.iter().chain(&val).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..refs.len()).collect::<Vec<_>>());
        for c in &classes {
            prop_assert!(train.iter().any(|&i| refs[i] == *c));
        }
        prop_assert_eq!(train_val_split(&refs, &classes, fraction, seed).unwrap(), (train, val));
    }

    #[test]
    fn clipping_bounds_the_global_norm(
        w in prop::collection::vec(-100.0f64..100.0, 6),
        max_norm in 0.1f64..10.0,
    ) {
        let mut g = Linear::zeros(2, 3);
        g.weight.data_mut().copy_from_slice(&w);
        let before = g.global_norm();
        clip_global_norm(&mut g, max_norm);
        let after = g.global_norm();
        prop_assert!(after <= max_norm * (1.0 + 1e-12));
        if before <= max_norm {
            prop_assert_eq!(after, before);
        }
    }
}
