//! Metrics compared with direct set arithmetic.

use std::collections::BTreeSet;

use proptest::prelude::*;
use ssmlab::eval::{evaluate_labels, iou, miou_shape};
use ssmlab::labeling::{aggregate_annotations, annotation_accuracy, AggregationPolicy, AnnotationSet};
use ssmlab::{ClassTable, LabelMap, Workers};

fn lm(v: Vec<u32>) -> LabelMap {
    LabelMap::new(v, ClassTable::landmarks()).unwrap()
}

fn support(v: &[u32], c: u32) -> BTreeSet<usize> {
    v.iter().enumerate().filter(|(_, &l)| l == c).map(|(i, _)| i).collect()
}

fn maps() -> impl Strategy<Value = (Vec<u32>, Vec<u32>)> {
    (1usize..120).prop_flat_map(|n| (prop::collection::vec(0u32..3, n), prop::collection::vec(0u32..3, n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn iou_matches_sets((g, p) in maps(), c in 0u32..3) {
        let (a, b) = (support(&g, c), support(&p, c));
        let union = a.union(&b).count();
        let got = iou(&lm(g.clone()), &lm(p.clone()), c).unwrap();
        if union == 0 {
            prop_assert_eq!(got, None);
        } else {
            prop_assert_eq!(got, Some(a.intersection(&b).count() as f64 / union as f64));
        }
    }

    #[test]
    fn accuracy_matches_sets((g, p) in maps(), c in 1u32..3) {
        let (a, t) = (support(&p, c), support(&g, c));
        let got = annotation_accuracy(&lm(p.clone()), &lm(g.clone()), c);
        if t.is_empty() {
            prop_assert!(got.is_err());
        } else {
            prop_assert_eq!(got.unwrap(), a.intersection(&t).count() as f64 / t.len() as f64);
        }
    }

    #[test]
    fn iou_is_symmetric_and_reflexive((g, p) in maps(), c in 0u32..3) {
        let (g, p) = (lm(g), lm(p));
        prop_assert_eq!(iou(&g, &p, c).unwrap(), iou(&p, &g, c).unwrap());
        if g.labels().contains(&c) {
            prop_assert_eq!(iou(&g, &g, c).unwrap(), Some(1.0));
        }
    }

    #[test]
    fn breaking_a_correct_vertex_never_helps((g, p) in maps(), pick in any::<prop::sample::Index>(), shift in 1u32..3) {
        let correct: Vec<usize> = (0..g.len()).filter(|&i| g[i] == p[i]).collect();
        prop_assume!(!correct.is_empty());
        let i = correct[pick.index(correct.len())];
        let mut worse = p.clone();
        worse[i] = (p[i] + shift) % 3;
        let c = g[i];
        let before = iou(&lm(g.clone()), &lm(p), c).unwrap().unwrap();
        let after = iou(&lm(g.clone()), &lm(worse), c).unwrap().unwrap();
        prop_assert!(after <= before);
    }

    #[test]
    fn disjoint_supports_score_zero(n in 2usize..100, split in any::<prop::sample::Index>()) {
        let k = 1 + split.index(n - 1);
        let g: Vec<u32> = (0..n).map(|i| (i < k) as u32).collect();
        let p: Vec<u32> = (0..n).map(|i| (i >= k) as u32).collect();
        prop_assert_eq!(iou(&lm(g), &lm(p), 1).unwrap(), Some(0.0));
    }

    #[test]
    fn report_means_are_row_means(shapes in prop::collection::vec(maps(), 1..6)) {
        let items: Vec<_> = shapes.into_iter().enumerate().map(|(i, (g, p))| (i, lm(g), lm(p))).collect();
        let r = evaluate_labels(&items, true, Workers::Sequential).unwrap();
        let mean = r.shapes.iter().map(|s| s.miou).sum::<f64>() / r.shapes.len() as f64;
        prop_assert!((r.mean_miou - mean).abs() < 1e-12);
        for (c, v) in &r.per_class {
            let rows: Vec<f64> = r.shapes.iter().filter_map(|s| s.iou.get(c).copied()).collect();
            prop_assert!((v - rows.iter().sum::<f64>() / rows.len() as f64).abs() < 1e-12);
        }
        for s in &r.shapes {
            prop_assert!(s.iou.values().all(|v| (0.0..=1.0).contains(v)));
            prop_assert_eq!(s.miou, miou_shape(&items[s.shape_id].1, &items[s.shape_id].2, true).unwrap());
        }
    }

    #[test]
    fn union_covers_every_annotator(maps in (1usize..40).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(0u32..3, n), 1..5))) {
        let set = AnnotationSet::new(
            "s",
            (0..maps.len()).map(|i| format!("a{i}")).collect(),
            maps.iter().cloned().map(lm).collect(),
        ).unwrap();
        let agg = aggregate_annotations(&set, AggregationPolicy::Union).unwrap();
        for (i, &l) in agg.labels().iter().enumerate() {
            let any = maps.iter().any(|m| m[i] != 0);
            prop_assert_eq!(l != 0, any);
            if l != 0 {
                prop_assert!(maps.iter().any(|m| m[i] == l));
            }
        }
    }
}
