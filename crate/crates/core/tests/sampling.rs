use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssmlab::datagen::{fps, knn_indices, random_subset};
use ssmlab::spatial::KdTree;
use ssmlab::Point;

// Farthest-point sampling written longhand: recompute every min-distance
// from scratch at each step.
fn fps_oracle(points: &[Point], m: usize, start: usize) -> Vec<usize> {
    let mut chosen = vec![start];
    while chosen.len() < m {
        let mut best = None;
        let mut best_d = -1.0;
        for i in 0..points.len() {
            if chosen.contains(&i) {
                continue;
            }
            let d = chosen
                .iter()
                .map(|&c| (points[i] - points[c]).norm_squared())
                .fold(f64::INFINITY, f64::min);
            if d > best_d {
                best_d = d;
                best = Some(i);
            }
        }
        chosen.push(best.unwrap());
    }
    chosen
}

fn knn_oracle(points: &[Point], q: &Point, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        (points[a] - q)
            .norm_squared()
            .total_cmp(&(points[b] - q).norm_squared())
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}

fn cloud(rng: &mut ChaCha8Rng, n: usize, grid: bool) -> Vec<Point> {
    (0..n)
        .map(|_| {
            if grid {
                // integer lattice: plenty of exact ties
                Point::new(rng.random_range(0..4) as f64, rng.random_range(0..4) as f64, rng.random_range(0..3) as f64)
            } else {
                Point::new(rng.random(), rng.random(), rng.random())
            }
        })
        .collect()
}

#[test]
fn fps_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for case in 0..200 {
        let n = rng.random_range(1..=64);
        let pts = cloud(&mut rng, n, case % 3 == 0);
        for m in 1..=n {
            assert_eq!(fps(&pts, m, 0).unwrap(), fps_oracle(&pts, m, 0), "case {case} m {m}");
        }
    }
}

#[test]
fn fps_rejects_bad_requests() {
    let pts = vec![Point::origin(); 5];
    assert!(fps(&pts, 6, 0).is_err());
    assert!(fps(&pts, 0, 0).is_err());
    assert!(fps(&pts, 2, 5).is_err());
}

#[test]
fn kd_tree_matches_linear_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..60 {
        let n = rng.random_range(1..300);
        let pts = cloud(&mut rng, n, case % 2 == 0);
        let tree = KdTree::new(&pts);
        for _ in 0..10 {
            let q = Point::new(rng.random_range(-0.5..4.0), rng.random_range(-0.5..4.0), rng.random_range(-0.5..3.0));
            let k = rng.random_range(1..=n);
            let want = knn_oracle(&pts, &q, k);
            assert_eq!(knn_indices(&pts, &q, k).unwrap(), want);
            assert_eq!(tree.knn(&q, k).unwrap(), want);
        }
    }
}

proptest! {
    #[test]
    fn fps_picks_distinct_indices(seed in any::<u64>(), n in 1usize..80, frac in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = cloud(&mut rng, n, seed % 2 == 0);
        let m = 1 + ((n - 1) as f64 * frac) as usize;
        let start = rng.random_range(0..n);
        let idx = fps(&pts, m, start).unwrap();
        prop_assert_eq!(idx[0], start);
        let mut s = idx.clone();
        s.sort_unstable();
        s.dedup();
        prop_assert_eq!(s.len(), m);
    }

    #[test]
    fn random_subset_is_a_subset(seed in any::<u64>(), n in 1usize..200, frac in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = 1 + ((n - 1) as f64 * frac) as usize;
        let idx = random_subset(n, m, &mut rng).unwrap();
        let mut s = idx.clone();
        s.sort_unstable();
        s.dedup();
        prop_assert_eq!(s.len(), m);
        prop_assert!(idx.iter().all(|&i| i < n));
    }
}
