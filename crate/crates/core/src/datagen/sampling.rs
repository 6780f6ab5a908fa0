use nalgebra::{Matrix3, Quaternion, UnitQuaternion};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::spatial::dist2;

/// Greedy max-min (farthest point) sampling.
///
/// The first pick is `start`; every later pick maximizes its distance to the
/// nearest already-picked point. Ties go to the lowest index.
pub fn fps(points: &[Point], m: usize, start: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "farthest point sampling needs 1 <= m <= {n}, got {m}"
        )));
    }
    if start >= n {
        return Err(Error::InvalidArgument(format!(
            "start index {start} out of range for {n} points"
        )));
    }
    let mut picked = Vec::with_capacity(m);
    let mut nearest = vec![f64::INFINITY; n];
    let mut taken = vec![false; n];
    let mut current = start;
    loop {
        picked.push(current);
        taken[current] = true;
        if picked.len() == m {
            break;
        }
        let anchor = points[current];
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for (i, p) in points.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let d = dist2(p, &anchor);
            if d < nearest[i] {
                nearest[i] = d;
            }
            if nearest[i] > best_d {
                best_d = nearest[i];
                best = i;
            }
        }
        current = best;
    }
    Ok(picked)
}

/// `m` distinct indices drawn uniformly without replacement, in draw order.
pub fn random_subset<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Vec<usize>> {
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "random subset needs 1 <= m <= {n}, got {m}"
        )));
    }
    Ok(rand::seq::index::sample(rng, n, m).into_vec())
}

/// Uniform random rotation from a normalized 4D Gaussian quaternion.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let norm2: f64 = q.iter().map(|x| x * x).sum();
        if norm2 > 1e-24 {
            let uq = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]));
            return *uq.to_rotation_matrix().matrix();
        }
    }
}

/// A uniformly random permutation of `0..n`.
pub fn random_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fps_edges() {
        let pts: Vec<Point> = (0..10).map(|i| Point::new(i as f64, 0.0, 0.0)).collect();
        assert_eq!(fps(&pts, 1, 3).unwrap(), vec![3]);
        let mut all = fps(&pts, 10, 0).unwrap();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(fps(&pts, 11, 0).is_err());
        assert!(fps(&pts, 0, 0).is_err());
        assert!(fps(&pts, 2, 10).is_err());
        // on a line from 0, the far end comes next, then the middle
        assert_eq!(fps(&pts, 3, 0).unwrap(), vec![0, 9, 4]);
    }

    #[test]
    fn fps_duplicates_never_repeat_an_index() {
        let pts = vec![Point::origin(); 5];
        let mut idx = fps(&pts, 5, 2).unwrap();
        assert_eq!(idx[0], 2);
        idx.sort();
        assert_eq!(idx, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn rotation_is_in_so3() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let r = random_rotation(&mut rng);
            assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-12);
            assert!((r.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_then_transpose_restores() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let r = random_rotation(&mut rng);
        let p = Vector3::new(12.5, -3.0, 88.0);
        assert!((r.transpose() * (r * p) - p).amax() < 1e-9);
    }

    #[test]
    fn rotated_unit_vector_has_zero_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10_000;
        let mut sum = Vector3::zeros();
        for _ in 0..n {
            sum += random_rotation(&mut rng) * Vector3::x();
        }
        let mean = sum / n as f64;
        let tol = 4.0 / (n as f64).sqrt();
        assert!(mean.amax() < tol, "{mean:?}");
    }

    #[test]
    fn permutation_is_seeded_and_complete() {
        let a = random_permutation(100, &mut ChaCha8Rng::seed_from_u64(1));
        let b = random_permutation(100, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
        let mut s = a.clone();
        s.sort();
        assert_eq!(s, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn random_subset_is_distinct() {
        let mut s = random_subset(50, 20, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 20);
        assert!(random_subset(5, 6, &mut ChaCha8Rng::seed_from_u64(3)).is_err());
    }
}
