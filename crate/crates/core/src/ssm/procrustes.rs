//! Generalized Procrustes alignment of a corresponded cohort.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::mesh::{validate_cohort, Cohort, Point};

/// Iteration stops once the mean moves less than this (RMS, input units).
pub const GPA_TOLERANCE: f64 = 1e-9;
pub const GPA_MAX_ITERATIONS: usize = 100;

/// Rotation `R` (det +1) minimizing `sum |R * source_i - target_i|^2`.
///
/// Both point sets must already be centered.
pub fn optimal_rotation(source: &[Point], target: &[Point]) -> Matrix3<f64> {
    debug_assert_eq!(source.len(), target.len());
    let mut cross = Matrix3::zeros();
    for (s, t) in source.iter().zip(target) {
        cross += t.coords * s.coords.transpose();
    }
    let svd = cross.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Matrix3::identity();
    };
    let d = (u * v_t).determinant().signum();
    let mut fix = Matrix3::identity();
    fix[(2, 2)] = if d == 0.0 { 1.0 } else { d };
    // nalgebra returns singular values unsorted; flip the column belonging
    // to the smallest one.
    let smallest = (0..3)
        .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
        .unwrap_or(2);
    if smallest != 2 {
        fix[(2, 2)] = 1.0;
        fix[(smallest, smallest)] = if d == 0.0 { 1.0 } else { d };
    }
    u * fix * v_t
}

pub fn centroid(points: &[Point]) -> Vector3<f64> {
    points.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / points.len() as f64
}

/// Root of the summed squared distance to the centroid.
pub fn centroid_size(points: &[Point]) -> f64 {
    let c = centroid(points);
    points
        .iter()
        .map(|p| (p.coords - c).norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// Root-mean-square vertex distance between two corresponded point sets.
pub fn rms_distance(a: &[Point], b: &[Point]) -> f64 {
    let ss: f64 = a.iter().zip(b).map(|(p, q)| (p - q).norm_squared()).sum();
    (ss / a.len() as f64).sqrt()
}

fn mean_shape(shapes: &[Vec<Point>]) -> Vec<Point> {
    let n = shapes[0].len();
    let k = shapes.len() as f64;
    (0..n)
        .map(|i| Point::from(shapes.iter().fold(Vector3::zeros(), |a, s| a + s[i].coords) / k))
        .collect()
}

fn rotate(points: &mut [Point], r: &Matrix3<f64>) {
    for p in points {
        *p = Point::from(r * p.coords);
    }
}

fn normalize_size(points: &mut [Point]) {
    let size = centroid_size(points);
    if size > 0.0 {
        for p in points {
            p.coords /= size;
        }
    }
}

/// Translate every shape to a zero centroid and rotate it onto the
/// iteratively re-estimated mean. With `with_scaling`, shapes are also
/// normalized to unit centroid size.
///
/// The global orientation of the result is tied to the plain average of the
/// centered inputs, which makes the alignment idempotent.
pub fn gpa_align(cohort: &Cohort, with_scaling: bool) -> Result<Cohort> {
    if cohort.len() < 2 {
        return Err(Error::Alignment(format!(
            "need at least 2 shapes, got {}",
            cohort.len()
        )));
    }
    let mut shapes: Vec<Vec<Point>> = Vec::with_capacity(cohort.len());
    for (k, mesh) in cohort.meshes().iter().enumerate() {
        let c = centroid(mesh.vertices());
        let pts: Vec<Point> = mesh.vertices().iter().map(|p| Point::from(p.coords - c)).collect();
        let scale = pts.iter().map(|p| p.coords.amax()).fold(0.0, f64::max);
        let size = centroid_size(&pts);
        if size <= 1e-12 * (1.0 + scale + c.amax()) {
            return Err(Error::Alignment(format!(
                "shape {k} is degenerate (all vertices coincide)"
            )));
        }
        shapes.push(pts);
    }
    if with_scaling {
        shapes.iter_mut().for_each(|s| normalize_size(s));
    }

    let gauge = mean_shape(&shapes);
    let mut mean = shapes[0].clone();
    for _ in 0..GPA_MAX_ITERATIONS {
        for s in shapes.iter_mut() {
            let r = optimal_rotation(s, &mean);
            rotate(s, &r);
        }
        let mut next = mean_shape(&shapes);
        if with_scaling {
            normalize_size(&mut next);
        }
        let change = rms_distance(&next, &mean);
        mean = next;
        if change < GPA_TOLERANCE {
            break;
        }
    }

    if centroid_size(&gauge) > 1e-12 * centroid_size(&mean) {
        let r = optimal_rotation(&mean, &gauge);
        shapes.iter_mut().for_each(|s| rotate(s, &r));
    }

    let meshes = cohort
        .meshes()
        .iter()
        .zip(shapes)
        .map(|(m, pts)| m.with_vertices(pts))
        .collect::<Result<Vec<_>>>()?;
    validate_cohort(meshes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::TriangleMesh;
    use nalgebra::Rotation3;

    fn tetra() -> Vec<Point> {
        vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(3.0, 0.0, 0.0),
            Point::new(0.0, 2.0, 0.0),
            Point::new(0.0, 0.0, 1.0),
        ]
    }

    fn mesh(pts: Vec<Point>) -> TriangleMesh {
        TriangleMesh::new(pts, vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]]).unwrap()
    }

    #[test]
    fn rotation_recovers_known_rotation() {
        let src: Vec<Point> = {
            let c = centroid(&tetra());
            tetra().iter().map(|p| Point::from(p.coords - c)).collect()
        };
        let r = Rotation3::from_euler_angles(0.3, -1.1, 2.0).into_inner();
        let dst: Vec<Point> = src.iter().map(|p| Point::from(r * p.coords)).collect();
        let est = optimal_rotation(&src, &dst);
        assert!((est - r).amax() < 1e-12);
        assert!((est.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reflection_is_not_returned() {
        // A mirrored planar-ish target would prefer det -1.
        let src = vec![
            Point::new(1.0, 0.0, 0.0),
            Point::new(-1.0, 0.0, 0.0),
            Point::new(0.0, 2.0, 0.0),
            Point::new(0.0, -2.0, 0.0),
            Point::new(0.0, 0.0, 0.5),
            Point::new(0.0, 0.0, -0.5),
        ];
        let dst: Vec<Point> = src.iter().map(|p| Point::new(p.x, p.y, -p.z * 0.1)).collect();
        let r = optimal_rotation(&src, &dst);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn translation_removed() {
        let a = mesh(tetra());
        let b = mesh(tetra().iter().map(|p| p + Vector3::new(10.0, 0.0, 0.0)).collect());
        let c = validate_cohort(vec![a, b]).unwrap();
        let out = gpa_align(&c, false).unwrap();
        let (m0, m1) = (&out.meshes()[0], &out.meshes()[1]);
        assert!(rms_distance(m0.vertices(), m1.vertices()) < 1e-12);
        assert!(centroid(m0.vertices()).norm() < 1e-12);
    }

    #[test]
    fn identical_shapes_are_a_fixed_point() {
        let pts = tetra();
        let c = centroid(&pts);
        let c0 = validate_cohort(vec![mesh(pts.clone()), mesh(pts.clone()), mesh(pts.clone())]).unwrap();
        let out = gpa_align(&c0, false).unwrap();
        for m in out.meshes() {
            for (p, q) in m.vertices().iter().zip(&pts) {
                assert!((p.coords - (q.coords - c)).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_shape_rejected() {
        let flat = mesh(tetra());
        let dot = TriangleMesh::new(vec![Point::new(1.0, 1.0, 1.0); 4], flat.faces().to_vec()).unwrap();
        let c = validate_cohort(vec![flat, dot]).unwrap();
        assert!(matches!(gpa_align(&c, false), Err(Error::Alignment(_))));
    }

    #[test]
    fn single_shape_rejected() {
        let c = validate_cohort(vec![mesh(tetra())]).unwrap();
        assert!(gpa_align(&c, false).is_err());
    }

    #[test]
    fn scaling_normalizes_size() {
        let a = mesh(tetra());
        let b = mesh(tetra().iter().map(|p| Point::from(p.coords * 4.0)).collect());
        let out = gpa_align(&validate_cohort(vec![a, b]).unwrap(), true).unwrap();
        for m in out.meshes() {
            assert!((centroid_size(m.vertices()) - 1.0).abs() < 1e-12);
        }
        assert!(rms_distance(out.meshes()[0].vertices(), out.meshes()[1].vertices()) < 1e-12);
    }
}
