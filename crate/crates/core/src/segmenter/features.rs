//! Per-point descriptors that depend only on distances and covariance
//! spectra, so they are unchanged by any rotation or translation of the
//! cloud.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Workers};
use crate::mesh::{Point, PointCloud};
use crate::spatial::KdTree;

/// Values per neighbourhood scale.
pub const PER_SCALE: usize = 9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Neighbourhood sizes (point itself included), ascending.
    pub scales: Vec<usize>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            scales: vec![16, 32, 64],
        }
    }
}

impl FeatureConfig {
    pub fn new(mut scales: Vec<usize>) -> Result<Self> {
        scales.sort_unstable();
        scales.dedup();
        match scales.first() {
            None => Err(Error::InvalidArgument("no neighbourhood scales".into())),
            Some(&k) if k < 4 => Err(Error::InvalidArgument(format!(
                "smallest neighbourhood must have at least 4 points, got {k}"
            ))),
            _ => Ok(Self { scales }),
        }
    }

    /// Feature dimension.
    pub fn dim(&self) -> usize {
        PER_SCALE * self.scales.len() + 1
    }

    /// Smallest neighbourhood.
    pub fn k_local(&self) -> usize {
        self.scales.first().copied().unwrap_or(0)
    }

    /// Points a cloud must have for the largest neighbourhood.
    pub fn min_points(&self) -> usize {
        self.scales.last().copied().unwrap_or(0)
    }
}

/// Row-major `n x dim` feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Features {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Sorted (descending) eigenvalues of the covariance of `pts`.
fn spectrum(pts: &[Point]) -> [f64; 3] {
    let n = pts.len() as f64;
    let mean = pts.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let ev = cov.symmetric_eigenvalues();
    let mut l = [ev[0].max(0.0), ev[1].max(0.0), ev[2].max(0.0)];
    l.sort_by(|a, b| b.total_cmp(a));
    l
}

fn scale_block(center: &Point, neigh: &[Point], centroid: &Point, radius: f64, out: &mut [f64]) {
    let l = spectrum(neigh);
    let sum = l[0] + l[1] + l[2];
    // coincident neighbourhood: leave the block at zero
    if !(sum > 0.0) || !(l[0] > 0.0) || radius <= 0.0 {
        out.fill(0.0);
        return;
    }
    out[0] = l[0] / sum;
    out[1] = l[1] / sum;
    out[2] = l[2] / sum;
    out[3] = (l[0] - l[1]) / l[0];
    out[4] = (l[1] - l[2]) / l[0];
    out[5] = l[2] / l[0];
    let mut total = 0.0;
    let mut max: f64 = 0.0;
    for q in neigh {
        let d = (q - center).norm();
        total += d;
        max = max.max(d);
    }
    out[6] = total / neigh.len() as f64 / radius;
    out[7] = max / radius;
    // positive where the point sticks out of its neighbourhood (convex),
    // negative in hollows
    let local = neigh.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / neigh.len() as f64;
    out[8] = ((center - centroid).norm() - (local - centroid.coords).norm()) / radius;
}

/// Features of every point of `cloud`.
///
/// Per scale: normalized covariance eigenvalues, linearity, planarity,
/// sphericity, mean and max neighbour distance, and how far the point lies
/// outside its neighbourhood mean as seen from the centroid. A final column holds the
/// distance to the cloud centroid. Distances are divided by the radius of
/// the centroid-centred bounding sphere.
pub fn extract_features(cloud: &PointCloud, cfg: &FeatureConfig, workers: Workers) -> Result<Features> {
    let n = cloud.len();
    if n < cfg.min_points() {
        return Err(Error::InvalidArgument(format!(
            "cloud has {n} points, the largest neighbourhood needs {}",
            cfg.min_points()
        )));
    }
    let pts = cloud.points();
    let centroid = cloud.centroid();
    let radius = pts.iter().map(|p| (p - centroid).norm()).fold(0.0, f64::max);
    let tree = KdTree::new(pts);
    let k_max = cfg.min_points();
    let dim = cfg.dim();

    let rows = exec::map_range(workers, n, |i| {
        let mut row = vec![0.0; dim];
        let nn = tree.knn(&pts[i], k_max).expect("k checked above");
        let mut neigh: Vec<Point> = Vec::with_capacity(k_max);
        for (s, &k) in cfg.scales.iter().enumerate() {
            neigh.clear();
            neigh.extend(nn[..k].iter().map(|&j| pts[j]));
            scale_block(&pts[i], &neigh, &centroid, radius, &mut row[s * PER_SCALE..(s + 1) * PER_SCALE]);
        }
        row[dim - 1] = if radius > 0.0 {
            (pts[i] - centroid).norm() / radius
        } else {
            0.0
        };
        row
    });
    Ok(Features {
        rows: n,
        dim,
        data: rows.into_iter().flatten().collect(),
    })
}
