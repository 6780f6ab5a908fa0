//! Point-distribution shape model.
//!
//! A model is a mean shape, per-mode variances and orthonormal modes of
//! variation. New shapes are `mean + sum_j sqrt(var_j) * a_j * mode_j`, so
//! the coefficients `a` are measured in standard deviations of each mode.

mod procrustes;

use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Cohort, Face, Point, TriangleMesh};

pub use procrustes::{
    centroid, centroid_size, gpa_align, optimal_rotation, rms_distance, GPA_MAX_ITERATIONS,
    GPA_TOLERANCE,
};

/// Default sampling range for shape coefficients, in standard deviations.
pub const DEFAULT_SIGMA_RANGE: (f64, f64) = (-2.75, 1.75);

/// Flat `x1 y1 z1 x2 y2 z2 ...` coordinates of one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeVector(Vec<f64>);

impl ShapeVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if !coords.len().is_multiple_of(3) {
            return Err(Error::InvalidArgument(format!(
                "shape vector length {} is not a multiple of 3",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("shape vector has non-finite entries".into()));
        }
        Ok(Self(coords))
    }

    pub fn from_points(points: &[Point]) -> Self {
        Self(points.iter().flat_map(|p| [p.x, p.y, p.z]).collect())
    }

    pub fn to_points(&self) -> Vec<Point> {
        self.0
            .chunks_exact(3)
            .map(|c| Point::new(c[0], c[1], c[2]))
            .collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn n_vertices(&self) -> usize {
        self.0.len() / 3
    }
}

/// Per-mode coefficients in standard-deviation units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShapeParams(pub Vec<f64>);

impl ShapeParams {
    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Which principal modes to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Retention {
    /// Every mode with nonzero variance (at most K-1).
    #[default]
    All,
    /// Smallest number of modes explaining at least this fraction of variance.
    VarianceFraction { fraction: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsmModel {
    mean: ShapeVector,
    eigenvalues: Vec<f64>,
    /// 3N x M, orthonormal columns.
    components: DMatrix<f64>,
    faces: Vec<Face>,
    n_shapes: usize,
    with_scaling: bool,
    retention: Retention,
}

impl SsmModel {
    pub fn mean(&self) -> &ShapeVector {
        &self.mean
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.mean.n_vertices()
    }

    pub fn n_shapes(&self) -> usize {
        self.n_shapes
    }

    pub fn with_scaling(&self) -> bool {
        self.with_scaling
    }

    pub fn retention(&self) -> Retention {
        self.retention
    }

    pub fn mean_mesh(&self) -> TriangleMesh {
        self.mesh(&self.mean)
            .expect("model mean always forms a valid mesh")
    }

    /// Attach the model topology to a shape vector.
    pub fn mesh(&self, shape: &ShapeVector) -> Result<TriangleMesh> {
        if shape.len() != self.mean.len() {
            return Err(Error::Dimension {
                expected: self.mean.len(),
                actual: shape.len(),
                context: "shape vector length",
            });
        }
        TriangleMesh::new(shape.to_points(), self.faces.clone())
    }

    /// `mean + V diag(sqrt(eigenvalues)) a`.
    pub fn generate_shape(&self, params: &ShapeParams) -> Result<ShapeVector> {
        if params.len() != self.n_modes() {
            return Err(Error::Dimension {
                expected: self.n_modes(),
                actual: params.len(),
                context: "shape parameter vector",
            });
        }
        if params.0.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument("shape parameters must be finite".into()));
        }
        let mut out = self.mean.0.clone();
        for (j, (&a, &var)) in params.0.iter().zip(&self.eigenvalues).enumerate() {
            // Zero coefficients are skipped so that a = 0 reproduces the mean bit for bit.
            if a == 0.0 {
                continue;
            }
            let w = var.sqrt() * a;
            for (x, v) in out.iter_mut().zip(self.components.column(j).iter()) {
                *x += w * v;
            }
        }
        Ok(ShapeVector(out))
    }

    /// Coefficients of the orthogonal projection of `shape` onto the model.
    pub fn project(&self, shape: &ShapeVector) -> Result<ShapeParams> {
        if shape.len() != self.mean.len() {
            return Err(Error::Dimension {
                expected: self.mean.len(),
                actual: shape.len(),
                context: "shape vector length",
            });
        }
        let params = (0..self.n_modes())
            .map(|j| {
                let dot: f64 = self
                    .components
                    .column(j)
                    .iter()
                    .zip(shape.0.iter().zip(&self.mean.0))
                    .map(|(v, (x, m))| v * (x - m))
                    .sum();
                dot / self.eigenvalues[j].sqrt()
            })
            .collect();
        Ok(ShapeParams(params))
    }

    /// Draw every coefficient independently and uniformly from `[lo, hi]`.
    pub fn sample_params<R: Rng + ?Sized>(&self, lo: f64, hi: f64, rng: &mut R) -> Result<ShapeParams> {
        sample_uniform(self.n_modes(), lo, hi, rng)
    }
}

pub fn sample_uniform<R: Rng + ?Sized>(m: usize, lo: f64, hi: f64, rng: &mut R) -> Result<ShapeParams> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "sampling range requires lo < hi, got [{lo}, {hi}]"
        )));
    }
    Ok(ShapeParams((0..m).map(|_| rng.random_range(lo..=hi)).collect()))
}

// Singular values below this fraction of the largest are treated as zero.
const RANK_TOLERANCE: f64 = 1e-9;

/// PCA of an aligned cohort via thin SVD of the centered K x 3N data matrix.
pub fn build_ssm(aligned: &Cohort, retention: Retention, with_scaling: bool) -> Result<SsmModel> {
    let k = aligned.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 shapes to build a model, got {k}"
        )));
    }
    let shapes: Vec<ShapeVector> = aligned
        .meshes()
        .iter()
        .map(|m| ShapeVector::from_points(m.vertices()))
        .collect();
    let dim = shapes[0].len();
    let mean: Vec<f64> = (0..dim)
        .map(|i| shapes.iter().map(|s| s.0[i]).sum::<f64>() / k as f64)
        .collect();

    let data = DMatrix::from_fn(k, dim, |r, c| shapes[r].0[c] - mean[c]);
    let svd = data.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::InvalidArgument("SVD failed to converge".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let s_max = order.first().map_or(0.0, |&i| svd.singular_values[i]);
    let significant: Vec<usize> = order
        .into_iter()
        .filter(|&i| s_max > 0.0 && svd.singular_values[i] > RANK_TOLERANCE * s_max)
        .take(k - 1)
        .collect();

    let variances: Vec<f64> = significant
        .iter()
        .map(|&i| svd.singular_values[i].powi(2) / (k - 1) as f64)
        .collect();
    let m = match retention {
        Retention::All => variances.len(),
        Retention::VarianceFraction { fraction } => {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "variance fraction must be in (0, 1], got {fraction}"
                )));
            }
            let total: f64 = variances.iter().sum();
            let mut acc = 0.0;
            let mut m = variances.len();
            for (j, v) in variances.iter().enumerate() {
                acc += v;
                if acc >= fraction * total {
                    m = j + 1;
                    break;
                }
            }
            m
        }
    };

    let mut components = DMatrix::zeros(dim, m);
    for (j, &row) in significant.iter().take(m).enumerate() {
        let mut col: Vec<f64> = v_t.row(row).iter().copied().collect();
        let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        col.iter_mut().for_each(|x| *x /= norm);
        // sign convention: largest-magnitude entry positive
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            col.iter_mut().for_each(|x| *x = -*x);
        }
        components.set_column(j, &nalgebra::DVector::from_vec(col));
    }

    Ok(SsmModel {
        mean: ShapeVector(mean),
        eigenvalues: variances[..m].to_vec(),
        components,
        faces: aligned.faces().to_vec(),
        n_shapes: k,
        with_scaling,
        retention,
    })
}

const MODEL_FORMAT: &str = "ssmlab-ssm";
const MODEL_VERSION: u32 = 1;

/// On-disk model. Floats are written in shortest round-trip decimal form,
/// so a reload reproduces every bit.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    n_vertices: usize,
    n_modes: usize,
    n_shapes: usize,
    with_scaling: bool,
    retention: Retention,
    mean: Vec<f64>,
    eigenvalues: Vec<f64>,
    /// Column-major 3N x M.
    components: Vec<f64>,
    faces: Vec<Face>,
}

pub fn save_model(model: &SsmModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        n_vertices: model.n_vertices(),
        n_modes: model.n_modes(),
        n_shapes: model.n_shapes,
        with_scaling: model.with_scaling,
        retention: model.retention,
        mean: model.mean.0.clone(),
        eigenvalues: model.eigenvalues.clone(),
        components: model.components.as_slice().to_vec(),
        faces: model.faces.clone(),
    };
    let text = serde_json::to_string(&file).map_err(|e| Error::json(path, e))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SsmModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let f: ModelFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    if f.format != MODEL_FORMAT || f.version != MODEL_VERSION {
        return Err(Error::Format(format!(
            "expected {MODEL_FORMAT} v{MODEL_VERSION}, found {} v{}",
            f.format, f.version
        )));
    }
    let dim = 3 * f.n_vertices;
    if f.mean.len() != dim || f.eigenvalues.len() != f.n_modes || f.components.len() != dim * f.n_modes {
        return Err(Error::Format("array sizes disagree with header".into()));
    }
    let mean = ShapeVector::new(f.mean)?;
    // validates faces against the vertex count
    TriangleMesh::new(mean.to_points(), f.faces.clone())?;
    Ok(SsmModel {
        mean,
        eigenvalues: f.eigenvalues,
        components: DMatrix::from_vec(dim, f.n_modes, f.components),
        faces: f.faces,
        n_shapes: f.n_shapes,
        with_scaling: f.with_scaling,
        retention: f.retention,
    })
}
