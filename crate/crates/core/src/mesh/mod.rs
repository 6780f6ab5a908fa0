//! Geometry and label data model: triangle meshes, point clouds, per-vertex
//! label maps and corresponded cohorts.
//!
//! Vertex order carries correspondence throughout the crate. Nothing here
//! reorders vertices unless explicitly asked to (see [`PointCloud::select`]).

mod labels;
mod obj;
mod ply;

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use labels::{format_labels, load_class_table, load_labels, parse_labels, save_class_table, save_labels};

pub type Point = Point3<f64>;
pub type Face = [usize; 3];

/// On-disk mesh encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    /// Guess the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(MeshFormat::Obj),
            "ply" => Some(MeshFormat::Ply),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point>,
    faces: Vec<Face>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point>, faces: Vec<Face>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidMesh(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if let Some(i) = vertices.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh(format!("vertex {i} is not finite")));
        }
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&v| v >= n) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references vertex {bad}, but there are only {n} vertices"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} repeats a vertex: {f:?}"
                )));
            }
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Same topology, new vertex positions.
    pub fn with_vertices(&self, vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::Dimension {
                expected: self.vertices.len(),
                actual: vertices.len(),
                context: "vertex count of replacement geometry",
            });
        }
        Self::new(vertices, self.faces.clone())
    }

    pub fn to_point_cloud(&self) -> PointCloud {
        PointCloud {
            points: self.vertices.clone(),
        }
    }
}

/// Load a mesh, preserving vertex order exactly as stored.
pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let text = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        MeshFormat::Obj => {
            let text = String::from_utf8_lossy(&text);
            obj::parse(path, &text)
        }
        MeshFormat::Ply => ply::parse(path, &text),
    }
}

pub fn save_mesh(mesh: &TriangleMesh, path: impl AsRef<Path>, format: MeshFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        MeshFormat::Obj => obj::write(mesh),
        MeshFormat::Ply => ply::write(mesh),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// An ordered set of 3D points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidCloud("point cloud is empty".into()));
        }
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidCloud(format!("point {i} is not finite")));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    pub fn centroid(&self) -> Point {
        let sum = self
            .points
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Point::from(sum / self.points.len() as f64)
    }

    /// Points at the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
        }
    }

    /// `p -> rotation * p + translation` for every point.
    pub fn transformed(&self, rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> PointCloud {
        PointCloud {
            points: self
                .points
                .iter()
                .map(|p| Point::from(rotation * p.coords + translation))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassInfo {
    pub id: u32,
    pub name: String,
    pub color: String,
}

/// Class id → name/color. Id 0 is always background, listed or not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTable {
    classes: Vec<ClassInfo>,
}

impl ClassTable {
    pub fn new(mut classes: Vec<ClassInfo>) -> Result<Self> {
        classes.sort_by_key(|c| c.id);
        for w in classes.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::InvalidLabels(format!(
                    "class id {} listed twice in class table",
                    w[0].id
                )));
            }
        }
        Ok(Self { classes })
    }

    /// Background plus the two landmark classes of the liver case study.
    pub fn landmarks() -> Self {
        Self {
            classes: vec![
                ClassInfo {
                    id: 1,
                    name: "anterior_ridge".into(),
                    color: "#0000FF".into(),
                },
                ClassInfo {
                    id: 2,
                    name: "falciform_ligament".into(),
                    color: "#FF0000".into(),
                },
            ],
        }
    }

    pub fn classes(&self) -> &[ClassInfo] {
        &self.classes
    }

    pub fn contains(&self, id: u32) -> bool {
        id == 0 || self.classes.iter().any(|c| c.id == id)
    }

    /// All class ids including background, ascending.
    pub fn ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = std::iter::once(0)
            .chain(self.classes.iter().map(|c| c.id))
            .collect();
        ids.dedup();
        ids
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        if id == 0 {
            return Some(
                self.classes
                    .iter()
                    .find(|c| c.id == 0)
                    .map_or("background", |c| c.name.as_str()),
            );
        }
        self.classes
            .iter()
            .find(|c| c.id == id)
            .map(|c| c.name.as_str())
    }
}

/// One class id per vertex (or point), bound to a class table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    labels: Vec<u32>,
    classes: ClassTable,
}

impl LabelMap {
    pub fn new(labels: Vec<u32>, classes: ClassTable) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| !classes.contains(l)) {
            return Err(Error::UnknownClass(bad));
        }
        Ok(Self { labels, classes })
    }

    pub fn background(n: usize, classes: ClassTable) -> Self {
        Self {
            labels: vec![0; n],
            classes,
        }
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn classes(&self) -> &ClassTable {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of entries per class id (only ids that occur).
    pub fn counts(&self) -> BTreeMap<u32, usize> {
        let mut out = BTreeMap::new();
        for &l in &self.labels {
            *out.entry(l).or_insert(0) += 1;
        }
        out
    }

    /// Pad with background up to `n` entries. Files only list labeled
    /// vertices, so a loaded map may be shorter than its geometry.
    pub fn fit_to(mut self, n: usize) -> Result<Self> {
        if self.labels.len() > n {
            return Err(Error::Dimension {
                expected: n,
                actual: self.labels.len(),
                context: "label map longer than geometry",
            });
        }
        self.labels.resize(n, 0);
        Ok(self)
    }

    /// Labels at the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> LabelMap {
        LabelMap {
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes.clone(),
        }
    }
}

/// Meshes sharing one vertex indexing and face list.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    meshes: Vec<TriangleMesh>,
}

impl Cohort {
    pub fn meshes(&self) -> &[TriangleMesh] {
        &self.meshes
    }

    pub fn len(&self) -> usize {
        self.meshes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meshes.is_empty()
    }

    pub fn n_vertices(&self) -> usize {
        self.meshes[0].n_vertices()
    }

    pub fn faces(&self) -> &[Face] {
        self.meshes[0].faces()
    }

    pub fn into_meshes(self) -> Vec<TriangleMesh> {
        self.meshes
    }
}

/// Check point-to-point correspondence. Every mesh is compared against the
/// first; the first mismatching pair is reported.
pub fn validate_cohort(meshes: Vec<TriangleMesh>) -> Result<Cohort> {
    let Some(first) = meshes.first() else {
        return Err(Error::InvalidArgument("cohort is empty".into()));
    };
    for (i, m) in meshes.iter().enumerate().skip(1) {
        if m.n_vertices() != first.n_vertices() {
            return Err(Error::Correspondence {
                first: 0,
                second: i,
                reason: format!(
                    "vertex count {} vs {}",
                    first.n_vertices(),
                    m.n_vertices()
                ),
            });
        }
        if m.faces() != first.faces() {
            return Err(Error::Correspondence {
                first: 0,
                second: i,
                reason: "face lists differ (topology mismatch)".into(),
            });
        }
    }
    Ok(Cohort { meshes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> TriangleMesh {
        TriangleMesh::new(
            vec![
                Point::new(0.0, 0.0, 0.0),
                Point::new(1.0, 0.0, 0.0),
                Point::new(0.0, 1.0, 0.0),
                Point::new(0.0, 0.0, 1.0),
            ],
            vec![[0, 1, 2], [0, 1, 3]],
        )
        .unwrap()
    }

    #[test]
    fn mesh_invariants() {
        assert!(TriangleMesh::new(vec![Point::origin(); 2], vec![]).is_err());
        let v = tri().vertices().to_vec();
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 4]]).is_err());
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 1]]).is_err());
        let mut nan = v;
        nan[1].x = f64::NAN;
        assert!(TriangleMesh::new(nan, vec![]).is_err());
    }

    #[test]
    fn cohort_of_copies_is_valid() {
        let c = validate_cohort(vec![tri(), tri()]).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.n_vertices(), 4);
    }

    #[test]
    fn cohort_vertex_count_mismatch_names_pair() {
        let a = TriangleMesh::new(vec![Point::origin(); 100], vec![]).unwrap();
        let b = TriangleMesh::new(vec![Point::origin(); 101], vec![]).unwrap();
        match validate_cohort(vec![a, b]) {
            Err(Error::Correspondence { first, second, .. }) => assert_eq!((first, second), (0, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cohort_permuted_faces_rejected() {
        let a = tri();
        let b = TriangleMesh::new(a.vertices().to_vec(), vec![[0, 1, 3], [0, 1, 2]]).unwrap();
        assert!(matches!(
            validate_cohort(vec![a, b]),
            Err(Error::Correspondence { .. })
        ));
    }

    #[test]
    fn empty_cohort_rejected() {
        assert!(validate_cohort(vec![]).is_err());
    }

    #[test]
    fn label_map_rejects_unknown_class() {
        assert!(matches!(
            LabelMap::new(vec![0, 1, 7], ClassTable::landmarks()),
            Err(Error::UnknownClass(7))
        ));
    }

    #[test]
    fn label_map_fit_pads_with_background() {
        let m = LabelMap::new(vec![1, 2], ClassTable::landmarks()).unwrap();
        assert_eq!(m.clone().fit_to(4).unwrap().labels(), &[1, 2, 0, 0]);
        assert!(m.fit_to(1).is_err());
    }

    #[test]
    fn class_table_ids() {
        assert_eq!(ClassTable::landmarks().ids(), vec![0, 1, 2]);
        assert_eq!(ClassTable::landmarks().name(0), Some("background"));
        assert!(ClassTable::new(vec![
            ClassInfo { id: 1, name: "a".into(), color: "#000000".into() },
            ClassInfo { id: 1, name: "b".into(), color: "#000000".into() },
        ])
        .is_err());
    }

    #[test]
    fn cloud_rejects_empty_and_nan() {
        assert!(PointCloud::new(vec![]).is_err());
        assert!(PointCloud::new(vec![Point::new(f64::INFINITY, 0.0, 0.0)]).is_err());
    }
}
