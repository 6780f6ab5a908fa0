//! `.xyzl` point files: one `x y z class_id` row per point.

use std::fmt::Write;
use std::path::Path;

use super::LabeledCloud;
use crate::error::{Error, Result};
use crate::mesh::{ClassTable, LabelMap, Point, PointCloud};

/// Coordinates are written with 9 significant digits.
pub fn format_xyzl(cloud: &LabeledCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 56);
    for (p, l) in cloud.cloud.points().iter().zip(cloud.labels.labels()) {
        let _ = writeln!(out, "{:.8e} {:.8e} {:.8e} {}", p.x, p.y, p.z, l);
    }
    out
}

pub fn save_xyzl(cloud: &LabeledCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_xyzl(cloud)).map_err(|e| Error::io(path, e))
}

pub fn parse_xyzl(path: &Path, text: &str, classes: &ClassTable, shape_id: usize) -> Result<LabeledCloud> {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(Error::parse(path, i + 1, format!("expected 4 columns, got {}", toks.len())));
        }
        let mut xyz = [0.0; 3];
        for (slot, t) in xyz.iter_mut().zip(&toks) {
            *slot = t
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad coordinate {t:?}")))?;
        }
        let l: u32 = toks[3]
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("bad class id {:?}", toks[3])))?;
        points.push(Point::new(xyz[0], xyz[1], xyz[2]));
        labels.push(l);
    }
    let cloud = PointCloud::new(points).map_err(|e| Error::parse(path, 0, e.to_string()))?;
    LabeledCloud::new(cloud, LabelMap::new(labels, classes.clone())?, shape_id)
}

pub fn load_xyzl(path: impl AsRef<Path>, classes: &ClassTable, shape_id: usize) -> Result<LabeledCloud> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_xyzl(path, &text, classes, shape_id)
}
