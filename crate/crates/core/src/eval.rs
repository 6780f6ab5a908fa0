//! Intersection-over-union scoring of predicted labels.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::{load_xyzl, shape_file_name, DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::exec::{self, Workers};
use crate::mesh::{ClassTable, LabelMap};

/// How a class absent from both maps is treated.
pub const EMPTY_CLASS_POLICY: &str = "skip";

fn check_lengths(gt: &LabelMap, pred: &LabelMap) -> Result<()> {
    if gt.len() != pred.len() {
        return Err(Error::Dimension {
            expected: gt.len(),
            actual: pred.len(),
            context: "prediction length vs ground truth",
        });
    }
    Ok(())
}

/// IoU of `class_id`, or `None` when neither map uses the class.
pub fn iou(gt: &LabelMap, pred: &LabelMap, class_id: u32) -> Result<Option<f64>> {
    check_lengths(gt, pred)?;
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&g, &p) in gt.labels().iter().zip(pred.labels()) {
        let (a, b) = (g == class_id, p == class_id);
        inter += (a && b) as usize;
        union += (a || b) as usize;
    }
    Ok((union > 0).then(|| inter as f64 / union as f64))
}

/// Per-class IoU for every class present in either map.
pub fn class_ious(gt: &LabelMap, pred: &LabelMap, include_background: bool) -> Result<BTreeMap<u32, f64>> {
    check_lengths(gt, pred)?;
    let mut inter: BTreeMap<u32, usize> = BTreeMap::new();
    let mut union: BTreeMap<u32, usize> = BTreeMap::new();
    for (&g, &p) in gt.labels().iter().zip(pred.labels()) {
        *union.entry(g).or_default() += 1;
        if g == p {
            *inter.entry(g).or_default() += 1;
        } else {
            *union.entry(p).or_default() += 1;
        }
    }
    Ok(union
        .into_iter()
        .filter(|&(c, _)| include_background || c != 0)
        .map(|(c, u)| (c, inter.get(&c).copied().unwrap_or(0) as f64 / u as f64))
        .collect())
}

/// Mean IoU over the included classes present in either map.
pub fn miou_shape(gt: &LabelMap, pred: &LabelMap, include_background: bool) -> Result<f64> {
    let ious = class_ious(gt, pred, include_background)?;
    mean_of(&ious)
}

fn mean_of(ious: &BTreeMap<u32, f64>) -> Result<f64> {
    if ious.is_empty() {
        return Err(Error::UndefinedMetric("no class to average".into()));
    }
    Ok(ious.values().sum::<f64>() / ious.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeScore {
    pub shape_id: usize,
    pub iou: BTreeMap<u32, f64>,
    pub miou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub include_background: bool,
    pub empty_class_policy: String,
    pub classes: ClassTable,
    pub shapes: Vec<ShapeScore>,
    /// Mean over the shapes in which the class was scored.
    pub per_class: BTreeMap<u32, f64>,
    /// Mean of the per-shape mIoU values.
    pub mean_miou: f64,
}

/// Score `(shape_id, ground truth, prediction)` triples.
pub fn evaluate_labels(
    items: &[(usize, LabelMap, LabelMap)],
    include_background: bool,
    workers: Workers,
) -> Result<EvalReport> {
    let first = items
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to evaluate".into()))?;
    let shapes = exec::try_map(workers, items, |(id, gt, pred)| {
        let iou = class_ious(gt, pred, include_background)?;
        let miou = mean_of(&iou)?;
        Ok::<_, Error>(ShapeScore {
            shape_id: *id,
            iou,
            miou,
        })
    })?;
    let mut sums: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for s in &shapes {
        for (&c, &v) in &s.iou {
            let e = sums.entry(c).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    let per_class = sums.into_iter().map(|(c, (s, n))| (c, s / n as f64)).collect();
    let mean_miou = shapes.iter().map(|s| s.miou).sum::<f64>() / shapes.len() as f64;
    Ok(EvalReport {
        include_background,
        empty_class_policy: EMPTY_CLASS_POLICY.into(),
        classes: first.1.classes().clone(),
        shapes,
        per_class,
        mean_miou,
    })
}

/// Score the prediction files in `pred_dir` (named like the dataset's shape
/// files) against one split of a dataset.
pub fn evaluate_dataset(
    data_dir: &Path,
    manifest: &DatasetManifest,
    split: Split,
    pred_dir: &Path,
    include_background: bool,
    workers: Workers,
) -> Result<EvalReport> {
    let records: Vec<_> = manifest.split(split).collect();
    let missing: Vec<usize> = records
        .iter()
        .filter(|r| !pred_dir.join(shape_file_name(r.id)).is_file())
        .map(|r| r.id)
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingPredictions(missing));
    }
    let items = exec::try_map(workers, &records, |r| {
        let gt = load_xyzl(data_dir.join(&r.file), &manifest.classes, r.id)?;
        let pred = load_xyzl(pred_dir.join(shape_file_name(r.id)), &manifest.classes, r.id)?;
        Ok::<_, Error>((r.id, gt.labels, pred.labels))
    })?;
    evaluate_labels(&items, include_background, workers)
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    fn class_name(&self, c: u32) -> String {
        self.classes
            .name(c)
            .map(str::to_owned)
            .unwrap_or_else(|| format!("class_{c}"))
    }

    /// Aligned columns for reading in a terminal.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "shapes: {}   background in mIoU: {}   empty classes: {}",
            self.shapes.len(),
            if self.include_background { "yes" } else { "no" },
            self.empty_class_policy
        );
        let _ = writeln!(out, "{:<24} {:>8}", "class", "IoU");
        for (&c, v) in &self.per_class {
            let _ = writeln!(out, "{:<24} {:>8.4}", format!("{} ({c})", self.class_name(c)), v);
        }
        let _ = writeln!(out, "{:<24} {:>8.4}", "mean mIoU", self.mean_miou);
        out
    }

    /// One row per shape; classes not scored in a shape are left blank.
    pub fn to_csv(&self) -> String {
        let cols: Vec<u32> = self.per_class.keys().copied().collect();
        let mut out = String::from("shape_id");
        for c in &cols {
            let _ = write!(out, ",iou_{c}");
        }
        out.push_str(",miou\n");
        for s in &self.shapes {
            let _ = write!(out, "{}", s.shape_id);
            for c in &cols {
                match s.iou.get(c) {
                    Some(v) => {
                        let _ = write!(out, ",{v}");
                    }
                    None => out.push(','),
                }
            }
            let _ = writeln!(out, ",{}", s.miou);
        }
        out
    }
}
