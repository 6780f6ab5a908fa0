//! Label transfer from the mean shape, multi-annotator aggregation and the
//! annotation-accuracy metric.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::LabelMap;

/// Copy the mean-shape labels onto a generated shape with `n_vertices`
/// vertices. Correspondence is by index, so this is an identity copy.
pub fn transfer_labels(mean_labels: &LabelMap, n_vertices: usize) -> Result<LabelMap> {
    if mean_labels.len() != n_vertices {
        return Err(Error::Dimension {
            expected: mean_labels.len(),
            actual: n_vertices,
            context: "label transfer target vertex count",
        });
    }
    Ok(mean_labels.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AggregationPolicy {
    /// Any annotator marking a landmark class wins over background.
    #[default]
    Union,
    /// A class needs more than half of all annotators.
    Majority,
}

/// Several annotators' label maps for one shape.
#[derive(Debug, Clone)]
pub struct AnnotationSet {
    shape_id: String,
    annotators: Vec<String>,
    maps: Vec<LabelMap>,
}

impl AnnotationSet {
    pub fn new(shape_id: impl Into<String>, annotators: Vec<String>, maps: Vec<LabelMap>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::InvalidArgument("annotation set has no annotators".into()));
        }
        if annotators.len() != maps.len() {
            return Err(Error::InvalidArgument(format!(
                "{} annotator ids for {} label maps",
                annotators.len(),
                maps.len()
            )));
        }
        let first = &maps[0];
        for (i, m) in maps.iter().enumerate().skip(1) {
            if m.len() != first.len() {
                return Err(Error::Dimension {
                    expected: first.len(),
                    actual: m.len(),
                    context: "annotator label map length",
                });
            }
            if m.classes() != first.classes() {
                return Err(Error::InvalidLabels(format!(
                    "annotator {i} uses a different class table"
                )));
            }
        }
        Ok(Self {
            shape_id: shape_id.into(),
            annotators,
            maps,
        })
    }

    pub fn shape_id(&self) -> &str {
        &self.shape_id
    }

    pub fn annotators(&self) -> &[String] {
        &self.annotators
    }

    pub fn maps(&self) -> &[LabelMap] {
        &self.maps
    }
}

/// Merge annotators into one map.
///
/// Union: a vertex takes a landmark class if anyone assigned one; competing
/// landmark classes are settled by vote count, then by lowest id.
/// Majority: a landmark class needs a strict majority of all annotators,
/// otherwise background.
pub fn aggregate_annotations(set: &AnnotationSet, policy: AggregationPolicy) -> Result<LabelMap> {
    let n = set.maps[0].len();
    let total = set.maps.len();
    let mut out = Vec::with_capacity(n);
    let mut votes: BTreeMap<u32, usize> = BTreeMap::new();
    for i in 0..n {
        votes.clear();
        for m in &set.maps {
            let c = m.labels()[i];
            if c != 0 {
                *votes.entry(c).or_insert(0) += 1;
            }
        }
        // BTreeMap iterates ascending, and max_by_key keeps the last maximum,
        // so walk in reverse to favour the lowest id on ties.
        let best = votes
            .iter()
            .rev()
            .max_by_key(|(_, &count)| count)
            .map(|(&c, &count)| (c, count));
        let label = match (policy, best) {
            (_, None) => 0,
            (AggregationPolicy::Union, Some((c, _))) => c,
            (AggregationPolicy::Majority, Some((c, count))) => {
                if 2 * count > total {
                    c
                } else {
                    0
                }
            }
        };
        out.push(label);
    }
    LabelMap::new(out, set.maps[0].classes().clone())
}

fn check_lengths(a: &LabelMap, b: &LabelMap) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: b.len(),
            actual: a.len(),
            context: "label map lengths",
        });
    }
    Ok(())
}

/// `|A ∩ GT| / |GT|` over the vertices of `class_id`: the share of
/// ground-truth vertices the annotators recovered.
pub fn annotation_accuracy(annotated: &LabelMap, truth: &LabelMap, class_id: u32) -> Result<f64> {
    check_lengths(annotated, truth)?;
    let mut gt = 0usize;
    let mut hit = 0usize;
    for (&a, &g) in annotated.labels().iter().zip(truth.labels()) {
        if g == class_id {
            gt += 1;
            if a == class_id {
                hit += 1;
            }
        }
    }
    if gt == 0 {
        return Err(Error::UndefinedMetric(format!(
            "ground truth has no vertex of class {class_id}"
        )));
    }
    Ok(hit as f64 / gt as f64)
}

/// Accuracy pooled over all landmark (nonzero) ground-truth vertices.
pub fn landmark_accuracy(annotated: &LabelMap, truth: &LabelMap) -> Result<f64> {
    check_lengths(annotated, truth)?;
    let mut gt = 0usize;
    let mut hit = 0usize;
    for (&a, &g) in annotated.labels().iter().zip(truth.labels()) {
        if g != 0 {
            gt += 1;
            if a == g {
                hit += 1;
            }
        }
    }
    if gt == 0 {
        return Err(Error::UndefinedMetric("ground truth has no landmark vertices".into()));
    }
    Ok(hit as f64 / gt as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub shape_id: String,
    pub class_id: u32,
    pub accuracy: f64,
}

/// Per-shape, per-class accuracies of aggregated annotations against
/// transferred labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub policy: AggregationPolicy,
    pub metric: String,
    pub rows: Vec<StudyRow>,
    /// Per shape: accuracy pooled over all landmark classes.
    pub per_shape_overall: Vec<(String, f64)>,
    /// Mean over shapes of `per_shape_overall`.
    pub overall: f64,
    /// Per class: mean over shapes in which the class occurs.
    pub per_class: BTreeMap<u32, f64>,
}

pub const ACCURACY_METRIC: &str = "intersection_over_ground_truth";

/// Run the annotation study: aggregate each shape's annotators and score
/// them against `truth` (paired by position).
pub fn run_study(
    sets: &[AnnotationSet],
    truth: &[LabelMap],
    policy: AggregationPolicy,
) -> Result<StudyReport> {
    if sets.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "{} annotation sets for {} ground-truth maps",
            sets.len(),
            truth.len()
        )));
    }
    if sets.is_empty() {
        return Err(Error::InvalidArgument("study has no shapes".into()));
    }
    let mut rows = Vec::new();
    let mut per_shape_overall = Vec::new();
    let mut class_acc: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for (set, gt) in sets.iter().zip(truth) {
        let agg = aggregate_annotations(set, policy)?;
        for &c in gt.counts().keys().filter(|&&c| c != 0) {
            let acc = annotation_accuracy(&agg, gt, c)?;
            class_acc.entry(c).or_default().push(acc);
            rows.push(StudyRow {
                shape_id: set.shape_id.clone(),
                class_id: c,
                accuracy: acc,
            });
        }
        per_shape_overall.push((set.shape_id.clone(), landmark_accuracy(&agg, gt)?));
    }
    let overall = per_shape_overall.iter().map(|(_, a)| a).sum::<f64>() / per_shape_overall.len() as f64;
    let per_class = class_acc
        .into_iter()
        .map(|(c, v)| (c, v.iter().sum::<f64>() / v.len() as f64))
        .collect();
    Ok(StudyReport {
        policy,
        metric: ACCURACY_METRIC.into(),
        rows,
        per_shape_overall,
        overall,
        per_class,
    })
}

impl StudyReport {
    /// `shape_id,class_id,accuracy` rows followed by the averages; the
    /// overall rows use class `all`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("shape_id,class_id,accuracy\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{}", r.shape_id, r.class_id, r.accuracy);
        }
        for (id, acc) in &self.per_shape_overall {
            let _ = writeln!(out, "{id},all,{acc}");
        }
        for (c, acc) in &self.per_class {
            let _ = writeln!(out, "mean,{c},{acc}");
        }
        let _ = writeln!(out, "mean,all,{}", self.overall);
        out
    }
}
