//! Rotation-invariant per-point landmark segmenter.
//!
//! Points are described by [`features`] that ignore pose, standardized, and
//! classified by a small MLP trained with Adam on weighted cross-entropy.

pub mod features;
pub mod mlp;

use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::LabeledCloud;
use crate::error::{Error, Result};
use crate::exec::{self, Workers};
use crate::mesh::{ClassTable, LabelMap, PointCloud};

pub use features::{extract_features, FeatureConfig, Features};
pub use mlp::{softmax_rows, Adam, AdamConfig, Gradients, Mlp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub scales: Vec<usize>,
    /// Upper bound on inverse-frequency class weights.
    pub weight_cap: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 12,
            epochs: 50,
            seed: 0,
            hidden: vec![64, 64],
            scales: FeatureConfig::default().scales,
            weight_cap: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub class_weights: Vec<f64>,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmenterModel {
    pub features: FeatureConfig,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub mlp: Mlp,
    /// Output index -> class id, ascending.
    pub class_ids: Vec<u32>,
    pub classes: ClassTable,
    pub meta: TrainingMeta,
}

impl SegmenterModel {
    /// Untrained model with identity standardization.
    pub fn untrained(features: FeatureConfig, classes: ClassTable, hidden: &[usize], seed: u64) -> Self {
        let class_ids = classes.ids();
        let dim = features.dim();
        let mut sizes = vec![dim];
        sizes.extend_from_slice(hidden);
        sizes.push(class_ids.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            features,
            feature_mean: vec![0.0; dim],
            feature_std: vec![1.0; dim],
            mlp: Mlp::new(&sizes, &mut rng),
            class_ids,
            classes,
            meta: TrainingMeta {
                seed,
                epochs: 0,
                lr: 0.0,
                batch_size: 0,
                class_weights: Vec::new(),
                train_loss: Vec::new(),
                val_loss: Vec::new(),
            },
        }
    }

    fn standardize(&self, f: &Features) -> DMatrix<f64> {
        DMatrix::from_fn(f.rows, f.dim, |i, j| {
            (f.data[i * f.dim + j] - self.feature_mean[j]) / self.feature_std[j]
        })
    }

    fn check(&self) -> Result<()> {
        let dim = self.features.dim();
        if self.mlp.n_inputs() != dim
            || self.feature_mean.len() != dim
            || self.feature_std.len() != dim
        {
            return Err(Error::Dimension {
                expected: dim,
                actual: self.mlp.n_inputs(),
                context: "feature dimension vs model input",
            });
        }
        if self.mlp.n_outputs() != self.class_ids.len() {
            return Err(Error::Dimension {
                expected: self.class_ids.len(),
                actual: self.mlp.n_outputs(),
                context: "class count vs model output",
            });
        }
        Ok(())
    }

    /// Class probabilities, one row per point.
    pub fn predict_proba(&self, cloud: &PointCloud, workers: Workers) -> Result<DMatrix<f64>> {
        self.check()?;
        let f = extract_features(cloud, &self.features, workers)?;
        Ok(softmax_rows(&self.mlp.logits(&self.standardize(&f))))
    }

    /// Argmax class per point; ties go to the lowest class id.
    pub fn predict(&self, cloud: &PointCloud, workers: Workers) -> Result<LabelMap> {
        self.check()?;
        let f = extract_features(cloud, &self.features, workers)?;
        let logits = self.mlp.logits(&self.standardize(&f));
        let labels = logits
            .row_iter()
            .map(|row| {
                let mut best = 0;
                for j in 1..row.len() {
                    if row[j] > row[best] {
                        best = j;
                    }
                }
                self.class_ids[best]
            })
            .collect();
        LabelMap::new(labels, self.classes.clone())
    }
}

/// Inverse class frequency, scaled so the most frequent class has weight 1,
/// capped at `cap`. Classes absent from the data get weight 1.
pub fn class_weights(counts: &[usize], cap: f64) -> Vec<f64> {
    let max = counts.iter().copied().max().unwrap_or(0) as f64;
    counts
        .iter()
        .map(|&c| if c == 0 { 1.0 } else { (max / c as f64).min(cap) })
        .collect()
}

struct Prepared {
    x: DMatrix<f64>,
    targets: Vec<usize>,
}

fn class_index(class_ids: &[u32], labels: &LabelMap) -> Result<Vec<usize>> {
    labels
        .labels()
        .iter()
        .map(|l| {
            class_ids
                .binary_search(l)
                .map_err(|_| Error::UnknownClass(*l))
        })
        .collect()
}

fn stack(rows: &[&Features], model: &SegmenterModel) -> DMatrix<f64> {
    let n: usize = rows.iter().map(|f| f.rows).sum();
    let dim = model.features.dim();
    let mut x = DMatrix::zeros(n, dim);
    let mut r0 = 0;
    for f in rows {
        for i in 0..f.rows {
            for j in 0..dim {
                x[(r0 + i, j)] = (f.data[i * dim + j] - model.feature_mean[j]) / model.feature_std[j];
            }
        }
        r0 += f.rows;
    }
    x
}

/// Train on `train`, tracking the loss on `val` after each epoch.
///
/// Shapes are visited in a seeded random order, `batch_size` shapes per
/// Adam step. The result depends only on the data and `config`.
pub fn train(
    train: &[LabeledCloud],
    val: &[LabeledCloud],
    classes: &ClassTable,
    config: &TrainConfig,
    workers: Workers,
) -> Result<SegmenterModel> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("no training shapes".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    if !(config.lr > 0.0) {
        return Err(Error::InvalidArgument(format!("learning rate must be positive, got {}", config.lr)));
    }
    let feature_cfg = FeatureConfig::new(config.scales.clone())?;
    let mut model = SegmenterModel::untrained(feature_cfg.clone(), classes.clone(), &config.hidden, config.seed);

    let train_f = exec::try_map(workers, train, |c| extract_features(&c.cloud, &feature_cfg, Workers::Sequential))?;
    let val_f = exec::try_map(workers, val, |c| extract_features(&c.cloud, &feature_cfg, Workers::Sequential))?;
    let train_t = train.iter().map(|c| class_index(&model.class_ids, &c.labels)).collect::<Result<Vec<_>>>()?;
    let val_t = val.iter().map(|c| class_index(&model.class_ids, &c.labels)).collect::<Result<Vec<_>>>()?;

    // standardization from the training split
    let dim = feature_cfg.dim();
    let n_rows: usize = train_f.iter().map(|f| f.rows).sum();
    let mut mean = vec![0.0; dim];
    for f in &train_f {
        for (i, v) in f.data.iter().enumerate() {
            mean[i % dim] += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n_rows as f64);
    let mut var = vec![0.0; dim];
    for f in &train_f {
        for (i, v) in f.data.iter().enumerate() {
            var[i % dim] += (v - mean[i % dim]).powi(2);
        }
    }
    model.feature_std = var
        .iter()
        .map(|v| {
            let s = (v / n_rows as f64).sqrt();
            if s > 1e-12 { s } else { 1.0 }
        })
        .collect();
    model.feature_mean = mean;

    let mut counts = vec![0usize; model.class_ids.len()];
    for t in train_t.iter().flatten() {
        counts[*t] += 1;
    }
    let weights = class_weights(&counts, config.weight_cap);

    let val_set = if val.is_empty() {
        None
    } else {
        let refs: Vec<&Features> = val_f.iter().collect();
        Some(Prepared {
            x: stack(&refs, &model),
            targets: val_t.concat(),
        })
    };

    let mut adam = Adam::new(
        AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        },
        &mut model.mlp,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5e_ed0f_7ea1);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut train_loss = Vec::with_capacity(config.epochs);
    let mut val_loss = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_rows = 0usize;
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            let feats: Vec<&Features> = batch.iter().map(|&i| &train_f[i]).collect();
            let x = stack(&feats, &model);
            let targets: Vec<usize> = batch.iter().flat_map(|&i| train_t[i].iter().copied()).collect();
            let (loss, grads) = model.mlp.loss_and_grad(&x, &targets, &weights);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                    detail: format!("loss = {loss}, batch shapes {batch:?}"),
                });
            }
            adam.step(&mut model.mlp, &grads);
            if !model.mlp.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                    detail: "parameters became non-finite after the update".into(),
                });
            }
            epoch_loss += loss * targets.len() as f64;
            epoch_rows += targets.len();
        }
        train_loss.push(epoch_loss / epoch_rows as f64);
        if let Some(v) = &val_set {
            val_loss.push(model.mlp.loss(&v.x, &v.targets, &weights));
        }
    }

    model.meta = TrainingMeta {
        seed: config.seed,
        epochs: config.epochs,
        lr: config.lr,
        batch_size: config.batch_size,
        class_weights: weights,
        train_loss,
        val_loss,
    };
    Ok(model)
}

const MODEL_FORMAT: &str = "ssmlab-segmenter";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LayerFile {
    inputs: usize,
    outputs: usize,
    /// Row-major `inputs x outputs`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    features: FeatureConfig,
    feature_mean: Vec<f64>,
    feature_std: Vec<f64>,
    class_ids: Vec<u32>,
    classes: ClassTable,
    layers: Vec<LayerFile>,
    training: TrainingMeta,
}

pub fn save_segmenter(model: &SegmenterModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let layers = model
        .mlp
        .weights
        .iter()
        .zip(&model.mlp.biases)
        .map(|(w, b)| LayerFile {
            inputs: w.nrows(),
            outputs: w.ncols(),
            weights: w.transpose().as_slice().to_vec(),
            bias: b.as_slice().to_vec(),
        })
        .collect();
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        features: model.features.clone(),
        feature_mean: model.feature_mean.clone(),
        feature_std: model.feature_std.clone(),
        class_ids: model.class_ids.clone(),
        classes: model.classes.clone(),
        layers,
        training: model.meta.clone(),
    };
    let text = serde_json::to_string(&file).map_err(|e| Error::json(path, e))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_segmenter(path: impl AsRef<Path>) -> Result<SegmenterModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let f: ModelFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    if f.format != MODEL_FORMAT || f.version != MODEL_VERSION {
        return Err(Error::Format(format!(
            "expected {MODEL_FORMAT} v{MODEL_VERSION}, found {} v{}",
            f.format, f.version
        )));
    }
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for (i, l) in f.layers.iter().enumerate() {
        if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
            return Err(Error::Format(format!("layer {i} arrays disagree with its shape")));
        }
        if i > 0 && weights.last().map(|w: &DMatrix<f64>| w.ncols()) != Some(l.inputs) {
            return Err(Error::Format(format!("layer {i} does not chain with layer {}", i - 1)));
        }
        weights.push(DMatrix::from_row_slice(l.inputs, l.outputs, &l.weights));
        biases.push(DMatrix::from_row_slice(1, l.outputs, &l.bias));
    }
    if weights.is_empty() {
        return Err(Error::Format("model has no layers".into()));
    }
    let model = SegmenterModel {
        features: FeatureConfig::new(f.features.scales)?,
        feature_mean: f.feature_mean,
        feature_std: f.feature_std,
        mlp: Mlp { weights, biases },
        class_ids: f.class_ids,
        classes: f.classes,
        meta: f.training,
    };
    model.check()?;
    if !model.mlp.is_finite() {
        return Err(Error::Format("model has non-finite parameters".into()));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Point;
    use rand::Rng;

    fn toy_cloud(seed: u64, n: usize, label: impl Fn(&Point) -> u32) -> LabeledCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Point> = (0..n)
            .map(|_| Point::new(rng.random::<f64>() * 4.0, rng.random::<f64>(), rng.random::<f64>() * 0.5))
            .collect();
        let labels = pts.iter().map(&label).collect();
        LabeledCloud::new(
            PointCloud::new(pts).unwrap(),
            LabelMap::new(labels, ClassTable::landmarks()).unwrap(),
            seed as usize,
        )
        .unwrap()
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            epochs: 5,
            hidden: vec![8],
            scales: vec![8, 16],
            ..TrainConfig::default()
        }
    }

    #[test]
    fn class_weight_rule() {
        assert_eq!(class_weights(&[100, 10, 1], 20.0), vec![1.0, 10.0, 20.0]);
        assert_eq!(class_weights(&[5, 0, 5], 20.0), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn single_class_shape_collapses() {
        let cloud = toy_cloud(1, 120, |_| 1);
        let cfg = TrainConfig {
            epochs: 200,
            scales: vec![8, 16],
            ..TrainConfig::default()
        };
        let model = train(std::slice::from_ref(&cloud), &[], &ClassTable::landmarks(), &cfg, Workers::Sequential).unwrap();
        let last = *model.meta.train_loss.last().unwrap();
        assert!(last < 1e-2, "final loss {last}");
        let pred = model.predict(&cloud.cloud, Workers::Sequential).unwrap();
        assert!(pred.labels().iter().all(|&l| l == 1));
    }

    #[test]
    fn one_shape_loss_is_nonincreasing() {
        let cloud = toy_cloud(2, 150, |p| if p.x < 1.0 { 1 } else if p.x > 3.0 { 2 } else { 0 });
        let cfg = TrainConfig {
            epochs: 60,
            scales: vec![8, 16],
            ..TrainConfig::default()
        };
        let model = train(&[cloud], &[], &ClassTable::landmarks(), &cfg, Workers::Sequential).unwrap();
        for w in model.meta.train_loss.windows(2) {
            assert!(w[1] <= w[0], "{:?}", model.meta.train_loss);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data: Vec<LabeledCloud> = (0..5)
            .map(|s| toy_cloud(s, 60, |p| if p.x < 1.5 { 1 } else { 0 }))
            .collect();
        let a = train(&data[..4], &data[4..], &ClassTable::landmarks(), &small_config(), Workers::Auto).unwrap();
        let b = train(&data[..4], &data[4..], &ClassTable::landmarks(), &small_config(), Workers::Sequential).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.meta.val_loss.len(), 5);
    }

    #[test]
    fn zero_weights_predict_lowest_class() {
        let mut model = SegmenterModel::untrained(
            FeatureConfig::new(vec![8]).unwrap(),
            ClassTable::landmarks(),
            &[4],
            0,
        );
        for p in model.mlp.params_mut() {
            p.fill(0.0);
        }
        let cloud = toy_cloud(3, 40, |_| 0);
        let pred = model.predict(&cloud.cloud, Workers::Sequential).unwrap();
        assert!(pred.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn dimension_mismatch_detected() {
        let mut model = SegmenterModel::untrained(
            FeatureConfig::new(vec![8]).unwrap(),
            ClassTable::landmarks(),
            &[4],
            0,
        );
        model.features = FeatureConfig::new(vec![8, 16]).unwrap();
        let cloud = toy_cloud(3, 40, |_| 0);
        assert!(matches!(model.predict(&cloud.cloud, Workers::Sequential), Err(Error::Dimension { .. })));
    }

    #[test]
    fn save_load_bit_exact() {
        let data: Vec<LabeledCloud> = (0..3)
            .map(|s| toy_cloud(s, 50, |p| if p.y < 0.3 { 2 } else { 0 }))
            .collect();
        let model = train(&data, &[], &ClassTable::landmarks(), &small_config(), Workers::Sequential).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seg.json");
        save_segmenter(&model, &path).unwrap();
        let back = load_segmenter(&path).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn bad_hyperparameters() {
        let data = vec![toy_cloud(0, 40, |_| 0)];
        let t = ClassTable::landmarks();
        assert!(train(&[], &[], &t, &small_config(), Workers::Sequential).is_err());
        let zero_batch = TrainConfig { batch_size: 0, ..small_config() };
        assert!(train(&data, &[], &t, &zero_batch, Workers::Sequential).is_err());
        let huge_lr = TrainConfig { lr: 1e300, epochs: 3, ..small_config() };
        let r = train(&data, &[], &t, &huge_lr, Workers::Sequential);
        assert!(r.is_ok() || matches!(r, Err(Error::NonFiniteLoss { .. })));
    }
}
