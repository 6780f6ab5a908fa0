//! Synthetic labeled point-cloud datasets drawn from a shape model.
//!
//! Each shape is produced independently from its own random stream:
//! draw coefficients, generate the surface, copy the mean-shape labels,
//! downsample, shuffle and optionally rotate. The stream for shape `id` is
//! ChaCha20 seeded with the master seed and positioned on stream number
//! `id`, so any shape can be regenerated alone and the output does not
//! depend on how many threads produced it.

mod sampling;
mod xyzl;

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Workers};
use crate::labeling::transfer_labels;
use crate::mesh::{ClassTable, LabelMap, PointCloud};
use crate::ssm::{sample_uniform, ShapeParams, SsmModel, DEFAULT_SIGMA_RANGE};

pub use sampling::{fps, random_permutation, random_rotation, random_subset};
pub use xyzl::{load_xyzl, save_xyzl};

pub use crate::spatial::knn_indices;

/// Points with one label each.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCloud {
    pub cloud: PointCloud,
    pub labels: LabelMap,
    pub shape_id: usize,
}

impl LabeledCloud {
    pub fn new(cloud: PointCloud, labels: LabelMap, shape_id: usize) -> Result<Self> {
        if cloud.len() != labels.len() {
            return Err(Error::Dimension {
                expected: cloud.len(),
                actual: labels.len(),
                context: "labels per point",
            });
        }
        Ok(Self {
            cloud,
            labels,
            shape_id,
        })
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    fn select(&self, indices: &[usize]) -> Self {
        Self {
            cloud: self.cloud.select(indices),
            labels: self.labels.select(indices),
            shape_id: self.shape_id,
        }
    }
}

/// Apply one random permutation to points and labels together. Returns the
/// permutation: output entry `i` is input entry `perm[i]`.
pub fn shuffle_points<R: rand::Rng + ?Sized>(cloud: &LabeledCloud, rng: &mut R) -> (LabeledCloud, Vec<usize>) {
    let perm = random_permutation(cloud.len(), rng);
    (cloud.select(&perm), perm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Downsample {
    #[default]
    Fps,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RotationPolicy {
    pub train: bool,
    pub val: bool,
    pub test: bool,
}

impl Default for RotationPolicy {
    fn default() -> Self {
        Self {
            train: false,
            val: false,
            test: true,
        }
    }
}

impl RotationPolicy {
    pub fn applies_to(&self, split: Split) -> bool {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub n_points: usize,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub rotate: RotationPolicy,
    pub downsample: Downsample,
    pub fps_start: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_train: 8800,
            n_val: 2200,
            n_test: 500,
            n_points: 4096,
            sigma_lo: DEFAULT_SIGMA_RANGE.0,
            sigma_hi: DEFAULT_SIGMA_RANGE.1,
            rotate: RotationPolicy::default(),
            downsample: Downsample::Fps,
            fps_start: 0,
        }
    }
}

impl DatasetConfig {
    pub fn total(&self) -> usize {
        self.n_train + self.n_val + self.n_test
    }

    /// Shape ids are assigned train first, then val, then test.
    pub fn split_of(&self, id: usize) -> Split {
        if id < self.n_train {
            Split::Train
        } else if id < self.n_train + self.n_val {
            Split::Val
        } else {
            Split::Test
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeRecord {
    pub id: usize,
    pub split: Split,
    pub params: ShapeParams,
    /// Indices into the model vertices, in selection order.
    pub downsample_indices: Vec<usize>,
    /// Output point `i` is downsampled point `permutation[i]`.
    pub permutation: Vec<usize>,
    /// Row-major rotation applied after shuffling, if any.
    pub rotation: Option<[[f64; 3]; 3]>,
    /// Relative to the dataset directory.
    pub file: String,
}

impl ShapeRecord {
    pub fn rotation_matrix(&self) -> Option<Matrix3<f64>> {
        self.rotation
            .map(|r| Matrix3::from_fn(|i, j| r[i][j]))
    }
}

pub const MANIFEST_FORMAT: &str = "ssmlab-dataset";
pub const MANIFEST_VERSION: u32 = 1;
pub const RNG_SCHEME: &str = "chacha20(seed=master_seed, stream=shape_id); draws: params, downsample (random mode), permutation, rotation";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub master_seed: u64,
    pub rng_scheme: String,
    pub config: DatasetConfig,
    pub classes: ClassTable,
    pub n_model_vertices: usize,
    pub n_modes: usize,
    pub complete: bool,
    pub records: Vec<ShapeRecord>,
}

impl DatasetManifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &ShapeRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn check(&self) -> Result<()> {
        let c = &self.config;
        for split in Split::ALL {
            let want = match split {
                Split::Train => c.n_train,
                Split::Val => c.n_val,
                Split::Test => c.n_test,
            };
            let got = self.split(split).count();
            if got != want {
                return Err(Error::Format(format!(
                    "split {} has {got} records, config says {want}",
                    split.dir_name()
                )));
            }
        }
        let mut ids: Vec<usize> = self.records.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.records.len() {
            return Err(Error::Format("duplicate shape ids".into()));
        }
        for r in &self.records {
            if let Some(m) = r.rotation_matrix() {
                let dev = (m.transpose() * m - Matrix3::identity()).amax();
                if dev > 1e-10 || (m.determinant() - 1.0).abs() > 1e-10 {
                    return Err(Error::Format(format!("shape {} has a non-rotation matrix", r.id)));
                }
            }
        }
        Ok(())
    }
}

pub fn shape_file_name(id: usize) -> String {
    format!("shape_{id:05}.xyzl")
}

/// The random stream reserved for one shape.
pub fn shape_rng(master_seed: u64, shape_id: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(shape_id as u64);
    rng
}

/// Produce one labeled cloud and its record, without touching the disk.
pub fn generate_sample(
    model: &SsmModel,
    mean_labels: &LabelMap,
    config: &DatasetConfig,
    master_seed: u64,
    id: usize,
) -> Result<(ShapeRecord, LabeledCloud)> {
    let split = config.split_of(id);
    let mut rng = shape_rng(master_seed, id);

    let params = sample_uniform(model.n_modes(), config.sigma_lo, config.sigma_hi, &mut rng)?;
    let shape = model.generate_shape(&params)?;
    let labels = transfer_labels(mean_labels, shape.n_vertices())?;
    let full = LabeledCloud::new(PointCloud::new(shape.to_points())?, labels, id)?;

    let downsample_indices = match config.downsample {
        Downsample::Fps => fps(full.cloud.points(), config.n_points, config.fps_start)?,
        Downsample::Random => random_subset(full.len(), config.n_points, &mut rng)?,
    };
    let reduced = full.select(&downsample_indices);
    let (mut out, permutation) = shuffle_points(&reduced, &mut rng);

    let rotation = if config.rotate.applies_to(split) {
        let r = random_rotation(&mut rng);
        out.cloud = out.cloud.transformed(&r, &Vector3::zeros());
        Some([
            [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
        ])
    } else {
        None
    };

    let record = ShapeRecord {
        id,
        split,
        params,
        downsample_indices,
        permutation,
        rotation,
        file: format!("{}/{}", split.dir_name(), shape_file_name(id)),
    };
    Ok((record, out))
}

fn validate_config(model: &SsmModel, mean_labels: &LabelMap, config: &DatasetConfig) -> Result<()> {
    if mean_labels.len() != model.n_vertices() {
        return Err(Error::Dimension {
            expected: model.n_vertices(),
            actual: mean_labels.len(),
            context: "mean-shape labels vs model vertices",
        });
    }
    if config.n_points == 0 || config.n_points > model.n_vertices() {
        return Err(Error::InvalidArgument(format!(
            "n_points must be in 1..={}, got {}",
            model.n_vertices(),
            config.n_points
        )));
    }
    if config.downsample == Downsample::Fps && config.fps_start >= model.n_vertices() {
        return Err(Error::InvalidArgument(format!(
            "fps_start {} out of range",
            config.fps_start
        )));
    }
    if !(config.sigma_lo < config.sigma_hi) && model.n_modes() > 0 {
        return Err(Error::InvalidArgument(format!(
            "sigma range requires lo < hi, got [{}, {}]",
            config.sigma_lo, config.sigma_hi
        )));
    }
    Ok(())
}

/// Generate every shape in memory.
pub fn generate_in_memory(
    model: &SsmModel,
    mean_labels: &LabelMap,
    config: &DatasetConfig,
    master_seed: u64,
    workers: Workers,
) -> Result<Vec<(ShapeRecord, LabeledCloud)>> {
    validate_config(model, mean_labels, config)?;
    let ids: Vec<usize> = (0..config.total()).collect();
    exec::try_map(workers, &ids, |&id| {
        generate_sample(model, mean_labels, config, master_seed, id)
    })
}

/// Generate the dataset under `out_dir`: `manifest.json` plus
/// `train/`, `val/`, `test/` directories of `.xyzl` files.
///
/// On failure, files written by this call are removed.
pub fn generate_dataset(
    model: &SsmModel,
    mean_labels: &LabelMap,
    config: &DatasetConfig,
    master_seed: u64,
    out_dir: &Path,
    workers: Workers,
) -> Result<DatasetManifest> {
    validate_config(model, mean_labels, config)?;
    for split in Split::ALL {
        let d = out_dir.join(split.dir_name());
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let ids: Vec<usize> = (0..config.total()).collect();
    let results = exec::map(workers, &ids, |&id| -> Result<ShapeRecord> {
        let (record, cloud) = generate_sample(model, mean_labels, config, master_seed, id)?;
        save_xyzl(&cloud, out_dir.join(&record.file))?;
        Ok(record)
    });

    let mut records = Vec::with_capacity(results.len());
    let mut failure = None;
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) if failure.is_none() => failure = Some(e),
            Err(_) => {}
        }
    }
    if let Some(err) = failure {
        for rec in &records {
            let _ = fs::remove_file(out_dir.join(&rec.file));
        }
        return Err(err);
    }

    let manifest = DatasetManifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        master_seed,
        rng_scheme: RNG_SCHEME.into(),
        config: config.clone(),
        classes: mean_labels.classes().clone(),
        n_model_vertices: model.n_vertices(),
        n_modes: model.n_modes(),
        complete: true,
        records,
    };
    save_manifest(&manifest, out_dir)?;
    Ok(manifest)
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}

pub fn save_manifest(manifest: &DatasetManifest, dir: &Path) -> Result<()> {
    let path = manifest_path(dir);
    let text = serde_json::to_string(manifest).map_err(|e| Error::json(&path, e))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn load_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = manifest_path(dir);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
    if m.format != MANIFEST_FORMAT || m.version != MANIFEST_VERSION {
        return Err(Error::Format(format!(
            "expected {MANIFEST_FORMAT} v{MANIFEST_VERSION}, found {} v{}",
            m.format, m.version
        )));
    }
    Ok(m)
}

/// Read all clouds of one split.
pub fn load_split(dir: &Path, manifest: &DatasetManifest, split: Split, workers: Workers) -> Result<Vec<LabeledCloud>> {
    let records: Vec<&ShapeRecord> = manifest.split(split).collect();
    exec::try_map(workers, &records, |r| {
        load_xyzl(dir.join(&r.file), &manifest.classes, r.id)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;
    use crate::ssm::{build_ssm, gpa_align, Retention};

    fn small_model() -> (SsmModel, LabelMap) {
        let fx = fixture::generate(6, 200, 3).unwrap();
        let cohort = crate::mesh::validate_cohort(fx.meshes).unwrap();
        let aligned = gpa_align(&cohort, false).unwrap();
        (build_ssm(&aligned, Retention::All, false).unwrap(), fx.labels)
    }

    #[test]
    fn identity_pipeline_on_zero_mode_model() {
        let fx = fixture::generate(2, 100, 1).unwrap();
        let m0 = fx.meshes[0].clone();
        let cohort = crate::mesh::validate_cohort(vec![m0.clone(), m0.clone()]).unwrap();
        let model = build_ssm(&cohort, Retention::All, false).unwrap();
        assert_eq!(model.n_modes(), 0);
        let n = model.n_vertices();
        let config = DatasetConfig {
            n_train: 1,
            n_val: 0,
            n_test: 0,
            n_points: n,
            rotate: RotationPolicy { train: false, val: false, test: false },
            ..DatasetConfig::default()
        };
        let out = generate_in_memory(&model, &fx.labels, &config, 9, Workers::Sequential).unwrap();
        let (rec, cloud) = &out[0];
        assert!(rec.rotation.is_none());
        let mean_pts = model.mean().to_points();
        for (i, &src) in rec.permutation.iter().enumerate() {
            let v = rec.downsample_indices[src];
            assert_eq!(cloud.cloud.points()[i], mean_pts[v]);
            assert_eq!(cloud.labels.labels()[i], fx.labels.labels()[v]);
        }
        let mut counts_in = fx.labels.counts();
        counts_in.retain(|_, c| *c > 0);
        assert_eq!(cloud.labels.counts(), counts_in);
    }

    #[test]
    fn sample_is_reproducible_per_id() {
        let (model, labels) = small_model();
        let config = DatasetConfig {
            n_train: 3,
            n_val: 1,
            n_test: 2,
            n_points: 64,
            ..DatasetConfig::default()
        };
        let all = generate_in_memory(&model, &labels, &config, 17, Workers::Auto).unwrap();
        let (rec4, cloud4) = generate_sample(&model, &labels, &config, 17, 4).unwrap();
        assert_eq!(all[4].0, rec4);
        assert_eq!(all[4].1, cloud4);
        assert_eq!(rec4.split, Split::Test);
        assert!(rec4.rotation.is_some());
        assert!(all[0].0.rotation.is_none());
        // downsampled labels stay bound to their vertices
        for (i, &src) in rec4.permutation.iter().enumerate() {
            let v = rec4.downsample_indices[src];
            assert_eq!(cloud4.labels.labels()[i], labels.labels()[v]);
        }
    }

    #[test]
    fn shuffle_keeps_pairs() {
        let (model, labels) = small_model();
        let pts = model.mean().to_points();
        let lc = LabeledCloud::new(PointCloud::new(pts).unwrap(), labels, 0).unwrap();
        let mut rng = shape_rng(1, 2);
        let (out, perm) = shuffle_points(&lc, &mut rng);
        let key = |c: &LabeledCloud| {
            let mut v: Vec<(u64, u64, u64, u32)> = c
                .cloud
                .points()
                .iter()
                .zip(c.labels.labels())
                .map(|(p, &l)| (p.x.to_bits(), p.y.to_bits(), p.z.to_bits(), l))
                .collect();
            v.sort();
            v
        };
        assert_eq!(key(&out), key(&lc));
        assert_eq!(out.labels.counts(), lc.labels.counts());
        let (again, perm2) = shuffle_points(&lc, &mut shape_rng(1, 2));
        assert_eq!(perm, perm2);
        assert_eq!(again, out);
    }

    #[test]
    fn config_validation() {
        let (model, labels) = small_model();
        let too_many = DatasetConfig {
            n_points: model.n_vertices() + 1,
            ..DatasetConfig::default()
        };
        assert!(generate_in_memory(&model, &labels, &too_many, 0, Workers::Sequential).is_err());
        let bad_range = DatasetConfig {
            n_train: 1,
            n_val: 0,
            n_test: 0,
            n_points: 10,
            sigma_lo: 1.0,
            sigma_hi: 1.0,
            ..DatasetConfig::default()
        };
        assert!(generate_in_memory(&model, &labels, &bad_range, 0, Workers::Sequential).is_err());
        let short = labels.select(&[0, 1, 2]);
        let ok = DatasetConfig { n_points: 10, ..DatasetConfig::default() };
        assert!(generate_in_memory(&model, &short, &ok, 0, Workers::Sequential).is_err());
    }

    #[test]
    fn random_downsample_mode() {
        let (model, labels) = small_model();
        let config = DatasetConfig {
            n_train: 2,
            n_val: 0,
            n_test: 0,
            n_points: 50,
            downsample: Downsample::Random,
            ..DatasetConfig::default()
        };
        let out = generate_in_memory(&model, &labels, &config, 3, Workers::Sequential).unwrap();
        for (rec, cloud) in &out {
            assert_eq!(cloud.len(), 50);
            let mut idx = rec.downsample_indices.clone();
            idx.sort();
            idx.dedup();
            assert_eq!(idx.len(), 50);
        }
    }

    #[test]
    fn dataset_on_disk_round_trips() {
        let (model, labels) = small_model();
        let config = DatasetConfig {
            n_train: 4,
            n_val: 2,
            n_test: 3,
            n_points: 80,
            ..DatasetConfig::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let manifest = generate_dataset(&model, &labels, &config, 5, dir.path(), Workers::Auto).unwrap();
        manifest.check().unwrap();
        assert_eq!(load_manifest(dir.path()).unwrap(), manifest);
        let test = load_split(dir.path(), &manifest, Split::Test, Workers::Sequential).unwrap();
        assert_eq!(test.len(), 3);
        assert!(test.iter().all(|c| c.len() == 80));
        assert!(dir.path().join("test").join(shape_file_name(8)).exists());
    }
}
