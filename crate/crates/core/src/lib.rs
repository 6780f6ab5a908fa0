//! Statistical shape models from corresponded meshes, label-transferred
//! synthetic point-cloud datasets, a rotation-invariant baseline segmenter
//! and the metrics used to score it.

// Range checks are written `!(lo < hi)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod exec;
pub mod fixture;
pub mod labeling;
pub mod mesh;
pub mod segmenter;
pub mod spatial;
pub mod ssm;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use exec::Workers;
pub use mesh::{ClassInfo, ClassTable, Cohort, LabelMap, Point, PointCloud, TriangleMesh};
