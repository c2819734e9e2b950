//! Two-stage purification of noisy classification datasets.
//!
//! A weight head learns how much to trust each sample; samples whose
//! weighted score stays low are pruned (coarse stage). The surviving set is
//! then relabeled wherever the model's prediction is stable and clearly more
//! confident than the annotation (fine stage). A final model is trained on the
//! result.
//!
//! The crate also ships a synthetic data generator with ground-truth noise
//! flags, oracle-side quality metrics and a CLI (`sciu`).

pub mod cgp;
pub mod dataset;
pub mod error;
pub mod fgc;
pub mod history;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod report;
pub mod synth;
pub mod trainer;

pub use dataset::{CorrectionEvent, Dataset, QualityFlag, Sample, SampleId};
pub use error::{Result, SciuError};
pub use model::{ForwardOutput, ModelDims, SciuModel};
pub use pipeline::{run_pipeline, Mode, RunReport};
pub use synth::SynthConfig;
pub use trainer::TrainConfig;
