//! Epoch-driven training for the three stage kinds.
//!
//! * `Plain`: cross-entropy on raw logits.
//! * `Cgp`: weighted loss, score recording and pruning after warm-up.
//! * `Fgc`: weighted loss, prediction recording and relabeling after warm-up.
//!
//! Shuffling, initialization and reduction order are all fixed by the seed,
//! so a stage is a pure function of its inputs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cgp::{PruneEvent, PruneState};
use crate::dataset::{CorrectionEvent, Dataset, Sample, SampleId};
use crate::error::{Result, SciuError};
use crate::fgc::CorrectionState;
use crate::metrics::{uar, war, ConfusionMatrix};
use crate::model::{init_model, ForwardOutput, LossKind, ModelDims, MomentumSgd, SciuModel};
use crate::nn::argmax;

/// Probability used in the pruning score `weight · prob`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreSource {
    AnnotatedClass,
    MaxClass,
}

/// Distribution the correction stage reads its probabilities from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbSource {
    Weighted,
    Unweighted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub warmup_epochs: usize,
    pub window_t: usize,
    pub lambda: f64,
    pub tau: f64,
    pub seed: u64,
    pub score_source: ScoreSource,
    pub prob_source: ProbSource,
    pub embed_dim: usize,
    pub weight_hidden: usize,
    pub train_fraction: f64,
    /// Final training on the purified set starts from a fresh model; when
    /// false it continues from the last purification stage's model.
    pub final_from_scratch: bool,
    /// Save a checkpoint every N epochs (0 disables).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.02,
            momentum: 0.9,
            batch_size: 32,
            epochs: 30,
            warmup_epochs: 5,
            window_t: 3,
            lambda: 0.7,
            tau: 0.2,
            seed: 0,
            score_source: ScoreSource::MaxClass,
            prob_source: ProbSource::Weighted,
            embed_dim: 32,
            weight_hidden: 4,
            train_fraction: 0.8,
            final_from_scratch: true,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SciuError::Config(m));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be >= 0, got {}",
                self.learning_rate
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.window_t == 0 {
            return bad("window_t must be at least 1".into());
        }
        if self.epochs <= self.warmup_epochs + self.window_t {
            return bad(format!(
                "epochs ({}) must exceed warmup_epochs + window_t ({})",
                self.epochs,
                self.warmup_epochs + self.window_t
            ));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return bad(format!("lambda must be in (0, 1), got {}", self.lambda));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad(format!("tau must be in (0, 1), got {}", self.tau));
        }
        if self.embed_dim == 0 || self.weight_hidden == 0 {
            return bad("embed_dim and weight_hidden must be positive".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!(
                "train_fraction must be in (0, 1), got {}",
                self.train_fraction
            ));
        }
        Ok(())
    }

    pub fn model_dims(&self, input: usize, classes: usize) -> ModelDims {
        ModelDims {
            input,
            embed: self.embed_dim,
            weight_hidden: self.weight_hidden,
            classes,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    Plain,
    Cgp,
    Fgc,
}

impl StageKind {
    fn salt(self) -> u64 {
        match self {
            StageKind::Plain => 0x5eed_0001,
            StageKind::Cgp => 0x5eed_0002,
            StageKind::Fgc => 0x5eed_0003,
        }
    }

    fn loss(self) -> LossKind {
        match self {
            StageKind::Plain => LossKind::Plain,
            StageKind::Cgp | StageKind::Fgc => LossKind::Weighted,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StageKind::Plain => "plain",
            StageKind::Cgp => "cgp",
            StageKind::Fgc => "fgc",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_war: f64,
    pub train_uar: f64,
    pub test_war: Option<f64>,
    pub test_uar: Option<f64>,
    pub active_samples: usize,
    pub cumulative_pruned: usize,
    pub cumulative_corrected: usize,
}

/// Result of one pass over the data.
#[derive(Clone, Debug)]
pub struct EpochPass {
    pub mean_loss: f64,
    /// Post-update forward outputs, aligned with the dataset order.
    pub outputs: Vec<ForwardOutput>,
}

/// Shuffled minibatch SGD over `dataset`, followed by an evaluation pass with
/// the final parameters of the epoch.
pub fn run_epoch(
    model: &mut SciuModel,
    optimizer: &mut MomentumSgd,
    dataset: &Dataset,
    batch_size: usize,
    loss: LossKind,
    shuffle_seed: u64,
    epoch: usize,
) -> Result<EpochPass> {
    if dataset.is_empty() {
        return Err(SciuError::Logic("cannot train on an empty dataset".into()));
    }
    let samples = dataset.samples();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    rng.set_stream(epoch as u64);
    order.shuffle(&mut rng);

    let dims = model.dims();
    let mut loss_sum = 0.0;
    for (batch_idx, chunk) in order.chunks(batch_size).enumerate() {
        let mut grads = SciuModel::zeros(dims);
        for &i in chunk {
            let s = &samples[i];
            let l = model.backward_accumulate(&s.features, s.label, loss, &mut grads)?;
            if !l.is_finite() {
                return Err(non_finite(epoch, batch_idx, chunk, samples));
            }
            loss_sum += l;
        }
        let scale = 1.0 / chunk.len() as f64;
        grads
            .tensors_mut()
            .into_iter()
            .flatten()
            .for_each(|g| *g *= scale);
        optimizer.step(model, &grads)?;
        if !model.is_finite() {
            return Err(non_finite(epoch, batch_idx, chunk, samples));
        }
    }
    let outputs = samples
        .iter()
        .map(|s| model.forward(&s.features))
        .collect::<Result<Vec<_>>>()?;
    Ok(EpochPass {
        mean_loss: loss_sum / samples.len() as f64,
        outputs,
    })
}

fn non_finite(epoch: usize, batch: usize, chunk: &[usize], samples: &[Sample]) -> SciuError {
    SciuError::NonFinite {
        epoch,
        batch,
        sample_ids: chunk.iter().map(|&i| samples[i].id).collect(),
    }
}

/// Label a held-out sample is scored against: the oracle label when known,
/// otherwise the annotation.
pub fn evaluation_label(sample: &Sample) -> usize {
    sample.oracle().true_label.unwrap_or(sample.label)
}

/// Confusion matrix of `model` on `dataset` against [`evaluation_label`].
pub fn evaluate(model: &SciuModel, dataset: &Dataset) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(dataset.n_classes());
    for s in dataset.iter() {
        let out = model.forward(&s.features)?;
        cm.add(evaluation_label(s), argmax(&out.probs));
    }
    Ok(cm)
}

/// Inputs beyond the training set.
#[derive(Clone, Debug, Default)]
pub struct StageOptions<'a> {
    pub test: Option<&'a Dataset>,
    /// Start from this model instead of a fresh initialization.
    pub init: Option<SciuModel>,
    pub checkpoint_dir: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct StageOutcome {
    pub stage: StageKind,
    pub model: SciuModel,
    /// D3 for `Cgp`, D4 for `Fgc`, the input for `Plain`.
    pub dataset: Dataset,
    pub epochs: Vec<EpochRecord>,
    pub prune_log: Vec<PruneEvent>,
    pub correction_log: Vec<CorrectionEvent>,
    pub pruned_ids: BTreeSet<SampleId>,
    /// Learned weight of every input sample at the first epoch where a full
    /// score window exists (epoch `warmup_epochs + window_t`). Nothing has
    /// been pruned yet at that point, so kept and pruned samples are compared
    /// under the same model. Empty if the stage ends before that epoch.
    pub decision_weights: BTreeMap<SampleId, f64>,
}

pub fn train_stage(
    train: &Dataset,
    config: &TrainConfig,
    stage: StageKind,
    options: StageOptions<'_>,
) -> Result<StageOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(SciuError::Config("training set is empty".into()));
    }
    let dims = config.model_dims(train.dim(), train.n_classes());
    let mut model = match options.init {
        Some(m) => {
            if m.dims() != dims {
                return Err(SciuError::Config(format!(
                    "initial model dims {:?} do not match data/config dims {dims:?}",
                    m.dims()
                )));
            }
            m
        }
        None => init_model(dims, config.seed ^ stage.salt())?,
    };
    if let Some(test) = options.test {
        if test.dim() != train.dim() && !test.is_empty() {
            return Err(SciuError::Config("test and train dimensions differ".into()));
        }
    }
    let mut optimizer = MomentumSgd::new(dims, config.learning_rate, config.momentum);
    let shuffle_seed = config.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ stage.salt();

    let mut prune = match stage {
        StageKind::Cgp => Some(PruneState::new(
            config.lambda,
            config.window_t,
            config.warmup_epochs,
        )?),
        _ => None,
    };
    let mut correct = match stage {
        StageKind::Fgc => Some(CorrectionState::new(
            config.tau,
            config.window_t,
            config.warmup_epochs,
        )?),
        _ => None,
    };

    let all_ids: BTreeSet<SampleId> = train.ids().into_iter().collect();
    let mut active = train.clone();
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut prune_log = Vec::new();
    let mut correction_log = Vec::new();
    let mut decision_weights = BTreeMap::new();
    let decision_epoch = config.warmup_epochs + config.window_t;

    for epoch in 1..=config.epochs {
        let pass = run_epoch(
            &mut model,
            &mut optimizer,
            &active,
            config.batch_size,
            stage.loss(),
            shuffle_seed,
            epoch,
        )?;
        let train_cm = ConfusionMatrix::from_pairs(
            train.n_classes(),
            active
                .iter()
                .zip(&pass.outputs)
                .map(|(s, o)| (s.label, argmax(&o.probs))),
        );
        if epoch == decision_epoch {
            for (s, o) in active.iter().zip(&pass.outputs) {
                decision_weights.insert(s.id, o.weight);
            }
        }

        if let Some(state) = prune.as_mut() {
            if epoch > config.warmup_epochs {
                for (s, o) in active.iter().zip(&pass.outputs) {
                    let prob = match config.score_source {
                        ScoreSource::AnnotatedClass => o.probs[s.label],
                        ScoreSource::MaxClass => o.probs[argmax(&o.probs)],
                    };
                    state.record_score(s.id, o.weight, prob, epoch)?;
                }
                let (kept, events) = state.apply_pruning(train, epoch)?;
                if kept.is_empty() {
                    return Err(SciuError::AllPruned {
                        epoch,
                        lambda: config.lambda,
                    });
                }
                let kept_ids: BTreeSet<SampleId> = kept.ids().into_iter().collect();
                if !kept_ids.is_disjoint(state.pruned_ids())
                    || kept_ids.len() + state.pruned_ids().len() != all_ids.len()
                {
                    return Err(SciuError::Logic(format!(
                        "pruning partition broken at epoch {epoch}"
                    )));
                }
                prune_log.extend(events);
                active = kept;
            }
        }

        if let Some(state) = correct.as_mut() {
            if epoch > config.warmup_epochs {
                for (s, o) in active.iter().zip(&pass.outputs) {
                    let probs = match config.prob_source {
                        ProbSource::Weighted => &o.weighted_probs,
                        ProbSource::Unweighted => &o.probs,
                    };
                    state.record_prediction(s.id, probs, s.label, epoch)?;
                }
                let (relabeled, events) = state.apply_corrections(&active, epoch)?;
                if relabeled.len() != active.len() {
                    return Err(SciuError::Logic(format!(
                        "correction changed the sample count at epoch {epoch}"
                    )));
                }
                correction_log.extend(events);
                active = relabeled;
            }
        }

        let (test_war, test_uar) = match options.test {
            Some(test) if !test.is_empty() => {
                let cm = evaluate(&model, test)?;
                (Some(war(&cm)?), Some(uar(&cm)?.value))
            }
            _ => (None, None),
        };
        let record = EpochRecord {
            epoch,
            mean_loss: pass.mean_loss,
            train_war: war(&train_cm)?,
            train_uar: uar(&train_cm)?.value,
            test_war,
            test_uar,
            active_samples: active.len(),
            cumulative_pruned: prune.as_ref().map_or(0, |p| p.pruned_ids().len()),
            cumulative_corrected: correction_log.len(),
        };
        if !record.mean_loss.is_finite() {
            return Err(SciuError::NonFinite {
                epoch,
                batch: 0,
                sample_ids: vec![],
            });
        }
        epochs.push(record);

        if config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 {
            if let Some(dir) = &options.checkpoint_dir {
                model
                    .save_checkpoint(dir.join(format!("{}-epoch{epoch:04}.ckpt", stage.name())))?;
            }
        }
    }

    Ok(StageOutcome {
        stage,
        model,
        dataset: active,
        epochs,
        prune_log,
        correction_log,
        pruned_ids: prune.map(|p| p.pruned_ids().clone()).unwrap_or_default(),
        decision_weights,
    })
}
