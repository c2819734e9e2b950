//! Coarse-grained pruning.
//!
//! Every post-warm-up epoch each active sample gets a score
//! `s = weight · prob`. Once a full window of `t` scores exists, the sample is
//! kept only while the window mean stays strictly above `lambda`; otherwise it
//! is pruned for the rest of the stage.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SampleId};
use crate::error::{Result, SciuError};
use crate::history::Window;

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreHistory {
    pub sample_id: SampleId,
    scores: Window<f64>,
}

impl ScoreHistory {
    pub fn new(sample_id: SampleId, window: usize) -> Self {
        ScoreHistory {
            sample_id,
            scores: Window::new(window),
        }
    }

    pub fn push(&mut self, score: f64) {
        self.scores.push(score);
    }

    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.scores.iter().copied()
    }

    pub fn epochs_recorded(&self) -> usize {
        self.scores.epochs_recorded()
    }
}

/// Mean of the buffered scores, or `None` until a full window is recorded.
pub fn trailing_mean(history: &ScoreHistory) -> Option<f64> {
    if !history.scores.is_full() {
        return None;
    }
    Some(history.scores().sum::<f64>() / history.scores.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PruneDecision {
    Keep,
    Prune,
}

/// Keep iff `trailing > lambda`; a tie prunes.
pub fn prune_decision(trailing: f64, lambda: f64) -> PruneDecision {
    if trailing > lambda {
        PruneDecision::Keep
    } else {
        PruneDecision::Prune
    }
}

/// One pruning log record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneEvent {
    pub epoch: usize,
    pub sample_id: SampleId,
    pub score: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug)]
pub struct PruneState {
    histories: BTreeMap<SampleId, ScoreHistory>,
    lambda: f64,
    window: usize,
    warmup_epochs: usize,
    pruned: BTreeSet<SampleId>,
}

impl PruneState {
    pub fn new(lambda: f64, window: usize, warmup_epochs: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(SciuError::Config(format!(
                "lambda must be in (0, 1), got {lambda}"
            )));
        }
        if window == 0 {
            return Err(SciuError::Config("window must be at least 1".into()));
        }
        Ok(PruneState {
            histories: BTreeMap::new(),
            lambda,
            window,
            warmup_epochs,
            pruned: BTreeSet::new(),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn warmup_epochs(&self) -> usize {
        self.warmup_epochs
    }

    pub fn pruned_ids(&self) -> &BTreeSet<SampleId> {
        &self.pruned
    }

    pub fn is_pruned(&self, id: SampleId) -> bool {
        self.pruned.contains(&id)
    }

    pub fn history(&self, id: SampleId) -> Option<&ScoreHistory> {
        self.histories.get(&id)
    }

    /// Appends `weight · prob` to the sample's window. Scores from warm-up
    /// epochs are not recorded, so windows only ever cover post-warm-up
    /// epochs. Returns the score when it was recorded.
    pub fn record_score(
        &mut self,
        sample_id: SampleId,
        weight: f64,
        prob: f64,
        epoch: usize,
    ) -> Result<Option<f64>> {
        if self.pruned.contains(&sample_id) {
            return Err(SciuError::Logic(format!(
                "score recorded for pruned sample {sample_id}"
            )));
        }
        if !(0.0..=1.0).contains(&weight) || !(0.0..=1.0).contains(&prob) {
            return Err(SciuError::Logic(format!(
                "sample {sample_id}: weight {weight} and prob {prob} must lie in [0, 1]"
            )));
        }
        if epoch <= self.warmup_epochs {
            return Ok(None);
        }
        let score = weight * prob;
        let window = self.window;
        self.histories
            .entry(sample_id)
            .or_insert_with(|| ScoreHistory::new(sample_id, window))
            .push(score);
        Ok(Some(score))
    }

    /// Prunes every active sample of `dataset` whose window is full and whose
    /// mean is at or below lambda. Returns the surviving subset and the new
    /// log records (in sample-id order).
    pub fn apply_pruning(
        &mut self,
        dataset: &Dataset,
        epoch: usize,
    ) -> Result<(Dataset, Vec<PruneEvent>)> {
        if epoch <= self.warmup_epochs {
            return Err(SciuError::Logic(format!(
                "pruning requested at epoch {epoch}, inside the {}-epoch warm-up",
                self.warmup_epochs
            )));
        }
        let mut events = Vec::new();
        for id in dataset.ids() {
            if self.pruned.contains(&id) {
                continue;
            }
            let Some(mean) = self.histories.get(&id).and_then(trailing_mean) else {
                continue;
            };
            if prune_decision(mean, self.lambda) == PruneDecision::Prune {
                events.push(PruneEvent {
                    epoch,
                    sample_id: id,
                    score: mean,
                    lambda: self.lambda,
                });
            }
        }
        events.sort_by_key(|e| e.sample_id);
        for e in &events {
            self.pruned.insert(e.sample_id);
        }
        let pruned = &self.pruned;
        Ok((dataset.filter_ids(|id| !pruned.contains(&id)), events))
    }
}
