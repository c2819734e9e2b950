//! Fine-grained correction.
//!
//! A sample is relabeled to its predicted class when, over the last `t`
//! post-warm-up epochs, the predicted label never changed and the mean
//! probability of that label exceeds the mean probability of the current
//! label by more than `tau`.

use std::collections::BTreeMap;

use crate::dataset::{CorrectionEvent, Dataset, SampleId};
use crate::error::{Result, SciuError};
use crate::history::Window;
use crate::nn::argmax;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictionEntry {
    pub predicted_label: usize,
    pub predicted_prob: f64,
    pub gt_prob: f64,
}

impl PredictionEntry {
    /// Argmax (lowest index on ties) of `probs` against `gt_label`.
    pub fn from_probs(probs: &[f64], gt_label: usize) -> Self {
        let predicted_label = argmax(probs);
        PredictionEntry {
            predicted_label,
            predicted_prob: probs[predicted_label],
            gt_prob: probs[gt_label],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionHistory {
    pub sample_id: SampleId,
    entries: Window<PredictionEntry>,
}

impl PredictionHistory {
    pub fn new(sample_id: SampleId, window: usize) -> Self {
        PredictionHistory {
            sample_id,
            entries: Window::new(window),
        }
    }

    pub fn push(&mut self, entry: PredictionEntry) {
        self.entries.push(entry);
    }

    pub fn entries(&self) -> impl Iterator<Item = &PredictionEntry> {
        self.entries.iter()
    }

    pub fn epochs_recorded(&self) -> usize {
        self.entries.epochs_recorded()
    }

    pub fn is_full(&self) -> bool {
        self.entries.is_full()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

/// Full window with a single predicted label throughout.
pub fn label_stable(history: &PredictionHistory) -> bool {
    if !history.is_full() {
        return false;
    }
    let mut labels = history.entries().map(|e| e.predicted_label);
    let first = labels.next();
    labels.all(|l| Some(l) == first)
}

/// Mean predicted-label probability minus mean annotated-label probability.
pub fn score_gap(history: &PredictionHistory) -> Result<f64> {
    if !history.is_full() {
        return Err(SciuError::Logic(format!(
            "score gap for sample {} needs a full window ({} of {} epochs recorded)",
            history.sample_id,
            history.epochs_recorded(),
            history.entries.capacity()
        )));
    }
    let n = history.entries.len() as f64;
    let pred = history.entries().map(|e| e.predicted_prob).sum::<f64>() / n;
    let gt = history.entries().map(|e| e.gt_prob).sum::<f64>() / n;
    Ok(pred - gt)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorrectionDecision {
    Accept { new_label: usize },
    Reject,
}

/// Accept iff the label is stable and the gap is strictly above `tau`.
pub fn correction_decision(history: &PredictionHistory, tau: f64) -> CorrectionDecision {
    if !label_stable(history) {
        return CorrectionDecision::Reject;
    }
    match score_gap(history) {
        Ok(gap) if gap > tau => CorrectionDecision::Accept {
            new_label: history
                .entries()
                .next()
                .expect("full window")
                .predicted_label,
        },
        _ => CorrectionDecision::Reject,
    }
}

#[derive(Clone, Debug)]
pub struct CorrectionState {
    histories: BTreeMap<SampleId, PredictionHistory>,
    tau: f64,
    window: usize,
    warmup_epochs: usize,
    corrections: Vec<CorrectionEvent>,
}

impl CorrectionState {
    pub fn new(tau: f64, window: usize, warmup_epochs: usize) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(SciuError::Config(format!(
                "tau must be in (0, 1), got {tau}"
            )));
        }
        if window == 0 {
            return Err(SciuError::Config("window must be at least 1".into()));
        }
        Ok(CorrectionState {
            histories: BTreeMap::new(),
            tau,
            window,
            warmup_epochs,
            corrections: Vec::new(),
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn corrections(&self) -> &[CorrectionEvent] {
        &self.corrections
    }

    pub fn history(&self, id: SampleId) -> Option<&PredictionHistory> {
        self.histories.get(&id)
    }

    /// Records argmax, its probability and the probability of `gt_label`.
    /// Warm-up epochs are skipped.
    pub fn record_prediction(
        &mut self,
        sample_id: SampleId,
        probs: &[f64],
        gt_label: usize,
        epoch: usize,
    ) -> Result<Option<PredictionEntry>> {
        if gt_label >= probs.len() {
            return Err(SciuError::Logic(format!(
                "sample {sample_id}: label {gt_label} outside {} classes",
                probs.len()
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-6 || probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(SciuError::Logic(format!(
                "sample {sample_id}: probabilities do not form a distribution"
            )));
        }
        if epoch <= self.warmup_epochs {
            return Ok(None);
        }
        let entry = PredictionEntry::from_probs(probs, gt_label);
        let window = self.window;
        self.histories
            .entry(sample_id)
            .or_insert_with(|| PredictionHistory::new(sample_id, window))
            .push(entry);
        Ok(Some(entry))
    }

    /// Relabels every accepted sample, clears its history and returns the
    /// relabeled dataset (same membership) with the new events.
    pub fn apply_corrections(
        &mut self,
        dataset: &Dataset,
        epoch: usize,
    ) -> Result<(Dataset, Vec<CorrectionEvent>)> {
        let mut relabel = BTreeMap::new();
        let mut events = Vec::new();
        for sample in dataset.iter() {
            let Some(history) = self.histories.get_mut(&sample.id) else {
                continue;
            };
            if let CorrectionDecision::Accept { new_label } = correction_decision(history, self.tau)
            {
                if new_label == sample.label {
                    continue;
                }
                history.clear();
                relabel.insert(sample.id, new_label);
                events.push(CorrectionEvent {
                    sample_id: sample.id,
                    old_label: sample.label,
                    new_label,
                    epoch,
                });
            }
        }
        events.sort_by_key(|e| e.sample_id);
        self.corrections.extend(events.iter().cloned());
        Ok((dataset.relabeled(&relabel), events))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Sample;

    fn history(entries: &[(usize, f64, f64)], window: usize) -> PredictionHistory {
        let mut h = PredictionHistory::new(0, window);
        for &(l, p, g) in entries {
            h.push(PredictionEntry {
                predicted_label: l,
                predicted_prob: p,
                gt_prob: g,
            });
        }
        h
    }

    #[test]
    fn record_prediction_examples() {
        let mut st = CorrectionState::new(0.2, 3, 0).unwrap();
        let e = st.record_prediction(0, &[0.1, 0.9], 0, 1).unwrap().unwrap();
        assert_eq!(
            e,
            PredictionEntry {
                predicted_label: 1,
                predicted_prob: 0.9,
                gt_prob: 0.1
            }
        );
        let e = st.record_prediction(1, &[0.7, 0.3], 0, 1).unwrap().unwrap();
        assert_eq!(e.predicted_prob, e.gt_prob);
        let e = st
            .record_prediction(2, &[0.2, 0.4, 0.4], 0, 1)
            .unwrap()
            .unwrap();
        assert_eq!(e.predicted_label, 1);
        assert!(st.record_prediction(3, &[0.2, 0.2], 0, 1).is_err());
        assert!(st.record_prediction(3, &[0.5, 0.5], 2, 1).is_err());
    }

    #[test]
    fn label_stability_examples() {
        assert!(label_stable(&history(&[(1, 0.5, 0.1); 3], 3)));
        assert!(!label_stable(&history(
            &[(1, 0.5, 0.1), (2, 0.5, 0.1), (1, 0.5, 0.1)],
            3
        )));
        assert!(!label_stable(&history(&[(1, 0.5, 0.1); 2], 3)));
    }

    #[test]
    fn score_gap_examples() {
        let h = history(&[(1, 0.6, 0.3), (1, 0.6, 0.3)], 2);
        assert!((score_gap(&h).unwrap() - 0.3).abs() < 1e-12);
        let h = history(&[(0, 0.8, 0.8), (0, 0.6, 0.6)], 2);
        assert_eq!(score_gap(&h).unwrap(), 0.0);
        let h = history(&[(0, 0.8, 0.8)], 2);
        assert!(matches!(score_gap(&h), Err(SciuError::Logic(_))));
    }

    #[test]
    fn decision_examples() {
        let h = history(&[(2, 0.6, 0.3); 3], 3);
        assert_eq!(
            correction_decision(&h, 0.2),
            CorrectionDecision::Accept { new_label: 2 }
        );
        let h = history(&[(2, 0.5, 0.25); 2], 2);
        assert_eq!(correction_decision(&h, 0.25), CorrectionDecision::Reject);
        let h = history(&[(2, 0.95, 0.05), (1, 0.95, 0.05)], 2);
        assert_eq!(correction_decision(&h, 0.2), CorrectionDecision::Reject);
    }

    fn toy() -> Dataset {
        Dataset::new((0..3).map(|i| Sample::new(i, vec![0.0], 0)).collect(), 4).unwrap()
    }

    #[test]
    fn apply_corrections_examples() {
        let d = toy();
        let mut st = CorrectionState::new(0.2, 2, 0).unwrap();
        let (d4, events) = st.apply_corrections(&d, 1).unwrap();
        assert_eq!(d4, d);
        assert!(events.is_empty());

        for epoch in 1..=2 {
            st.record_prediction(1, &[0.05, 0.05, 0.1, 0.8], 0, epoch)
                .unwrap();
            st.record_prediction(2, &[0.6, 0.1, 0.1, 0.2], 0, epoch)
                .unwrap();
        }
        let (d4, events) = st.apply_corrections(&d, 2).unwrap();
        assert_eq!(
            events,
            vec![CorrectionEvent {
                sample_id: 1,
                old_label: 0,
                new_label: 3,
                epoch: 2
            }]
        );
        assert_eq!(d4.len(), d.len());
        assert_eq!(d4.samples()[1].label, 3);
        assert_eq!(st.history(1).unwrap().epochs_recorded(), 0);
        assert_eq!(st.corrections().len(), 1);
    }

    #[test]
    fn rejects_bad_tau() {
        assert!(CorrectionState::new(0.0, 2, 0).is_err());
        assert!(CorrectionState::new(1.0, 2, 0).is_err());
    }
}
