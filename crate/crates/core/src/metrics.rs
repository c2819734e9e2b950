//! Classification metrics and oracle-side purification quality.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::dataset::{CorrectionEvent, Dataset, QualityFlag, SampleId};
use crate::error::{Result, SciuError};

/// `counts[true][pred]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub n_classes: usize,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        ConfusionMatrix {
            n_classes,
            counts: vec![vec![0; n_classes]; n_classes],
        }
    }

    pub fn from_counts(counts: Vec<Vec<usize>>) -> Result<Self> {
        let n = counts.len();
        if counts.iter().any(|r| r.len() != n) {
            return Err(SciuError::Validation(
                "confusion matrix must be square".into(),
            ));
        }
        Ok(ConfusionMatrix {
            n_classes: n,
            counts,
        })
    }

    pub fn from_pairs(n_classes: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut cm = ConfusionMatrix::new(n_classes);
        for (t, p) in pairs {
            cm.add(t, p);
        }
        cm
    }

    pub fn add(&mut self, truth: usize, pred: usize) {
        self.counts[truth][pred] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.n_classes).map(|c| self.counts[c][c]).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\pred");
        for c in 0..self.n_classes {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
        for (t, row) in self.counts.iter().enumerate() {
            out.push_str(&t.to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Weighted average recall: trace / total, i.e. accuracy.
pub fn war(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(SciuError::UndefinedMetric(
            "WAR of an empty confusion matrix".into(),
        ));
    }
    Ok(cm.trace() as f64 / total as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Uar {
    pub value: f64,
    /// Classes with no true samples, left out of the average.
    pub excluded_classes: Vec<usize>,
}

/// Unweighted average recall over the classes that have true samples.
pub fn uar(cm: &ConfusionMatrix) -> Result<Uar> {
    let mut recalls = Vec::new();
    let mut excluded_classes = Vec::new();
    for (c, row) in cm.counts.iter().enumerate() {
        let support: usize = row.iter().sum();
        if support == 0 {
            excluded_classes.push(c);
        } else {
            recalls.push(row[c] as f64 / support as f64);
        }
    }
    if recalls.is_empty() {
        return Err(SciuError::UndefinedMetric(
            "UAR with no populated classes".into(),
        ));
    }
    Ok(Uar {
        value: recalls.iter().sum::<f64>() / recalls.len() as f64,
        excluded_classes,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruningQuality {
    pub pruned: usize,
    pub low_quality: usize,
    pub pruned_low_quality: usize,
    /// `None` when nothing was pruned.
    pub precision: Option<f64>,
    /// `None` when the dataset has no low-quality samples.
    pub recall: Option<f64>,
}

/// Compares the pruned set with the oracle quality flags of `dataset`.
pub fn pruning_quality(pruned: &BTreeSet<SampleId>, dataset: &Dataset) -> Result<PruningQuality> {
    let mut low_quality = 0;
    let mut hits = 0;
    for s in dataset.iter() {
        let flag = s
            .oracle()
            .quality_flag
            .ok_or_else(|| SciuError::Evaluation(format!("sample {} has no quality_flag", s.id)))?;
        if flag == QualityFlag::LowQuality {
            low_quality += 1;
            if pruned.contains(&s.id) {
                hits += 1;
            }
        }
    }
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok(PruningQuality {
        pruned: pruned.len(),
        low_quality,
        pruned_low_quality: hits,
        precision: ratio(hits, pruned.len()),
        recall: ratio(hits, low_quality),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionQuality {
    pub events: usize,
    pub correct: usize,
    pub harmful: usize,
    /// Fraction of events whose new label is the true label.
    pub correction_accuracy: Option<f64>,
    /// Fraction of events that moved a correctly labeled sample away.
    pub harmful_rate: Option<f64>,
}

pub fn correction_quality(
    events: &[CorrectionEvent],
    dataset: &Dataset,
) -> Result<CorrectionQuality> {
    let truth: HashMap<SampleId, Option<usize>> = dataset
        .iter()
        .map(|s| (s.id, s.oracle().true_label))
        .collect();
    let mut correct = 0;
    let mut harmful = 0;
    for e in events {
        let t = truth
            .get(&e.sample_id)
            .ok_or_else(|| {
                SciuError::Evaluation(format!("event for unknown sample {}", e.sample_id))
            })?
            .ok_or_else(|| {
                SciuError::Evaluation(format!("sample {} has no true_label", e.sample_id))
            })?;
        if e.new_label == t {
            correct += 1;
        }
        if e.old_label == t && e.new_label != t {
            harmful += 1;
        }
    }
    let n = events.len();
    let ratio = |k: usize| (n > 0).then(|| k as f64 / n as f64);
    Ok(CorrectionQuality {
        events: n,
        correct,
        harmful,
        correction_accuracy: ratio(correct),
        harmful_rate: ratio(harmful),
    })
}

/// Equal-width histogram over `[0, 1]`; the last bin is closed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: usize,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn unit(bins: usize, values: impl IntoIterator<Item = f64>) -> Self {
        let mut counts = vec![0; bins];
        for v in values {
            let idx = ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        Histogram { bins, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Median; mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}
