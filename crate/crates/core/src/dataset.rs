//! Samples, datasets and the line-delimited dataset file format.
//!
//! Each line of a dataset file is one JSON object:
//!
//! ```text
//! {"id":0,"features":[1.0000000000000000e0,...],"label":3,"true_label":3,"quality_flag":"clean"}
//! ```
//!
//! `true_label` and `quality_flag` are optional oracle fields. Floats are
//! written with 17 significant digits so a save/load/save cycle is
//! byte-identical.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SciuError};

pub type SampleId = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityFlag {
    Clean,
    LowQuality,
}

/// Ground truth carried for evaluation only. Training and the stage decision
/// rules never look at it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Oracle {
    pub true_label: Option<usize>,
    pub quality_flag: Option<QualityFlag>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: SampleId,
    pub features: Vec<f64>,
    /// Annotated label.
    pub label: usize,
    oracle: Oracle,
}

impl Sample {
    pub fn new(id: SampleId, features: Vec<f64>, label: usize) -> Self {
        Sample {
            id,
            features,
            label,
            oracle: Oracle::default(),
        }
    }

    pub fn with_oracle(mut self, oracle: Oracle) -> Self {
        self.oracle = oracle;
        self
    }

    /// Evaluation-only view of the ground truth.
    pub fn oracle(&self) -> &Oracle {
        &self.oracle
    }

    fn without_oracle(&self) -> Sample {
        Sample {
            oracle: Oracle::default(),
            ..self.clone()
        }
    }
}

/// A relabeling applied by the correction stage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionEvent {
    pub sample_id: SampleId,
    pub old_label: usize,
    pub new_label: usize,
    pub epoch: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    n_classes: usize,
    dim: usize,
}

impl Dataset {
    /// Builds a dataset and checks every invariant: unique ids, one shared
    /// dimension, finite features, labels below `n_classes`.
    pub fn new(samples: Vec<Sample>, n_classes: usize) -> Result<Self> {
        let dim = samples.first().map_or(0, |s| s.features.len());
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            if !seen.insert(s.id) {
                return Err(SciuError::Validation(format!(
                    "duplicate sample id {}",
                    s.id
                )));
            }
            if s.features.len() != dim {
                return Err(SciuError::Validation(format!(
                    "sample {} has dimension {}, expected {dim}",
                    s.id,
                    s.features.len()
                )));
            }
            if s.features.iter().any(|v| !v.is_finite()) {
                return Err(SciuError::Validation(format!(
                    "sample {} has non-finite features",
                    s.id
                )));
            }
            if s.label >= n_classes {
                return Err(SciuError::Validation(format!(
                    "sample {} has label {} but there are {n_classes} classes",
                    s.id, s.label
                )));
            }
            if let Some(t) = s.oracle.true_label {
                if t >= n_classes {
                    return Err(SciuError::Validation(format!(
                        "sample {} has true_label {t} but there are {n_classes} classes",
                        s.id
                    )));
                }
            }
        }
        Ok(Dataset {
            samples,
            n_classes,
            dim,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn ids(&self) -> Vec<SampleId> {
        self.samples.iter().map(|s| s.id).collect()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sample> {
        self.samples.iter()
    }

    /// Samples whose id satisfies `keep`, in the original order.
    pub fn filter_ids<F: Fn(SampleId) -> bool>(&self, keep: F) -> Dataset {
        Dataset {
            samples: self
                .samples
                .iter()
                .filter(|s| keep(s.id))
                .cloned()
                .collect(),
            n_classes: self.n_classes,
            dim: self.dim,
        }
    }

    /// Copy with annotated labels replaced according to `relabel`.
    pub fn relabeled(&self, relabel: &BTreeMap<SampleId, usize>) -> Dataset {
        let samples = self
            .samples
            .iter()
            .map(|s| match relabel.get(&s.id) {
                Some(&l) => Sample {
                    label: l,
                    ..s.clone()
                },
                None => s.clone(),
            })
            .collect();
        Dataset {
            samples,
            n_classes: self.n_classes,
            dim: self.dim,
        }
    }

    /// Copy with every oracle field removed.
    pub fn strip_oracle(&self) -> Dataset {
        Dataset {
            samples: self.samples.iter().map(Sample::without_oracle).collect(),
            n_classes: self.n_classes,
            dim: self.dim,
        }
    }

    /// Number of samples per annotated class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: SampleId,
    features: Vec<f64>,
    label: usize,
    #[serde(default)]
    true_label: Option<usize>,
    #[serde(default)]
    quality_flag: Option<QualityFlag>,
}

/// Full-precision float text used by every file this crate writes.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_record(out: &mut String, s: &Sample) {
    let _ = write!(out, "{{\"id\":{},\"features\":[", s.id);
    for (i, v) in s.features.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format_f64(*v));
    }
    let _ = write!(out, "],\"label\":{}", s.label);
    if let Some(t) = s.oracle.true_label {
        let _ = write!(out, ",\"true_label\":{t}");
    }
    if let Some(q) = s.oracle.quality_flag {
        let name = match q {
            QualityFlag::Clean => "clean",
            QualityFlag::LowQuality => "low_quality",
        };
        let _ = write!(out, ",\"quality_flag\":\"{name}\"");
    }
    out.push_str("}\n");
}

/// Serializes a dataset in the line-delimited format.
pub fn dataset_to_string(dataset: &Dataset) -> String {
    let mut out = String::new();
    for s in &dataset.samples {
        write_record(&mut out, s);
    }
    out
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, dataset_to_string(dataset)).map_err(|e| SciuError::io(path, e))
}

/// Parses the line-delimited format. When `n_classes` is `None` it is taken
/// as one past the largest label (annotated or oracle) in the file. Blank
/// lines are skipped.
pub fn parse_dataset(text: &str, n_classes: Option<usize>) -> Result<Dataset> {
    let mut samples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(line).map_err(|e| SciuError::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        samples.push(
            Sample::new(rec.id, rec.features, rec.label).with_oracle(Oracle {
                true_label: rec.true_label,
                quality_flag: rec.quality_flag,
            }),
        );
    }
    let n_classes = n_classes.unwrap_or_else(|| {
        samples
            .iter()
            .map(|s| s.label.max(s.oracle.true_label.unwrap_or(0)) + 1)
            .max()
            .unwrap_or(0)
    });
    Dataset::new(samples, n_classes)
}

pub fn load_dataset(path: impl AsRef<Path>, n_classes: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| SciuError::io(path, e))?;
    parse_dataset(&text, n_classes)
}

/// Per-class split on annotated labels. Each class contributes
/// `round(n_c · train_fraction)` samples to train (at least one to each side).
/// Both halves keep the original sample order.
pub fn stratified_split(
    dataset: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(SciuError::Config(format!(
            "train_fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.n_classes];
    for (i, s) in dataset.samples.iter().enumerate() {
        by_class[s.label].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; dataset.len()];
    for (class, members) in by_class.iter_mut().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(SciuError::Validation(format!(
                "class {class} has {} sample(s); a split needs at least 2",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let n_train =
            ((members.len() as f64 * train_fraction).round() as usize).clamp(1, members.len() - 1);
        for &i in &members[..n_train] {
            in_train[i] = true;
        }
    }
    let (train, test): (Vec<_>, Vec<_>) =
        dataset.samples.iter().zip(&in_train).partition(|(_, &t)| t);
    let make = |v: Vec<(&Sample, &bool)>| Dataset {
        samples: v.into_iter().map(|(s, _)| s.clone()).collect(),
        n_classes: dataset.n_classes,
        dim: dataset.dim,
    };
    Ok((make(train), make(test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: u64, label: usize) -> Sample {
        Sample::new(id, vec![id as f64 * 0.1, -1.0 / 3.0], label)
    }

    #[test]
    fn parses_three_records() {
        let text = concat!(
            "{\"id\":1,\"features\":[0.5,1.0],\"label\":0}\n",
            "{\"id\":2,\"features\":[0.5,2.0],\"label\":1,\"true_label\":0}\n",
            "{\"id\":3,\"features\":[0.0,1.0],\"label\":2,\"quality_flag\":\"low_quality\"}\n",
        );
        let d = parse_dataset(text, Some(3)).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.ids(), vec![1, 2, 3]);
        assert_eq!(d.samples()[1].oracle().true_label, Some(0));
        assert_eq!(
            d.samples()[2].oracle().quality_flag,
            Some(QualityFlag::LowQuality)
        );
        assert_eq!(parse_dataset(text, None).unwrap().n_classes(), 3);
    }

    #[test]
    fn label_at_class_count_is_rejected_with_id() {
        let text = "{\"id\":42,\"features\":[0.5],\"label\":3}\n";
        let err = parse_dataset(text, Some(3)).unwrap_err();
        match err {
            SciuError::Validation(msg) => assert!(msg.contains("42"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "{\"id\":1,\"features\":[0.5],\"label\":0}\n{\"id\":2,\"features\":oops}\n";
        match parse_dataset(text, Some(2)).unwrap_err() {
            SciuError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let err = Dataset::new(vec![sample(1, 0), sample(1, 1)], 2).unwrap_err();
        assert!(matches!(err, SciuError::Validation(_)));
    }

    #[test]
    fn empty_dataset_is_empty_file() {
        let d = Dataset::new(vec![], 3).unwrap();
        assert_eq!(dataset_to_string(&d), "");
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let samples = vec![
            sample(0, 0).with_oracle(Oracle {
                true_label: Some(1),
                quality_flag: Some(QualityFlag::Clean),
            }),
            sample(7, 1),
            Sample::new(9, vec![f64::MIN_POSITIVE, -1e300], 1).with_oracle(Oracle {
                true_label: None,
                quality_flag: Some(QualityFlag::LowQuality),
            }),
        ];
        let d = Dataset::new(samples, 2).unwrap();
        let first = dataset_to_string(&d);
        let back = parse_dataset(&first, Some(2)).unwrap();
        assert_eq!(back, d);
        assert_eq!(dataset_to_string(&back), first);
        assert!(first.contains("\"true_label\":1"));
        assert!(first.contains("\"quality_flag\":\"low_quality\""));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let d = Dataset::new(vec![sample(3, 1), sample(4, 0)], 2).unwrap();
        save_dataset(&d, &path).unwrap();
        assert_eq!(load_dataset(&path, Some(2)).unwrap(), d);
        assert!(matches!(
            load_dataset(dir.path().join("missing"), None),
            Err(SciuError::Io { .. })
        ));
    }

    #[test]
    fn strip_oracle_removes_fields() {
        let d = Dataset::new(
            vec![sample(0, 0).with_oracle(Oracle {
                true_label: Some(0),
                quality_flag: Some(QualityFlag::Clean),
            })],
            1,
        )
        .unwrap();
        let s = d.strip_oracle();
        assert_eq!(*s.samples()[0].oracle(), Oracle::default());
        assert_eq!(s.samples()[0].features, d.samples()[0].features);
    }

    fn balanced(per_class: usize, classes: usize) -> Dataset {
        let samples = (0..per_class * classes)
            .map(|i| sample(i as u64, i % classes))
            .collect();
        Dataset::new(samples, classes).unwrap()
    }

    #[test]
    fn split_is_stratified_and_deterministic() {
        let d = balanced(100, 3);
        let (train, test) = stratified_split(&d, 0.8, 5).unwrap();
        assert_eq!(train.class_counts(), vec![80, 80, 80]);
        assert_eq!(test.class_counts(), vec![20, 20, 20]);
        let (train2, test2) = stratified_split(&d, 0.8, 5).unwrap();
        assert_eq!(train.ids(), train2.ids());
        assert_eq!(test.ids(), test2.ids());
        let (train3, _) = stratified_split(&d, 0.8, 6).unwrap();
        assert_ne!(train.ids(), train3.ids());
    }

    #[test]
    fn split_fractions_within_one_sample() {
        // uneven class sizes: 7, 13, 29
        let mut samples = Vec::new();
        let mut id = 0;
        for (class, n) in [7usize, 13, 29].into_iter().enumerate() {
            for _ in 0..n {
                samples.push(sample(id, class));
                id += 1;
            }
        }
        let d = Dataset::new(samples, 3).unwrap();
        for frac in [0.1, 0.33, 0.5, 0.77, 0.9] {
            let (train, test) = stratified_split(&d, frac, 1).unwrap();
            for (c, &n) in d.class_counts().iter().enumerate() {
                let got = train.class_counts()[c] as f64;
                assert!((got - n as f64 * frac).abs() <= 1.0);
                assert_eq!(train.class_counts()[c] + test.class_counts()[c], n);
            }
        }
    }

    #[test]
    fn split_rejects_singleton_class_and_bad_fraction() {
        let d = Dataset::new(vec![sample(0, 0), sample(1, 0), sample(2, 1)], 2).unwrap();
        assert!(matches!(
            stratified_split(&d, 0.5, 0),
            Err(SciuError::Validation(_))
        ));
        assert!(stratified_split(&balanced(4, 2), 1.0, 0).is_err());
    }
}
