use std::collections::BTreeSet;

use proptest::prelude::*;

use sciu::pipeline::{run_pipeline, Mode, RunReport};
use sciu::report::{epochs_csv, weight_histogram_csv};
use sciu::synth::{generate, SynthConfig};
use sciu::trainer::{StageKind, TrainConfig};

fn data(seed: u64) -> sciu::Dataset {
    generate(&SynthConfig {
        per_class: 30,
        n_classes: 4,
        dim: 6,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn config(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 8,
        warmup_epochs: 2,
        window_t: 2,
        batch_size: 8,
        lambda: 0.1,
        embed_dim: 8,
        seed,
        ..TrainConfig::default()
    }
}

fn pruned(r: &RunReport) -> BTreeSet<u64> {
    r.pruning_log.iter().map(|e| e.sample_id).collect()
}

#[test]
fn stages_follow_mode() {
    let d = data(1);
    let kinds = |m| {
        run_pipeline(&config(1), &d, m)
            .unwrap()
            .stages
            .iter()
            .map(|s| s.stage)
            .collect::<Vec<_>>()
    };
    assert_eq!(kinds(Mode::Baseline), vec![StageKind::Plain]);
    assert_eq!(kinds(Mode::CgpOnly), vec![StageKind::Cgp, StageKind::Plain]);
    assert_eq!(kinds(Mode::FgcOnly), vec![StageKind::Fgc, StageKind::Plain]);
    assert_eq!(
        kinds(Mode::Sciu),
        vec![StageKind::Cgp, StageKind::Fgc, StageKind::Plain]
    );
}

#[test]
fn histogram_totals_match_kept_and_pruned_counts() {
    let d = data(2);
    let r = [0.15, 0.2, 0.25, 0.3]
        .iter()
        .filter_map(|&lambda| {
            run_pipeline(
                &TrainConfig {
                    lambda,
                    ..config(2)
                },
                &d,
                Mode::Sciu,
            )
            .ok()
        })
        .find(|r| r.pruned_total > 0)
        .expect("some lambda prunes part of the set");
    let w = r.weights.as_ref().unwrap();
    assert_eq!(w.pruned_histogram.total(), r.pruned_total);
    assert_eq!(w.kept_histogram.total() + r.pruned_total, r.dataset.train);
    let csv = weight_histogram_csv(&r).unwrap();
    let (kept, pr) = csv.lines().skip(1).fold((0, 0), |(k, p), line| {
        let f: Vec<&str> = line.split(',').collect();
        (
            k + f[2].parse::<usize>().unwrap(),
            p + f[3].parse::<usize>().unwrap(),
        )
    });
    assert_eq!((kept, pr), (w.kept_histogram.total(), r.pruned_total));
}

#[test]
fn epochs_csv_has_a_row_per_epoch() {
    let r = run_pipeline(&config(3), &data(3), Mode::Sciu).unwrap();
    let rows = epochs_csv(&r).lines().count() - 1;
    assert_eq!(rows, r.stages.iter().map(|s| s.epochs.len()).sum::<usize>());
}

#[test]
fn final_stage_trains_on_purified_set() {
    let r = run_pipeline(&config(4), &data(4), Mode::Sciu).unwrap();
    let fin = r.stage(StageKind::Plain).unwrap();
    assert_eq!(fin.input_samples, r.dataset.train - r.pruned_total);
    assert_eq!(r.corrected_total, r.correction_log.len());
    assert!(r.final_test.war >= 0.0 && r.final_test.war <= 1.0);
}

#[test]
fn report_round_trips_through_json() {
    let r = run_pipeline(&config(5), &data(5), Mode::Sciu).unwrap();
    let back = RunReport::from_json(&r.to_json()).unwrap();
    assert_eq!(back, r);
    assert_eq!(back.to_json(), r.to_json());
}

#[test]
fn stripped_oracle_leaves_decisions_unchanged() {
    let d = data(6);
    let a = run_pipeline(&config(6), &d, Mode::Sciu).unwrap();
    let b = run_pipeline(&config(6), &d.strip_oracle(), Mode::Sciu).unwrap();
    assert_eq!(a.pruning_log, b.pruning_log);
    assert_eq!(a.correction_log, b.correction_log);
    assert!(a.pruning_quality.is_some());
    assert!(b.pruning_quality.is_none() && b.correction_quality.is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    /// Runs with different thresholds train identically until the stricter
    /// one first prunes, so at that epoch it must prune a superset.
    #[test]
    fn stricter_lambda_prunes_a_superset_first(seed in 0u64..1000, lo in 0.05f64..0.15, step in 0.01f64..0.15) {
        let d = data(seed);
        let run = |lambda| run_pipeline(&TrainConfig { lambda, ..config(seed) }, &d, Mode::CgpOnly);
        if let (Ok(a), Ok(b)) = (run(lo), run(lo + step)) {
            let first = b.pruning_log.first().map_or(usize::MAX, |e| e.epoch);
            prop_assert!(a.pruning_log.iter().all(|e| e.epoch >= first));
            let at = |r: &RunReport| -> BTreeSet<u64> {
                r.pruning_log.iter().filter(|e| e.epoch == first).map(|e| e.sample_id).collect()
            };
            prop_assert!(at(&a).is_subset(&at(&b)));
            prop_assert!(pruned(&a).iter().all(|id| d.ids().contains(id)));
        }
    }
}
