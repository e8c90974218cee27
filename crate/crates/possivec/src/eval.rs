//! Leave-one-out cross-validation and the `omega` sweep.
//!
//! Every fold holds out one trajectory, rebuilds the attraction statistics
//! from the remaining training half only, vectorizes both halves, trains
//! the configured classifier on the training sequences and classifies the
//! held-out one. Results depend only on entry ids and the master seed, so
//! dataset order and fold parallelism cannot change any reported number.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aoi::{
    attraction_stats_from_counts, kernel_fixation_counts, AttractionStats, InterfaceLayout,
};
use crate::crf::{train_crf, CrfTrainConfig};
use crate::error::{Error, Result};
use crate::hmm::{baum_welch_train, classify_hmm, HmmTrainConfig};
use crate::possibility::FixationContext;
use crate::seed::derive_seed;
use crate::synth::DatasetEntry;
use crate::vectorize::{
    indices_from_geometry, trajectory_geometry, vectorize_classical, ObservationSequence,
    VectorizerParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorizerKind {
    Classical,
    Possibilistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Hmm,
    Crf,
}

/// Everything one evaluation run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub vectorizer: VectorizerKind,
    pub params: VectorizerParams,
    pub classifier: ClassifierKind,
    pub hmm: HmmTrainConfig,
    pub crf: CrfTrainConfig,
    pub master_seed: u64,
}

impl PipelineConfig {
    pub fn new(vectorizer: VectorizerKind, classifier: ClassifierKind) -> Self {
        Self {
            vectorizer,
            params: VectorizerParams::default(),
            classifier,
            hmm: HmmTrainConfig::default(),
            crf: CrfTrainConfig::default(),
            master_seed: 42,
        }
    }
}

/// Per-class sample and error counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub class: String,
    pub samples: usize,
    pub errors: usize,
}

impl ClassAccuracy {
    pub fn accuracy_pct(&self) -> f64 {
        if self.samples == 0 {
            return 0.0;
        }
        100.0 * (self.samples - self.errors) as f64 / self.samples as f64
    }
}

/// Accuracy table in the shape `class,samples,errors,accuracy_pct` plus a
/// `TOTAL` row, with the configuration echoed for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub per_class: Vec<ClassAccuracy>,
    pub config: PipelineConfig,
}

impl AccuracyReport {
    pub fn total_samples(&self) -> usize {
        self.per_class.iter().map(|c| c.samples).sum()
    }

    pub fn total_errors(&self) -> usize {
        self.per_class.iter().map(|c| c.errors).sum()
    }

    pub fn total_accuracy_pct(&self) -> f64 {
        let samples = self.total_samples();
        if samples == 0 {
            return 0.0;
        }
        100.0 * (samples - self.total_errors()) as f64 / samples as f64
    }

    /// Exact error fraction comparison key (avoids rounded percentages).
    pub fn error_fraction(&self) -> (usize, usize) {
        (self.total_errors(), self.total_samples())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,samples,errors,accuracy_pct\n");
        for c in &self.per_class {
            out.push_str(&format!(
                "{},{},{},{:.2}\n",
                c.class,
                c.samples,
                c.errors,
                c.accuracy_pct()
            ));
        }
        out.push_str(&format!(
            "TOTAL,{},{},{:.2}\n",
            self.total_samples(),
            self.total_errors(),
            self.total_accuracy_pct()
        ));
        out
    }
}

/// Confusion counts over successfully classified folds, classes in sorted
/// order on both axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    fn new(classes: Vec<String>) -> Self {
        let n = classes.len();
        Self {
            classes,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn count(&self, true_class: &str, predicted: &str) -> usize {
        let t = self.classes.iter().position(|c| c == true_class);
        let p = self.classes.iter().position(|c| c == predicted);
        match (t, p) {
            (Some(t), Some(p)) => self.counts[t][p],
            _ => 0,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("true,predicted,count\n");
        for (t, row) in self.counts.iter().enumerate() {
            for (p, &count) in row.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{}\n",
                    self.classes[t], self.classes[p], count
                ));
            }
        }
        out
    }
}

/// A fold whose training or classification degenerated; it counts as an
/// error for its true class instead of aborting the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldFailure {
    pub id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoocvOutcome {
    pub report: AccuracyReport,
    pub confusion: ConfusionMatrix,
    pub failures: Vec<FoldFailure>,
}

/// One point of the `omega` sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub omega: f64,
    pub accuracy_pct: f64,
    pub errors: usize,
    pub samples: usize,
    pub failures: usize,
}

pub fn sweep_to_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("omega,accuracy_pct\n");
    for p in points {
        out.push_str(&format!("{},{:.2}\n", p.omega, p.accuracy_pct));
    }
    out
}

/// Dataset entries sorted by id, with ids and labels validated. The sorted
/// order is canonical: every downstream seed and aggregation keys off it.
fn canonical_order(dataset: &[DatasetEntry]) -> Result<Vec<&DatasetEntry>> {
    if dataset.len() < 2 {
        return Err(Error::InvalidParameter(
            "leave-one-out needs at least two trajectories".into(),
        ));
    }
    let mut sorted: Vec<&DatasetEntry> = dataset.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    for w in sorted.windows(2) {
        if w[0].id == w[1].id {
            return Err(Error::DuplicateEntryId(w[0].id.clone()));
        }
    }
    for e in &sorted {
        if e.trajectory.label().is_none() {
            return Err(Error::UnlabeledSequence(e.id.clone()));
        }
    }
    Ok(sorted)
}

fn sorted_classes(entries: &[&DatasetEntry]) -> Vec<String> {
    let mut classes: Vec<String> = entries
        .iter()
        .filter_map(|e| e.trajectory.label().map(str::to_string))
        .collect();
    classes.sort();
    classes.dedup();
    classes
}

/// Attraction stats of one fold: corpus-wide kernel counts minus the
/// held-out entry's counts. Exactly equal to recomputing from the training
/// half, since the counts are integers.
fn fold_stats(
    layout: &InterfaceLayout,
    total_counts: &[u64],
    held_out_counts: &[u64],
    omega: f64,
) -> Result<AttractionStats> {
    let training: Vec<u64> = total_counts
        .iter()
        .zip(held_out_counts)
        .map(|(&t, &h)| t - h)
        .collect();
    attraction_stats_from_counts(layout, &training, omega)
}

struct FoldResult {
    true_class: String,
    outcome: std::result::Result<String, String>,
}

/// LOOCV skeleton shared by the real pipelines and the test stubs: the
/// closure receives the training sequences, the held-out sequence and the
/// held-out id, and returns the predicted class.
fn run_loocv_impl<F>(
    dataset: &[DatasetEntry],
    layout: &InterfaceLayout,
    config: &PipelineConfig,
    classify: F,
) -> Result<LoocvOutcome>
where
    F: Fn(&[ObservationSequence], &ObservationSequence, &str) -> Result<String> + Sync,
{
    config.params.validate()?;
    let sorted = canonical_order(dataset)?;
    let classes = sorted_classes(&sorted);
    if classes.len() < 2 {
        return Err(Error::DegenerateCorpus);
    }

    // Fold-independent caches.
    let classical: Option<Vec<ObservationSequence>> = match config.vectorizer {
        VectorizerKind::Classical => Some(
            sorted
                .iter()
                .map(|e| vectorize_classical(&e.trajectory, layout).with_source(e.id.clone()))
                .collect(),
        ),
        VectorizerKind::Possibilistic => None,
    };
    let (geometry, per_entry_counts, total_counts) = match config.vectorizer {
        VectorizerKind::Possibilistic => {
            let geometry: Vec<Vec<FixationContext>> = sorted
                .par_iter()
                .map(|e| trajectory_geometry(&e.trajectory, layout, config.params.fuzzifier))
                .collect::<Result<_>>()?;
            let per_entry: Vec<Vec<u64>> = sorted
                .iter()
                .map(|e| {
                    kernel_fixation_counts(layout, std::slice::from_ref(&e.trajectory))
                })
                .collect();
            let mut total = vec![0u64; layout.len()];
            for counts in &per_entry {
                for (t, &c) in total.iter_mut().zip(counts) {
                    *t += c;
                }
            }
            (Some(geometry), Some(per_entry), Some(total))
        }
        VectorizerKind::Classical => (None, None, None),
    };

    let vectorize_fold = |fold: usize| -> Result<(Vec<ObservationSequence>, ObservationSequence)> {
        match config.vectorizer {
            VectorizerKind::Classical => {
                let cached = classical.as_ref().unwrap();
                let mut training = Vec::with_capacity(cached.len() - 1);
                for (j, seq) in cached.iter().enumerate() {
                    if j != fold {
                        training.push(seq.clone());
                    }
                }
                Ok((training, cached[fold].clone()))
            }
            VectorizerKind::Possibilistic => {
                let geometry = geometry.as_ref().unwrap();
                let per_entry = per_entry_counts.as_ref().unwrap();
                let total = total_counts.as_ref().unwrap();
                let stats = fold_stats(layout, total, &per_entry[fold], config.params.omega)?;
                let to_sequence = |j: usize| -> Result<ObservationSequence> {
                    let indices = indices_from_geometry(
                        &geometry[j],
                        &stats,
                        config.params.relevance_threshold,
                    )?;
                    let symbols = indices
                        .into_iter()
                        .map(|i| layout.area(i).name.clone())
                        .collect();
                    Ok(ObservationSequence::new(
                        symbols,
                        sorted[j].trajectory.label().map(str::to_string),
                    )
                    .with_source(sorted[j].id.clone()))
                };
                let mut training = Vec::with_capacity(sorted.len() - 1);
                for j in 0..sorted.len() {
                    if j != fold {
                        training.push(to_sequence(j)?);
                    }
                }
                Ok((training, to_sequence(fold)?))
            }
        }
    };

    let fold_results: Vec<FoldResult> = (0..sorted.len())
        .into_par_iter()
        .map(|fold| {
            let true_class = sorted[fold].trajectory.label().unwrap_or_default().to_string();
            let outcome = vectorize_fold(fold)
                .and_then(|(training, test)| classify(&training, &test, &sorted[fold].id))
                .map_err(|e| e.to_string());
            FoldResult {
                true_class,
                outcome,
            }
        })
        .collect();

    // Merge in canonical fold order.
    let mut per_class: Vec<ClassAccuracy> = classes
        .iter()
        .map(|c| ClassAccuracy {
            class: c.clone(),
            samples: 0,
            errors: 0,
        })
        .collect();
    let mut confusion = ConfusionMatrix::new(classes.clone());
    let mut failures = Vec::new();
    for (fold, result) in fold_results.iter().enumerate() {
        let class_idx = classes
            .iter()
            .position(|c| c == &result.true_class)
            .expect("classes cover every label");
        per_class[class_idx].samples += 1;
        match &result.outcome {
            Ok(predicted) => {
                let p = classes
                    .iter()
                    .position(|c| c == predicted)
                    .ok_or_else(|| Error::UnknownLabel(predicted.clone()))?;
                confusion.counts[class_idx][p] += 1;
                if predicted != &result.true_class {
                    per_class[class_idx].errors += 1;
                }
            }
            Err(message) => {
                per_class[class_idx].errors += 1;
                failures.push(FoldFailure {
                    id: sorted[fold].id.clone(),
                    message: message.clone(),
                });
            }
        }
    }

    Ok(LoocvOutcome {
        report: AccuracyReport {
            per_class,
            config: config.clone(),
        },
        confusion,
        failures,
    })
}

/// Runs leave-one-out cross-validation with the configured vectorizer and
/// classifier. A degenerate fold is recorded as a [`FoldFailure`] and
/// counted as an error instead of aborting the run.
pub fn run_loocv(
    dataset: &[DatasetEntry],
    layout: &InterfaceLayout,
    config: &PipelineConfig,
) -> Result<LoocvOutcome> {
    let alphabet = layout.alphabet();
    match config.classifier {
        ClassifierKind::Hmm => run_loocv_impl(dataset, layout, config, |training, test, id| {
            let classes = {
                let mut c: Vec<String> = training
                    .iter()
                    .filter_map(|s| s.label.clone())
                    .collect();
                c.sort();
                c.dedup();
                c
            };
            let mut models = Vec::with_capacity(classes.len());
            for class in &classes {
                let class_seqs: Vec<ObservationSequence> = training
                    .iter()
                    .filter(|s| s.label.as_deref() == Some(class))
                    .cloned()
                    .collect();
                let train_config = HmmTrainConfig {
                    seed: derive_seed(config.master_seed, &["loocv", id, "hmm", class]),
                    ..config.hmm
                };
                let model = baum_welch_train(&class_seqs, &alphabet, &train_config)?;
                models.push((class.clone(), model));
            }
            classify_hmm(&models, test)
        }),
        ClassifierKind::Crf => run_loocv_impl(dataset, layout, config, |training, test, id| {
            let train_config = CrfTrainConfig {
                seed: derive_seed(config.master_seed, &["loocv", id, "crf"]),
                ..config.crf
            };
            let model = train_crf(training, &alphabet, &train_config)?;
            model.classify(test)
        }),
    }
}

/// One full LOOCV run per `omega` value: attraction statistics and
/// sequences are regenerated for every point. The base configuration's
/// vectorizer is forced to possibilistic.
pub fn omega_sweep(
    dataset: &[DatasetEntry],
    layout: &InterfaceLayout,
    base: &PipelineConfig,
    omegas: &[f64],
) -> Result<Vec<SweepPoint>> {
    let mut points = Vec::with_capacity(omegas.len());
    for &omega in omegas {
        let mut config = base.clone();
        config.vectorizer = VectorizerKind::Possibilistic;
        config.params.omega = omega;
        let outcome = run_loocv(dataset, layout, &config)?;
        points.push(SweepPoint {
            omega,
            accuracy_pct: outcome.report.total_accuracy_pct(),
            errors: outcome.report.total_errors(),
            samples: outcome.report.total_samples(),
            failures: outcome.failures.len(),
        });
    }
    Ok(points)
}
