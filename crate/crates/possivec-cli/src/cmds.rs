//! Command implementations. Each returns the process exit code: 0 for
//! success, 1 when fold failures were recorded, while usage and IO errors
//! bubble up as `anyhow` errors and exit with code 2.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use possivec::io as pio;
use possivec::{
    builtin_layout, builtin_scripts, classify_hmm, generate_dataset_with, omega_sweep, run_loocv,
    train_crf, ClassifierKind, CrfTrainConfig, GeneratorConfig, HmmModel, HmmTrainConfig,
    ObservationSequence, PipelineConfig, VectorizerKind, VectorizerParams,
};
use serde::{Deserialize, Serialize};

use crate::args::{
    parse_omegas, ClassifyArgs, GenArgs, LoocvArgs, Mode, Model, SweepArgs, TrainArgs,
    VectorizeArgs,
};
use crate::cfgfile::ConfigFile;
use crate::manifest::RunManifest;

fn to_vectorizer(mode: Mode) -> VectorizerKind {
    match mode {
        Mode::Classical => VectorizerKind::Classical,
        Mode::Possibilistic => VectorizerKind::Possibilistic,
    }
}

fn to_classifier(model: Model) -> ClassifierKind {
    match model {
        Model::Hmm => ClassifierKind::Hmm,
        Model::Crf => ClassifierKind::Crf,
    }
}

fn resolve_hmm(flags: &crate::args::HmmFlags, cfg: &ConfigFile, seed: u64) -> HmmTrainConfig {
    let defaults = HmmTrainConfig::default();
    HmmTrainConfig {
        n_states: flags.n_states.or(cfg.hmm.n_states).unwrap_or(defaults.n_states),
        seed,
        max_iterations: flags
            .hmm_max_iter
            .or(cfg.hmm.max_iterations)
            .unwrap_or(defaults.max_iterations),
        tolerance: flags.hmm_tol.or(cfg.hmm.tolerance).unwrap_or(defaults.tolerance),
        restarts: flags.restarts.or(cfg.hmm.restarts).unwrap_or(defaults.restarts),
        floor: defaults.floor,
    }
}

fn resolve_crf(flags: &crate::args::CrfFlags, cfg: &ConfigFile, seed: u64) -> CrfTrainConfig {
    let defaults = CrfTrainConfig::default();
    CrfTrainConfig {
        sigma2: flags.sigma2.or(cfg.crf.sigma2).unwrap_or(defaults.sigma2),
        tolerance: flags.crf_tol.or(cfg.crf.tolerance).unwrap_or(defaults.tolerance),
        max_iterations: flags
            .crf_max_iter
            .or(cfg.crf.max_iterations)
            .unwrap_or(defaults.max_iterations),
        seed,
    }
}

fn resolve_params(
    omega: Option<f64>,
    fuzzifier: Option<f64>,
    threshold: Option<f64>,
    cfg: &ConfigFile,
    ds: u32,
) -> VectorizerParams {
    let defaults = VectorizerParams::default();
    VectorizerParams {
        omega: omega.or(cfg.vectorize.omega).unwrap_or(defaults.omega),
        fuzzifier: fuzzifier
            .or(cfg.vectorize.fuzzifier)
            .unwrap_or(defaults.fuzzifier),
        relevance_threshold: threshold
            .or(cfg.vectorize.threshold)
            .unwrap_or(defaults.relevance_threshold),
        ds,
    }
}

fn in_pool<T: Send>(jobs: Option<usize>, run: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    match jobs {
        None => Ok(run()),
        Some(n) => {
            anyhow::ensure!(n >= 1, "--jobs must be at least 1");
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("building the worker pool")?;
            Ok(pool.install(run))
        }
    }
}

// ---------------------------------------------------------------------------

pub fn cmd_gen(args: &GenArgs, cfg: &ConfigFile) -> anyhow::Result<i32> {
    let defaults = GeneratorConfig::default();
    let config = GeneratorConfig {
        master_seed: args.seed.or(cfg.seed).unwrap_or(defaults.master_seed),
        per_task: args.per_task.or(cfg.gen.per_task).unwrap_or(defaults.per_task),
        duration_range: (
            args.duration_min
                .or(cfg.gen.duration_min)
                .unwrap_or(defaults.duration_range.0),
            args.duration_max
                .or(cfg.gen.duration_max)
                .unwrap_or(defaults.duration_range.1),
        ),
        ds: args.ds.or(cfg.gen.ds).unwrap_or(defaults.ds),
    };
    let layout = builtin_layout();
    let entries = generate_dataset_with(&config, &layout, &builtin_scripts())?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    pio::save_layout(&args.out.join("layout.json"), &layout)?;
    pio::save_dataset(&args.out, &entries, &config)?;
    RunManifest::new(
        "gen",
        config.master_seed,
        config,
        vec![],
        vec!["layout.json".into(), "manifest.json".into()],
    )
    .write_dir(&args.out)?;
    println!(
        "wrote {} trajectories to {}",
        entries.len(),
        args.out.display()
    );
    Ok(0)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VectorizeSpec {
    mode: VectorizerKind,
    params: VectorizerParams,
}

pub fn cmd_vectorize(args: &VectorizeArgs, cfg: &ConfigFile) -> anyhow::Result<i32> {
    // Load and validate every input before touching the output paths.
    let layout = pio::load_layout(&args.layout)?;
    let (entries, dataset_manifest) = pio::load_dataset(&args.manifest)?;
    let params = resolve_params(
        args.omega,
        args.fuzzifier,
        args.threshold,
        cfg,
        dataset_manifest.config.ds,
    );

    let mode = to_vectorizer(args.mode);
    let mut sequences = Vec::with_capacity(entries.len());
    match mode {
        VectorizerKind::Classical => {
            for e in &entries {
                sequences
                    .push(possivec::vectorize_classical(&e.trajectory, &layout)
                        .with_source(e.id.clone()));
            }
        }
        VectorizerKind::Possibilistic => {
            let corpus: Vec<possivec::Trajectory> =
                entries.iter().map(|e| e.trajectory.clone()).collect();
            let stats = possivec::compute_attraction_stats(&layout, &corpus, params.omega)?;
            for e in &entries {
                sequences.push(
                    possivec::vectorize_possibilistic(&e.trajectory, &layout, &stats, &params)?
                        .with_source(e.id.clone()),
                );
            }
        }
    }
    for seq in &sequences {
        if seq.is_empty() {
            eprintln!(
                "warning: trajectory `{}` produced an empty sequence",
                seq.source.as_deref().unwrap_or("<unnamed>")
            );
        }
    }
    pio::save_sequences(&args.out, &sequences)?;
    let spec = VectorizeSpec { mode, params };
    RunManifest::new(
        "vectorize",
        0,
        spec,
        vec![args.layout.clone(), args.manifest.clone()],
        vec![args.out.display().to_string()],
    )
    .write_to(&sibling_manifest(&args.out))?;
    println!("wrote {} sequences to {}", sequences.len(), args.out.display());
    Ok(0)
}

fn sibling_manifest(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    name.push_str(".manifest.json");
    out.with_file_name(name)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrainSpec {
    model: ClassifierKind,
    hmm: HmmTrainConfig,
    crf: CrfTrainConfig,
}

pub fn cmd_train(args: &TrainArgs, cfg: &ConfigFile) -> anyhow::Result<i32> {
    let layout = pio::load_layout(&args.layout)?;
    let sequences = pio::load_sequences(&args.seqs)?;
    let alphabet = layout.alphabet();
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let hmm_config = resolve_hmm(&args.hmm, cfg, seed);
    let crf_config = resolve_crf(&args.crf, cfg, seed);

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let mut outputs = Vec::new();
    match args.model {
        Model::Hmm => {
            let mut classes: Vec<String> =
                sequences.iter().filter_map(|s| s.label.clone()).collect();
            classes.sort();
            classes.dedup();
            anyhow::ensure!(
                !classes.is_empty(),
                "the sequence file carries no class labels"
            );
            for class in &classes {
                let class_seqs: Vec<ObservationSequence> = sequences
                    .iter()
                    .filter(|s| s.label.as_deref() == Some(class))
                    .cloned()
                    .collect();
                let train_config = HmmTrainConfig {
                    seed: possivec::seed::derive_seed(seed, &["train", class]),
                    ..hmm_config
                };
                let model = possivec::baum_welch_train(&class_seqs, &alphabet, &train_config)?;
                let file = format!("hmm_{class}.json");
                pio::save_hmm(&args.out.join(&file), &model)?;
                println!(
                    "trained {file}: {} sequences, final log-likelihood {:.2}",
                    class_seqs.len(),
                    model.train_meta().map(|m| m.loglik).unwrap_or(f64::NAN)
                );
                outputs.push(file);
            }
        }
        Model::Crf => {
            let model = train_crf(&sequences, &alphabet, &crf_config)?;
            pio::save_crf(&args.out.join("crf.json"), &model)?;
            println!(
                "trained crf.json: {} sequences, final objective {:.2}",
                sequences.len(),
                model.train_meta().map(|m| m.loglik).unwrap_or(f64::NAN)
            );
            outputs.push("crf.json".into());
        }
    }
    RunManifest::new(
        "train",
        seed,
        TrainSpec {
            model: to_classifier(args.model),
            hmm: hmm_config,
            crf: crf_config,
        },
        vec![args.layout.clone(), args.seqs.clone()],
        outputs,
    )
    .write_dir(&args.out)?;
    Ok(0)
}

// ---------------------------------------------------------------------------

pub fn cmd_classify(args: &ClassifyArgs) -> anyhow::Result<i32> {
    let sequences = pio::load_sequences(&args.seqs)?;
    let mut rows = Vec::with_capacity(sequences.len());
    let mut failures = 0usize;
    match args.model {
        Model::Hmm => {
            let models = load_hmm_models(&args.models)?;
            for (i, seq) in sequences.iter().enumerate() {
                rows.push(classification_row(i, seq, classify_hmm(&models, seq), &mut failures));
            }
        }
        Model::Crf => {
            let path = if args.models.is_dir() {
                args.models.join("crf.json")
            } else {
                args.models.clone()
            };
            let model = pio::load_crf(&path)?;
            for (i, seq) in sequences.iter().enumerate() {
                rows.push(classification_row(i, seq, model.classify(seq), &mut failures));
            }
        }
    }
    let mut out = String::from("index,label,predicted\n");
    for row in rows {
        out.push_str(&row);
    }
    fs::write(&args.out, out).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "classified {} sequences ({failures} failures) -> {}",
        sequences.len(),
        args.out.display()
    );
    Ok(if failures > 0 { 1 } else { 0 })
}

fn classification_row(
    index: usize,
    seq: &ObservationSequence,
    outcome: possivec::Result<String>,
    failures: &mut usize,
) -> String {
    let label = seq.label.as_deref().unwrap_or("");
    match outcome {
        Ok(predicted) => format!("{},{},{}\n", index + 1, label, predicted),
        Err(e) => {
            eprintln!("warning: sequence {} failed: {e}", index + 1);
            *failures += 1;
            format!("{},{},ERROR\n", index + 1, label)
        }
    }
}

fn load_hmm_models(path: &Path) -> anyhow::Result<Vec<(String, HmmModel)>> {
    anyhow::ensure!(
        path.is_dir(),
        "--models must point at the directory `train --model hmm` wrote (got {})",
        path.display()
    );
    let mut models = Vec::new();
    let mut names: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("reading {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    names.sort();
    for file in names {
        let name = file.file_name().map(|n| n.to_string_lossy().into_owned());
        if let Some(name) = name {
            if let Some(class) = name.strip_prefix("hmm_").and_then(|n| n.strip_suffix(".json")) {
                models.push((class.to_string(), pio::load_hmm(&file)?));
            }
        }
    }
    anyhow::ensure!(
        models.len() >= 2,
        "found {} hmm_<class>.json model files in {}, need at least 2",
        models.len(),
        path.display()
    );
    Ok(models)
}

// ---------------------------------------------------------------------------

pub fn cmd_loocv(args: &LoocvArgs, cfg: &ConfigFile) -> anyhow::Result<i32> {
    let (pipeline, layout_path, manifest_path) = match &args.from_manifest {
        Some(path) => {
            let manifest: RunManifest<PipelineConfig> = RunManifest::load(path, "loocv")?;
            anyhow::ensure!(
                manifest.inputs.len() == 2,
                "loocv run manifest must list [layout, dataset] inputs"
            );
            (
                manifest.parameters,
                manifest.inputs[0].clone(),
                manifest.inputs[1].clone(),
            )
        }
        None => {
            let layout_path = args.layout.clone().expect("required by clap");
            let manifest_path = args.manifest.clone().expect("required by clap");
            let seed = args.seed.or(cfg.seed).unwrap_or(42);
            let (_, dataset_manifest) = pio::load_dataset(&manifest_path)?;
            let pipeline = PipelineConfig {
                vectorizer: to_vectorizer(args.mode.expect("required by clap")),
                params: resolve_params(
                    args.omega,
                    args.fuzzifier,
                    args.threshold,
                    cfg,
                    dataset_manifest.config.ds,
                ),
                classifier: to_classifier(args.model.expect("required by clap")),
                hmm: resolve_hmm(&args.hmm, cfg, 0),
                crf: resolve_crf(&args.crf, cfg, 0),
                master_seed: seed,
            };
            (pipeline, layout_path, manifest_path)
        }
    };

    let layout = pio::load_layout(&layout_path)?;
    let (entries, _) = pio::load_dataset(&manifest_path)?;
    let jobs = args.jobs.or(cfg.jobs);
    let outcome = in_pool(jobs, || run_loocv(&entries, &layout, &pipeline))??;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    fs::write(args.out.join("report.csv"), outcome.report.to_csv())?;
    fs::write(args.out.join("confusion.csv"), outcome.confusion.to_csv())?;
    RunManifest::new(
        "loocv",
        pipeline.master_seed,
        pipeline.clone(),
        vec![layout_path, manifest_path],
        vec!["report.csv".into(), "confusion.csv".into()],
    )
    .write_dir(&args.out)?;

    for failure in &outcome.failures {
        eprintln!("fold failure: {}: {}", failure.id, failure.message);
    }
    println!(
        "total accuracy {:.2}% ({} errors / {} samples) -> {}",
        outcome.report.total_accuracy_pct(),
        outcome.report.total_errors(),
        outcome.report.total_samples(),
        args.out.join("report.csv").display()
    );
    Ok(if outcome.failures.is_empty() { 0 } else { 1 })
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SweepSpec {
    base: PipelineConfig,
    omegas: Vec<f64>,
}

pub fn cmd_sweep(args: &SweepArgs, cfg: &ConfigFile) -> anyhow::Result<i32> {
    let (spec, layout_path, manifest_path) = match &args.from_manifest {
        Some(path) => {
            let manifest: RunManifest<SweepSpec> = RunManifest::load(path, "sweep")?;
            anyhow::ensure!(
                manifest.inputs.len() == 2,
                "sweep run manifest must list [layout, dataset] inputs"
            );
            (
                manifest.parameters,
                manifest.inputs[0].clone(),
                manifest.inputs[1].clone(),
            )
        }
        None => {
            let layout_path = args.layout.clone().expect("required by clap");
            let manifest_path = args.manifest.clone().expect("required by clap");
            let omegas = parse_omegas(args.omegas.as_deref().expect("required by clap"))
                .map_err(anyhow::Error::msg)?;
            let seed = args.seed.or(cfg.seed).unwrap_or(42);
            let (_, dataset_manifest) = pio::load_dataset(&manifest_path)?;
            let base = PipelineConfig {
                vectorizer: VectorizerKind::Possibilistic,
                params: resolve_params(
                    None,
                    args.fuzzifier,
                    args.threshold,
                    cfg,
                    dataset_manifest.config.ds,
                ),
                classifier: to_classifier(args.model.expect("required by clap")),
                hmm: resolve_hmm(&args.hmm, cfg, 0),
                crf: resolve_crf(&args.crf, cfg, 0),
                master_seed: seed,
            };
            (SweepSpec { base, omegas }, layout_path, manifest_path)
        }
    };

    let layout = pio::load_layout(&layout_path)?;
    let (entries, _) = pio::load_dataset(&manifest_path)?;
    let jobs = args.jobs.or(cfg.jobs);
    let points = in_pool(jobs, || {
        omega_sweep(&entries, &layout, &spec.base, &spec.omegas)
    })??;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    fs::write(args.out.join("sweep.csv"), possivec::sweep_to_csv(&points))?;
    RunManifest::new(
        "sweep",
        spec.base.master_seed,
        spec.clone(),
        vec![layout_path, manifest_path],
        vec!["sweep.csv".into()],
    )
    .write_dir(&args.out)?;

    let mut failures = 0usize;
    for p in &points {
        println!("omega {}: {:.2}% ({} errors)", p.omega, p.accuracy_pct, p.errors);
        failures += p.failures;
    }
    println!("-> {}", args.out.join("sweep.csv").display());
    Ok(if failures == 0 { 0 } else { 1 })
}
