//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const VERSION_LINE: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (formats: layout=1 trajectory=1 sequence=1 hmm-model=1 crf-model=1 manifest=1)"
);

/// Mouse-trajectory vectorization and task-recognition pipeline.
#[derive(Debug, Parser)]
#[command(name = "possivec", version = VERSION_LINE)]
pub struct Cli {
    /// Optional TOML config file; flags beat config values, config values
    /// beat built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled dataset over the built-in layout.
    Gen(GenArgs),
    /// Convert a dataset into observation sequences.
    Vectorize(VectorizeArgs),
    /// Train classifier models from a labeled sequence file.
    Train(TrainArgs),
    /// Classify sequences with previously trained models.
    Classify(ClassifyArgs),
    /// Leave-one-out cross-validation of a full pipeline.
    Loocv(LoocvArgs),
    /// One LOOCV run per omega value; emits the accuracy curve.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Classical,
    Possibilistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Hmm,
    Crf,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Output directory for trajectories, layout and manifest.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Master seed; every random choice derives from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trajectories per task class.
    #[arg(long, value_name = "N")]
    pub per_task: Option<usize>,
    /// Minimum trajectory duration in ticks.
    #[arg(long, value_name = "TICKS")]
    pub duration_min: Option<u32>,
    /// Maximum trajectory duration in ticks.
    #[arg(long, value_name = "TICKS")]
    pub duration_max: Option<u32>,
    /// Sampling interval in centiseconds.
    #[arg(long)]
    pub ds: Option<u32>,
}

#[derive(Debug, Args)]
pub struct VectorizeArgs {
    /// `classical` or `possibilistic`.
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Layout JSON file.
    #[arg(long, value_name = "FILE")]
    pub layout: PathBuf,
    /// Dataset manifest JSON file.
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// Output sequence file.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Near-band margin in pixels (possibilistic mode).
    #[arg(long)]
    pub omega: Option<f64>,
    /// Bezdek fuzzifier (> 1).
    #[arg(long)]
    pub fuzzifier: Option<f64>,
    /// Relevance threshold on the possibility fallback, in [0, 1].
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// `hmm` (one model per class) or `crf` (one joint model).
    #[arg(long, value_enum)]
    pub model: Model,
    /// Layout JSON file (defines the symbol alphabet).
    #[arg(long, value_name = "FILE")]
    pub layout: PathBuf,
    /// Labeled sequence file.
    #[arg(long, value_name = "FILE")]
    pub seqs: PathBuf,
    /// Output directory for model files.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub hmm: HmmFlags,
    #[command(flatten)]
    pub crf: CrfFlags,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// `hmm` or `crf`.
    #[arg(long, value_enum)]
    pub model: Model,
    /// Model file, or the directory `train` wrote models into.
    #[arg(long, value_name = "PATH")]
    pub models: PathBuf,
    /// Sequence file to classify.
    #[arg(long, value_name = "FILE")]
    pub seqs: PathBuf,
    /// Output CSV (`index,label,predicted`).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct HmmFlags {
    /// Hidden state count.
    #[arg(long, value_name = "N")]
    pub n_states: Option<usize>,
    /// Random restarts kept by best final likelihood.
    #[arg(long, value_name = "N")]
    pub restarts: Option<usize>,
    /// Baum-Welch iteration cap.
    #[arg(long, value_name = "N")]
    pub hmm_max_iter: Option<usize>,
    /// Baum-Welch log-likelihood improvement tolerance.
    #[arg(long, value_name = "F")]
    pub hmm_tol: Option<f64>,
}

#[derive(Debug, Args, Clone)]
pub struct CrfFlags {
    /// Gaussian prior variance of the CRF weight penalty.
    #[arg(long, value_name = "F")]
    pub sigma2: Option<f64>,
    /// CRF gradient-norm tolerance.
    #[arg(long, value_name = "F")]
    pub crf_tol: Option<f64>,
    /// CRF optimizer iteration cap.
    #[arg(long, value_name = "N")]
    pub crf_max_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct LoocvArgs {
    /// `hmm` or `crf`.
    #[arg(long, value_enum, required_unless_present = "from_manifest")]
    pub model: Option<Model>,
    /// `classical` or `possibilistic`.
    #[arg(long, value_enum, required_unless_present = "from_manifest")]
    pub mode: Option<Mode>,
    #[arg(long, value_name = "FILE", required_unless_present = "from_manifest")]
    pub layout: Option<PathBuf>,
    #[arg(long, value_name = "FILE", required_unless_present = "from_manifest")]
    pub manifest: Option<PathBuf>,
    /// Output directory for report.csv and confusion.csv.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Rerun a previous invocation from its run manifest.
    #[arg(long, value_name = "FILE")]
    pub from_manifest: Option<PathBuf>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub fuzzifier: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fold parallelism (defaults to all cores).
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub hmm: HmmFlags,
    #[command(flatten)]
    pub crf: CrfFlags,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// `hmm` or `crf`.
    #[arg(long, value_enum, required_unless_present = "from_manifest")]
    pub model: Option<Model>,
    #[arg(long, value_name = "FILE", required_unless_present = "from_manifest")]
    pub layout: Option<PathBuf>,
    #[arg(long, value_name = "FILE", required_unless_present = "from_manifest")]
    pub manifest: Option<PathBuf>,
    /// Omega values: `start:end:step` (inclusive) or a comma list.
    #[arg(long, value_name = "SPEC", required_unless_present = "from_manifest")]
    pub omegas: Option<String>,
    /// Output directory for sweep.csv.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Rerun a previous invocation from its run manifest.
    #[arg(long, value_name = "FILE")]
    pub from_manifest: Option<PathBuf>,
    #[arg(long)]
    pub fuzzifier: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fold parallelism (defaults to all cores).
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub hmm: HmmFlags,
    #[command(flatten)]
    pub crf: CrfFlags,
}

/// Parses `start:end:step` (inclusive) or a comma-separated list.
pub fn parse_omegas(spec: &str) -> Result<Vec<f64>, String> {
    let parse = |s: &str| -> Result<f64, String> {
        s.trim()
            .parse::<f64>()
            .map_err(|e| format!("bad omega value `{s}`: {e}"))
    };
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected start:end:step, got `{spec}`"));
        }
        let (start, end, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
        if !(step > 0.0) {
            return Err("omega step must be positive".into());
        }
        if end < start {
            return Err("omega range end must be >= start".into());
        }
        let mut out = Vec::new();
        let mut k = 0u32;
        loop {
            let v = start + f64::from(k) * step;
            if v > end + 1e-9 {
                break;
            }
            out.push(v);
            k += 1;
        }
        Ok(out)
    } else {
        spec.split(',').map(parse).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_range_is_inclusive() {
        assert_eq!(
            parse_omegas("0:12:1").unwrap(),
            (0..=12).map(f64::from).collect::<Vec<_>>()
        );
        assert_eq!(parse_omegas("0:1:0.5").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_omegas("3,1,2").unwrap(), vec![3.0, 1.0, 2.0]);
        assert!(parse_omegas("5:1:1").is_err());
        assert!(parse_omegas("0:5:0").is_err());
    }
}
