//! File formats: layout JSON, trajectory CSV, dataset manifests, sequence
//! files and trained-model files.
//!
//! Validation failures carry a `path:line:` diagnostic wherever a line is
//! meaningful. Writers are deterministic so identical inputs always
//! produce byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aoi::{AreaOfInterest, Fixation, InterfaceLayout, KernelRect, Trajectory};
use crate::crf::CrfModel;
use crate::error::{Error, Result};
use crate::hmm::HmmModel;
use crate::synth::{DatasetEntry, GeneratorConfig};
use crate::vectorize::ObservationSequence;

/// Format versions, reported by the CLI `--version` output.
pub const LAYOUT_FORMAT_VERSION: u32 = 1;
pub const TRAJECTORY_FORMAT_VERSION: u32 = 1;
pub const SEQUENCE_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FORMAT_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Layout files: a JSON list of {name, left, top, width, height}.

#[derive(Serialize, Deserialize)]
struct LayoutArea {
    name: String,
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

pub fn layout_to_json(layout: &InterfaceLayout) -> String {
    let areas: Vec<LayoutArea> = layout
        .areas()
        .iter()
        .map(|a| LayoutArea {
            name: a.name.clone(),
            left: a.kernel.left,
            top: a.kernel.top,
            width: a.kernel.width,
            height: a.kernel.height,
        })
        .collect();
    serde_json::to_string_pretty(&areas).expect("layout serialization cannot fail")
}

/// Parses and fully validates a layout (unique names, positive extents,
/// pairwise disjoint kernels; overlap diagnostics name the offending pair).
pub fn layout_from_json(text: &str) -> Result<InterfaceLayout> {
    let areas: Vec<LayoutArea> = serde_json::from_str(text)?;
    InterfaceLayout::new(
        areas
            .into_iter()
            .map(|a| AreaOfInterest::new(a.name, KernelRect::new(a.left, a.top, a.width, a.height)))
            .collect(),
    )
}

pub fn load_layout(path: &Path) -> Result<InterfaceLayout> {
    layout_from_json(&read_file(path)?)
}

pub fn save_layout(path: &Path, layout: &InterfaceLayout) -> Result<()> {
    fs::write(path, layout_to_json(layout) + "\n")?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Trajectory files: CSV with a `t,x,y` header, one row per tick.

pub fn trajectory_to_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,x,y\n");
    for f in traj.fixations() {
        out.push_str(&format!("{},{},{}\n", f.t, f.x, f.y));
    }
    out
}

/// Parses a trajectory CSV. `origin` appears in diagnostics, `ds` and the
/// optional label come from the dataset manifest.
pub fn trajectory_from_csv(
    text: &str,
    origin: &str,
    ds: u32,
    label: Option<String>,
) -> Result<Trajectory> {
    let format_err = |line: usize, message: String| Error::Format {
        path: origin.to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == "t,x,y" => {}
        Some((_, header)) => {
            return Err(format_err(1, format!("expected header `t,x,y`, got `{header}`")))
        }
        None => return Err(format_err(1, "empty trajectory file".into())),
    }
    let mut fixations = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (t, x, y) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(t), Some(x), Some(y), None) => (t, x, y),
            _ => return Err(format_err(line_no, format!("expected 3 fields, got `{line}`"))),
        };
        let t: u32 = t
            .trim()
            .parse()
            .map_err(|e| format_err(line_no, format!("bad time index `{t}`: {e}")))?;
        let x: f64 = x
            .trim()
            .parse()
            .map_err(|e| format_err(line_no, format!("bad x coordinate `{x}`: {e}")))?;
        let y: f64 = y
            .trim()
            .parse()
            .map_err(|e| format_err(line_no, format!("bad y coordinate `{y}`: {e}")))?;
        fixations.push(Fixation::new(t, x, y));
    }
    Trajectory::new(fixations, ds, label).map_err(|e| match e {
        Error::InvalidCoordinates { index, x, y } => format_err(
            index + 2,
            format!("invalid coordinates ({x}, {y})"),
        ),
        Error::NonUniformTimeStep { index, t, expected } => format_err(
            index + 2,
            format!("time index {t} breaks the uniform step (expected {expected})"),
        ),
        other => other,
    })
}

pub fn load_trajectory_csv(path: &Path, ds: u32, label: Option<String>) -> Result<Trajectory> {
    trajectory_from_csv(&read_file(path)?, &path.display().to_string(), ds, label)
}

// ---------------------------------------------------------------------------
// Dataset manifests: {seed, config, entries: [{file, label}]}.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub config: GeneratorConfig,
    pub entries: Vec<ManifestEntry>,
}

/// Writes one CSV per entry plus `manifest.json` into `dir`; returns the
/// manifest. File names are `<id>.csv`.
pub fn save_dataset(
    dir: &Path,
    entries: &[DatasetEntry],
    config: &GeneratorConfig,
) -> Result<DatasetManifest> {
    fs::create_dir_all(dir)?;
    let mut manifest_entries = Vec::with_capacity(entries.len());
    for e in entries {
        let file = format!("{}.csv", e.id);
        fs::write(dir.join(&file), trajectory_to_csv(&e.trajectory))?;
        manifest_entries.push(ManifestEntry {
            file,
            label: e
                .trajectory
                .label()
                .unwrap_or_default()
                .to_string(),
        });
    }
    let manifest = DatasetManifest {
        seed: config.master_seed,
        config: *config,
        entries: manifest_entries,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialization");
    fs::write(dir.join("manifest.json"), text + "\n")?;
    Ok(manifest)
}

/// Loads a dataset from its manifest; trajectory files resolve relative to
/// the manifest's directory, entry ids are the CSV file stems.
pub fn load_dataset(manifest_path: &Path) -> Result<(Vec<DatasetEntry>, DatasetManifest)> {
    let manifest: DatasetManifest = serde_json::from_str(&read_file(manifest_path)?)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut entries = Vec::with_capacity(manifest.entries.len());
    for m in &manifest.entries {
        let path: PathBuf = base.join(&m.file);
        let label = if m.label.is_empty() {
            None
        } else {
            Some(m.label.clone())
        };
        let trajectory = load_trajectory_csv(&path, manifest.config.ds, label)?;
        let id = Path::new(&m.file)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| m.file.clone());
        entries.push(DatasetEntry { id, trajectory });
    }
    Ok((entries, manifest))
}

// ---------------------------------------------------------------------------
// Sequence files: one sequence per line, whitespace-separated symbols,
// preceded by `label<TAB>` when the sequence is labeled.

pub fn sequences_to_string(sequences: &[ObservationSequence]) -> Result<String> {
    let mut out = String::new();
    for seq in sequences {
        if let Some(label) = &seq.label {
            if label.contains(['\t', '\n']) || label.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "label `{label}` cannot be written to a sequence file"
                )));
            }
            out.push_str(label);
            out.push('\t');
        }
        for (i, s) in seq.symbols.iter().enumerate() {
            if s.contains(char::is_whitespace) || s.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "symbol `{s}` cannot be written to a sequence file"
                )));
            }
            if i > 0 {
                out.push(' ');
            }
            out.push_str(s);
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parses a sequence file. Sources are not stored in the format; entries
/// come back with `source = None`.
pub fn sequences_from_string(text: &str) -> Vec<ObservationSequence> {
    text.lines()
        .map(|line| {
            let (label, rest) = match line.split_once('\t') {
                Some((label, rest)) => (Some(label.to_string()), rest),
                None => (None, line),
            };
            let symbols: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
            ObservationSequence::new(symbols, label)
        })
        .collect()
}

pub fn save_sequences(path: &Path, sequences: &[ObservationSequence]) -> Result<()> {
    fs::write(path, sequences_to_string(sequences)?)?;
    Ok(())
}

pub fn load_sequences(path: &Path) -> Result<Vec<ObservationSequence>> {
    Ok(sequences_from_string(&read_file(path)?))
}

// ---------------------------------------------------------------------------
// Model files.

pub fn save_hmm(path: &Path, model: &HmmModel) -> Result<()> {
    fs::write(path, model.to_json() + "\n")?;
    Ok(())
}

pub fn load_hmm(path: &Path) -> Result<HmmModel> {
    HmmModel::from_json(&read_file(path)?)
}

pub fn save_crf(path: &Path, model: &CrfModel) -> Result<()> {
    fs::write(path, model.to_json() + "\n")?;
    Ok(())
}

pub fn load_crf(path: &Path) -> Result<CrfModel> {
    CrfModel::from_json(&read_file(path)?)
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{builtin_layout, generate_dataset, GeneratorConfig};
    use proptest::prelude::*;
    use tempfile::tempdir;

    #[test]
    fn layout_roundtrip_and_validation() {
        let layout = builtin_layout();
        let text = layout_to_json(&layout);
        let back = layout_from_json(&text).unwrap();
        assert_eq!(layout, back);

        let overlapping = r#"[
            {"name": "A", "left": 0, "top": 0, "width": 10, "height": 10},
            {"name": "B", "left": 5, "top": 5, "width": 10, "height": 10}
        ]"#;
        let err = layout_from_json(overlapping).unwrap_err();
        assert!(err.to_string().contains('A') && err.to_string().contains('B'));
    }

    #[test]
    fn trajectory_csv_roundtrip() {
        let traj = Trajectory::new(
            vec![
                Fixation::new(0, 12.0, 30.0),
                Fixation::new(1, 13.0, 31.0),
                Fixation::new(2, 14.5, 29.0),
            ],
            1,
            Some("DEG2".into()),
        )
        .unwrap();
        let text = trajectory_to_csv(&traj);
        assert!(text.starts_with("t,x,y\n0,12,30\n"));
        let back = trajectory_from_csv(&text, "mem", 1, Some("DEG2".into())).unwrap();
        assert_eq!(traj, back);
    }

    #[test]
    fn trajectory_csv_diagnostics_carry_line_numbers() {
        let text = "t,x,y\n0,1,2\n1,oops,2\n";
        let err = trajectory_from_csv(text, "traj.csv", 1, None).unwrap_err();
        assert_eq!(err.to_string(), "traj.csv:3: bad x coordinate `oops`: invalid float literal");

        let gap = "t,x,y\n0,1,2\n2,1,2\n";
        let err = trajectory_from_csv(gap, "traj.csv", 1, None).unwrap_err();
        assert!(err.to_string().starts_with("traj.csv:3:"));

        let bad_header = "time,x,y\n";
        let err = trajectory_from_csv(bad_header, "traj.csv", 1, None).unwrap_err();
        assert!(err.to_string().starts_with("traj.csv:1:"));
    }

    #[test]
    fn dataset_save_load_roundtrip() {
        let dir = tempdir().unwrap();
        let config = GeneratorConfig {
            per_task: 2,
            ..GeneratorConfig::default()
        };
        let entries = generate_dataset(&config).unwrap();
        let manifest = save_dataset(dir.path(), &entries, &config).unwrap();
        assert_eq!(manifest.entries.len(), 6);

        let (loaded, manifest_back) = load_dataset(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(manifest, manifest_back);
        assert_eq!(entries, loaded);
    }

    #[test]
    fn sequence_file_layout() {
        let sequences = vec![
            ObservationSequence::new(vec!["A".into(), "B".into()], Some("DEG2".into())),
            ObservationSequence::new(vec![], Some("INT".into())),
            ObservationSequence::new(vec!["C".into()], None),
            ObservationSequence::new(vec![], None),
        ];
        let text = sequences_to_string(&sequences).unwrap();
        assert_eq!(text, "DEG2\tA B\nINT\t\nC\n\n");
        let back = sequences_from_string(&text);
        assert_eq!(sequences, back);
    }

    proptest! {
        // Byte-exact round trip: parse(write(x)) == x and
        // write(parse(write(x))) == write(x).
        #[test]
        fn sequence_file_roundtrip(
            raw in proptest::collection::vec(
                (
                    proptest::option::of("[A-Z]{1,6}"),
                    proptest::collection::vec("[a-zA-Z0-9_]{1,4}", 0..12),
                ),
                0..10,
            )
        ) {
            let sequences: Vec<ObservationSequence> = raw
                .into_iter()
                .map(|(label, symbols)| ObservationSequence::new(symbols, label))
                .collect();
            let text = sequences_to_string(&sequences).unwrap();
            let back = sequences_from_string(&text);
            prop_assert_eq!(&sequences, &back);
            let text2 = sequences_to_string(&back).unwrap();
            prop_assert_eq!(text, text2);
        }
    }

    #[test]
    fn model_files_roundtrip() {
        use crate::crf::{train_crf, CrfTrainConfig};
        use crate::hmm::{baum_welch_train, HmmTrainConfig};
        let dir = tempdir().unwrap();
        let alphabet = vec!["a".to_string(), "b".to_string()];
        let corpus = vec![
            ObservationSequence::new(vec!["a".into(), "a".into()], Some("P".into())),
            ObservationSequence::new(vec!["b".into(), "b".into()], Some("Q".into())),
        ];
        let hmm = baum_welch_train(
            &corpus,
            &alphabet,
            &HmmTrainConfig {
                n_states: 2,
                ..HmmTrainConfig::default()
            },
        )
        .unwrap();
        let hmm_path = dir.path().join("hmm.json");
        save_hmm(&hmm_path, &hmm).unwrap();
        assert_eq!(load_hmm(&hmm_path).unwrap(), hmm);

        let crf = train_crf(&corpus, &alphabet, &CrfTrainConfig::default()).unwrap();
        let crf_path = dir.path().join("crf.json");
        save_crf(&crf_path, &crf).unwrap();
        assert_eq!(load_crf(&crf_path).unwrap(), crf);
    }
}
