//! Subcommand implementations behind the `amptcr` binary.

pub mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use amptcr_core::alignment::{rotation_challenge, ChallengeReport};
use amptcr_core::chemio::{parse_structure, Molecule, StructureFormat};
use amptcr_core::cloudstore::{read_archive, write_archive, write_atomic, AmptcrCloud, CloudMeta, FORMAT_VERSION};
use amptcr_core::evalkit::{fold_runner, Metrics, RunResult, Task, TrainOutput};
use amptcr_core::fingerprint::{morgan_fingerprint, Fingerprint};
use amptcr_core::pipeline::{build_cloud, prepare_molecule, Warning};
use amptcr_core::surface::export_ply;
use amptcr_core::topology::channel_layout;
use amptcr_neural::io::model_bytes;
use amptcr_neural::train::{history_csv, Sample};
use amptcr_neural::{train, ModelInput};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::PipelineConfig;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    /// Exit code 2.
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
    #[error("every input failed")]
    AllFailed,
    #[error(transparent)]
    Core(#[from] amptcr_core::Error),
    #[error(transparent)]
    Neural(#[from] amptcr_neural::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub input: String,
    /// `ok` or `failed:<reason>`.
    pub status: String,
    pub archive: Option<String>,
    pub mesh: Option<String>,
    /// Hex-encoded fingerprint bits.
    pub fingerprint: Option<String>,
    pub warnings: Vec<Warning>,
}

impl ManifestEntry {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config_hash: String,
    pub config: PipelineConfig,
    pub entries: Vec<ManifestEntry>,
}

fn structure_format(path: &Path) -> Option<StructureFormat> {
    path.extension().and_then(|e| e.to_str()).and_then(StructureFormat::from_extension)
}

/// Structure files named directly or found (non-recursively) in directories,
/// directories listed in name order.
pub fn collect_inputs(paths: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .map(|e| e.map(|e| e.path()))
                .collect::<Result<_, _>>()?;
            found.retain(|f| f.is_file() && structure_format(f).is_some());
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(CliError::Input("no structure files found".into()));
    }
    Ok(out)
}

pub fn read_molecule(path: &Path) -> CliResult<Molecule<f64>> {
    let fmt = structure_format(path)
        .ok_or_else(|| CliError::Input(format!("{}: unknown structure format", path.display())))?;
    let text = std::fs::read_to_string(path)?;
    let mut mol: Molecule<f64> = parse_structure(&text, fmt)?;
    if mol.name.is_empty() {
        mol.name = stem(path);
    }
    Ok(mol)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

struct Built {
    archive: String,
    mesh: String,
    fingerprint: String,
    warnings: Vec<Warning>,
}

fn build_one(cfg: &PipelineConfig, hash: &str, path: &Path, name: &str, out: &Path) -> CliResult<Built> {
    let mol = read_molecule(path)?;
    let built = build_cloud(&mol, &cfg.cloud)?;
    let prepared = prepare_molecule(&mol, cfg.cloud.charges)?;
    let fp = morgan_fingerprint(&prepared, cfg.fingerprint_radius, cfg.fingerprint_bits)?;
    let meta = CloudMeta {
        name: name.to_string(),
        scalar_kind: cfg.cloud.scalar.as_str().to_string(),
        n_points: cfg.cloud.n_points,
        channel_layout: channel_layout(&cfg.cloud.radii),
        config_hash: hash.to_string(),
        format_version: FORMAT_VERSION,
    };
    let cloud = AmptcrCloud::from_surface_cloud(&built.cloud, meta)?;
    let archive = format!("{name}.npz");
    let mesh = format!("{name}.ply");
    write_archive(&cloud, &out.join(&archive))?;
    // mesh in the same canonical frame as the cloud: x' = R x + R t
    let r = built.frame.rotation;
    let aligned = built.mesh.transformed(&r, r.mul_vec(&built.frame.translation));
    write_atomic(&out.join(&mesh), &export_ply(&aligned))?;
    Ok(Built {
        archive,
        mesh,
        fingerprint: fp.to_hex(),
        warnings: built.warnings,
    })
}

/// Builds one archive and one PLY mesh per input, in parallel over `jobs`
/// workers, then writes the manifest. Per-molecule failures are recorded and
/// do not stop the run.
pub fn cmd_build(cfg: &PipelineConfig, inputs: &[PathBuf], out: &Path, jobs: usize) -> CliResult<Manifest> {
    let files = collect_inputs(inputs)?;
    std::fs::create_dir_all(out)?;
    let hash = cfg.hash()?;
    let names: Vec<String> = files.iter().map(|f| stem(f)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Input(e.to_string()))?;
    let results: Vec<CliResult<Built>> = pool.install(|| {
        files
            .par_iter()
            .enumerate()
            .map(|(i, f)| {
                if names[..i].contains(&names[i]) {
                    return Err(CliError::Input(format!("duplicate name {}", names[i])));
                }
                build_one(cfg, &hash, f, &names[i], out)
            })
            .collect()
    });
    let entries: Vec<ManifestEntry> = files
        .iter()
        .zip(&names)
        .zip(results)
        .map(|((f, name), r)| match r {
            Ok(b) => ManifestEntry {
                name: name.clone(),
                input: f.display().to_string(),
                status: "ok".into(),
                archive: Some(b.archive),
                mesh: Some(b.mesh),
                fingerprint: Some(b.fingerprint),
                warnings: b.warnings,
            },
            Err(e) => ManifestEntry {
                name: name.clone(),
                input: f.display().to_string(),
                status: format!("failed:{e}"),
                archive: None,
                mesh: None,
                fingerprint: None,
                warnings: Vec::new(),
            },
        })
        .collect();
    let manifest = Manifest {
        format_version: MANIFEST_VERSION,
        config_hash: hash,
        config: cfg.clone(),
        entries,
    };
    write_atomic(&out.join(MANIFEST_FILE), &serde_json::to_vec_pretty(&manifest)?)?;
    if !manifest.entries.iter().any(ManifestEntry::is_ok) {
        return Err(CliError::AllFailed);
    }
    Ok(manifest)
}

pub fn cmd_challenge(cfg: &PipelineConfig, structure: &Path, out: Option<&Path>) -> CliResult<ChallengeReport> {
    let mol = read_molecule(structure)?;
    let report = rotation_challenge(
        &mol,
        &cfg.cloud,
        cfg.challenge.trials,
        cfg.seed,
        cfg.challenge.rmsd_threshold,
    )?;
    if let Some(p) = out {
        write_atomic(p, &serde_json::to_vec_pretty(&report)?)?;
    }
    Ok(report)
}

/// `name,value` rows; a first row whose value is not a number is a header.
pub fn read_labels(path: &Path) -> CliResult<BTreeMap<String, f64>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
    let mut labels = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(CliError::Input(format!("{} line {}: expected name,value", path.display(), i + 1)));
        }
        match rec[1].parse::<f64>() {
            Ok(v) => {
                if labels.insert(rec[0].to_string(), v).is_some() {
                    return Err(CliError::Input(format!("label for {} given twice", &rec[0])));
                }
            }
            Err(_) if i == 0 => {}
            Err(_) => {
                return Err(CliError::Input(format!(
                    "{} line {}: {:?} is not a number",
                    path.display(),
                    i + 1,
                    &rec[1]
                )))
            }
        }
    }
    Ok(labels)
}

pub fn read_manifest(dir: &Path) -> CliResult<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let bytes = std::fs::read(&path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn metric_entries(m: &Option<Metrics>) -> Vec<(&'static str, f64)> {
    m.as_ref().map(Metrics::entries).unwrap_or_default()
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| CliError::Input(e.to_string()))
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainEvalReport {
    pub config_hash: String,
    pub config: PipelineConfig,
    pub names: Vec<String>,
    pub result: RunResult,
}

/// Runs the fold protocol over the clouds of a build directory and writes
/// `predictions.csv`, `folds.csv`, `results.json`, `roc_points.csv` (binary
/// tasks), and per-fold `models/fold<k>.npz` and `history/fold<k>.csv`.
pub fn cmd_train_eval(cfg: &PipelineConfig, cloud_dir: &Path, labels_path: &Path, out: &Path) -> CliResult<TrainEvalReport> {
    let manifest = read_manifest(cloud_dir)?;
    let labels = read_labels(labels_path)?;
    let ok: Vec<&ManifestEntry> = manifest.entries.iter().filter(|e| e.is_ok()).collect();
    let missing: Vec<&str> = ok.iter().filter(|e| !labels.contains_key(&e.name)).map(|e| e.name.as_str()).collect();
    if !missing.is_empty() {
        return Err(CliError::Input(format!("no label for: {}", missing.join(", "))));
    }
    let build_cfg = &manifest.config;
    let mut samples = Vec::with_capacity(ok.len());
    for e in &ok {
        let archive = e.archive.as_deref().ok_or_else(|| CliError::Input(format!("{} has no archive", e.name)))?;
        let cloud = read_archive(&cloud_dir.join(archive))?;
        let fingerprint = match &e.fingerprint {
            Some(h) => Some(Fingerprint::from_hex(h, build_cfg.fingerprint_bits, build_cfg.fingerprint_radius)?),
            None => None,
        };
        samples.push(Sample {
            cloud,
            fingerprint,
            label: f64::NAN,
        });
    }
    let names: Vec<String> = ok.iter().map(|e| e.name.clone()).collect();
    let y: Vec<f64> = names.iter().map(|n| labels[n]).collect();
    let task = cfg.model.task;
    let plan = cfg.fold_plan();

    let mut fold_files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut neural_error = None;
    let result = fold_runner(&y, &plan, task, cfg.calibrate, |req| {
        // labels come from the request, never from the full table
        let owned: Vec<Sample> = req
            .train
            .iter()
            .zip(req.train_labels)
            .map(|(&i, &label)| Sample {
                label,
                ..samples[i].clone()
            })
            .collect();
        let subset: Vec<&Sample> = owned.iter().collect();
        let mut mc = cfg.model.clone();
        mc.seed = req.seed;
        let mut run = || -> amptcr_neural::Result<TrainOutput> {
            let trained = train(&subset, &mc)?;
            let predict = |idx: &[usize]| {
                idx.iter()
                    .map(|&i| {
                        let s = &samples[i];
                        trained.model.predict(&ModelInput::new(&s.cloud, s.fingerprint.as_ref(), &mc)?)
                    })
                    .collect::<amptcr_neural::Result<Vec<f64>>>()
            };
            let output = TrainOutput {
                train_preds: predict(req.train)?,
                validation_preds: predict(req.validation)?,
            };
            fold_files.push((format!("models/fold{}.npz", req.fold), model_bytes(&trained.model)?));
            fold_files.push((format!("history/fold{}.csv", req.fold), history_csv(&trained.history).into_bytes()));
            Ok(output)
        };
        run().map_err(|e| {
            let msg = e.to_string();
            neural_error = Some(e);
            amptcr_core::Error::InvalidArgument(msg)
        })
    });
    let result = match (result, neural_error) {
        (Ok(r), _) => r,
        (Err(_), Some(e)) => return Err(e.into()),
        (Err(e), None) => return Err(e.into()),
    };

    std::fs::create_dir_all(out.join("models"))?;
    std::fs::create_dir_all(out.join("history"))?;
    for (rel, bytes) in &fold_files {
        write_atomic(&out.join(rel), bytes)?;
    }
    let pred_rows: Vec<Vec<String>> = result
        .samples
        .iter()
        .map(|s| {
            vec![
                names[s.index].clone(),
                s.y.to_string(),
                s.yhat_raw.to_string(),
                s.yhat_calibrated.to_string(),
                s.fold.to_string(),
            ]
        })
        .collect();
    let header = ["name", "y", "yhat_raw", "yhat_calibrated", "fold"].map(String::from);
    write_atomic(&out.join("predictions.csv"), &csv_bytes(&header, &pred_rows)?)?;

    let metric_names: Vec<&str> = match task {
        Task::Regression => vec!["r2", "slope", "rmse"],
        Task::Binary => vec!["roc_auc", "precision", "recall"],
    };
    let mut fold_header: Vec<String> = ["fold", "n_train", "n_val", "p", "q"].map(String::from).to_vec();
    fold_header.extend(metric_names.iter().map(|m| format!("train_{m}")));
    fold_header.extend(metric_names.iter().map(|m| format!("val_{m}")));
    let fold_rows: Vec<Vec<String>> = result
        .folds
        .iter()
        .map(|f| {
            let mut row = vec![
                f.fold.to_string(),
                f.n_train.to_string(),
                f.n_val.to_string(),
                f.params.map_or(String::new(), |p| p.p.to_string()),
                f.params.map_or(String::new(), |p| p.q.to_string()),
            ];
            for m in [&f.train_metrics, &f.validation_metrics] {
                let e = metric_entries(m);
                row.extend(metric_names.iter().map(|n| {
                    e.iter().find(|(k, _)| k == n).map_or(String::new(), |(_, v)| v.to_string())
                }));
            }
            row
        })
        .collect();
    write_atomic(&out.join("folds.csv"), &csv_bytes(&fold_header, &fold_rows)?)?;
    if let Some(points) = &result.roc_points {
        let rows: Vec<Vec<String>> = points.iter().map(|(f, t)| vec![f.to_string(), t.to_string()]).collect();
        write_atomic(&out.join("roc_points.csv"), &csv_bytes(&["fpr".into(), "tpr".into()], &rows)?)?;
    }
    let report = TrainEvalReport {
        config_hash: cfg.hash()?,
        config: cfg.clone(),
        names,
        result,
    };
    write_atomic(&out.join("results.json"), &serde_json::to_vec_pretty(&report)?)?;
    Ok(report)
}
