//! On-disk layout of trained runs.
//!
//! ```text
//! <out>/config.txt
//! <out>/manifest.tsv
//! <out>/<model>/fold<j>.ckpt
//! <out>/<model>/folds.tsv        fold, val_f1, test_f1, checkpoint hash
//! <out>/<model>/test_probs.tsv   fold, id, probabilities
//! <out>/<model>/train_log.tsv
//! <out>/<model>/predictions.tsv  soft vote over folds
//! <out>/<model>/members.tsv      fusion only: member checkpoints used
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array1;
use sha2::{Digest, Sha256};

use super::pipeline::{score, task_a, FoldResult};
use crate::ensemble::{EnsemblePrediction, FoldRun};
use crate::error::{Error, Result};
use crate::nn::Checkpoint;
use crate::preprocess::LabelVector;
use crate::training::{format_log, Setup, LOG_HEADER};

pub const FOLDS_FILE: &str = "folds.tsv";
pub const MANIFEST: &str = "manifest.tsv";

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

pub fn checkpoint_path(model_dir: &Path, fold: usize) -> PathBuf {
    model_dir.join(format!("fold{fold}.ckpt"))
}

/// Adds or replaces manifest rows for `files` (paths below `dir`).
pub fn record_outputs(dir: &Path, files: &[(PathBuf, &str)]) -> Result<()> {
    let path = dir.join(MANIFEST);
    let mut rows: BTreeMap<String, (String, String)> = BTreeMap::new();
    if path.exists() {
        for line in read(&path)?.lines().skip(1) {
            let cols: Vec<&str> = line.split('\t').collect();
            if let [file, role, hash] = cols[..] {
                rows.insert(file.to_string(), (role.to_string(), hash.to_string()));
            }
        }
    }
    for (file, role) in files {
        let rel = file
            .strip_prefix(dir)
            .unwrap_or(file)
            .to_string_lossy()
            .replace('\\', "/");
        rows.insert(rel, (role.to_string(), file_hash(file)?));
    }
    let mut out = String::from("file\trole\tsha256\n");
    for (file, (role, hash)) in rows {
        out.push_str(&format!("{file}\t{role}\t{hash}\n"));
    }
    write(&path, out)
}

fn prob_header(width: usize) -> &'static [&'static str] {
    if width == 1 {
        &["p_mis"]
    } else {
        &["p_shm", "p_ste", "p_obj", "p_vio"]
    }
}

fn format_probs(p: &Array1<f64>) -> String {
    p.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join("\t")
}

/// Writes checkpoints, fold summary, test probabilities and the training
/// log of one model. Returns the files written.
pub fn save_model_runs(
    model_dir: &Path,
    results: &[FoldResult],
    test_ids: &[String],
    test_labels: &[LabelVector],
    setup: Setup,
) -> Result<Vec<(PathBuf, &'static str)>> {
    let mut written = Vec::new();
    let mut folds = String::from("fold\tval_f1\ttest_f1\tcheckpoint_sha256\n");
    let mut probs = format!("fold\tid\t{}\n", prob_header(setup.classes()).join("\t"));
    let mut log = format!("{LOG_HEADER}\n");
    for r in results {
        let path = checkpoint_path(model_dir, r.run.fold);
        write(&path, r.checkpoint.to_bytes())?;
        written.push((path, "checkpoint"));
        let test_f1 = score(&r.run.test_probs, test_labels)?.headline(setup);
        folds.push_str(&format!(
            "{}\t{:.17e}\t{:.17e}\t{}\n",
            r.run.fold,
            r.run.best_f1,
            test_f1,
            r.checkpoint.content_hash()
        ));
        for (id, p) in test_ids.iter().zip(&r.run.test_probs) {
            probs.push_str(&format!("{}\t{id}\t{}\n", r.run.fold, format_probs(p)));
        }
        log.push_str(&format_log(r.run.fold, &r.records));
    }
    for (name, contents, role) in [
        (FOLDS_FILE, folds, "fold-summary"),
        ("test_probs.tsv", probs, "fold-predictions"),
        ("train_log.tsv", log, "training-log"),
    ] {
        let path = model_dir.join(name);
        write(&path, contents)?;
        written.push((path, role));
    }
    Ok(written)
}

/// One row of `folds.tsv`.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldSummary {
    pub fold: usize,
    pub val_f1: f64,
    pub test_f1: f64,
    pub checkpoint_hash: String,
}

pub fn read_fold_summaries(path: &Path) -> Result<Vec<FoldSummary>> {
    let text = read(path)?;
    let mut lines = text.lines();
    if lines.next() != Some("fold\tval_f1\ttest_f1\tcheckpoint_sha256") {
        return Err(parse_err(path, 1, "not a fold summary"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split('\t').collect();
            let bad = || parse_err(path, i + 2, "malformed fold summary row");
            if cols.len() != 4 {
                return Err(bad());
            }
            Ok(FoldSummary {
                fold: cols[0].parse().map_err(|_| bad())?,
                val_f1: cols[1].parse().map_err(|_| bad())?,
                test_f1: cols[2].parse().map_err(|_| bad())?,
                checkpoint_hash: cols[3].to_string(),
            })
        })
        .collect()
}

/// Fold runs and test ids of one model directory.
pub fn load_fold_runs(model_dir: &Path) -> Result<(Vec<FoldRun>, Vec<String>)> {
    let summaries = read_fold_summaries(&model_dir.join(FOLDS_FILE))?;
    let model = model_dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let path = model_dir.join("test_probs.tsv");
    let text = read(&path)?;
    let mut per_fold: BTreeMap<usize, (Vec<String>, Vec<Array1<f64>>)> = BTreeMap::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split('\t').collect();
        let bad = || parse_err(&path, i + 1, "malformed probability row");
        if cols.len() < 3 {
            return Err(bad());
        }
        let fold: usize = cols[0].parse().map_err(|_| bad())?;
        let p = cols[2..]
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let entry = per_fold.entry(fold).or_default();
        entry.0.push(cols[1].to_string());
        entry.1.push(Array1::from(p));
    }
    let mut ids: Option<Vec<String>> = None;
    let mut runs = Vec::with_capacity(summaries.len());
    for s in summaries {
        let (fold_ids, probs) = per_fold
            .remove(&s.fold)
            .ok_or_else(|| Error::Validation(format!("{}: no test probabilities for fold {}", model_dir.display(), s.fold)))?;
        match &ids {
            Some(known) if *known != fold_ids => {
                return Err(Error::Validation(format!("{}: folds disagree on test ids", model_dir.display())))
            }
            _ => ids = Some(fold_ids),
        }
        runs.push(FoldRun {
            model: model.clone(),
            fold: s.fold,
            best_f1: s.val_f1,
            test_probs: probs,
        });
    }
    Ok((runs, ids.unwrap_or_default()))
}

/// Member checkpoints of a finished model run, verified against the
/// hashes in its fold summary.
pub fn load_checkpoints(model_dir: &Path, folds: usize) -> Result<Vec<Checkpoint>> {
    let summary_path = model_dir.join(FOLDS_FILE);
    if !summary_path.exists() {
        return Err(Error::Dependency(format!(
            "no trained run found in {}; train this member first",
            model_dir.display()
        )));
    }
    let summaries = read_fold_summaries(&summary_path)?;
    if summaries.len() != folds {
        return Err(Error::Dependency(format!(
            "{} has {} folds, expected {folds}",
            model_dir.display(),
            summaries.len()
        )));
    }
    summaries
        .iter()
        .map(|s| {
            let ckpt = Checkpoint::read(&checkpoint_path(model_dir, s.fold))?;
            if ckpt.content_hash() != s.checkpoint_hash {
                return Err(Error::Validation(format!(
                    "checkpoint of fold {} in {} does not match its recorded hash",
                    s.fold,
                    model_dir.display()
                )));
            }
            Ok(ckpt)
        })
        .collect()
}

/// Prediction file rows: probabilities, the sub-task A probability, then
/// thresholded labels, including the derived sub-task A label.
pub fn format_predictions(ids: &[String], pred: &EnsemblePrediction) -> Result<String> {
    let width = pred.probs.first().map_or(1, Array1::len);
    let header = prob_header(width);
    let (p_a, label_a) = task_a(&pred.probs)?;
    let mut out = String::from("id\t");
    if width == 4 {
        out.push_str(&header.join("\t"));
        out.push('\t');
    }
    out.push_str("p_mis\t");
    if width == 4 {
        out.push_str("label_shm\tlabel_ste\tlabel_obj\tlabel_vio\t");
    }
    out.push_str("label_mis\n");
    for (i, id) in ids.iter().enumerate() {
        let mut cols = vec![id.clone()];
        if width == 4 {
            cols.extend(pred.probs[i].iter().map(|v| format!("{v:.6}")));
        }
        cols.push(format!("{:.6}", p_a[i]));
        if width == 4 {
            cols.extend(pred.labels[i].iter().map(|&b| u8::from(b).to_string()));
        }
        cols.push(u8::from(label_a[i]).to_string());
        out.push_str(&cols.join("\t"));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    write(path, contents)
}
