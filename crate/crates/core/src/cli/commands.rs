use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use super::config::RunConfig;
use super::dataset::{ingest, image_path, DATA_FILE};
use super::pipeline::{build_graph, evaluate, prepare, train_fusion, train_member};
use super::runs::{
    format_predictions, load_checkpoints, FOLDS_FILE, load_fold_runs, read_fold_summaries, record_outputs,
    save_model_runs, write_file,
};
use super::synth::{bayes_accuracy, gen_synth, SynthSpec};
use crate::ensemble::{hard_vote, kfold_split, mann_whitney_u, soft_vote, stars, EnsemblePrediction, FoldRun};
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "gcan-fusion", version, about = "Text-graph attention and image fusion for multi-label meme classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VoteMode {
    Soft,
    Hard,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic dataset (train/ and test/).
    GenSynth {
        /// `key = value` spec file; defaults are used when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the corpus graph of a dataset directory.
    BuildGraph {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 10)]
        window: usize,
        #[arg(long, default_value_t = 1)]
        min_freq: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// K-fold training of one model; fusion models need trained members
    /// in the same output directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        setup: Option<String>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-fold and soft-vote scores of every model under a run directory.
    Evaluate {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Combine model runs by soft or hard voting.
    Ensemble {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, value_enum)]
        mode: VoteMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mann-Whitney U test between the per-fold test F1 of two runs.
    Significance {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A model run directory stands for its `folds.tsv`.
fn summary_file(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(FOLDS_FILE)
    } else {
        path.to_path_buf()
    }
}

fn parent_of(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Runs one command and returns what it prints on success.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::GenSynth { spec, out } => {
            let spec = match spec {
                Some(p) => SynthSpec::read(&p)?,
                None => SynthSpec::default(),
            };
            gen_synth(&spec, &out)?;
            let spec_path = out.join("spec.txt");
            write_file(&spec_path, spec.emit())?;
            let mut files = vec![(spec_path, "spec")];
            for part in ["train", "test"] {
                let dir = out.join(part);
                files.push((dir.join(DATA_FILE), "dataset"));
                for s in ingest(&dir)? {
                    files.push((image_path(&dir, &s.id), "image"));
                }
            }
            record_outputs(&out, &files)?;
            let acc = bayes_accuracy(&spec);
            Ok(format!(
                "wrote {} train and {} test samples to {}\nbayes accuracy: text {:.4} image {:.4} joint {:.4}\n",
                spec.n_train,
                spec.n_test,
                out.display(),
                acc.text,
                acc.image,
                acc.joint
            ))
        }
        Command::BuildGraph { data, window, min_freq, out } => {
            let samples = ingest(&data)?;
            let (vocab, graph, _) = build_graph(&samples, window, min_freq)?;
            graph.write(&out)?;
            record_outputs(&parent_of(&out), &[(out.clone(), "graph")])?;
            Ok(format!(
                "graph with {} documents, {} words, {} nonzero entries written to {}\n",
                graph.num_docs(),
                vocab.num_words(),
                graph.raw().nnz(),
                out.display()
            ))
        }
        Command::Train { config, model, setup, folds, jobs, out } => {
            let mut cfg = RunConfig::read(&config)?;
            let base = parent_of(&config);
            cfg.train_data = resolve(&base, &cfg.train_data);
            cfg.test_data = resolve(&base, &cfg.test_data);
            if let Some(m) = model {
                cfg.model = m.parse()?;
            }
            if let Some(s) = setup {
                cfg.train.setup = s.parse()?;
            }
            if let Some(k) = folds {
                cfg.folds = k;
            }
            if let Some(j) = jobs {
                cfg.jobs = j;
            }
            cfg.validate()?;
            train(&cfg, &out)
        }
        Command::Evaluate { runs, test } => evaluate_runs(&runs, &test),
        Command::Ensemble { runs, mode, out } => ensemble(&runs, mode, &out),
        Command::Significance { a, b, out } => {
            let fa: Vec<f64> = read_fold_summaries(&summary_file(&a))?.iter().map(|s| s.test_f1).collect();
            let fb: Vec<f64> = read_fold_summaries(&summary_file(&b))?.iter().map(|s| s.test_f1).collect();
            let r = mann_whitney_u(&fa, &fb)?;
            let report = format!(
                "a\tb\tn_a\tn_b\tU\tp\tmethod\tstars\n{}\t{}\t{}\t{}\t{}\t{:.6e}\t{:?}\t{}\n",
                a.display(),
                b.display(),
                fa.len(),
                fb.len(),
                r.u,
                r.p_two_sided,
                r.method,
                stars(r.p_two_sided)
            );
            if let Some(out) = out {
                write_file(&out, &report)?;
                record_outputs(&parent_of(&out), &[(out.clone(), "significance")])?;
            }
            Ok(report)
        }
    }
}

fn train(cfg: &RunConfig, out: &Path) -> Result<String> {
    let kind = cfg.model;
    // members are checked before any expensive work
    let member_dirs: Vec<PathBuf> = kind.members().iter().map(|m| out.join(m.name())).collect();
    let members = member_dirs
        .iter()
        .map(|d| load_checkpoints(d, cfg.folds))
        .collect::<Result<Vec<_>>>()?;
    let train = ingest(&cfg.train_data)?;
    let test = ingest(&cfg.test_data)?;
    let prepared = prepare(&train, &test, cfg)?;
    let folds = kfold_split(train.len(), cfg.folds, cfg.train.seed)?;
    let results = if kind.is_fusion() {
        train_fusion(kind, &prepared, cfg, &folds, &members)?
    } else {
        train_member(kind, &prepared, cfg, &folds)?
    };
    let model_dir = out.join(kind.name());
    let mut files = save_model_runs(&model_dir, &results, &prepared.test_ids, &prepared.test_labels, cfg.train.setup)?;
    if kind.is_fusion() {
        let mut rows = String::from("member\tfold\tcheckpoint_sha256\n");
        for (m, ckpts) in kind.members().iter().zip(&members) {
            for (j, c) in ckpts.iter().enumerate() {
                rows.push_str(&format!("{m}\t{j}\t{}\n", c.content_hash()));
            }
        }
        let path = model_dir.join("members.tsv");
        write_file(&path, rows)?;
        files.push((path, "dependencies"));
    }
    let runs: Vec<FoldRun> = results.iter().map(|r| r.run.clone()).collect();
    let eval = evaluate(&runs, &prepared.test_labels)?;
    let pred_path = model_dir.join("predictions.tsv");
    write_file(&pred_path, format_predictions(&prepared.test_ids, &eval.ensemble)?)?;
    files.push((pred_path, "predictions"));
    let config_path = out.join(format!("{}.config.txt", kind.name()));
    write_file(&config_path, cfg.emit())?;
    files.push((config_path, "config"));
    record_outputs(out, &files)?;
    Ok(format!(
        "{kind}: soft-vote macro F1 {:.4}, weighted F1 {:.4}, sub-task A macro F1 {:.4}\n",
        eval.soft_vote.native.macro_f1, eval.soft_vote.native.weighted_f1, eval.soft_vote.task_a.macro_f1
    ))
}

fn model_dirs(runs: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(runs)
        .map_err(|e| Error::io(runs, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(FOLDS_FILE).exists())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Validation(format!("no model runs under {}", runs.display())));
    }
    Ok(dirs)
}

fn evaluate_runs(runs: &Path, test: &Path) -> Result<String> {
    let samples = ingest(test)?;
    let mut report = String::from("model\tscope\tmacro_f1\tweighted_f1\ttask_a_macro_f1\n");
    for dir in model_dirs(runs)? {
        let (fold_runs, ids) = load_fold_runs(&dir)?;
        let by_id: std::collections::HashMap<&str, _> = samples.iter().map(|s| (s.id.as_str(), s.labels)).collect();
        let labels = ids
            .iter()
            .map(|id| by_id.get(id.as_str()).copied().ok_or_else(|| Error::Validation(format!("test id {id} not in {}", test.display()))))
            .collect::<Result<Vec<_>>>()?;
        let eval = evaluate(&fold_runs, &labels)?;
        let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        for (r, s) in fold_runs.iter().zip(&eval.per_fold) {
            report.push_str(&format!(
                "{name}\tfold{}\t{:.6}\t{:.6}\t{:.6}\n",
                r.fold, s.native.macro_f1, s.native.weighted_f1, s.task_a.macro_f1
            ));
        }
        let s = &eval.soft_vote;
        report.push_str(&format!(
            "{name}\tsoft-vote\t{:.6}\t{:.6}\t{:.6}\n",
            s.native.macro_f1, s.native.weighted_f1, s.task_a.macro_f1
        ));
    }
    let path = runs.join("metrics.tsv");
    write_file(&path, &report)?;
    record_outputs(runs, &[(path, "metrics")])?;
    Ok(report)
}

fn ensemble(dirs: &[PathBuf], mode: VoteMode, out: &Path) -> Result<String> {
    let mut ids: Option<Vec<String>> = None;
    let mut per_model = Vec::new();
    for d in dirs {
        let (runs, run_ids) = load_fold_runs(d)?;
        if ids.as_ref().is_some_and(|known| *known != run_ids) {
            return Err(Error::Validation(format!("{} was evaluated on different test ids", d.display())));
        }
        ids = Some(run_ids);
        per_model.push(runs);
    }
    let ids = ids.unwrap_or_default();
    let pred = match mode {
        VoteMode::Soft => {
            let all: Vec<FoldRun> = per_model
                .into_iter()
                .flatten()
                .map(|r| FoldRun { model: "ensemble".into(), ..r })
                .collect();
            soft_vote(&all)?
        }
        VoteMode::Hard => {
            let labels = per_model
                .iter()
                .map(|runs| soft_vote(runs).map(|p| p.labels))
                .collect::<Result<Vec<_>>>()?;
            let voted = hard_vote(&labels)?;
            let m = labels.len() as f64;
            let probs = (0..voted.len())
                .map(|i| {
                    ndarray::Array1::from_shape_fn(voted[i].len(), |c| {
                        labels.iter().filter(|l| l[i][c]).count() as f64 / m
                    })
                })
                .collect();
            EnsemblePrediction { probs, labels: voted }
        }
    };
    write_file(out, format_predictions(&ids, &pred)?)?;
    record_outputs(&parent_of(out), &[(out.to_path_buf(), "predictions")])?;
    Ok(format!("{} predictions from {} runs written to {}\n", ids.len(), dirs.len(), out.display()))
}
