use std::fs;
use std::path::{Path, PathBuf};

use styledecomp::evaluation::{
    evaluate_model, project_latents, transfer_sentences, write_latent_dump, write_projection, EvalReport,
};
use styledecomp::textpipe::io::{read_corpus, read_sentences, synthetic_split, write_sentences, write_synthetic_split};
use styledecomp::textpipe::{generate_synthetic_corpus, style_oracle};
use styledecomp::training::{load_checkpoint, multi_retrain_with, write_metrics, TrainHooks};
use styledecomp::{Checkpoint, Error, LabeledSentence, MetricsRecord, Result};

use crate::config::ExperimentConfig;
use crate::{EvalArgs, SynthArgs, TrainArgs, TransferArgs};

#[derive(Debug, Clone, Copy)]
pub struct Log {
    pub quiet: bool,
}

impl Log {
    pub fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn synth(args: &SynthArgs, seed: Option<u64>, log: &Log) -> Result<()> {
    let seed = seed.unwrap_or(7);
    let split = synthetic_split(seed, args.n, args.n_eval, args.entanglement)?;
    write_synthetic_split(&args.out, &split)?;
    log.info(format!(
        "wrote {} train and {} eval sentences to {}",
        split.train.len(),
        split.eval.len(),
        args.out.display()
    ));
    Ok(())
}

/// Writes metrics after every epoch and the checkpoint whenever training
/// reports one.
struct RunWriter {
    dir: PathBuf,
    records: Vec<MetricsRecord>,
    log: Log,
}

impl TrainHooks for RunWriter {
    fn on_epoch(&mut self, record: &MetricsRecord) -> Result<()> {
        self.records.push(record.clone());
        write_metrics(&self.dir.join("metrics.jsonl"), &self.records)?;
        self.log.info(format!(
            "run {} epoch {} objective {:.4} recon {:.4}",
            record.run_id, record.epoch, record.objective, record.recon_accuracy
        ));
        Ok(())
    }

    fn on_checkpoint(&mut self, checkpoint: &Checkpoint) -> Result<()> {
        checkpoint.save(&self.dir.join("checkpoint.bin"))
    }
}

fn experiment_config(args: &TrainArgs, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            ExperimentConfig::from_kv_text(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &args.variant {
        cfg.train.variant = v.parse()?;
    }
    if let Some(n) = args.runs {
        cfg.n_runs = n;
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    if let (Some(d), Some(l)) = (&args.data, &args.labels) {
        cfg.train_text = Some(d.clone());
        cfg.train_labels = Some(l.clone());
    }
    if let Some(o) = &args.out {
        cfg.out_dir = o.clone();
    }
    for pair in &args.overrides {
        cfg.apply_override(pair)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn train(args: &TrainArgs, seed: Option<u64>, log: &Log) -> Result<()> {
    let cfg = experiment_config(args, seed)?;
    let corpus = match (&cfg.train_text, &cfg.train_labels) {
        (Some(text), Some(labels)) => read_corpus(text, labels, None)?,
        _ => generate_synthetic_corpus(cfg.synth_seed, cfg.synth_n, cfg.entanglement)?,
    };
    create_dir(&cfg.out_dir)?;
    write_file(&cfg.out_dir.join("config.resolved"), &cfg.to_kv_text())?;
    log.info(format!(
        "training {} x {} for {} epochs on {} sentences",
        cfg.n_runs,
        cfg.train.variant,
        cfg.train.epochs,
        corpus.len()
    ));
    let out = cfg.out_dir.clone();
    for i in 0..cfg.n_runs {
        create_dir(&out.join(format!("run_{i}")))?;
    }
    multi_retrain_with(&cfg.train, &corpus, cfg.n_runs, |i| {
        Box::new(RunWriter {
            dir: out.join(format!("run_{i}")),
            records: Vec::new(),
            log: *log,
        })
    })?;
    Ok(())
}

fn read_labels(path: &Path, expected: usize) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let labels = text
        .lines()
        .enumerate()
        .map(|(i, l)| match l.trim() {
            "0" => Ok(0),
            "1" => Ok(1),
            other => Err(Error::Invalid(format!("{}:{}: label must be 0 or 1, got {other:?}", path.display(), i + 1))),
        })
        .collect::<Result<Vec<_>>>()?;
    if labels.len() != expected {
        return Err(Error::Invalid(format!(
            "{} has {} labels for {expected} sentences",
            path.display(),
            labels.len()
        )));
    }
    Ok(labels)
}

pub fn transfer(args: &TransferArgs, log: &Log) -> Result<()> {
    let cp = load_checkpoint(&args.checkpoint)?;
    let sentences = read_sentences(&args.input)?;
    let labels = match &args.labels {
        Some(p) => read_labels(p, sentences.len())?,
        None => sentences
            .iter()
            .enumerate()
            .map(|(i, s)| {
                style_oracle(s).ok_or_else(|| {
                    Error::Invalid(format!(
                        "{}:{}: no clear style marker; pass --labels",
                        args.input.display(),
                        i + 1
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let data: Vec<LabeledSentence> = sentences
        .into_iter()
        .zip(labels)
        .map(|(tokens, style_label)| LabeledSentence {
            tokens,
            style_label,
            reference: None,
        })
        .collect();
    let outputs = if data.is_empty() {
        Vec::new()
    } else {
        transfer_sentences(&cp.params, &cp.vocab, &data, cp.config.max_len)?
    };
    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_sentences(&args.out, &outputs)?;
    log.info(format!("wrote {} sentences to {}", outputs.len(), args.out.display()));
    Ok(())
}

pub fn eval(args: &EvalArgs, seed: Option<u64>, log: &Log) -> Result<()> {
    let labels = args.labels.clone().unwrap_or_else(|| args.data.with_extension("labels"));
    let refs = args.refs.clone().unwrap_or_else(|| args.data.with_extension("refs"));
    let refs = if refs.exists() {
        Some(refs)
    } else {
        log.info(format!("no reference file at {}; bleu will be null", refs.display()));
        None
    };
    let data = read_corpus(&args.data, &labels, refs.as_deref())?;
    let source_labels: Vec<usize> = data.iter().map(|s| s.style_label).collect();

    let dir = args.out.join("eval");
    create_dir(&dir)?;
    let mut runs = Vec::with_capacity(args.checkpoints.len());
    for (i, path) in args.checkpoints.iter().enumerate() {
        let cp = load_checkpoint(path)?;
        let ev = evaluate_model(&cp.params, &cp.vocab, &data, cp.config.max_len, seed.unwrap_or(0))?;
        write_latent_dump(&dir.join(format!("latents_{i}.txt")), &ev.codes, &source_labels)?;
        let means: Vec<Vec<f64>> = ev.codes.iter().map(|c| c.mu.clone()).collect();
        write_projection(&dir.join(format!("projection_{i}.csv")), &project_latents(&means, &source_labels)?)?;
        write_sentences(&dir.join(format!("transfer_{i}.txt")), &ev.outputs)?;
        log.info(format!("evaluated {}", path.display()));
        runs.push(ev.metrics);
    }
    let report = EvalReport::from_runs(runs)?;
    report.write(&dir.join("report.json"))?;
    log.info(format!("wrote {}", dir.join("report.json").display()));
    Ok(())
}
