//! Plain-text corpus files: one sentence per line with space-separated
//! tokens, a parallel label file of `0`/`1` digits, and an optional parallel
//! reference file.

use std::fs;
use std::path::Path;

use super::corpus::{generate_synthetic_corpus, LabeledSentence};
use crate::error::{Error, Result};

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn tokens(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_string).collect()
}

pub fn read_sentences(path: &Path) -> Result<Vec<Vec<String>>> {
    Ok(read_lines(path)?.iter().map(|l| tokens(l)).collect())
}

/// Reads a labeled corpus; all files must have the same line count.
pub fn read_corpus(text: &Path, labels: &Path, refs: Option<&Path>) -> Result<Vec<LabeledSentence>> {
    let lines = read_lines(text)?;
    let label_lines = read_lines(labels)?;
    if lines.len() != label_lines.len() {
        return Err(Error::Invalid(format!(
            "{} has {} lines but {} has {}",
            text.display(),
            lines.len(),
            labels.display(),
            label_lines.len()
        )));
    }
    let ref_lines = match refs {
        Some(p) => {
            let r = read_lines(p)?;
            if r.len() != lines.len() {
                return Err(Error::Invalid(format!(
                    "{} has {} lines but {} has {}",
                    text.display(),
                    lines.len(),
                    p.display(),
                    r.len()
                )));
            }
            Some(r)
        }
        None => None,
    };
    lines
        .iter()
        .zip(&label_lines)
        .enumerate()
        .map(|(i, (line, label))| {
            let style_label = match label.trim() {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::Invalid(format!(
                        "{}:{}: label must be 0 or 1, got {other:?}",
                        labels.display(),
                        i + 1
                    )))
                }
            };
            Ok(LabeledSentence {
                tokens: tokens(line),
                style_label,
                reference: ref_lines.as_ref().map(|r| tokens(&r[i])),
            })
        })
        .collect()
}

fn write(path: &Path, contents: String) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn join_lines<'a>(rows: impl Iterator<Item = &'a [String]>) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&r.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_sentences(path: &Path, sentences: &[Vec<String>]) -> Result<()> {
    write(path, join_lines(sentences.iter().map(Vec::as_slice)))
}

/// Writes `<prefix>.txt`, `<prefix>.labels` and, if every sentence has one,
/// `<prefix>.refs` into `dir`.
pub fn write_corpus(dir: &Path, prefix: &str, data: &[LabeledSentence], with_refs: bool) -> Result<()> {
    write(
        &dir.join(format!("{prefix}.txt")),
        join_lines(data.iter().map(|s| s.tokens.as_slice())),
    )?;
    let labels: String = data.iter().map(|s| format!("{}\n", s.style_label)).collect();
    write(&dir.join(format!("{prefix}.labels")), labels)?;
    if with_refs {
        let refs = data
            .iter()
            .map(|s| {
                s.reference
                    .as_deref()
                    .ok_or_else(|| Error::Invalid("sentence has no reference".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        write(&dir.join(format!("{prefix}.refs")), join_lines(refs.into_iter()))?;
    }
    Ok(())
}

/// Train/eval split written by the synthetic corpus command.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSplit {
    pub train: Vec<LabeledSentence>,
    pub eval: Vec<LabeledSentence>,
}

/// `n_train + n_eval` sentences from one seeded stream, split in order.
pub fn synthetic_split(seed: u64, n_train: usize, n_eval: usize, entanglement: f64) -> Result<SyntheticSplit> {
    if n_train == 0 || n_eval == 0 {
        return Err(Error::Invalid("train and eval sizes must be positive".into()));
    }
    let mut all = generate_synthetic_corpus(seed, n_train + n_eval, entanglement)?;
    let eval = all.split_off(n_train);
    Ok(SyntheticSplit { train: all, eval })
}

/// Writes `train.txt`, `train.labels`, `eval.txt`, `eval.labels`, `eval.refs`.
pub fn write_synthetic_split(dir: &Path, split: &SyntheticSplit) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_corpus(dir, "train", &split.train, false)?;
    write_corpus(dir, "eval", &split.eval, true)
}
