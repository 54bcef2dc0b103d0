//! Binary checkpoint files.
//!
//! Layout (little-endian): magic `SDKP`, u32 version, u32-length-prefixed
//! UTF-8 config text, u32 tensor count and tensors, u32 optimizer tensor
//! count and tensors, then the RNG state as u64 words. A tensor is a u16
//! name length, the name, a u8 rank, u32 dims and the f64 values.

use std::io::Write;
use std::path::Path;

use rand_chacha::ChaCha8Rng;

use super::config::{parse_kv_lines, TrainConfig};
use crate::autodiff::{AdamState, Tensor};
use crate::error::{Error, Result};
use crate::models::ModelParams;
use crate::textpipe::Vocabulary;

pub const MAGIC: &[u8; 4] = b"SDKP";
pub const CHECKPOINT_VERSION: u32 = 1;
const RNG_WORDS: usize = 7;
const GROUPS: [&str; 3] = ["autoencoder", "style_disc", "latent_disc"];

/// Complete training state after some number of epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub vocab: Vocabulary,
    pub run_id: usize,
    /// Finished epochs.
    pub epoch: usize,
    pub params: ModelParams,
    /// Optimizer state per group: autoencoder, style_disc, latent_disc.
    pub optimizers: [AdamState; 3],
    pub rng: ChaCha8Rng,
}

fn rng_words(rng: &ChaCha8Rng) -> [u64; RNG_WORDS] {
    let seed = rng.get_seed();
    let mut w = [0u64; RNG_WORDS];
    for (i, chunk) in seed.chunks_exact(8).enumerate() {
        w[i] = u64::from_le_bytes(chunk.try_into().expect("8 bytes"));
    }
    w[4] = rng.get_stream();
    let pos = rng.get_word_pos();
    w[5] = pos as u64;
    w[6] = (pos >> 64) as u64;
    w
}

fn rng_from_words(w: &[u64; RNG_WORDS]) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut seed = [0u8; 32];
    for i in 0..4 {
        seed[i * 8..(i + 1) * 8].copy_from_slice(&w[i].to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(w[4]);
    rng.set_word_pos(u128::from(w[5]) | (u128::from(w[6]) << 64));
    rng
}

fn put_tensor(out: &mut Vec<u8>, name: &str, t: &Tensor) -> Result<()> {
    let len = u16::try_from(name.len()).map_err(|_| Error::Format(format!("tensor name too long: {name}")))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    let rank = u8::try_from(t.rank()).map_err(|_| Error::Format(format!("rank too large for {name}")))?;
    out.push(rank);
    for &d in t.shape() {
        let d = u32::try_from(d).map_err(|_| Error::Format(format!("dimension too large for {name}")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format(format!(
                "truncated file: needed {n} bytes at offset {}, {} left",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn tensor(&mut self) -> Result<(String, Tensor)> {
        let len = self.u16()? as usize;
        let name = std::str::from_utf8(self.take(len)?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = self.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(self.u32()? as usize);
        }
        let n: usize = shape.iter().product();
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("tensor too large".into()))?)?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let t = Tensor::new(shape, data).map_err(|e| Error::Format(format!("tensor {name}: {e}")))?;
        Ok((name, t))
    }

    fn tensors(&mut self) -> Result<Vec<(String, Tensor)>> {
        let count = self.u32()? as usize;
        (0..count).map(|_| self.tensor()).collect()
    }
}

impl Checkpoint {
    /// Config text section: the training config followed by run metadata
    /// and the vocabulary.
    fn header_text(&self) -> String {
        let mut s = self.config.to_kv_text();
        s.push_str(&format!("run_id = {}\n", self.run_id));
        s.push_str(&format!("epoch = {}\n", self.epoch));
        s.push_str(&format!("vocab_min_count = {}\n", self.vocab.min_count()));
        s.push_str(&format!("vocab = {}\n", self.vocab.content_tokens().join(" ")));
        s
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let text = self.header_text();
        out.extend_from_slice(&(text.len() as u32).to_le_bytes());
        out.extend_from_slice(text.as_bytes());

        let named: Vec<_> = self.params.named_tensors().collect();
        out.extend_from_slice(&(named.len() as u32).to_le_bytes());
        for (name, t) in named {
            put_tensor(&mut out, name, t)?;
        }

        let mut opt = Vec::new();
        let mut count = 0u32;
        for ((group, state), set) in GROUPS.iter().zip(&self.optimizers).zip(self.params.groups()) {
            put_tensor(&mut opt, &format!("adam.{group}.step"), &Tensor::vector(vec![state.step_count() as f64]))?;
            count += 1;
            for (name, m) in set.names().iter().zip(state.first_moments()) {
                put_tensor(&mut opt, &format!("adam.{group}.m.{name}"), m)?;
                count += 1;
            }
            for (name, v) in set.names().iter().zip(state.second_moments()) {
                put_tensor(&mut opt, &format!("adam.{group}.v.{name}"), v)?;
                count += 1;
            }
        }
        out.extend_from_slice(&count.to_le_bytes());
        out.extend_from_slice(&opt);

        for w in rng_words(&self.rng) {
            out.extend_from_slice(&w.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4).map_err(|_| Error::Format("file too short for magic bytes".into()))? != MAGIC {
            return Err(Error::Format("bad magic bytes, not a checkpoint".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let text_len = r.u32()? as usize;
        let text = std::str::from_utf8(r.take(text_len)?)
            .map_err(|_| Error::Format("config text is not UTF-8".into()))?;

        let mut config = TrainConfig::default();
        let (mut run_id, mut epoch, mut min_count, mut tokens) = (None, None, 1, None);
        let bad = |k: &str| Error::Format(format!("bad value for {k} in config text"));
        for (line, key, value) in parse_kv_lines(text)? {
            match key.as_str() {
                "run_id" => run_id = Some(value.parse().map_err(|_| bad("run_id"))?),
                "epoch" => epoch = Some(value.parse().map_err(|_| bad("epoch"))?),
                "vocab_min_count" => min_count = value.parse().map_err(|_| bad("vocab_min_count"))?,
                "vocab" => tokens = Some(value.split_whitespace().map(str::to_string).collect::<Vec<_>>()),
                _ => config
                    .set(&key, &value)
                    .map_err(|e| Error::Format(format!("config line {line}: {e}")))?,
            }
        }
        let missing = |k: &str| Error::Format(format!("config text lacks {k}"));
        let vocab = Vocabulary::from_tokens(tokens.ok_or_else(|| missing("vocab"))?)
            .map_err(|e| Error::Format(e.to_string()))?
            .with_min_count(min_count);

        let dims = config.dims(vocab.len());
        let params = ModelParams::from_named(dims, r.tensors()?)?;

        let mut opt: std::collections::HashMap<String, Tensor> = r.tensors()?.into_iter().collect();
        let mut take = |name: String| opt.remove(&name).ok_or_else(|| Error::Format(format!("missing optimizer tensor {name}")));
        let mut states = Vec::with_capacity(3);
        for (group, set) in GROUPS.iter().zip(params.groups()) {
            let step = take(format!("adam.{group}.step"))?;
            let step = match step.data() {
                [s] if *s >= 0.0 && s.fract() == 0.0 => *s as u64,
                _ => return Err(Error::Format(format!("bad optimizer step for {group}"))),
            };
            let first = set.names().iter().map(|n| take(format!("adam.{group}.m.{n}"))).collect::<Result<Vec<_>>>()?;
            let second = set.names().iter().map(|n| take(format!("adam.{group}.v.{n}"))).collect::<Result<Vec<_>>>()?;
            states.push(AdamState::from_parts(config.adam, set, step, first, second)?);
        }
        if let Some(extra) = opt.keys().next() {
            return Err(Error::Format(format!("unexpected optimizer tensor {extra}")));
        }

        let mut words = [0u64; RNG_WORDS];
        for w in &mut words {
            *w = r.u64()?;
        }
        if r.pos != buf.len() {
            return Err(Error::Format(format!("{} trailing bytes", buf.len() - r.pos)));
        }
        let optimizers: [AdamState; 3] = states.try_into().expect("three groups");
        Ok(Self {
            config,
            vocab,
            run_id: run_id.ok_or_else(|| missing("run_id"))?,
            epoch: epoch.ok_or_else(|| missing("epoch"))?,
            params,
            optimizers,
            rng: rng_from_words(&words),
        })
    }

    /// Writes to a temporary sibling file and renames it over `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
        tmp.write_all(&bytes).map_err(|e| Error::io(tmp.path(), e))?;
        tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
        tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

pub fn save_checkpoint(cp: &Checkpoint, path: &Path) -> Result<()> {
    cp.save(path)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(path)
}
