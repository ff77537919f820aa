//! Line-based `key = value` configuration files with `#` comments.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::models::ModelKind;
use super::synth::SynthSpec;
use crate::error::{Error, Result};
use crate::nn::AttentionConfig;
use crate::training::{Setup, TrainConfig};

/// Parsed `key = value` pairs that remember the line of every key.
#[derive(Debug, Default)]
pub struct KeyValues {
    path: PathBuf,
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("expected `key = value`, found `{line}`"),
            })?;
            let key = k.trim().to_string();
            if entries.insert(key.clone(), (i + 1, v.trim().to_string())).is_some() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(KeyValues {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses and removes `key`, leaving `slot` untouched when absent.
    pub fn take<T: FromStr>(&mut self, key: &str, slot: &mut T) -> Result<()>
    where
        T::Err: Display,
    {
        if let Some((line, v)) = self.entries.remove(key) {
            *slot = v.parse().map_err(|e: T::Err| Error::Parse {
                path: self.path.clone(),
                line,
                msg: format!("{key}: {e}"),
            })?;
        }
        Ok(())
    }

    /// Fails on keys that no `take` consumed.
    pub fn finish(self) -> Result<()> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((k, (line, _))) => Err(Error::Parse {
                path: self.path,
                line,
                msg: format!("unknown key `{k}`"),
            }),
        }
    }
}

/// A pair of reals written as `a,b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair(pub f64, pub f64);

impl FromStr for Pair {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s.split_once(',').ok_or("expected `a,b`")?;
        let p = |x: &str| x.trim().parse::<f64>().map_err(|e| e.to_string());
        Ok(Pair(p(a)?, p(b)?))
    }
}

impl Display for Pair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{}", self.0, self.1)
    }
}

/// Everything the `train` command needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train_data: PathBuf,
    pub test_data: PathBuf,
    pub model: ModelKind,
    pub folds: usize,
    /// Uni-modal training; `setup`, `seed` and the epoch settings are
    /// shared with fusion training.
    pub train: TrainConfig,
    pub fusion_batch_size: usize,
    pub fusion_lr: f64,
    pub window_len: usize,
    pub seq_len: usize,
    pub min_freq: usize,
    pub image_resize: usize,
    pub image_crop: usize,
    pub patch: usize,
    pub attention: AttentionConfig,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let fusion = TrainConfig::fusion(Setup::B);
        RunConfig {
            train_data: PathBuf::from("data/train"),
            test_data: PathBuf::from("data/test"),
            model: ModelKind::GcanVit,
            folds: 10,
            train: TrainConfig::unimodal(Setup::B),
            fusion_batch_size: fusion.batch_size,
            fusion_lr: fusion.lr,
            window_len: 10,
            seq_len: 32,
            min_freq: 1,
            image_resize: 256,
            image_crop: 224,
            patch: 16,
            attention: AttentionConfig::TOY,
            jobs: 1,
        }
    }
}

impl RunConfig {
    pub fn fusion_train(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.fusion_batch_size,
            lr: self.fusion_lr,
            ..self.train.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.fusion_train().validate()?;
        AttentionConfig::new(self.attention.d_att, self.attention.heads, self.attention.layers)?;
        if self.folds < 2 {
            return Err(Error::invalid("at least two folds are needed"));
        }
        if self.window_len == 0 || self.seq_len < 2 || self.jobs == 0 {
            return Err(Error::invalid("window_len, seq_len and jobs must be positive (seq_len >= 2)"));
        }
        if self.patch == 0 || self.image_crop > self.image_resize || self.image_crop % self.patch != 0 {
            return Err(Error::invalid(format!(
                "patch {} must divide crop {} and crop must not exceed resize {}",
                self.patch, self.image_crop, self.image_resize
            )));
        }
        Ok(())
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut kv = KeyValues::parse(text, path)?;
        let mut c = RunConfig::default();
        let mut setup = c.train.setup.name().to_string();
        let mut train_data = c.train_data.display().to_string();
        let mut test_data = c.test_data.display().to_string();
        let mut mix = Pair(c.train.mix.0, c.train.mix.1);
        let (mut d_att, mut heads, mut layers) = (c.attention.d_att, c.attention.heads, c.attention.layers);
        kv.take("train_data", &mut train_data)?;
        kv.take("test_data", &mut test_data)?;
        kv.take("model", &mut c.model)?;
        kv.take("setup", &mut setup)?;
        kv.take("folds", &mut c.folds)?;
        kv.take("epochs", &mut c.train.epochs)?;
        kv.take("batch_size", &mut c.train.batch_size)?;
        kv.take("lr", &mut c.train.lr)?;
        kv.take("warmup_epochs", &mut c.train.warmup_epochs)?;
        kv.take("dropout", &mut c.train.dropout)?;
        kv.take("patience", &mut c.train.patience)?;
        kv.take("loss_mix", &mut mix)?;
        kv.take("weight_decay", &mut c.train.weight_decay)?;
        kv.take("seed", &mut c.train.seed)?;
        kv.take("fusion_batch_size", &mut c.fusion_batch_size)?;
        kv.take("fusion_lr", &mut c.fusion_lr)?;
        kv.take("window_len", &mut c.window_len)?;
        kv.take("seq_len", &mut c.seq_len)?;
        kv.take("min_freq", &mut c.min_freq)?;
        kv.take("image_resize", &mut c.image_resize)?;
        kv.take("image_crop", &mut c.image_crop)?;
        kv.take("patch", &mut c.patch)?;
        kv.take("d_att", &mut d_att)?;
        kv.take("heads", &mut heads)?;
        kv.take("layers", &mut layers)?;
        kv.take("jobs", &mut c.jobs)?;
        kv.finish()?;
        c.train.setup = setup.parse()?;
        c.train.mix = (mix.0, mix.1);
        c.train_data = PathBuf::from(train_data);
        c.test_data = PathBuf::from(test_data);
        c.attention = AttentionConfig::new(d_att, heads, layers)?;
        Ok(c)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn emit(&self) -> String {
        let t = &self.train;
        let lines: Vec<(&str, String)> = vec![
            ("train_data", self.train_data.display().to_string()),
            ("test_data", self.test_data.display().to_string()),
            ("model", self.model.to_string()),
            ("setup", t.setup.name().to_string()),
            ("folds", self.folds.to_string()),
            ("epochs", t.epochs.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("lr", t.lr.to_string()),
            ("warmup_epochs", t.warmup_epochs.to_string()),
            ("dropout", t.dropout.to_string()),
            ("patience", t.patience.to_string()),
            ("loss_mix", Pair(t.mix.0, t.mix.1).to_string()),
            ("weight_decay", t.weight_decay.to_string()),
            ("seed", t.seed.to_string()),
            ("fusion_batch_size", self.fusion_batch_size.to_string()),
            ("fusion_lr", self.fusion_lr.to_string()),
            ("window_len", self.window_len.to_string()),
            ("seq_len", self.seq_len.to_string()),
            ("min_freq", self.min_freq.to_string()),
            ("image_resize", self.image_resize.to_string()),
            ("image_crop", self.image_crop.to_string()),
            ("patch", self.patch.to_string()),
            ("d_att", self.attention.d_att.to_string()),
            ("heads", self.attention.heads.to_string()),
            ("layers", self.attention.layers.to_string()),
            ("jobs", self.jobs.to_string()),
        ];
        emit_lines(&lines)
    }
}

pub(crate) fn emit_lines(lines: &[(&str, String)]) -> String {
    lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

impl SynthSpec {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut kv = KeyValues::parse(text, path)?;
        let mut s = SynthSpec::default();
        kv.take("n_train", &mut s.n_train)?;
        kv.take("n_test", &mut s.n_test)?;
        kv.take("match_prob", &mut s.match_prob)?;
        kv.take("image_side", &mut s.image_side)?;
        kv.take("motif_side", &mut s.motif_side)?;
        kv.take("pixel_noise", &mut s.pixel_noise)?;
        kv.take("min_filler", &mut s.min_filler)?;
        kv.take("max_filler", &mut s.max_filler)?;
        kv.take("seed", &mut s.seed)?;
        kv.finish()?;
        s.validate()?;
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn emit(&self) -> String {
        emit_lines(&[
            ("n_train", self.n_train.to_string()),
            ("n_test", self.n_test.to_string()),
            ("match_prob", self.match_prob.to_string()),
            ("image_side", self.image_side.to_string()),
            ("motif_side", self.motif_side.to_string()),
            ("pixel_noise", self.pixel_noise.to_string()),
            ("min_filler", self.min_filler.to_string()),
            ("max_filler", self.max_filler.to_string()),
            ("seed", self.seed.to_string()),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let back = RunConfig::parse(&c.emit(), Path::new("x")).unwrap();
        assert_eq!(back, c);
        let s = SynthSpec::default();
        assert_eq!(SynthSpec::parse(&s.emit(), Path::new("x")).unwrap(), s);
    }

    #[test]
    fn comments_and_overrides() {
        let text = "# run\nmodel = gcan # text only\nsetup = A\n\nlr = 0.001\nloss_mix = 1,0\n";
        let c = RunConfig::parse(text, Path::new("c")).unwrap();
        assert_eq!(c.model, ModelKind::Gcan);
        assert_eq!(c.train.setup, Setup::A);
        assert_eq!(c.train.lr, 0.001);
        assert_eq!(c.train.mix, (1.0, 0.0));
        assert_eq!(c.window_len, 10);
    }

    #[test]
    fn errors_carry_lines() {
        let e = RunConfig::parse("epochs = 3\nbogus = 1\n", Path::new("c")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        let e = RunConfig::parse("epochs = many\n", Path::new("c")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
        let e = RunConfig::parse("no equals sign\n", Path::new("c")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
        assert!(RunConfig::parse("model = resnet\n", Path::new("c")).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(lr in 1e-7f64..1.0, dropout in 0.0f64..0.9, epochs in 5usize..100, seed: u64, a in 0.0f64..1.0, folds in 2usize..20) {
            let mut c = RunConfig::default();
            c.train.lr = lr;
            c.train.dropout = dropout;
            c.train.epochs = epochs;
            c.train.seed = seed;
            c.train.mix = (a, 1.0 - a);
            c.folds = folds;
            c.model = ModelKind::BertcGcanVit;
            prop_assert_eq!(RunConfig::parse(&c.emit(), Path::new("x")).unwrap(), c);
        }
    }
}
