//! Binary checkpoint files.
//!
//! Layout: the line `GFCKPT1`, a `meta <n>` line followed by `n`
//! `key<TAB>value` lines, a `params <n>` line followed by `n`
//! `name<TAB>d1,d2,...` lines, then every value as a little-endian `f64`
//! in manifest order.

use std::path::Path;

use sha2::{Digest, Sha256};

use super::params::{Manifest, Parameters, ParametersExt};
use crate::error::{Error, Result};

const MAGIC: &str = "GFCKPT1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: Vec<(String, String)>,
    pub manifest: Manifest,
    pub values: Vec<f64>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn from_params<P: Parameters + ?Sized>(params: &P) -> Self {
        Checkpoint {
            meta: Vec::new(),
            manifest: params.manifest(),
            values: params.to_flat(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.meta.push((key.to_string(), value.into()));
        self
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Copies the stored values into `params`, whose manifest must match.
    pub fn load_into<P: Parameters + ?Sized>(&self, params: &mut P) -> Result<()> {
        if params.manifest() != self.manifest {
            return Err(bad("manifest does not match the model"));
        }
        params.set_flat(&self.values);
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut head = format!("{MAGIC}\nmeta {}\n", self.meta.len());
        for (k, v) in &self.meta {
            head.push_str(&format!("{k}\t{v}\n"));
        }
        head.push_str(&format!("params {}\n", self.manifest.len()));
        for (name, shape) in &self.manifest {
            let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
            head.push_str(&format!("{name}\t{}\n", dims.join(",")));
        }
        let mut bytes = head.into_bytes();
        bytes.reserve(self.values.len() * 8);
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut next_line = || -> Result<String> {
            let end = bytes[pos..]
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| bad("truncated header"))?;
            let line = std::str::from_utf8(&bytes[pos..pos + end])
                .map_err(|_| bad("header is not UTF-8"))?
                .to_string();
            pos += end + 1;
            Ok(line)
        };
        if next_line()? != MAGIC {
            return Err(bad("missing GFCKPT1 magic"));
        }
        let count = |line: String, tag: &str| -> Result<usize> {
            line.strip_prefix(tag)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| bad(format!("expected `{tag}<count>`")))
        };
        let n_meta = count(next_line()?, "meta ")?;
        let mut meta = Vec::with_capacity(n_meta);
        for _ in 0..n_meta {
            let line = next_line()?;
            let (k, v) = line.split_once('\t').ok_or_else(|| bad("bad meta line"))?;
            meta.push((k.to_string(), v.to_string()));
        }
        let n_params = count(next_line()?, "params ")?;
        let mut manifest = Vec::with_capacity(n_params);
        for _ in 0..n_params {
            let line = next_line()?;
            let (name, dims) = line.split_once('\t').ok_or_else(|| bad("bad manifest line"))?;
            let shape = if dims.is_empty() {
                Vec::new()
            } else {
                dims.split(',')
                    .map(|d| d.parse::<usize>().map_err(|_| bad("bad dimension")))
                    .collect::<Result<Vec<_>>>()?
            };
            manifest.push((name.to_string(), shape));
        }
        let total: usize = manifest.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
        let data = &bytes[pos..];
        if data.len() != total * 8 {
            return Err(bad(format!(
                "expected {} value bytes, found {}",
                total * 8,
                data.len()
            )));
        }
        let values = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(Checkpoint {
            meta,
            manifest,
            values,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Hex SHA-256 of the serialized checkpoint.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }
}

/// Elementwise mean of two checkpoints with identical manifests. The
/// metadata of the first is kept.
pub fn average_checkpoints(a: &Checkpoint, b: &Checkpoint) -> Result<Checkpoint> {
    if a.manifest != b.manifest {
        return Err(bad("cannot average checkpoints with different manifests"));
    }
    Ok(Checkpoint {
        meta: a.meta.clone(),
        manifest: a.manifest.clone(),
        values: a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| 0.5 * (x + y))
            .collect(),
    })
}
