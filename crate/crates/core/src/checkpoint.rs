//! Binary checkpoints: an 8-byte magic, a length-prefixed TOML header and
//! the parameter entries.
//!
//! Entry layout: `u32` name length, UTF-8 name, `u32` rank, `u64` extents,
//! then `re, im` pairs as little-endian `f64`.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::ParamStore;
use crate::ctensor::{CTensor, Complex};
use crate::error::{at_path, Error, Result};
use crate::models::ModelConfig;

pub const MAGIC: &[u8; 8] = b"QBCKPT01";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format_version: u32,
    pub arch: String,
    /// `pretrain` or `finetune`.
    pub mode: String,
    pub step: u64,
    pub entries: usize,
    pub vocab: Vec<String>,
    pub model: ModelConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: Header,
    pub params: Vec<(String, CTensor)>,
}

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Checkpoint(msg.into()))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return err(format!("truncated file at byte {}", self.pos));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

impl Checkpoint {
    /// Snapshot of every parameter value in registration order.
    pub fn from_store(store: &ParamStore, model: &ModelConfig, arch: &str, mode: &str, step: u64, vocab: Vec<String>) -> Self {
        let params: Vec<(String, CTensor)> = store.iter().map(|p| (p.name.clone(), p.value.clone())).collect();
        Self {
            header: Header {
                format_version: FORMAT_VERSION,
                arch: arch.to_string(),
                mode: mode.to_string(),
                step,
                entries: params.len(),
                vocab,
                model: model.clone(),
            },
            params,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = toml::to_string(&self.header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        for (name, t) in &self.params {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for z in t.data() {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8)? != MAGIC {
            return err("not a checkpoint (bad magic)");
        }
        let hlen = r.u64()? as usize;
        let htext = std::str::from_utf8(r.take(hlen)?).map_err(|_| Error::Checkpoint("header is not UTF-8".into()))?;
        let header: Header = toml::from_str(htext).map_err(|e| Error::Checkpoint(format!("header: {}", e.message())))?;
        if header.format_version != FORMAT_VERSION {
            return err(format!("unsupported format version {}", header.format_version));
        }
        let mut params = Vec::with_capacity(header.entries);
        for _ in 0..header.entries {
            let n = r.u32()? as usize;
            let name = String::from_utf8(r.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("entry name is not UTF-8".into()))?;
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let len: usize = shape.iter().product();
            let data = (0..len).map(|_| Ok(Complex::new(r.f64()?, r.f64()?))).collect::<Result<Vec<_>>>()?;
            params.push((name, CTensor::from_vec(&shape, data)?));
        }
        if r.pos != buf.len() {
            return err(format!("{} trailing bytes", buf.len() - r.pos));
        }
        Ok(Self { header, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            at_path(dir, fs::create_dir_all(dir))?;
        }
        let mut f = BufWriter::new(at_path(path, fs::File::create(path))?);
        f.write_all(&self.to_bytes()?)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&at_path(path, fs::read(path))?)
    }

    /// Writes every entry into `store`. The two registries must hold exactly
    /// the same names and shapes.
    pub fn restore(&self, store: &mut ParamStore) -> Result<()> {
        let ours: BTreeSet<&str> = self.params.iter().map(|(n, _)| n.as_str()).collect();
        let theirs: BTreeSet<&str> = store.names().collect();
        let missing: Vec<&str> = theirs.difference(&ours).copied().collect();
        let extra: Vec<&str> = ours.difference(&theirs).copied().collect();
        if !missing.is_empty() || !extra.is_empty() {
            return err(format!("parameter names differ; missing from checkpoint: {missing:?}; unknown to the model: {extra:?}"));
        }
        self.restore_matching(store).map(|_| ())
    }

    /// Writes the entries whose names exist in `store`; returns how many.
    pub fn restore_matching(&self, store: &mut ParamStore) -> Result<usize> {
        let mut n = 0;
        for (name, t) in &self.params {
            let Some(id) = store.id(name) else { continue };
            if store.value(id).shape() != t.shape() {
                return err(format!("`{name}` has shape {:?} in the checkpoint but {:?} in the model", t.shape(), store.value(id).shape()));
            }
            *store.value_mut(id) = t.clone();
            n += 1;
        }
        Ok(n)
    }
}
