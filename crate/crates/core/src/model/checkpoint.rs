//! Binary checkpoint:
//!
//! ```text
//! "PANCKPT1"
//! u32 LE digest length, digest bytes (UTF-8)
//! u32 LE manifest length, manifest JSON [{name, shape, offset}]
//! parameter values as f64 LE, in manifest order
//! ```
//!
//! `offset` is the byte offset of an array from the start of the value
//! section.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::PanModel;
use crate::error::{PanError, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PANCKPT1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    /// Digest of the configuration the parameters were trained under.
    pub digest: String,
    pub manifest: Vec<ManifestEntry>,
    pub values: Vec<f64>,
}

impl Checkpoint {
    pub fn from_model(model: &PanModel, digest: &str) -> Self {
        let mut manifest = Vec::new();
        let mut values = Vec::new();
        for (name, p) in model.params() {
            manifest.push(ManifestEntry {
                name,
                shape: p.shape().to_vec(),
                offset: values.len() * 8,
            });
            values.extend_from_slice(&p.value);
        }
        Checkpoint {
            digest: digest.to_string(),
            manifest,
            values,
        }
    }

    /// Copies the stored values into `model`, whose parameter list must
    /// match the manifest name for name and shape for shape.
    pub fn load_into(&self, model: &mut PanModel) -> Result<()> {
        let mut params = model.params_mut();
        if params.len() != self.manifest.len() {
            return Err(PanError::Mismatch(format!(
                "checkpoint holds {} arrays, model has {}",
                self.manifest.len(),
                params.len()
            )));
        }
        for ((name, p), entry) in params.iter_mut().zip(&self.manifest) {
            if *name != entry.name || p.shape() != entry.shape.as_slice() {
                return Err(PanError::Mismatch(format!(
                    "checkpoint array `{}` {:?} does not match model array `{name}` {:?}",
                    entry.name,
                    entry.shape,
                    p.shape()
                )));
            }
            let start = entry.offset / 8;
            let len = p.len();
            p.value.copy_from_slice(&self.values[start..start + len]);
        }
        Ok(())
    }
}

pub fn write_checkpoint<W: Write>(ckpt: &Checkpoint, mut w: W) -> Result<()> {
    let manifest = serde_json::to_vec(&ckpt.manifest).expect("manifest serializes");
    w.write_all(CHECKPOINT_MAGIC)?;
    write_block(&mut w, ckpt.digest.as_bytes())?;
    write_block(&mut w, &manifest)?;
    let mut buf = Vec::with_capacity(ckpt.values.len() * 8);
    for v in &ckpt.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| truncated("magic", e))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(PanError::Data("not a PAN checkpoint (bad magic)".into()));
    }
    let digest = String::from_utf8(read_block(&mut r, "digest")?)
        .map_err(|_| PanError::Data("checkpoint digest is not UTF-8".into()))?;
    let manifest: Vec<ManifestEntry> = serde_json::from_slice(&read_block(&mut r, "manifest")?)
        .map_err(|e| PanError::Data(format!("checkpoint manifest: {e}")))?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if rest.len() % 8 != 0 {
        return Err(PanError::Data("checkpoint value section is not a whole number of f64".into()));
    }
    let values: Vec<f64> = rest
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    for e in &manifest {
        let len: usize = e.shape.iter().product();
        if e.offset % 8 != 0 || e.offset / 8 + len > values.len() {
            return Err(PanError::Data(format!(
                "checkpoint array `{}` extends past the value section",
                e.name
            )));
        }
    }
    Ok(Checkpoint { digest, manifest, values })
}

fn write_block<W: Write>(w: &mut W, bytes: &[u8]) -> Result<()> {
    let len = u32::try_from(bytes.len()).map_err(|_| PanError::Data("checkpoint block too large".into()))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(bytes)?;
    Ok(())
}

fn read_block<R: Read>(r: &mut R, what: &str) -> Result<Vec<u8>> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len).map_err(|e| truncated(what, e))?;
    let mut buf = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut buf).map_err(|e| truncated(what, e))?;
    Ok(buf)
}

fn truncated(what: &str, e: std::io::Error) -> PanError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        PanError::Data(format!("checkpoint truncated while reading the {what}"))
    } else {
        PanError::Io(e)
    }
}
