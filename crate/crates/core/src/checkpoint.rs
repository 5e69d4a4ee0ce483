//! Binary weight container: an 8-byte magic, the JSON header length as a
//! little-endian u64, the JSON header, then every parameter value as a
//! little-endian f64 in manifest order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamSet, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"TWCKPT01";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub version: u32,
    /// What the weights belong to, e.g. "transformer" or "sac".
    pub kind: String,
    pub config: serde_json::Value,
    pub seed: u64,
    /// Free-form training metadata (best epoch, step counts, ...).
    pub meta: serde_json::Value,
    pub manifest: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: Header,
    pub params: ParamSet,
}

impl Checkpoint {
    pub fn new(kind: &str, config: serde_json::Value, seed: u64, meta: serde_json::Value, params: ParamSet) -> Self {
        let manifest = params
            .names()
            .iter()
            .zip(params.tensors())
            .map(|(n, t)| ManifestEntry { name: n.clone(), shape: t.shape().to_vec() })
            .collect();
        Checkpoint {
            header: Header { version: FORMAT_VERSION, kind: kind.to_string(), config, seed, meta, manifest },
            params,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let mut out = Vec::with_capacity(16 + header.len() + 8 * self.params.count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for t in self.params.tensors() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(Error::Format("not a checkpoint file (bad magic)".into()));
        }
        let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = bytes.get(16..16 + len).ok_or_else(|| Error::Format("truncated checkpoint header".into()))?;
        let header: Header = serde_json::from_slice(body)?;
        if header.version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {}", header.version)));
        }
        let mut raw = &bytes[16 + len..];
        let mut params = ParamSet::new();
        for e in &header.manifest {
            let n: usize = e.shape.iter().product();
            if raw.len() < 8 * n {
                return Err(Error::Format(format!("checkpoint truncated in {}", e.name)));
            }
            let data = raw[..8 * n].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            raw = &raw[8 * n..];
            params.push(e.name.clone(), Tensor::new(e.shape.clone(), data)?);
        }
        if !raw.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes after checkpoint data", raw.len())));
        }
        Ok(Checkpoint { header, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = std::fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.header.kind != kind {
            return Err(Error::Format(format!("expected a {kind} checkpoint, found {}", self.header.kind)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut p = ParamSet::new();
        p.push("w", Tensor::from_rows(&[vec![0.1, -2.5e-300], vec![f64::MAX, 1.0 / 3.0]]).unwrap());
        p.push("b", Tensor::row(&[-0.0, 7.0]));
        Checkpoint::new("test", serde_json::json!({"d": 2}), 42, serde_json::json!({"epoch": 3}), p)
    }

    #[test]
    fn bytes_round_trip_identically() {
        let c = sample();
        let bytes = c.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.params.flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   c.params.flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(back.header.seed, 42);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample().to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
    }
}
