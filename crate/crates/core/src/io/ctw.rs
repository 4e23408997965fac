//! `CTW1` weight checkpoints: magic `CTW1`, u32 LE entry count, then per
//! entry a u32 LE name length, the UTF-8 name, u32 LE rank, rank u32 LE dims
//! and an f64 LE payload.
//!
//! Key-value metadata travels as empty entries named `meta:<key>=<value>`
//! with dims `[0]`, so files stay readable by any plain `CTW1` reader.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::ctt::{dim_u32, read_u32};
use crate::error::{Error, Result};

pub const CTW_MAGIC: &[u8; 4] = b"CTW1";
const META_PREFIX: &str = "meta:";

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub metadata: BTreeMap<String, String>,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).map(String::as_str)
    }

    pub fn require(&self, name: &str) -> Result<&NamedTensor> {
        self.get(name).ok_or_else(|| Error::Format(format!("checkpoint is missing tensor '{name}'")))
    }

    pub fn require_meta(&self, key: &str) -> Result<&str> {
        self.meta(key).ok_or_else(|| Error::Format(format!("checkpoint is missing metadata '{key}'")))
    }
}

fn write_entry(buf: &mut Vec<u8>, name: &str, dims: &[usize], data: &[f64]) -> Result<()> {
    buf.extend_from_slice(&dim_u32(name.len())?.to_le_bytes());
    buf.extend_from_slice(name.as_bytes());
    buf.extend_from_slice(&dim_u32(dims.len())?.to_le_bytes());
    for &d in dims {
        buf.extend_from_slice(&dim_u32(d)?.to_le_bytes());
    }
    for &v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CTW_MAGIC);
    buf.extend_from_slice(&dim_u32(ckpt.metadata.len() + ckpt.tensors.len())?.to_le_bytes());
    for (k, v) in &ckpt.metadata {
        if k.contains('=') {
            return Err(Error::InvalidArgument(format!("metadata key '{k}' contains '='")));
        }
        write_entry(&mut buf, &format!("{META_PREFIX}{k}={v}"), &[0], &[])?;
    }
    for t in &ckpt.tensors {
        let n: usize = t.dims.iter().product();
        if n != t.data.len() {
            return Err(Error::InvalidArgument(format!("tensor '{}' dims {:?} vs {} values", t.name, t.dims, t.data.len())));
        }
        write_entry(&mut buf, &t.name, &t.dims, &t.data)?;
    }
    Ok(buf)
}

pub fn write_checkpoint<W: Write>(mut w: W, ckpt: &Checkpoint) -> Result<()> {
    w.write_all(&encode_checkpoint(ckpt)?)?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CTW_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected CTW1")));
    }
    let count = read_u32(&mut r)?;
    let mut ckpt = Checkpoint::default();
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        if len > 4096 {
            return Err(Error::Format(format!("tensor name of {len} bytes is implausible")));
        }
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        let rank = read_u32(&mut r)? as usize;
        if rank > 8 {
            return Err(Error::Format(format!("tensor '{name}' has rank {rank}")));
        }
        let dims = (0..rank).map(|_| read_u32(&mut r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format("dimension product overflows".into()))?;
        let mut payload = vec![0u8; 8 * n];
        r.read_exact(&mut payload)?;
        let data: Vec<f64> = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
        if let Some(kv) = name.strip_prefix(META_PREFIX) {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Format(format!("metadata entry '{name}' has no '='")))?;
            ckpt.metadata.insert(k.to_string(), v.to_string());
        } else {
            ckpt.tensors.push(NamedTensor { name, dims, data });
        }
    }
    Ok(ckpt)
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    super::write_atomic(path, &encode_checkpoint(ckpt)?)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut ckpt = Checkpoint::default();
        ckpt.metadata.insert("model".into(), "msd".into());
        ckpt.tensors.push(NamedTensor {
            name: "layer01.kernel".into(),
            dims: vec![1, 1, 3, 3],
            data: (0..9).map(f64::from).collect(),
        });
        ckpt.tensors.push(NamedTensor { name: "layer01.bias".into(), dims: vec![1], data: vec![-0.125] });
        ckpt
    }

    #[test]
    fn roundtrip_with_metadata() {
        let ckpt = sample();
        let bytes = encode_checkpoint(&ckpt).unwrap();
        assert_eq!(&bytes[..4], b"CTW1");
        assert_eq!(&bytes[4..8], &3u32.to_le_bytes());
        let back = read_checkpoint(bytes.as_slice()).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.meta("model"), Some("msd"));
    }

    #[test]
    fn entry_layout_is_exact() {
        let mut ckpt = Checkpoint::default();
        ckpt.tensors.push(NamedTensor { name: "ab".into(), dims: vec![2], data: vec![1.5, -2.0] });
        let bytes = encode_checkpoint(&ckpt).unwrap();
        let mut expected = b"CTW1".to_vec();
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.extend_from_slice(b"ab");
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.extend_from_slice(&1.5f64.to_le_bytes());
        expected.extend_from_slice(&(-2.0f64).to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn truncated_file_fails() {
        let bytes = encode_checkpoint(&sample()).unwrap();
        assert!(read_checkpoint(&bytes[..bytes.len() - 3]).is_err());
        assert!(read_checkpoint(&b"CTT1\0\0\0\0"[..]).is_err());
    }
}
