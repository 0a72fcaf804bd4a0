//! Named-tensor container.
//!
//! Layout (all integers unsigned 64-bit little-endian):
//!
//! ```text
//! "SEMBPROBE1"  version:u8  count:u64
//! count x { name_len:u64  name:utf8  rank:u64  dims:u64 x rank  data:f64le x prod(dims) }
//! ```
//!
//! Tensors are written in name order, so equal contents give equal bytes.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::Tensor;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 10] = b"SEMBPROBE1";
pub const CHECKPOINT_VERSION: u8 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    tensors: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .ok_or_else(|| Error::data(format!("checkpoint lacks tensor `{name}`")))
    }

    /// Stores a scalar as a one-element tensor.
    pub fn insert_scalar(&mut self, name: impl Into<String>, v: f64) {
        self.insert(name, Tensor::from_vec(vec![v]));
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        let t = self.require(name)?;
        if t.len() != 1 {
            return Err(Error::data(format!("tensor `{name}` is not a scalar")));
        }
        Ok(t.data()[0])
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&[CHECKPOINT_VERSION])?;
        w.write_all(&(self.tensors.len() as u64).to_le_bytes())?;
        for (name, t) in &self.tensors {
            w.write_all(&(name.len() as u64).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(t.shape().len() as u64).to_le_bytes())?;
            for &d in t.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 10];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::data("not a checkpoint file (bad magic)"));
        }
        let mut version = [0u8; 1];
        r.read_exact(&mut version)?;
        if version[0] != CHECKPOINT_VERSION {
            return Err(Error::data(format!(
                "unsupported checkpoint version {}",
                version[0]
            )));
        }
        let count = read_u64(r)?;
        let mut tensors = BTreeMap::new();
        for _ in 0..count {
            let name_len = read_len(r, 1 << 16)?;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name)
                .map_err(|_| Error::data("tensor name is not valid UTF-8"))?;
            let rank = read_len(r, 16)?;
            let shape = (0..rank)
                .map(|_| read_len(r, usize::MAX))
                .collect::<Result<Vec<_>>>()?;
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::data("tensor size overflows"))?;
            let mut bytes = vec![0u8; n.checked_mul(8).ok_or_else(|| Error::data("tensor too large"))?];
            r.read_exact(&mut bytes)?;
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if tensors.insert(name.clone(), Tensor::new(shape, data)?).is_some() {
                return Err(Error::data(format!("duplicate tensor name `{name}`")));
            }
        }
        Ok(Checkpoint { tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        // write-then-rename so an interrupted save never leaves a torn file
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        fs::write(&tmp, self.to_bytes())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::read_from(&mut bytes.as_slice())
    }

    /// Hex SHA-256 of the serialized bytes.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_len<R: Read>(r: &mut R, max: usize) -> Result<usize> {
    let v = read_u64(r)?;
    usize::try_from(v)
        .ok()
        .filter(|&v| v <= max)
        .ok_or_else(|| Error::data(format!("length field {v} out of range")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let mut c = Checkpoint::new();
        c.insert("w", Tensor::new(vec![1, 2], vec![1.0, -0.5]).unwrap());
        let b = c.to_bytes();
        assert_eq!(&b[..10], b"SEMBPROBE1");
        assert_eq!(b[10], 1);
        assert_eq!(u64::from_le_bytes(b[11..19].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(b[19..27].try_into().unwrap()), 1);
        assert_eq!(b[27], b'w');
        assert_eq!(u64::from_le_bytes(b[28..36].try_into().unwrap()), 2);
        assert_eq!(b.len(), 36 + 16 + 16);
        assert_eq!(f64::from_le_bytes(b[60..68].try_into().unwrap()), -0.5);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut b = Checkpoint::new().to_bytes();
        b[0] = b'X';
        assert!(Checkpoint::read_from(&mut b.as_slice()).is_err());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let mut c = Checkpoint::new();
        c.insert("a", Tensor::from_vec(vec![1.0, 2.0]));
        let b = c.to_bytes();
        assert!(Checkpoint::read_from(&mut &b[..b.len() - 3]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            entries in prop::collection::btree_map(
                "[a-z./_0-9]{1,12}",
                (prop::collection::vec(1usize..4, 1..3), any::<u64>()),
                0..5,
            )
        ) {
            let mut c = Checkpoint::new();
            for (name, (shape, bits)) in entries {
                let n: usize = shape.iter().product();
                // arbitrary bit patterns, including NaN payloads and infinities
                let data = (0..n as u64).map(|i| f64::from_bits(bits.wrapping_add(i.wrapping_mul(0x9E37_79B9)))).collect();
                c.insert(name, Tensor::new(shape, data).unwrap());
            }
            let bytes = c.to_bytes();
            let back = Checkpoint::read_from(&mut bytes.as_slice()).unwrap();
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }
}
