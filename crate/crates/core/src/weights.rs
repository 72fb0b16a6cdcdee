//! Named parameter table and its on-disk format.
//!
//! File layout, all integers little-endian, no padding:
//!
//! ```text
//! "FSTH"  u32 version (=1)  u32 tensor_count
//! per tensor:
//!   u16 name_len  name (UTF-8)  u8 rank  u32 dims[rank]  f32 data[prod(dims)]
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FSTH";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl NamedTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::contract(format!(
                "dims {dims:?} need {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }
}

/// Ordered name -> tensor table. Insertion order is the serialization order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightStore {
    tensors: IndexMap<String, NamedTensor>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: NamedTensor) -> Result<()> {
        let name = name.into();
        if name.len() > u16::MAX as usize {
            return Err(Error::contract(format!("tensor name too long: {} bytes", name.len())));
        }
        if tensor.dims.len() > u8::MAX as usize {
            return Err(Error::contract(format!("tensor `{name}` rank {} too large", tensor.dims.len())));
        }
        if tensor.dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(Error::contract(format!("tensor `{name}` has a dimension beyond u32")));
        }
        self.tensors.insert(name, tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.get(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &NamedTensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    /// Total number of scalar parameters.
    pub fn element_count(&self) -> usize {
        self.tensors.values().map(|t| t.data.len()).sum()
    }

    /// Exact byte size of the serialized file.
    pub fn serialized_len(&self) -> usize {
        12 + self
            .tensors
            .iter()
            .map(|(name, t)| 2 + name.len() + 1 + 4 * t.dims.len() + 4 * t.data.len())
            .sum::<usize>()
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for (name, t) in &self.tensors {
            w.write_all(&(name.len() as u16).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&[t.dims.len() as u8])?;
            for &d in &t.dims {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            for v in &t.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let header = "<header>";
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, header, "magic")?;
        if &magic != MAGIC {
            return Err(format_err(header, format!("bad magic {magic:?}, expected \"FSTH\"")));
        }
        let version = read_u32(&mut r, header, "version")?;
        if version != VERSION {
            return Err(format_err(header, format!("unsupported version {version}")));
        }
        let count = read_u32(&mut r, header, "tensor count")?;

        let mut store = WeightStore::new();
        for i in 0..count {
            let placeholder = format!("#{i}");
            let mut len = [0u8; 2];
            read_exact(&mut r, &mut len, &placeholder, "name length")?;
            let mut name = vec![0u8; u16::from_le_bytes(len) as usize];
            read_exact(&mut r, &mut name, &placeholder, "name")?;
            let name = String::from_utf8(name)
                .map_err(|_| format_err(&placeholder, "name is not valid UTF-8"))?;

            let mut rank = [0u8; 1];
            read_exact(&mut r, &mut rank, &name, "rank")?;
            let mut dims = Vec::with_capacity(rank[0] as usize);
            for _ in 0..rank[0] {
                dims.push(read_u32(&mut r, &name, "dims")? as usize);
            }
            let n = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| format_err(&name, "element count overflows"))?;
            let mut bytes = vec![0u8; n * 4];
            read_exact(&mut r, &mut bytes, &name, "data")?;
            let data = bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            if store.tensors.contains_key(&name) {
                return Err(format_err(&name, "duplicate tensor name"));
            }
            store.tensors.insert(name, NamedTensor { dims, data });
        }
        let mut rest = [0u8; 1];
        match r.read(&mut rest) {
            Ok(0) => Ok(store),
            Ok(_) => Err(format_err("<trailer>", "trailing bytes after last tensor")),
            Err(e) => Err(format_err("<trailer>", e.to_string())),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file))
    }
}

fn format_err(tensor: &str, reason: impl Into<String>) -> Error {
    Error::Format {
        tensor: tensor.to_string(),
        reason: reason.into(),
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], tensor: &str, field: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            format_err(tensor, format!("truncated while reading {field}"))
        } else {
            format_err(tensor, format!("{field}: {e}"))
        }
    })
}

fn read_u32(r: &mut impl Read, tensor: &str, field: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, tensor, field)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> WeightStore {
        let mut s = WeightStore::new();
        s.insert("a.weight", NamedTensor::new(vec![2, 3], vec![1.0, -2.0, 3.5, 0.0, f32::MIN_POSITIVE, 7.0]).unwrap())
            .unwrap();
        s.insert("a.bias", NamedTensor::new(vec![3], vec![0.1, 0.2, 0.3]).unwrap()).unwrap();
        s
    }

    #[test]
    fn byte_layout_is_exact() {
        let mut s = WeightStore::new();
        s.insert("b", NamedTensor::new(vec![1], vec![1.0]).unwrap()).unwrap();
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        let expected: Vec<u8> = [
            &b"FSTH"[..],
            &1u32.to_le_bytes(),
            &1u32.to_le_bytes(),
            &1u16.to_le_bytes(),
            b"b",
            &[1u8],
            &1u32.to_le_bytes(),
            &1.0f32.to_le_bytes(),
        ]
        .concat();
        assert_eq!(buf, expected);
        assert_eq!(s.serialized_len(), buf.len());
    }

    #[test]
    fn round_trip_and_size() {
        let s = sample();
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 12 + (2 + 8 + 1 + 8 + 24) + (2 + 6 + 1 + 4 + 12));
        assert_eq!(WeightStore::read_from(&buf[..]).unwrap(), s);
    }

    #[test]
    fn corrupt_files_name_the_tensor() {
        let s = sample();
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(WeightStore::read_from(&bad[..]), Err(Error::Format { tensor, .. }) if tensor == "<header>"));

        let mut bad = buf.clone();
        bad[4] = 2;
        assert!(WeightStore::read_from(&bad[..]).is_err());

        let truncated = &buf[..buf.len() - 3];
        match WeightStore::read_from(truncated) {
            Err(Error::Format { tensor, reason }) => {
                assert_eq!(tensor, "a.bias");
                assert!(reason.contains("truncated"));
            }
            other => panic!("unexpected {other:?}"),
        }

        let mut trailing = buf.clone();
        trailing.push(0);
        assert!(WeightStore::read_from(&trailing[..]).is_err());
    }
}
