//! Binary parameter container.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic        8 bytes   "HGRNCKPT"
//! version      u32       currently 1
//! group_count  u32       number of agent groups the model was built for
//! meta_len     u32       length of the UTF-8 metadata string (JSON by convention)
//! meta         meta_len bytes
//! tensor_count u32
//! per tensor:  name_len u32, name (UTF-8), ndim u32, dims u64 x ndim
//! payload:     for each tensor in header order, prod(dims) f64 values, row-major
//! ```
//!
//! Values are stored as raw IEEE-754 bits, so a write/read round trip is
//! bit-exact (including signed zeros and NaN payloads).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ParamStore, ParamTensor};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HGRNCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub group_count: u32,
    pub meta: String,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn new(group_count: u32, meta: impl Into<String>) -> Self {
        Self {
            group_count,
            meta: meta.into(),
            tensors: Vec::new(),
        }
    }

    /// Appends every tensor of `store`, prefixing names with `prefix`.
    pub fn push_store(&mut self, prefix: &str, store: &ParamStore) {
        for t in store.tensors() {
            self.tensors.push(NamedTensor {
                name: format!("{prefix}{}", t.name),
                shape: t.shape.clone(),
                values: t.values.clone(),
            });
        }
    }

    /// Overwrites the values of `store` with the tensors stored under
    /// `prefix`. Every tensor of `store` must be present with the same shape.
    pub fn load_into(&self, prefix: &str, store: &mut ParamStore) -> Result<()> {
        for t in store.tensors_mut() {
            let full = format!("{prefix}{}", t.name);
            let src = self
                .tensors
                .iter()
                .find(|n| n.name == full)
                .ok_or_else(|| Error::Format(format!("checkpoint lacks tensor {full}")))?;
            if src.shape != t.shape {
                return Err(Error::Format(format!(
                    "tensor {full}: checkpoint shape {:?} does not match model shape {:?}",
                    src.shape, t.shape
                )));
            }
            t.values.copy_from_slice(&src.values);
        }
        Ok(())
    }

    /// Builds a fresh store from the tensors under `prefix` (gradients zero).
    pub fn to_store(&self, prefix: &str) -> Result<ParamStore> {
        let mut store = ParamStore::new();
        for t in self.tensors.iter().filter(|t| t.name.starts_with(prefix)) {
            store.add(ParamTensor::new(
                &t.name[prefix.len()..],
                t.shape.clone(),
                t.values.clone(),
            )?)?;
        }
        Ok(store)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&self.group_count.to_le_bytes())?;
        write_len(&mut w, self.meta.len())?;
        w.write_all(self.meta.as_bytes())?;
        write_len(&mut w, self.tensors.len())?;
        for t in &self.tensors {
            let n: usize = t.shape.iter().product();
            if n != t.values.len() {
                return Err(Error::Format(format!(
                    "tensor {} has {} values for shape {:?}",
                    t.name,
                    t.values.len(),
                    t.shape
                )));
            }
            write_len(&mut w, t.name.len())?;
            w.write_all(t.name.as_bytes())?;
            write_len(&mut w, t.shape.len())?;
            for &d in &t.shape {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
        }
        for t in &self.tensors {
            for v in &t.values {
                w.write_all(&v.to_bits().to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a checkpoint (bad magic)".into()));
        }
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let group_count = read_u32(&mut r)?;
        let meta = read_string(&mut r)?;
        let count = read_u32(&mut r)? as usize;
        let mut headers = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let name = read_string(&mut r)?;
            let ndim = read_u32(&mut r)? as usize;
            if ndim > 8 {
                return Err(Error::Format(format!("tensor {name} has {ndim} dimensions")));
            }
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                shape.push(u64::from_le_bytes(b) as usize);
            }
            headers.push((name, shape));
        }
        let mut tensors = Vec::with_capacity(headers.len());
        for (name, shape) in headers {
            let n: usize = shape.iter().product();
            let mut values = Vec::with_capacity(n.min(1 << 24));
            let mut b = [0u8; 8];
            for _ in 0..n {
                r.read_exact(&mut b)?;
                values.push(f64::from_bits(u64::from_le_bytes(b)));
            }
            tensors.push(NamedTensor { name, shape, values });
        }
        Ok(Self {
            group_count,
            meta,
            tensors,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn write_len<W: Write>(w: &mut W, n: usize) -> Result<()> {
    let n = u32::try_from(n).map_err(|_| Error::Format("length exceeds u32".into()))?;
    w.write_all(&n.to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_string<R: Read>(r: &mut R) -> Result<String> {
    let n = read_u32(r)? as usize;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::Format("invalid UTF-8 in checkpoint".into()))
}
