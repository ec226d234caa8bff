use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

const CHECKPOINT_MAGIC: &[u8; 8] = b"NXSELCKP";
const CHECKPOINT_VERSION: u32 = 1;

/// Handle to one named parameter tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Registry of trainable parameters. Registration order is fixed at model
/// construction time, which makes optimizer updates and checkpoints
/// deterministic.
#[derive(Debug, Clone, Default)]
pub struct Params {
    names: Vec<String>,
    values: Vec<Tensor>,
    index: HashMap<String, ParamId>,
}

impl Params {
    pub fn new() -> Self {
        Params::default()
    }

    pub fn add(&mut self, name: &str, value: Tensor) -> ParamId {
        assert!(
            !self.index.contains_key(name),
            "duplicate parameter name {name}"
        );
        let id = ParamId(self.values.len());
        self.names.push(name.to_string());
        self.values.push(value);
        self.index.insert(name.to_string(), id);
        id
    }

    /// Registers a weight matrix initialized uniform(-0.05, 0.05).
    pub fn add_uniform(&mut self, name: &str, rows: usize, cols: usize, rng: &mut impl Rng) -> ParamId {
        let data = (0..rows * cols).map(|_| rng.gen_range(-0.05..0.05)).collect();
        self.add(name, Tensor::from_vec(rows, cols, data).expect("sized by construction"))
    }

    pub fn add_zeros(&mut self, name: &str, rows: usize, cols: usize) -> ParamId {
        self.add(name, Tensor::zeros(rows, cols))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(|n| n.as_str()).zip(self.values.iter())
    }

    /// Total number of scalar entries across all parameters.
    pub fn entry_count(&self) -> usize {
        self.values.iter().map(|t| t.len()).sum()
    }

    /// Writes a checkpoint: magic, format version, a UTF-8 metadata blob,
    /// then the named-parameter table with shapes and raw little-endian
    /// 64-bit values.
    pub fn save(&self, path: &Path, metadata: &str) -> Result<()> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let meta = metadata.as_bytes();
        buf.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        buf.extend_from_slice(meta);
        buf.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        for (name, tensor) in self.iter() {
            let nb = name.as_bytes();
            buf.extend_from_slice(&(nb.len() as u32).to_le_bytes());
            buf.extend_from_slice(nb);
            buf.extend_from_slice(&(tensor.rows() as u32).to_le_bytes());
            buf.extend_from_slice(&(tensor.cols() as u32).to_le_bytes());
            for v in tensor.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        file.write_all(&buf).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(())
    }

    /// Reads a checkpoint, returning the metadata blob and the named tensors.
    pub fn load(path: &Path) -> Result<(String, HashMap<String, Tensor>)> {
        let mut file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut buf = Vec::new();
        file.read_to_end(&mut buf).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut reader = ByteReader::new(&buf);

        let magic = reader.take(8)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint(format!("{}: bad magic", path.display())));
        }
        let version = reader.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "{}: unsupported format version {}",
                path.display(),
                version
            )));
        }
        let meta_len = reader.u64()? as usize;
        let meta = String::from_utf8(reader.take(meta_len)?.to_vec())
            .map_err(|_| Error::Checkpoint(format!("{}: metadata is not UTF-8", path.display())))?;
        let count = reader.u64()? as usize;
        let mut tensors = HashMap::with_capacity(count);
        for _ in 0..count {
            let name_len = reader.u32()? as usize;
            let name = String::from_utf8(reader.take(name_len)?.to_vec())
                .map_err(|_| Error::Checkpoint(format!("{}: parameter name is not UTF-8", path.display())))?;
            let rows = reader.u32()? as usize;
            let cols = reader.u32()? as usize;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                data.push(f64::from_le_bytes(reader.take(8)?.try_into().expect("8 bytes")));
            }
            tensors.insert(name, Tensor::from_vec(rows, cols, data)?);
        }
        Ok((meta, tensors))
    }

    /// Replaces every registered value with the matching named tensor,
    /// validating shapes.
    pub fn restore(&mut self, tensors: &HashMap<String, Tensor>) -> Result<()> {
        for i in 0..self.values.len() {
            let name = &self.names[i];
            let loaded = tensors
                .get(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))?;
            if loaded.shape() != self.values[i].shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name}: checkpoint shape {:?} does not match model shape {:?}",
                    loaded.shape(),
                    self.values[i].shape()
                )));
            }
            self.values[i] = loaded.clone();
        }
        Ok(())
    }
}

struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        ByteReader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint("truncated checkpoint".to_string()));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
