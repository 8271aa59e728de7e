//! Versioned binary checkpoints.
//!
//! Layout: the 8-byte magic `SSCIPG01`, then for every tensor in fixed order
//! `name_len: u32, name, rank: u32, dims: [u32; rank], values: [f64]`, then a
//! `u64` checksum equal to the wrapping sum of all value bit patterns. All
//! integers and floats are little-endian. Tensors are the ten weights, the
//! ten first moments (`adam_m.*`), the ten second moments (`adam_v.*`) and
//! `step_count` stored as a single f64.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ParamSet, PolicyConfig, PolicyError, PolicyParameters, TENSOR_NAMES};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SSCIPG01";

fn layout(cfg: &PolicyConfig) -> Vec<(String, Vec<usize>)> {
    let shapes = ParamSet::shapes(cfg);
    let mut out = Vec::with_capacity(31);
    for prefix in ["", "adam_m.", "adam_v."] {
        for (name, dims) in TENSOR_NAMES.iter().zip(shapes.iter()) {
            out.push((format!("{prefix}{name}"), dims.clone()));
        }
    }
    out.push(("step_count".to_string(), vec![1]));
    out
}

fn io_err(e: std::io::Error) -> PolicyError {
    PolicyError::Io(e.to_string())
}

pub fn write_checkpoint<W: Write>(params: &PolicyParameters, mut out: W) -> Result<(), PolicyError> {
    let step = [params.step_count as f64];
    let values: Vec<&[f64]> = params
        .weights
        .tensors()
        .into_iter()
        .chain(params.adam_m.tensors())
        .chain(params.adam_v.tensors())
        .chain(std::iter::once(&step[..]))
        .collect();
    let mut checksum = 0u64;
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    for ((name, dims), vals) in layout(&params.config).iter().zip(values) {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in dims {
            buf.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in vals {
            checksum = checksum.wrapping_add(v.to_bits());
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf.extend_from_slice(&checksum.to_le_bytes());
    out.write_all(&buf).map_err(io_err)?;
    out.flush().map_err(io_err)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], PolicyError> {
        if self.pos + n > self.data.len() {
            return Err(PolicyError::CorruptCheckpoint(format!(
                "truncated at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, PolicyError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, PolicyError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Reads a checkpoint whose shapes must match `config`.
pub fn read_checkpoint<R: Read>(
    mut input: R,
    config: PolicyConfig,
) -> Result<PolicyParameters, PolicyError> {
    let mut data = Vec::new();
    input.read_to_end(&mut data).map_err(io_err)?;
    let mut cur = Cursor { data: &data, pos: 0 };
    if cur.take(8)? != CHECKPOINT_MAGIC {
        return Err(PolicyError::CorruptCheckpoint("bad magic".into()));
    }
    let mut checksum = 0u64;
    let mut tensors = Vec::with_capacity(31);
    for (name, dims) in layout(&config) {
        let len = cur.u32()? as usize;
        let found_name = cur.take(len)?;
        if found_name != name.as_bytes() {
            return Err(PolicyError::CorruptCheckpoint(format!(
                "expected tensor `{name}`, found `{}`",
                String::from_utf8_lossy(found_name)
            )));
        }
        let rank = cur.u32()? as usize;
        if rank > 8 {
            return Err(PolicyError::CorruptCheckpoint(format!("implausible rank {rank}")));
        }
        let found: Vec<usize> = (0..rank)
            .map(|_| cur.u32().map(|d| d as usize))
            .collect::<Result<_, _>>()?;
        if found != dims {
            return Err(PolicyError::DimensionMismatch {
                tensor: name,
                expected: dims,
                found,
            });
        }
        let n: usize = dims.iter().product();
        let bytes = cur.take(n * 8)?;
        let vals: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        for v in &vals {
            checksum = checksum.wrapping_add(v.to_bits());
        }
        tensors.push(vals);
    }
    let stored = cur.u64()?;
    if stored != checksum {
        return Err(PolicyError::CorruptCheckpoint("checksum mismatch".into()));
    }
    if cur.pos != data.len() {
        return Err(PolicyError::CorruptCheckpoint("trailing bytes after checksum".into()));
    }
    let step = tensors.pop().unwrap()[0];
    if !(step >= 0.0 && step.fract() == 0.0) {
        return Err(PolicyError::CorruptCheckpoint(format!("bad step count {step}")));
    }
    let mut params = PolicyParameters::zeros(config);
    let mut it = tensors.into_iter();
    for set in [&mut params.weights, &mut params.adam_m, &mut params.adam_v] {
        for slot in set.tensors_mut() {
            *slot = it.next().unwrap();
        }
    }
    params.step_count = step as u64;
    Ok(params)
}

pub fn save_checkpoint(params: &PolicyParameters, path: impl AsRef<Path>) -> Result<(), PolicyError> {
    let file = File::create(path).map_err(io_err)?;
    write_checkpoint(params, BufWriter::new(file))
}

pub fn load_checkpoint(
    path: impl AsRef<Path>,
    config: PolicyConfig,
) -> Result<PolicyParameters, PolicyError> {
    let file = File::open(path).map_err(io_err)?;
    read_checkpoint(BufReader::new(file), config)
}
