//! Binary checkpoint container.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "DVLBCKPT"
//! version      u32      (FORMAT_VERSION)
//! meta         u32 count, then count × (string key, string value)
//! input shape  u32 ndim, ndim × u64
//! layers       u32 count, then per layer: u8 kind + kind fields
//!                conv1d  4 × u64 (in_channels, out_channels, kernel, length)
//!                dense   2 × u64 (inputs, outputs)
//!                lstm    2 × u64 (inputs, hidden)
//!                dropout f64 rate
//!                activ.  u8 function (0 relu, 1 tanh, 2 identity)
//!                concat  u64 width
//! step         u64      optimizer step counter
//! tensors      u32 count, then per tensor: u32 ndim, ndim × u64, len × f64
//! ```
//!
//! strings are `u32` byte length followed by UTF-8 bytes.

use std::path::Path;

use super::layers::Activation;
use super::network::{LayerSpec, ModelState};
use super::tensor::Tensor;
use super::NnError;

pub const MAGIC: &[u8; 8] = b"DVLBCKPT";
pub const FORMAT_VERSION: u32 = 1;

/// Free-form key/value header entries (estimator kind, mask, window, ...).
pub type Meta = Vec<(String, String)>;

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    put_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}

pub fn encode(meta: &Meta, state: &ModelState) -> Vec<u8> {
    let mut buf = Vec::with_capacity(64 + 8 * state.parameter_count());
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, FORMAT_VERSION);
    put_u32(&mut buf, meta.len() as u32);
    for (k, v) in meta {
        put_str(&mut buf, k);
        put_str(&mut buf, v);
    }
    put_u32(&mut buf, state.input_shape.len() as u32);
    for d in &state.input_shape {
        put_u64(&mut buf, *d as u64);
    }
    put_u32(&mut buf, state.specs.len() as u32);
    for spec in &state.specs {
        match *spec {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                length,
            } => {
                buf.push(0);
                for v in [in_channels, out_channels, kernel, length] {
                    put_u64(&mut buf, v as u64);
                }
            }
            LayerSpec::Dense { inputs, outputs } => {
                buf.push(1);
                put_u64(&mut buf, inputs as u64);
                put_u64(&mut buf, outputs as u64);
            }
            LayerSpec::Lstm { inputs, hidden } => {
                buf.push(2);
                put_u64(&mut buf, inputs as u64);
                put_u64(&mut buf, hidden as u64);
            }
            LayerSpec::Dropout { rate } => {
                buf.push(3);
                buf.extend_from_slice(&rate.to_le_bytes());
            }
            LayerSpec::Activation { function } => {
                buf.push(4);
                buf.push(function.code());
            }
            LayerSpec::Concat { width } => {
                buf.push(5);
                put_u64(&mut buf, width as u64);
            }
        }
    }
    put_u64(&mut buf, state.step);
    put_u32(&mut buf, state.params.len() as u32);
    for t in &state.params {
        put_u32(&mut buf, t.shape().len() as u32);
        for d in t.shape() {
            put_u64(&mut buf, *d as u64);
        }
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        if self.pos + n > self.buf.len() {
            return Err(NnError::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, NnError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize, NnError> {
        usize::try_from(self.u64()?).map_err(|_| NnError::Checkpoint("dimension overflows usize".into()))
    }

    fn f64(&mut self) -> Result<f64, NnError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String, NnError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| NnError::Checkpoint("invalid UTF-8 in header".into()))
    }
}

/// Parses a checkpoint and validates every tensor shape against the layer specs.
pub fn decode(bytes: &[u8]) -> Result<(Meta, ModelState), NnError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(NnError::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(NnError::Checkpoint(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let mut meta = Vec::new();
    for _ in 0..r.u32()? {
        let k = r.string()?;
        let v = r.string()?;
        meta.push((k, v));
    }
    let mut input_shape = Vec::new();
    for _ in 0..r.u32()? {
        input_shape.push(r.usize()?);
    }
    let mut specs = Vec::new();
    for _ in 0..r.u32()? {
        let spec = match r.u8()? {
            0 => LayerSpec::Conv1d {
                in_channels: r.usize()?,
                out_channels: r.usize()?,
                kernel: r.usize()?,
                length: r.usize()?,
            },
            1 => LayerSpec::Dense {
                inputs: r.usize()?,
                outputs: r.usize()?,
            },
            2 => LayerSpec::Lstm {
                inputs: r.usize()?,
                hidden: r.usize()?,
            },
            3 => LayerSpec::Dropout { rate: r.f64()? },
            4 => LayerSpec::Activation {
                function: Activation::from_code(r.u8()?)
                    .ok_or_else(|| NnError::Checkpoint("unknown activation code".into()))?,
            },
            5 => LayerSpec::Concat { width: r.usize()? },
            other => return Err(NnError::Checkpoint(format!("unknown layer kind {other}"))),
        };
        specs.push(spec);
    }
    let step = r.u64()?;
    let mut params = Vec::new();
    for _ in 0..r.u32()? {
        let mut shape = Vec::new();
        for _ in 0..r.u32()? {
            shape.push(r.usize()?);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(r.f64()?);
        }
        params.push(Tensor::from_vec(&shape, data)?);
    }
    if r.pos != bytes.len() {
        return Err(NnError::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let mut state = ModelState::from_params(specs, input_shape, params)
        .map_err(|e| NnError::Checkpoint(format!("layer/parameter mismatch: {e}")))?;
    state.step = step;
    Ok((meta, state))
}

pub fn save(path: &Path, meta: &Meta, state: &ModelState) -> Result<(), NnError> {
    std::fs::write(path, encode(meta, state)).map_err(|e| NnError::Io(path.display().to_string(), e))
}

pub fn load(path: &Path) -> Result<(Meta, ModelState), NnError> {
    let bytes = std::fs::read(path).map_err(|e| NnError::Io(path.display().to_string(), e))?;
    decode(&bytes)
}
