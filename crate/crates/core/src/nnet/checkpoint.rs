//! Binary predictor checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic      8 bytes   "OODHCKPT"
//! version    u32       1
//! activation u32       0 = relu
//! n_sizes    u32       number of layer sizes
//! sizes      n_sizes x u64
//! params     for each layer: weights (fan_in x fan_out, row-major) then
//!            bias (fan_out), as f64
//! ```

use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, Predictor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"OODHCKPT";
pub const VERSION: u32 = 1;

pub fn to_bytes(p: &Predictor) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 8 * (p.layer_sizes.len() + p.num_params()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&(p.layer_sizes.len() as u32).to_le_bytes());
    for &s in &p.layer_sizes {
        out.extend_from_slice(&(s as u64).to_le_bytes());
    }
    for (w, b) in p.weights.iter().zip(&p.biases) {
        for v in w.iter().chain(b.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::Checkpoint(format!("truncated checkpoint at byte {}", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
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

pub fn from_bytes(buf: &[u8]) -> Result<Predictor> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let activation = match r.u32()? {
        0 => Activation::Relu,
        other => return Err(Error::Checkpoint(format!("unknown activation code {other}"))),
    };
    let n = r.u32()? as usize;
    if n < 2 {
        return Err(Error::Checkpoint(format!("checkpoint declares {n} layer sizes")));
    }
    let sizes = (0..n)
        .map(|_| r.u64().map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    if sizes.contains(&0) {
        return Err(Error::Checkpoint("zero-width layer in checkpoint".into()));
    }
    let mut weights = Vec::with_capacity(n - 1);
    let mut biases = Vec::with_capacity(n - 1);
    for l in 0..n - 1 {
        let (fi, fo) = (sizes[l], sizes[l + 1]);
        let w = (0..fi * fo).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let b = (0..fo).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        weights.push(Array2::from_shape_vec((fi, fo), w).expect("shape matches length"));
        biases.push(Array1::from(b));
    }
    if r.pos != buf.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after parameters",
            buf.len() - r.pos
        )));
    }
    let p = Predictor {
        layer_sizes: sizes,
        weights,
        biases,
        activation,
    };
    if !p.is_finite() {
        return Err(Error::Checkpoint("checkpoint holds non-finite parameters".into()));
    }
    Ok(p)
}

pub fn save(p: &Predictor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(p)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<Predictor> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::init_predictor;

    #[test]
    fn round_trip_is_exact() {
        let p = init_predictor(&[3, 5, 2], 11).unwrap();
        let bytes = to_bytes(&p);
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(bytes.len(), 8 + 4 + 4 + 4 + 3 * 8 + 8 * p.num_params());
        assert_eq!(from_bytes(&bytes).unwrap(), p);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let p = init_predictor(&[3, 5, 2], 11).unwrap();
        let bytes = to_bytes(&p);
        assert!(from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(from_bytes(&extra).is_err());
    }
}
