//! Weight wire format.
//!
//! ```text
//! u32 LE   number of layer dims
//! u32 LE   each dim
//! payload  None:       every weight as f64 LE, layer-major (W1, b1, W2, b2, ...)
//!          Quantized8: per tensor, f64 LE min, f64 LE max, then one u8 code
//!                      per element; value = min + code * (max - min) / 255
//! ```

use super::{LearningError, ModelParams, ModelShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Compression {
    #[default]
    None,
    Quantized8,
}

pub fn serialize(params: &ModelParams, compression: Compression) -> Vec<u8> {
    let shape = params.shape();
    let dims = shape.dims();
    let w = params.weights();
    let mut out = Vec::with_capacity(4 * (dims.len() + 1) + 8 * w.len());
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    match compression {
        Compression::None => {
            for v in w {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Compression::Quantized8 => {
            for range in shape.tensor_ranges() {
                let t = &w[range];
                let min = t.iter().copied().fold(f64::INFINITY, f64::min);
                let max = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                out.extend_from_slice(&min.to_le_bytes());
                out.extend_from_slice(&max.to_le_bytes());
                let span = max - min;
                for &v in t {
                    let code = if span > 0.0 {
                        ((v - min) / span * 255.0).round().clamp(0.0, 255.0) as u8
                    } else {
                        0
                    };
                    out.push(code);
                }
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LearningError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(LearningError::Format(format!(
                "truncated: needed {n} bytes at offset {}, have {}",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, LearningError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64, LearningError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn deserialize(bytes: &[u8], shape: &ModelShape, compression: Compression) -> Result<ModelParams, LearningError> {
    let mut r = Reader { bytes, pos: 0 };
    let count = r.u32()? as usize;
    if count != shape.dims().len() {
        return Err(LearningError::ShapeMismatch(format!(
            "header lists {count} dims, expected {}",
            shape.dims().len()
        )));
    }
    for (i, &d) in shape.dims().iter().enumerate() {
        let got = r.u32()? as usize;
        if got != d {
            return Err(LearningError::ShapeMismatch(format!("dim {i} is {got}, expected {d}")));
        }
    }
    let mut weights = Vec::with_capacity(shape.param_count());
    match compression {
        Compression::None => {
            for _ in 0..shape.param_count() {
                weights.push(r.f64()?);
            }
        }
        Compression::Quantized8 => {
            for range in shape.tensor_ranges() {
                let min = r.f64()?;
                let max = r.f64()?;
                if !(min.is_finite() && max.is_finite() && min <= max) {
                    return Err(LearningError::Format(format!("bad tensor range [{min}, {max}]")));
                }
                let step = (max - min) / 255.0;
                for &code in r.take(range.len())? {
                    weights.push(if code == 0 { min } else { min + f64::from(code) * step });
                }
            }
        }
    }
    if r.pos != bytes.len() {
        return Err(LearningError::Format(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    ModelParams::new(shape.clone(), weights)
}
