//! Versioned binary codec model file.
//!
//! ```text
//! "LSCM" | version:u8 | kind:u8 | m:u32 | width:u32 | height:u32
//! neural only, for the encoder then the decoder:
//!   layer_count:u32 | dims:u32 x (layer_count + 1)
//!   per layer: weights f64 x (out * in) row-major, then bias f64 x out
//! ```
//! Integers and floats are little-endian. A DCT model stores zero width and
//! height, since it accepts any image with at least `m` pixels.

use std::path::Path;

use super::mlp::{Activation, Dense, Mlp};
use super::{CodecError, CodecKind, CodecModel, NeuralCodec};

pub const MAGIC: &[u8; 4] = b"LSCM";
pub const VERSION: u8 = 1;

/// Refuse layer descriptions implying absurd allocations.
const MAX_PARAMS: u64 = 1 << 28;

pub fn to_bytes(model: &CodecModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(model.kind().id());
    put_u32(&mut out, model.m());
    match model {
        CodecModel::Dct { .. } => {
            put_u32(&mut out, 0);
            put_u32(&mut out, 0);
        }
        CodecModel::Neural(n) => {
            put_u32(&mut out, n.width());
            put_u32(&mut out, n.height());
            put_mlp(&mut out, n.encoder());
            put_mlp(&mut out, n.decoder());
        }
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<CodecModel, CodecError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(CodecError::ModelFormat("bad magic".into()));
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(CodecError::ModelFormat(format!(
            "unsupported version {version}"
        )));
    }
    let kind = CodecKind::from_id(r.u8()?)
        .ok_or_else(|| CodecError::ModelFormat("unknown codec kind".into()))?;
    let m = r.u32()? as usize;
    let width = r.u32()? as usize;
    let height = r.u32()? as usize;
    let model = match kind {
        CodecKind::Dct => {
            if width != 0 || height != 0 {
                return Err(CodecError::ModelFormat(
                    "dct model must not fix dimensions".into(),
                ));
            }
            CodecModel::dct(m)?
        }
        CodecKind::Neural => {
            let encoder = r.mlp(Activation::Identity)?;
            let decoder = r.mlp(Activation::Sigmoid)?;
            let codec = NeuralCodec::from_parts(width, height, encoder, decoder)?;
            if codec.m() != m {
                return Err(CodecError::ModelFormat(format!(
                    "header m = {m}, bottleneck = {}",
                    codec.m()
                )));
            }
            CodecModel::Neural(codec)
        }
    };
    if r.pos != bytes.len() {
        return Err(CodecError::ModelFormat("trailing bytes".into()));
    }
    Ok(model)
}

pub fn read(path: &Path) -> Result<CodecModel, CodecError> {
    from_bytes(&std::fs::read(path)?)
}

pub fn write(model: &CodecModel, path: &Path) -> Result<(), CodecError> {
    crate::image::write_atomic(path, &to_bytes(model))?;
    Ok(())
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    let v = u32::try_from(v).expect("dimension fits in u32");
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_mlp(out: &mut Vec<u8>, net: &Mlp) {
    put_u32(out, net.layers.len());
    for d in net.dims() {
        put_u32(out, d);
    }
    for layer in &net.layers {
        for w in layer.weights.iter().chain(&layer.bias) {
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| CodecError::ModelFormat("unexpected end of file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64, CodecError> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn mlp(&mut self, output: Activation) -> Result<Mlp, CodecError> {
        let count = self.u32()? as usize;
        if count == 0 || count > 64 {
            return Err(CodecError::ModelFormat(format!("layer count {count}")));
        }
        let dims = (0..=count)
            .map(|_| self.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let total: u64 = dims
            .windows(2)
            .map(|w| (w[0] as u64 + 1) * w[1] as u64)
            .sum();
        if total > MAX_PARAMS || total * 8 > (self.bytes.len() - self.pos) as u64 {
            return Err(CodecError::ModelFormat("layer sizes exceed file".into()));
        }
        let mut layers = Vec::with_capacity(count);
        for w in dims.windows(2) {
            let (inputs, outputs) = (w[0], w[1]);
            let weights = (0..inputs * outputs)
                .map(|_| self.f64())
                .collect::<Result<Vec<_>, _>>()?;
            let bias = (0..outputs)
                .map(|_| self.f64())
                .collect::<Result<Vec<_>, _>>()?;
            layers.push(Dense {
                inputs,
                outputs,
                weights,
                bias,
            });
        }
        Ok(Mlp { layers, output })
    }
}
