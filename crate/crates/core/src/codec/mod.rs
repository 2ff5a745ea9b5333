//! Image <-> latent vector codecs.
//!
//! The pipeline only needs an encoder `image -> latent` and a generator
//! `latent -> image`. Two implementations are provided: a deterministic
//! truncated DCT and a small fully-connected autoencoder trained in-process
//! (optionally with an image discriminator).

pub mod adversarial;
pub mod dct;
pub mod mlp;
pub mod model_file;
pub mod neural;

use thiserror::Error;

use crate::image::{GrayImage, ImageError};

pub use adversarial::{
    gan_objective, train_adversarial, AdversarialConfig, AdversarialReport, Discriminator,
};
pub use dct::{dct_decode, dct_encode, DctPlan};
pub use neural::{train_autoencoder, NeuralCodec, TrainConfig, TrainReport};

/// Latent length used throughout unless configured otherwise.
pub const DEFAULT_M: usize = 100;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("latent size {m} is invalid for an image of {capacity} pixels")]
    MTooLarge { m: usize, capacity: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("latent vector must be non-empty and finite")]
    BadLatent,
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("malformed model file: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Compressed representation; values are 32-bit floats so that the wire
/// serialization is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentVector {
    values: Vec<f32>,
}

impl LatentVector {
    pub fn new(values: Vec<f32>) -> Result<Self, CodecError> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(CodecError::BadLatent);
        }
        Ok(Self { values })
    }

    /// Round each value to the nearest `f32`.
    pub fn from_f64(values: &[f64]) -> Result<Self, CodecError> {
        Self::new(values.iter().map(|&v| v as f32).collect())
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }

    /// `m` little-endian 32-bit floats.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn from_le_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        if !bytes.len().is_multiple_of(4) {
            return Err(CodecError::BadLatent);
        }
        Self::new(
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum CodecKind {
    Dct = 0,
    Neural = 1,
}

impl CodecKind {
    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(Self::Dct),
            1 => Some(Self::Neural),
            _ => None,
        }
    }
}

/// A codec usable by the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum CodecModel {
    /// Works for any image size with at least `m` pixels.
    Dct {
        m: usize,
    },
    Neural(NeuralCodec),
}

impl CodecModel {
    pub fn dct(m: usize) -> Result<Self, CodecError> {
        if m == 0 {
            return Err(CodecError::Config("latent size must be at least 1".into()));
        }
        Ok(Self::Dct { m })
    }

    pub fn kind(&self) -> CodecKind {
        match self {
            Self::Dct { .. } => CodecKind::Dct,
            Self::Neural(_) => CodecKind::Neural,
        }
    }

    pub fn m(&self) -> usize {
        match self {
            Self::Dct { m } => *m,
            Self::Neural(n) => n.m(),
        }
    }

    /// Fail unless images of this size can pass through the codec.
    pub fn check_dims(&self, width: usize, height: usize) -> Result<(), CodecError> {
        match self {
            Self::Dct { m } => {
                if *m > width * height {
                    return Err(CodecError::MTooLarge {
                        m: *m,
                        capacity: width * height,
                    });
                }
                Ok(())
            }
            Self::Neural(n) => {
                if (width, height) != (n.width(), n.height()) {
                    return Err(CodecError::ShapeMismatch(format!(
                        "model expects {}x{} images, got {width}x{height}",
                        n.width(),
                        n.height()
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn encode(&self, img: &GrayImage) -> Result<LatentVector, CodecError> {
        self.check_dims(img.width(), img.height())?;
        match self {
            Self::Dct { m } => dct_encode(img, *m),
            Self::Neural(n) => n.encode(img),
        }
    }

    pub fn decode(
        &self,
        v: &LatentVector,
        width: usize,
        height: usize,
    ) -> Result<GrayImage, CodecError> {
        self.check_dims(width, height)?;
        if v.len() != self.m() {
            return Err(CodecError::ShapeMismatch(format!(
                "latent has {} values, codec expects {}",
                v.len(),
                self.m()
            )));
        }
        match self {
            Self::Dct { .. } => dct_decode(v, width, height),
            Self::Neural(n) => n.decode(v),
        }
    }

    pub fn round_trip(&self, img: &GrayImage) -> Result<GrayImage, CodecError> {
        self.decode(&self.encode(img)?, img.width(), img.height())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn latent_rejects_non_finite() {
        assert!(LatentVector::new(vec![]).is_err());
        assert!(LatentVector::new(vec![1.0, f32::NAN]).is_err());
        assert!(LatentVector::from_le_bytes(&[0, 0, 0]).is_err());
        assert!(LatentVector::from_le_bytes(&f32::INFINITY.to_le_bytes()).is_err());
    }

    #[test]
    fn codec_kind_ids() {
        assert_eq!(CodecKind::from_id(0), Some(CodecKind::Dct));
        assert_eq!(CodecKind::from_id(1), Some(CodecKind::Neural));
        assert_eq!(CodecKind::from_id(2), None);
    }

    #[test]
    fn dct_model_contract() {
        let codec = CodecModel::dct(10).unwrap();
        let img = GrayImage::from_fn(7, 5, |x, y| (x * 30 + y * 7) as u8).unwrap();
        let out = codec.round_trip(&img).unwrap();
        assert_eq!((out.width(), out.height()), (7, 5));
        assert!(codec.encode(&GrayImage::filled(3, 3, 0).unwrap()).is_err());
        let short = LatentVector::new(vec![0.0; 9]).unwrap();
        assert!(matches!(
            codec.decode(&short, 7, 5),
            Err(CodecError::ShapeMismatch(_))
        ));
        assert!(CodecModel::dct(0).is_err());
    }

    proptest! {
        #[test]
        fn latent_bytes_round_trip(values in prop::collection::vec(-1e30f32..1e30, 1..64)) {
            let v = LatentVector::new(values).unwrap();
            let back = LatentVector::from_le_bytes(&v.to_le_bytes()).unwrap();
            prop_assert_eq!(back, v);
        }

        #[test]
        fn dct_codec_preserves_dims(w in 1usize..12, h in 1usize..12, seed in any::<u64>(), m_frac in 0.0f64..1.0) {
            let mut state = seed;
            let img = GrayImage::from_fn(w, h, |_, _| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 56) as u8
            }).unwrap();
            let m = 1 + ((w * h - 1) as f64 * m_frac) as usize;
            let out = CodecModel::dct(m).unwrap().round_trip(&img).unwrap();
            prop_assert_eq!((out.width(), out.height()), (w, h));
        }
    }
}
