//! Compress, permute and seal an image; and the reverse.
//!
//! Sending side: encode to a latent vector, shuffle its elements with the
//! Henon-derived permutation, serialize as little-endian `f32`, then seal with
//! ECIES. The receiving side undoes each step in reverse order.
//!
//! Payload layout:
//! ```text
//! "LSP1" | version:u8 | codec_id:u8 | m:u16 | width:u16 | height:u16 | K(33) | C(4m) | T(16)
//! ```
//! The 12 header bytes are passed to AES-GCM as associated data, so any
//! header edit that survives the structural checks fails authentication.

use p256::{PublicKey, SecretKey};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::codec::{CodecError, CodecKind, CodecModel, LatentVector};
use crate::ecies::{self, EciesCiphertext, EciesError, EciesKeypair};
use crate::henon::{deshuffle, shuffle, HenonError, Permutation, SymKey};
use crate::image::GrayImage;
use crate::metrics::{self, MetricsError, QualityReport, SsimParams};

pub const MAGIC: &[u8; 4] = b"LSP1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 12;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("bad payload header: {0}")]
    BadHeader(String),
    #[error("{0} does not fit the 16-bit header field")]
    Oversize(&'static str),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Chaos(#[from] HenonError),
    #[error(transparent)]
    Crypto(#[from] EciesError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayloadHeader {
    pub codec: CodecKind,
    pub m: u16,
    pub width: u16,
    pub height: u16,
}

impl PayloadHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[..4].copy_from_slice(MAGIC);
        out[4] = VERSION;
        out[5] = self.codec.id();
        out[6..8].copy_from_slice(&self.m.to_le_bytes());
        out[8..10].copy_from_slice(&self.width.to_le_bytes());
        out[10..12].copy_from_slice(&self.height.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PipelineError> {
        let bad = |msg: String| Err(PipelineError::BadHeader(msg));
        if bytes.len() < HEADER_LEN {
            return bad(format!("{} bytes is shorter than the header", bytes.len()));
        }
        if &bytes[..4] != MAGIC {
            return bad("unrecognized magic".into());
        }
        if bytes[4] != VERSION {
            return bad(format!("unsupported version {}", bytes[4]));
        }
        let Some(codec) = CodecKind::from_id(bytes[5]) else {
            return bad(format!("unknown codec id {}", bytes[5]));
        };
        let field = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        let header = Self {
            codec,
            m: field(6),
            width: field(8),
            height: field(10),
        };
        if header.m == 0 || header.width == 0 || header.height == 0 {
            return bad("zero latent length or image dimension".into());
        }
        if usize::from(header.m) > usize::from(header.width) * usize::from(header.height) {
            return bad("latent length exceeds pixel count".into());
        }
        Ok(header)
    }

    pub fn body_len(&self) -> usize {
        4 * usize::from(self.m) + ecies::OVERHEAD
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedPayload {
    pub header: PayloadHeader,
    pub body: EciesCiphertext,
}

impl EncryptedPayload {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.header.to_bytes().to_vec();
        out.extend_from_slice(&self.body.to_bytes());
        out
    }

    /// Header checks run before anything touches the ciphertext.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PipelineError> {
        let header = PayloadHeader::from_bytes(bytes)?;
        let body = &bytes[HEADER_LEN..];
        if body.len() != header.body_len() {
            return Err(PipelineError::BadHeader(format!(
                "body is {} bytes, header implies {}",
                body.len(),
                header.body_len()
            )));
        }
        Ok(Self {
            header,
            body: EciesCiphertext::from_bytes(body)?,
        })
    }

    pub fn len(&self) -> usize {
        HEADER_LEN + self.body.serialized_len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A fresh ECIES keypair and symmetric chaos key. A seed makes both
/// reproducible; otherwise they come from the operating system.
pub fn generate_keys(seed: Option<u64>) -> Result<(EciesKeypair, SymKey), EciesError> {
    let mut rng = match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_rng(rand::rngs::OsRng)
            .map_err(|e| EciesError::EntropyFailure(e.to_string()))?,
    };
    let keys = ecies::keygen_with_rng(&mut rng)?;
    Ok((keys, SymKey::random(&mut rng)))
}

/// Encode, permute and seal `img`. Also returns elapsed seconds.
pub fn compress_encrypt(
    img: &GrayImage,
    codec: &CodecModel,
    sym: &SymKey,
    public: &PublicKey,
) -> Result<(EncryptedPayload, f64), PipelineError> {
    let (out, secs) = metrics::timed(|| seal(img, codec, sym, public, None));
    Ok((out?, secs))
}

/// As [`compress_encrypt`] with a fixed ephemeral key seed, for reproducible output.
pub fn compress_encrypt_seeded(
    img: &GrayImage,
    codec: &CodecModel,
    sym: &SymKey,
    public: &PublicKey,
    eph_seed: [u8; 32],
) -> Result<EncryptedPayload, PipelineError> {
    seal(img, codec, sym, public, Some(eph_seed))
}

fn seal(
    img: &GrayImage,
    codec: &CodecModel,
    sym: &SymKey,
    public: &PublicKey,
    eph_seed: Option<[u8; 32]>,
) -> Result<EncryptedPayload, PipelineError> {
    let header = PayloadHeader {
        codec: codec.kind(),
        m: u16::try_from(codec.m()).map_err(|_| PipelineError::Oversize("latent length"))?,
        width: u16::try_from(img.width()).map_err(|_| PipelineError::Oversize("image width"))?,
        height: u16::try_from(img.height()).map_err(|_| PipelineError::Oversize("image height"))?,
    };
    let latent = codec.encode(img)?;
    let perm = Permutation::from_key(sym, latent.len())?;
    let shuffled = LatentVector::new(shuffle(latent.values(), &perm)?)?;
    let body = ecies::ecies_encrypt_with_aad(
        &shuffled.to_le_bytes(),
        &header.to_bytes(),
        public,
        eph_seed,
    )?;
    Ok(EncryptedPayload { header, body })
}

/// Open and un-permute the latent vector without decoding it.
pub fn decrypt_latent(
    payload: &EncryptedPayload,
    codec: &CodecModel,
    sym: &SymKey,
    secret: &SecretKey,
) -> Result<LatentVector, PipelineError> {
    let h = payload.header;
    if h.codec != codec.kind() {
        return Err(PipelineError::BadHeader(format!(
            "payload was produced by the {:?} codec, model is {:?}",
            h.codec,
            codec.kind()
        )));
    }
    if usize::from(h.m) != codec.m() {
        return Err(CodecError::ShapeMismatch(format!(
            "payload latent length {}, model expects {}",
            h.m,
            codec.m()
        ))
        .into());
    }
    codec.check_dims(usize::from(h.width), usize::from(h.height))?;
    let plain = ecies::ecies_decrypt_with_aad(&payload.body, &h.to_bytes(), secret)?;
    let shuffled = LatentVector::from_le_bytes(&plain)?;
    let perm = Permutation::from_key(sym, shuffled.len())?;
    Ok(LatentVector::new(deshuffle(shuffled.values(), &perm)?)?)
}

/// Open, un-permute and decode. Also returns elapsed seconds.
///
/// A wrong symmetric key is not detected: the result is a well-formed image
/// decoded from a scrambled latent.
pub fn decrypt_reconstruct(
    payload: &EncryptedPayload,
    codec: &CodecModel,
    sym: &SymKey,
    secret: &SecretKey,
) -> Result<(GrayImage, f64), PipelineError> {
    let (out, secs) = metrics::timed(|| {
        let latent = decrypt_latent(payload, codec, sym, secret)?;
        let (w, h) = (
            usize::from(payload.header.width),
            usize::from(payload.header.height),
        );
        Ok::<_, PipelineError>(codec.decode(&latent, w, h)?)
    });
    Ok((out?, secs))
}

pub fn evaluate(
    img: &GrayImage,
    codec: &CodecModel,
    sym: &SymKey,
    public: &PublicKey,
    secret: &SecretKey,
) -> Result<QualityReport, PipelineError> {
    evaluate_with(img, codec, sym, public, secret, &SsimParams::default())
}

pub fn evaluate_with(
    img: &GrayImage,
    codec: &CodecModel,
    sym: &SymKey,
    public: &PublicKey,
    secret: &SecretKey,
    ssim: &SsimParams,
) -> Result<QualityReport, PipelineError> {
    let (payload, encrypt_seconds) = compress_encrypt(img, codec, sym, public)?;
    let (out, decrypt_seconds) = decrypt_reconstruct(&payload, codec, sym, secret)?;
    let mse = metrics::mse(img, &out)?;
    Ok(QualityReport {
        ssim: metrics::ssim(img, &out, ssim)?,
        psnr: metrics::psnr_from_mse(mse, 8),
        mse,
        encrypt_seconds,
        decrypt_seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ecies::keygen;

    fn setup() -> (GrayImage, CodecModel, SymKey, ecies::EciesKeypair) {
        let img = GrayImage::from_fn(16, 12, |x, y| ((x * 13 + y * 7) % 256) as u8).unwrap();
        (
            img,
            CodecModel::dct(20).unwrap(),
            SymKey::new(0.1, 0.05).unwrap(),
            keygen(Some([3; 32])).unwrap(),
        )
    }

    #[test]
    fn seeded_key_generation() {
        let (k1, s1) = generate_keys(Some(42)).unwrap();
        let (k2, s2) = generate_keys(Some(42)).unwrap();
        assert_eq!((k1.private_bytes(), s1), (k2.private_bytes(), s2));
        let (k3, s3) = generate_keys(None).unwrap();
        assert_ne!(k1.private_bytes(), k3.private_bytes());
        assert_ne!(s1, s3);
        s3.validate(100).unwrap();
    }

    #[test]
    fn header_layout() {
        let h = PayloadHeader {
            codec: CodecKind::Neural,
            m: 100,
            width: 256,
            height: 3,
        };
        assert_eq!(h.to_bytes(), *b"LSP1\x01\x01\x64\x00\x00\x01\x03\x00");
        assert_eq!(PayloadHeader::from_bytes(&h.to_bytes()).unwrap(), h);
        assert_eq!(h.body_len(), 449);
    }

    #[test]
    fn round_trip_and_size() {
        let (img, codec, sym, keys) = setup();
        let (payload, t) = compress_encrypt(&img, &codec, &sym, keys.public()).unwrap();
        assert!(t >= 0.0);
        let bytes = payload.to_bytes();
        assert_eq!(bytes.len(), HEADER_LEN + 4 * 20 + 49);
        assert_eq!(payload.len(), bytes.len());
        let parsed = EncryptedPayload::from_bytes(&bytes).unwrap();
        let (out, _) = decrypt_reconstruct(&parsed, &codec, &sym, keys.secret()).unwrap();
        assert_eq!(out, codec.round_trip(&img).unwrap());
        let latent = decrypt_latent(&parsed, &codec, &sym, keys.secret()).unwrap();
        assert_eq!(latent, codec.encode(&img).unwrap());
    }

    #[test]
    fn fresh_ephemeral_keys() {
        let (img, codec, sym, keys) = setup();
        let (a, _) = compress_encrypt(&img, &codec, &sym, keys.public()).unwrap();
        let (b, _) = compress_encrypt(&img, &codec, &sym, keys.public()).unwrap();
        assert_eq!(a.header, b.header);
        assert_ne!(a.body, b.body);
        let s1 = compress_encrypt_seeded(&img, &codec, &sym, keys.public(), [9; 32]).unwrap();
        let s2 = compress_encrypt_seeded(&img, &codec, &sym, keys.public(), [9; 32]).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn degenerate_single_element_chain() {
        let img = GrayImage::from_fn(8, 8, |x, y| (x * 8 + y) as u8).unwrap();
        let codec = CodecModel::dct(1).unwrap();
        let sym = SymKey::new(0.0, 0.0).unwrap();
        assert_eq!(
            Permutation::from_key(&sym, 1).unwrap(),
            Permutation::identity(1)
        );
        let keys = keygen(Some([1; 32])).unwrap();
        let (payload, _) = compress_encrypt(&img, &codec, &sym, keys.public()).unwrap();
        assert_eq!(payload.body.ciphertext.len(), 4);
        let latent = decrypt_latent(&payload, &codec, &sym, keys.secret()).unwrap();
        // DC coefficient of an orthonormal transform: sum / sqrt(N), on [0, 1] pixels
        let dc = img
            .pixels()
            .iter()
            .map(|&p| f64::from(p) / 255.0)
            .sum::<f64>()
            / 8.0;
        assert!((f64::from(latent.values()[0]) - dc).abs() < 1e-6);
        let (out, _) = decrypt_reconstruct(&payload, &codec, &sym, keys.secret()).unwrap();
        assert_eq!(out, codec.round_trip(&img).unwrap());
    }

    #[test]
    fn wrong_private_key_fails_auth() {
        let (img, codec, sym, keys) = setup();
        let other = keygen(Some([4; 32])).unwrap();
        let (payload, _) = compress_encrypt(&img, &codec, &sym, keys.public()).unwrap();
        assert!(matches!(
            decrypt_reconstruct(&payload, &codec, &sym, other.secret()),
            Err(PipelineError::Crypto(EciesError::AuthFailure))
        ));
    }

    #[test]
    fn every_header_byte_is_protected() {
        let (img, codec, sym, keys) = setup();
        let (payload, _) = compress_encrypt(&img, &codec, &sym, keys.public()).unwrap();
        let bytes = payload.to_bytes();
        for i in 0..HEADER_LEN {
            for bit in 0..8 {
                let mut bad = bytes.clone();
                bad[i] ^= 1 << bit;
                let result = EncryptedPayload::from_bytes(&bad)
                    .and_then(|p| decrypt_reconstruct(&p, &codec, &sym, keys.secret()));
                match result {
                    Err(PipelineError::BadHeader(_))
                    | Err(PipelineError::Codec(_))
                    | Err(PipelineError::Crypto(EciesError::AuthFailure)) => {}
                    other => panic!("byte {i} bit {bit}: {other:?}"),
                }
            }
        }
    }

    #[test]
    fn truncated_and_mismatched_payloads() {
        let (img, codec, sym, keys) = setup();
        let (payload, _) = compress_encrypt(&img, &codec, &sym, keys.public()).unwrap();
        let bytes = payload.to_bytes();
        for n in [0, 5, HEADER_LEN, bytes.len() - 1] {
            assert!(matches!(
                EncryptedPayload::from_bytes(&bytes[..n]),
                Err(PipelineError::BadHeader(_))
            ));
        }
        let neural = CodecModel::Neural(crate::codec::NeuralCodec::zeros(16, 12, 20, &[4]));
        assert!(matches!(
            decrypt_reconstruct(&payload, &neural, &sym, keys.secret()),
            Err(PipelineError::BadHeader(_))
        ));
        let bigger = CodecModel::dct(21).unwrap();
        assert!(matches!(
            decrypt_reconstruct(&payload, &bigger, &sym, keys.secret()),
            Err(PipelineError::Codec(CodecError::ShapeMismatch(_)))
        ));
    }

    #[test]
    fn oversize_and_shape_errors() {
        let (_, _, sym, keys) = setup();
        let wide = GrayImage::filled(70_000, 1, 0).unwrap();
        assert!(matches!(
            compress_encrypt(&wide, &CodecModel::dct(4).unwrap(), &sym, keys.public()),
            Err(PipelineError::Oversize(_))
        ));
        let small = GrayImage::filled(3, 3, 0).unwrap();
        assert!(matches!(
            compress_encrypt(&small, &CodecModel::dct(10).unwrap(), &sym, keys.public()),
            Err(PipelineError::Codec(CodecError::MTooLarge { .. }))
        ));
    }

    #[test]
    fn lossless_evaluation() {
        let (img, _, sym, keys) = setup();
        let codec = CodecModel::dct(img.len()).unwrap();
        let report = evaluate(&img, &codec, &sym, keys.public(), keys.secret()).unwrap();
        assert_eq!(report.psnr, f64::INFINITY);
        assert_eq!(report.mse, 0.0);
        assert_eq!(report.ssim, 1.0);
    }
}
