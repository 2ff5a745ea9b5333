//! Truncated orthonormal 2-D DCT-II codec.
//!
//! Pixels are scaled to `[0, 1]`, transformed with the separable orthonormal
//! DCT-II, and the coefficients are read in zigzag order (JPEG's scan,
//! generalized to rectangles). The first `m` become the latent vector.

use super::{CodecError, LatentVector};
use crate::image::GrayImage;

/// Cosine basis and scan order for one image size.
pub struct DctPlan {
    width: usize,
    height: usize,
    basis_w: Vec<f64>,
    basis_h: Vec<f64>,
    zigzag: Vec<usize>,
}

impl DctPlan {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            basis_w: basis(width),
            basis_h: basis(height),
            zigzag: zigzag(width, height),
        }
    }

    /// Row-major positions `row * width + col` in scan order.
    pub fn zigzag(&self) -> &[usize] {
        &self.zigzag
    }

    /// Full forward transform of a row-major `height x width` array,
    /// returned in row-major coefficient layout.
    pub fn forward(&self, samples: &[f64]) -> Vec<f64> {
        let (w, h) = (self.width, self.height);
        debug_assert_eq!(samples.len(), w * h);
        // rows: tmp[y][u] = sum_x s[y][x] * cw[u][x]
        let mut tmp = vec![0.0; w * h];
        for y in 0..h {
            let row = &samples[y * w..(y + 1) * w];
            for u in 0..w {
                let b = &self.basis_w[u * w..(u + 1) * w];
                tmp[y * w + u] = dot(row, b);
            }
        }
        // columns: out[v][u] = sum_y ch[v][y] * tmp[y][u]
        let mut out = vec![0.0; w * h];
        for v in 0..h {
            let b = &self.basis_h[v * h..(v + 1) * h];
            for (y, &c) in b.iter().enumerate() {
                let src = &tmp[y * w..(y + 1) * w];
                let dst = &mut out[v * w..(v + 1) * w];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += c * s;
                }
            }
        }
        out
    }

    /// Inverse of [`DctPlan::forward`].
    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        let (w, h) = (self.width, self.height);
        debug_assert_eq!(coeffs.len(), w * h);
        // columns: tmp[y][u] = sum_v ch[v][y] * c[v][u]
        let mut tmp = vec![0.0; w * h];
        for v in 0..h {
            let src = &coeffs[v * w..(v + 1) * w];
            if src.iter().all(|&c| c == 0.0) {
                continue;
            }
            let b = &self.basis_h[v * h..(v + 1) * h];
            for (y, &c) in b.iter().enumerate() {
                let dst = &mut tmp[y * w..(y + 1) * w];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += c * s;
                }
            }
        }
        // rows: out[y][x] = sum_u cw[u][x] * tmp[y][u]
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            let src = &tmp[y * w..(y + 1) * w];
            let dst = &mut out[y * w..(y + 1) * w];
            for (u, &c) in src.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let b = &self.basis_w[u * w..(u + 1) * w];
                for (d, &bx) in dst.iter_mut().zip(b) {
                    *d += c * bx;
                }
            }
        }
        out
    }

    /// All coefficients of `img / 255`, in zigzag order, unrounded.
    pub fn coefficients(&self, img: &GrayImage) -> Vec<f64> {
        let full = self.forward(&img.normalized());
        self.zigzag.iter().map(|&i| full[i]).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `basis[k * n + i] = alpha(k) cos(pi (2i + 1) k / 2n)`.
fn basis(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let mut out = Vec::with_capacity(n * n);
    for k in 0..n {
        let alpha = if k == 0 {
            (1.0 / nf).sqrt()
        } else {
            (2.0 / nf).sqrt()
        };
        for i in 0..n {
            let angle = std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf);
            out.push(alpha * angle.cos());
        }
    }
    out
}

/// Anti-diagonal scan: even diagonals run bottom-left to top-right, odd ones
/// top-right to bottom-left.
pub fn zigzag(width: usize, height: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(width * height);
    for s in 0..(width + height - 1) {
        let row_lo = s.saturating_sub(width - 1);
        let row_hi = s.min(height - 1);
        if s % 2 == 0 {
            for row in (row_lo..=row_hi).rev() {
                order.push(row * width + (s - row));
            }
        } else {
            for row in row_lo..=row_hi {
                order.push(row * width + (s - row));
            }
        }
    }
    order
}

pub fn dct_encode(img: &GrayImage, m: usize) -> Result<LatentVector, CodecError> {
    let capacity = img.len();
    if m == 0 || m > capacity {
        return Err(CodecError::MTooLarge { m, capacity });
    }
    let plan = DctPlan::new(img.width(), img.height());
    let coeffs = plan.coefficients(img);
    LatentVector::from_f64(&coeffs[..m])
}

pub fn dct_decode(v: &LatentVector, width: usize, height: usize) -> Result<GrayImage, CodecError> {
    let capacity = width * height;
    if v.len() > capacity {
        return Err(CodecError::MTooLarge {
            m: v.len(),
            capacity,
        });
    }
    let plan = DctPlan::new(width, height);
    let mut coeffs = vec![0.0; capacity];
    for (&pos, &c) in plan.zigzag.iter().zip(v.values()) {
        coeffs[pos] = f64::from(c);
    }
    let samples = plan.inverse(&coeffs);
    let pixels = samples.iter().map(|&s| to_pixel(s * 255.0)).collect();
    Ok(GrayImage::new(width, height, pixels)?)
}

/// Round half-to-even, clamp to the 8-bit range.
pub(crate) fn to_pixel(value: f64) -> u8 {
    value.round_ties_even().clamp(0.0, 255.0) as u8
}
