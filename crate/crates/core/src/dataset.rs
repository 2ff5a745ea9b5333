//! Seeded synthetic grayscale images for desk-scale codec training.
//!
//! Index 0 of every dataset is [`smooth_gradient`]; the rest mix a linear
//! ramp, Gaussian blobs, and sinusoidal stripes.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::{GrayImage, ImageError};

/// Deterministic diagonal ramp with a soft radial bump and a faint ripple.
///
/// The ripple sits above the lowest 100 zigzag DCT frequencies, so truncated
/// reconstructions carry an error well above 8-bit rounding noise.
pub fn smooth_gradient(size: usize) -> GrayImage {
    let span = (size.max(2) - 1) as f64;
    GrayImage::from_fn(size, size, |x, y| {
        let u = x as f64 / span;
        let v = y as f64 / span;
        let ramp = 0.6 * u + 0.4 * v;
        let r2 = (u - 0.35).powi(2) + (v - 0.6).powi(2);
        let bump = 0.35 * (-r2 / 0.08).exp();
        let ripple = 0.02 * (2.0 * PI * (7.0 * u + 4.0 * v)).sin();
        let value = 255.0 * (0.1 + 0.55 * ramp + bump + ripple);
        value.round().clamp(0.0, 255.0) as u8
    })
    .expect("size >= 1")
}

/// One random mixture image.
pub fn synthetic<R: Rng + ?Sized>(rng: &mut R, size: usize) -> GrayImage {
    let span = (size.max(2) - 1) as f64;
    let angle = rng.gen_range(0.0..2.0 * PI);
    let (dx, dy) = (angle.cos(), angle.sin());
    let base = rng.gen_range(0.1..0.6);
    let slope = rng.gen_range(0.0..0.4);
    let blobs: Vec<(f64, f64, f64, f64)> = (0..rng.gen_range(1..=4))
        .map(|_| {
            (
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.05..0.3),
                rng.gen_range(-0.5..0.5),
            )
        })
        .collect();
    let stripes = if rng.gen_bool(0.5) {
        Some((
            rng.gen_range(1.0..6.0),
            rng.gen_range(0.0..PI),
            rng.gen_range(0.05..0.2),
        ))
    } else {
        None
    };
    GrayImage::from_fn(size, size, |x, y| {
        let u = x as f64 / span;
        let v = y as f64 / span;
        let mut value = base + slope * (dx * (u - 0.5) + dy * (v - 0.5));
        for &(cx, cy, radius, amp) in &blobs {
            let r2 = (u - cx).powi(2) + (v - cy).powi(2);
            value += amp * (-r2 / (2.0 * radius * radius)).exp();
        }
        if let Some((freq, theta, amp)) = stripes {
            value += amp * (2.0 * PI * freq * (u * theta.cos() + v * theta.sin())).sin();
        }
        (255.0 * value).round().clamp(0.0, 255.0) as u8
    })
    .expect("size >= 1")
}

pub fn make_dataset(count: usize, size: usize, seed: u64) -> Vec<GrayImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            if i == 0 {
                smooth_gradient(size)
            } else {
                synthetic(&mut rng, size)
            }
        })
        .collect()
}

pub fn file_name(index: usize) -> String {
    format!("img_{index:05}.pgm")
}

/// Write a dataset as P5 files; returns the paths in index order.
pub fn write_dataset(
    dir: &Path,
    count: usize,
    size: usize,
    seed: u64,
) -> Result<Vec<PathBuf>, ImageError> {
    std::fs::create_dir_all(dir)?;
    make_dataset(count, size, seed)
        .iter()
        .enumerate()
        .map(|(i, img)| {
            let path = dir.join(file_name(i));
            img.write(&path)?;
            Ok(path)
        })
        .collect()
}

/// Every `.pgm`/`.ppm`/`.pnm` file in `dir`, sorted by name.
pub fn list_images(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension().and_then(|e| e.to_str()).is_some_and(|e| {
                    matches!(e.to_ascii_lowercase().as_str(), "pgm" | "ppm" | "pnm")
                })
        })
        .collect();
    paths.sort();
    Ok(paths)
}
