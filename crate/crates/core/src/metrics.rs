//! Reconstruction quality metrics: MSE, PSNR and SSIM, plus wall-clock timing.

use std::fmt;
use std::time::Instant;

use thiserror::Error;

use crate::image::GrayImage;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimMismatch(usize, usize, usize, usize),
    #[error("window side {window} exceeds the smaller image side {side}")]
    WindowTooLarge { window: usize, side: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsimWindow {
    /// One evaluation over whole-image statistics.
    Global,
    /// Mean over every `w x w` window at stride 1.
    Uniform(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
    pub window: SsimWindow,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 255.0,
            window: SsimWindow::Global,
        }
    }
}

impl SsimParams {
    pub fn windowed(w: usize) -> Self {
        Self {
            window: SsimWindow::Uniform(w),
            ..Self::default()
        }
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }
}

fn check_dims(a: &GrayImage, b: &GrayImage) -> Result<(), MetricsError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricsError::DimMismatch(
            a.width(),
            a.height(),
            b.width(),
            b.height(),
        ));
    }
    Ok(())
}

pub fn mse(a: &GrayImage, b: &GrayImage) -> Result<f64, MetricsError> {
    check_dims(a, b)?;
    let sum: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&p, &q)| {
            let d = f64::from(p) - f64::from(q);
            d * d
        })
        .sum();
    Ok(sum / a.len() as f64)
}

/// `10 log10((2^bits - 1)^2 / mse)`; infinite for zero error.
pub fn psnr_from_mse(mse: f64, bits: u32) -> f64 {
    if mse == 0.0 {
        return f64::INFINITY;
    }
    let peak = 2f64.powi(bits as i32) - 1.0;
    10.0 * (peak * peak / mse).log10()
}

pub fn psnr(a: &GrayImage, b: &GrayImage, bits: u32) -> Result<f64, MetricsError> {
    Ok(psnr_from_mse(mse(a, b)?, bits))
}

pub fn ssim(a: &GrayImage, b: &GrayImage, params: &SsimParams) -> Result<f64, MetricsError> {
    check_dims(a, b)?;
    let (w, h) = (a.width(), a.height());
    match params.window {
        SsimWindow::Global => Ok(region_ssim(a, b, 0, 0, w, h, params)),
        SsimWindow::Uniform(side) => {
            let limit = w.min(h);
            if side == 0 || side > limit {
                return Err(MetricsError::WindowTooLarge {
                    window: side,
                    side: limit,
                });
            }
            let mut total = 0.0;
            let mut count = 0usize;
            for y0 in 0..=h - side {
                for x0 in 0..=w - side {
                    total += region_ssim(a, b, x0, y0, side, side, params);
                    count += 1;
                }
            }
            Ok(total / count as f64)
        }
    }
}

/// SSIM of one rectangle using population moments.
fn region_ssim(
    a: &GrayImage,
    b: &GrayImage,
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
    params: &SsimParams,
) -> f64 {
    let n = (w * h) as f64;
    let pairs = || {
        (y0..y0 + h).flat_map(move |y| {
            (x0..x0 + w).map(move |x| (f64::from(a.get(x, y)), f64::from(b.get(x, y))))
        })
    };
    let (sa, sb) = pairs().fold((0.0, 0.0), |(sa, sb), (p, q)| (sa + p, sb + q));
    let (mu_a, mu_b) = (sa / n, sb / n);
    let (mut var_a, mut var_b, mut cov) = (0.0, 0.0, 0.0);
    for (p, q) in pairs() {
        let (da, db) = (p - mu_a, q - mu_b);
        var_a += da * da;
        var_b += db * db;
        cov += da * db;
    }
    let (var_a, var_b, cov) = (var_a / n, var_b / n, cov / n);
    let (c1, c2) = (params.c1(), params.c2());
    ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
        / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2))
}

/// Run `f`, returning its result and the elapsed monotonic time in seconds.
pub fn timed<R>(f: impl FnOnce() -> R) -> (R, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub ssim: f64,
    pub psnr: f64,
    pub mse: f64,
    pub encrypt_seconds: f64,
    pub decrypt_seconds: f64,
}

impl QualityReport {
    pub const CSV_HEADER: &'static str = "ssim,psnr_db,mse,encrypt_s,decrypt_s";

    pub fn csv_row(&self) -> String {
        [
            self.ssim,
            self.psnr,
            self.mse,
            self.encrypt_seconds,
            self.decrypt_seconds,
        ]
        .map(format_sig6)
        .join(",")
    }
}

impl fmt::Display for QualityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.csv_row())
    }
}

/// `%g`-style formatting with six significant digits.
pub fn format_sig6(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
