//! Reconstruction quality metrics.
//!
//! PSNR compares magnitude images against the reference peak; HFEN is the ℓ2
//! distance between Laplacian-of-Gaussian filtered magnitude images,
//! emphasizing edges and fine structure. Identical magnitudes produce the
//! documented +∞ PSNR sentinel.

use crate::error::{Error, Result};
use crate::patches::ImageGrid;

/// PSNR (dB), HFEN, and the reference peak the PSNR was computed against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub psnr_db: f64,
    pub hfen: f64,
    pub reference_peak: f64,
}

const LOG_KERNEL_SIDE: usize = 15;
const LOG_SIGMA: f64 = 1.5;

fn check_dims(recon: &ImageGrid, reference: &ImageGrid) -> Result<()> {
    if recon.shape() != reference.shape() {
        return Err(Error::Config(format!(
            "reconstruction is {:?}, reference is {:?}",
            recon.shape(),
            reference.shape()
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB between magnitude images:
/// 20·log10(peak(|reference|)·√p / ‖|recon| − |reference|‖₂).
/// Returns +∞ when the magnitudes are identical.
pub fn psnr(recon: &ImageGrid, reference: &ImageGrid) -> Result<f64> {
    check_dims(recon, reference)?;
    let peak = reference.as_slice().iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    if peak == 0.0 {
        return Err(Error::Argument("reference image is identically zero".into()));
    }
    let err_sq: f64 = recon
        .as_slice()
        .iter()
        .zip(reference.as_slice())
        .map(|(a, b)| {
            let d = a.norm() - b.norm();
            d * d
        })
        .sum();
    if err_sq == 0.0 {
        return Ok(f64::INFINITY);
    }
    let p = recon.len() as f64;
    Ok(20.0 * (peak * p.sqrt() / err_sq.sqrt()).log10())
}

/// The 15×15 σ=1.5 rotationally symmetric LoG kernel: Gaussian-normalized
/// samples of (r² − 2σ²)/σ⁴ · exp(−r²/2σ²), mean-subtracted so the kernel
/// sums to exactly zero (a constant image filters to zero).
fn log_kernel() -> Vec<f64> {
    let half = (LOG_KERNEL_SIDE / 2) as isize;
    let sigma_sq = LOG_SIGMA * LOG_SIGMA;
    let mut gaussian = Vec::with_capacity(LOG_KERNEL_SIDE * LOG_KERNEL_SIDE);
    for r in -half..=half {
        for c in -half..=half {
            let rad_sq = (r * r + c * c) as f64;
            gaussian.push((-rad_sq / (2.0 * sigma_sq)).exp());
        }
    }
    let gauss_sum: f64 = gaussian.iter().sum();
    let mut kernel = Vec::with_capacity(gaussian.len());
    let mut idx = 0;
    for r in -half..=half {
        for c in -half..=half {
            let rad_sq = (r * r + c * c) as f64;
            kernel.push(gaussian[idx] / gauss_sum * (rad_sq - 2.0 * sigma_sq) / (sigma_sq * sigma_sq));
            idx += 1;
        }
    }
    let mean = kernel.iter().sum::<f64>() / kernel.len() as f64;
    for v in &mut kernel {
        *v -= mean;
    }
    kernel
}

fn reflect(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -1 - i;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Filters the magnitude image with the LoG kernel under symmetric
/// (edge-duplicating) boundary padding.
fn log_filter_magnitude(image: &ImageGrid) -> Vec<f64> {
    let (h, w) = image.shape();
    let kernel = log_kernel();
    let half = (LOG_KERNEL_SIDE / 2) as isize;
    let mag: Vec<f64> = image.as_slice().iter().map(|z| z.norm()).collect();
    let mut out = vec![0.0f64; h * w];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let mut acc = 0.0;
            let mut k = 0;
            for dr in -half..=half {
                let rr = reflect(r + dr, h);
                for dc in -half..=half {
                    let cc = reflect(c + dc, w);
                    acc += kernel[k] * mag[rr * w + cc];
                    k += 1;
                }
            }
            out[r as usize * w + c as usize] = acc;
        }
    }
    out
}

/// High-frequency error norm: ‖LoG(|recon|) − LoG(|reference|)‖₂.
pub fn hfen(recon: &ImageGrid, reference: &ImageGrid) -> Result<f64> {
    check_dims(recon, reference)?;
    let a = log_filter_magnitude(recon);
    let b = log_filter_magnitude(reference);
    Ok(a.iter()
        .zip(&b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Computes both metrics plus the reference peak in one pass.
pub fn report(recon: &ImageGrid, reference: &ImageGrid) -> Result<MetricReport> {
    let psnr_db = psnr(recon, reference)?;
    let hfen_val = hfen(recon, reference)?;
    let reference_peak = reference.as_slice().iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    Ok(MetricReport { psnr_db, hfen: hfen_val, reference_peak })
}
