//! Synthetic test images: the classic ten-ellipse head phantom and a
//! seeded superposition of smooth Gaussian blobs. Both produce real-valued
//! images in [0, 1].

use xbcs::{ImageGrid, C64};

/// (semi-axis a, semi-axis b, center x, center y, rotation degrees, additive intensity)
const HEAD_ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
    (0.69, 0.92, 0.0, 0.0, 0.0, 1.0),
    (0.6624, 0.8740, 0.0, -0.0184, 0.0, -0.8),
    (0.1100, 0.3100, 0.22, 0.0, -18.0, -0.2),
    (0.1600, 0.4100, -0.22, 0.0, 18.0, -0.2),
    (0.2100, 0.2500, 0.0, 0.35, 0.0, 0.1),
    (0.0460, 0.0460, 0.0, 0.1, 0.0, 0.1),
    (0.0460, 0.0460, 0.0, -0.1, 0.0, 0.1),
    (0.0460, 0.0230, -0.08, -0.605, 0.0, 0.1),
    (0.0230, 0.0230, 0.0, -0.606, 0.0, 0.1),
    (0.0230, 0.0460, 0.06, -0.605, 0.0, 0.1),
];

pub fn shepp_logan(height: usize, width: usize) -> ImageGrid {
    ImageGrid::from_fn(height, width, |r, c| {
        let x = (c as f64 + 0.5 - width as f64 / 2.0) / (width as f64 / 2.0);
        let y = (height as f64 / 2.0 - r as f64 - 0.5) / (height as f64 / 2.0);
        let mut v = 0.0;
        for &(a, b, x0, y0, deg, intensity) in &HEAD_ELLIPSES {
            let phi = deg.to_radians();
            let t1 = (x - x0) * phi.cos() + (y - y0) * phi.sin();
            let t2 = -(x - x0) * phi.sin() + (y - y0) * phi.cos();
            if (t1 / a).powi(2) + (t2 / b).powi(2) <= 1.0 {
                v += intensity;
            }
        }
        C64::new(v.clamp(0.0, 1.0), 0.0)
    })
}

pub fn smooth_blobs(height: usize, width: usize, seed: u64) -> ImageGrid {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let blobs: Vec<(f64, f64, f64, f64, f64, f64)> = (0..12)
        .map(|_| {
            (
                rng.random_range(0.1..0.9),  // center x
                rng.random_range(0.1..0.9),  // center y
                rng.random_range(0.05..0.2), // sigma along first axis
                rng.random_range(0.05..0.2), // sigma along second axis
                rng.random_range(0.0..std::f64::consts::PI),
                rng.random_range(0.3..1.0), // amplitude
            )
        })
        .collect();
    let mut values = vec![0.0f64; height * width];
    let mut peak = 0.0f64;
    for r in 0..height {
        for c in 0..width {
            let x = (c as f64 + 0.5) / width as f64;
            let y = (r as f64 + 0.5) / height as f64;
            let mut v = 0.0;
            for &(cx, cy, s1, s2, phi, amp) in &blobs {
                let t1 = (x - cx) * phi.cos() + (y - cy) * phi.sin();
                let t2 = -(x - cx) * phi.sin() + (y - cy) * phi.cos();
                v += amp * (-0.5f64 * ((t1 / s1).powi(2) + (t2 / s2).powi(2))).exp();
            }
            values[r * width + c] = v;
            peak = peak.max(v);
        }
    }
    ImageGrid::from_fn(height, width, |r, c| C64::new(values[r * width + c] / peak, 0.0))
}
