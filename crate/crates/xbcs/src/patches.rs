//! Complex image grid and the patch extraction operators P_j.
//!
//! A patch is a `side`×`side` window of the image, vectorized column-major
//! (index `i = c_local * side + r_local`). Patches are enumerated in raster
//! order of their top-left corners: row-major over `(r0, c0)`. With
//! `wrap = true` the windows wrap around the image borders (periodic
//! boundary), so with `stride = 1` there is exactly one patch per pixel and
//! the patch set is invariant under circular shifts of the image.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::C64;

/// Dense complex image on an `height`×`width` grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    data: Vec<C64>,
}

impl ImageGrid {
    /// Builds a grid from row-major samples. All samples must be finite.
    pub fn new(height: usize, width: usize, data: Vec<C64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Argument("image dimensions must be positive".into()));
        }
        if data.len() != height * width {
            return Err(Error::Argument(format!(
                "image data has {} samples, expected {}x{}={}",
                data.len(),
                height,
                width,
                height * width
            )));
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Argument("image contains non-finite samples".into()));
        }
        Ok(Self { height, width, data })
    }

    /// All-zero grid.
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![C64::new(0.0, 0.0); height * width],
        }
    }

    /// Builds a grid by evaluating `f(row, col)`.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Number of pixels p.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.width + col]
    }

    pub fn get_mut(&mut self, row: usize, col: usize) -> &mut C64 {
        &mut self.data[row * self.width + col]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    /// Euclidean norm of the vectorized image.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Scales every sample in place.
    pub fn scale(&mut self, factor: f64) {
        for z in &mut self.data {
            *z *= factor;
        }
    }
}

/// Patch geometry: window side length, stride between corners, boundary rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchConfig {
    pub side: usize,
    pub stride: usize,
    pub wrap: bool,
}

impl PatchConfig {
    pub fn new(side: usize, stride: usize, wrap: bool) -> Result<Self> {
        if side == 0 {
            return Err(Error::Argument("patch side must be positive".into()));
        }
        if stride == 0 {
            return Err(Error::Argument("patch stride must be positive".into()));
        }
        Ok(Self { side, stride, wrap })
    }

    /// Patch dimension n = side².
    pub fn n(&self) -> usize {
        self.side * self.side
    }

    /// Checks that this geometry fits an `height`×`width` image.
    pub fn validate_for(&self, height: usize, width: usize) -> Result<()> {
        if self.side > height || self.side > width {
            return Err(Error::Config(format!(
                "patch side {} exceeds image extent {}x{}",
                self.side, height, width
            )));
        }
        Ok(())
    }

    fn starts(&self, extent: usize) -> impl Iterator<Item = usize> {
        let last = if self.wrap { extent - 1 } else { extent - self.side };
        (0..=last).step_by(self.stride)
    }

    /// Top-left corners in raster order.
    pub fn corners(&self, height: usize, width: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for r0 in self.starts(height) {
            for c0 in self.starts(width) {
                out.push((r0, c0));
            }
        }
        out
    }

    /// Number of patches N for an `height`×`width` image.
    pub fn patch_count(&self, height: usize, width: usize) -> usize {
        self.starts(height).count() * self.starts(width).count()
    }
}

/// The n×N matrix X whose j-th column is the vectorized j-th patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchMatrix {
    pub data: DMatrix<C64>,
}

impl PatchMatrix {
    /// Patch dimension n (rows).
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Patch count N (columns).
    pub fn count(&self) -> usize {
        self.data.ncols()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Extracts all patches of `image` into the columns of an n×N matrix.
pub fn extract_patches(image: &ImageGrid, cfg: &PatchConfig) -> Result<PatchMatrix> {
    cfg.validate_for(image.height(), image.width())?;
    let (h, w) = image.shape();
    let side = cfg.side;
    let corners = cfg.corners(h, w);
    let mut data = DMatrix::zeros(cfg.n(), corners.len());
    for (j, &(r0, c0)) in corners.iter().enumerate() {
        let mut col = data.column_mut(j);
        let mut i = 0;
        for c_loc in 0..side {
            let c = (c0 + c_loc) % w;
            for r_loc in 0..side {
                let r = (r0 + r_loc) % h;
                col[i] = image.get(r, c);
                i += 1;
            }
        }
    }
    Ok(PatchMatrix { data })
}

/// Adjoint of [`extract_patches`]: scatters patch columns back onto the grid,
/// summing overlaps. Computes Σ_j P_jᵀ z_j.
pub fn adjoint_accumulate(
    patches: &DMatrix<C64>,
    cfg: &PatchConfig,
    height: usize,
    width: usize,
) -> Result<ImageGrid> {
    cfg.validate_for(height, width)?;
    if patches.nrows() != cfg.n() {
        return Err(Error::Config(format!(
            "patch matrix has {} rows, geometry requires n={}",
            patches.nrows(),
            cfg.n()
        )));
    }
    let corners = cfg.corners(height, width);
    if patches.ncols() != corners.len() {
        return Err(Error::Config(format!(
            "patch matrix has {} columns, geometry yields N={}",
            patches.ncols(),
            corners.len()
        )));
    }
    let side = cfg.side;
    let mut out = ImageGrid::zeros(height, width);
    for (j, &(r0, c0)) in corners.iter().enumerate() {
        let col = patches.column(j);
        let mut i = 0;
        for c_loc in 0..side {
            let c = (c0 + c_loc) % width;
            for r_loc in 0..side {
                let r = (r0 + r_loc) % height;
                *out.get_mut(r, c) += col[i];
                i += 1;
            }
        }
    }
    Ok(out)
}

/// Diagonal of Σ_j P_jᵀ P_j: per-pixel patch cover counts.
pub fn overlap_diag(cfg: &PatchConfig, height: usize, width: usize) -> Result<Vec<f64>> {
    cfg.validate_for(height, width)?;
    let side = cfg.side;
    let mut counts = vec![0.0f64; height * width];
    for (r0, c0) in cfg.corners(height, width) {
        for c_loc in 0..side {
            let c = (c0 + c_loc) % width;
            for r_loc in 0..side {
                let r = (r0 + r_loc) % height;
                counts[r * width + c] += 1.0;
            }
        }
    }
    Ok(counts)
}
