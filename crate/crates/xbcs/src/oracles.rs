//! Brute-force reference implementations certifying the closed-form paths.
//!
//! Everything here trades speed for independence: patch operators are
//! re-derived from index arithmetic, the DFT is the naive O(p²) summation,
//! the constrained solve uses bisection instead of Newton, and the sparse
//! projection enumerates supports. None of it shares code with the fast
//! paths it checks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::patches::{ImageGrid, PatchConfig};
use crate::sensing::SamplingMask;
use crate::sparse::SparseCodes;
use crate::transform::Transform;
use crate::C64;

const DENSE_PIXEL_GUARD: usize = 4096;
const EXHAUSTIVE_ENTRY_GUARD: usize = 12;

fn patch_pixel_indices(cfg: &PatchConfig, height: usize, width: usize) -> Vec<Vec<usize>> {
    let side = cfg.side;
    let starts = |extent: usize| -> Vec<usize> {
        let last = if cfg.wrap { extent - 1 } else { extent - side };
        (0..=last).step_by(cfg.stride).collect()
    };
    let mut maps = Vec::new();
    for &r0 in &starts(height) {
        for &c0 in &starts(width) {
            let mut pixels = Vec::with_capacity(side * side);
            for c_loc in 0..side {
                for r_loc in 0..side {
                    pixels.push(((r0 + r_loc) % height) * width + (c0 + c_loc) % width);
                }
            }
            maps.push(pixels);
        }
    }
    maps
}

/// Explicit p×p matrix G = Σ_j P_jᵀ WᴴW P_j, assembled patch by patch.
pub fn dense_g(w: &Transform, cfg: &PatchConfig, height: usize, width: usize) -> Result<DMatrix<C64>> {
    let p = height * width;
    if p > DENSE_PIXEL_GUARD {
        return Err(Error::Capability(format!(
            "dense normal matrix needs p ≤ {DENSE_PIXEL_GUARD}, got {p}"
        )));
    }
    cfg.validate_for(height, width)?;
    if w.n() != cfg.n() {
        return Err(Error::Config(format!(
            "transform is {}x{}, patch geometry requires n={}",
            w.n(),
            w.n(),
            cfg.n()
        )));
    }
    let gram = w.data.adjoint() * &w.data;
    let n = cfg.n();
    let mut g = DMatrix::<C64>::zeros(p, p);
    for pixels in patch_pixel_indices(cfg, height, width) {
        for i in 0..n {
            for i2 in 0..n {
                g[(pixels[i], pixels[i2])] += gram[(i, i2)];
            }
        }
    }
    Ok(g)
}

/// Dense statement of one image-update instance: explicit normal matrix G,
/// explicit sensing matrix A (naive DFT rows for Fourier masks), and the
/// patch-side right-hand side Σ P_jᵀWᴴb_j.
#[derive(Debug, Clone)]
pub struct DenseProblem {
    pub g: DMatrix<C64>,
    pub a: DMatrix<C64>,
    pub rhs: DVector<C64>,
    pub height: usize,
    pub width: usize,
}

impl DenseProblem {
    /// Assembles the dense problem for a Fourier mask in the unshifted
    /// layout, verifying that G is Hermitian positive definite.
    pub fn assemble(
        w: &Transform,
        cfg: &PatchConfig,
        height: usize,
        width: usize,
        mask: &SamplingMask,
        b: &SparseCodes,
    ) -> Result<Self> {
        if mask.shape() != (height, width) {
            return Err(Error::Config(format!(
                "mask is {:?}, image is {height}x{width}",
                mask.shape()
            )));
        }
        let g = dense_g(w, cfg, height, width)?;
        let p = height * width;

        let evd = nalgebra::SymmetricEigen::new(g.clone());
        let min_eig = evd.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min_eig > 0.0) {
            return Err(Error::Numerical(format!(
                "normal matrix is not positive definite (smallest eigenvalue {min_eig})"
            )));
        }

        // naive DFT rows, no FFT involved
        let scale = 1.0 / (p as f64).sqrt();
        let sampled = mask.sampled_indices();
        let mut a = DMatrix::<C64>::zeros(sampled.len(), p);
        for (row, &k) in sampled.iter().enumerate() {
            let (kr, kc) = (k / width, k % width);
            for r in 0..height {
                for c in 0..width {
                    let phase = -2.0
                        * std::f64::consts::PI
                        * (kr as f64 * r as f64 / height as f64
                            + kc as f64 * c as f64 / width as f64);
                    a[(row, r * width + c)] = C64::new(phase.cos(), phase.sin()) * scale;
                }
            }
        }

        let maps = patch_pixel_indices(cfg, height, width);
        if b.data.nrows() != cfg.n() || b.data.ncols() != maps.len() {
            return Err(Error::Config(format!(
                "code matrix is {}x{}, geometry requires {}x{}",
                b.data.nrows(),
                b.data.ncols(),
                cfg.n(),
                maps.len()
            )));
        }
        let wh = w.data.adjoint();
        let mut rhs = DVector::<C64>::zeros(p);
        for (j, pixels) in maps.iter().enumerate() {
            let v = &wh * b.data.column(j);
            for (i, &pix) in pixels.iter().enumerate() {
                rhs[pix] += v[i];
            }
        }

        Ok(Self { g, a, rhs, height, width })
    }
}

/// Exact constrained minimizer via dense eigendecomposition and bisection on
/// the multiplier (independent of the Newton code in the fast path).
pub fn dense_constrained_solve(
    problem: &DenseProblem,
    nu: f64,
    y: &[C64],
    energy_cap: f64,
) -> Result<ImageGrid> {
    if !(nu > 0.0) || !(energy_cap > 0.0) {
        return Err(Error::Argument("fidelity weight and energy cap must be positive".into()));
    }
    if y.len() != problem.a.nrows() {
        return Err(Error::Config(format!(
            "measurement vector has {} entries, sensing matrix has {} rows",
            y.len(),
            problem.a.nrows()
        )));
    }
    let h_mat = &problem.g + (problem.a.adjoint() * &problem.a) * C64::new(nu, 0.0);
    let rhs = &problem.rhs + problem.a.adjoint() * DVector::from_column_slice(y) * C64::new(nu, 0.0);
    let evd = nalgebra::SymmetricEigen::new(h_mat);
    let z = evd.eigenvectors.adjoint() * rhs;

    let radius_sq = |mu: f64| -> f64 {
        z.iter()
            .zip(evd.eigenvalues.iter())
            .map(|(zi, &sig)| zi.norm_sqr() / ((sig + mu) * (sig + mu)))
            .sum()
    };
    let target = energy_cap * energy_cap;
    let mut mu = 0.0;
    if radius_sq(0.0) > target {
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut doublings = 0;
        while radius_sq(hi) >= target {
            hi *= 2.0;
            doublings += 1;
            if doublings > 200 {
                return Err(Error::Convergence("no upper bracket for the multiplier".into()));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if radius_sq(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        mu = 0.5 * (lo + hi);
    }

    let scaled = DVector::from_iterator(
        z.len(),
        z.iter().zip(evd.eigenvalues.iter()).map(|(zi, &sig)| zi / (sig + mu)),
    );
    let x = evd.eigenvectors * scaled;
    ImageGrid::new(problem.height, problem.width, x.as_slice().to_vec())
}

/// Global optimum of the aggregate-l0 projection by support enumeration.
/// Ties between equally good supports resolve to the lexicographically
/// smallest support in row-major index order.
pub fn exhaustive_sparse_project(z: &DMatrix<C64>, s: usize) -> Result<SparseCodes> {
    let total = z.nrows() * z.ncols();
    if total > EXHAUSTIVE_ENTRY_GUARD {
        return Err(Error::Capability(format!(
            "support enumeration needs at most {EXHAUSTIVE_ENTRY_GUARD} entries, got {total}"
        )));
    }
    if s > total {
        return Err(Error::Argument(format!(
            "sparsity budget {s} exceeds matrix size {total}"
        )));
    }
    let flat: Vec<C64> = (0..z.nrows())
        .flat_map(|r| (0..z.ncols()).map(move |c| z[(r, c)]))
        .collect();

    // advances to the next s-combination of 0..total in lexicographic order
    let next_combination = |support: &mut [usize]| -> bool {
        let mut i = support.len();
        while i > 0 {
            i -= 1;
            if support[i] != i + total - support.len() {
                support[i] += 1;
                for j in (i + 1)..support.len() {
                    support[j] = support[j - 1] + 1;
                }
                return true;
            }
        }
        false
    };

    let mut best_support: Vec<usize> = Vec::new();
    let mut best_cost = f64::INFINITY;
    let mut support: Vec<usize> = (0..s).collect();
    loop {
        let cost: f64 = flat
            .iter()
            .enumerate()
            .filter(|(i, _)| !support.contains(i))
            .map(|(_, v)| v.norm_sqr())
            .sum();
        if cost < best_cost {
            best_cost = cost;
            best_support = support.clone();
        }
        if !next_combination(&mut support) {
            break;
        }
    }

    let mut data = DMatrix::<C64>::zeros(z.nrows(), z.ncols());
    for &i in &best_support {
        let (r, c) = (i / z.ncols(), i % z.ncols());
        data[(r, c)] = z[(r, c)];
    }
    Ok(SparseCodes { data, budget: Some(s) })
}

/// Stationarity residual of the penalized transform subproblem:
/// ‖2WXXᴴ − 2BXᴴ + λW − λW^{−H}‖_F / (‖2BXᴴ‖_F + λ‖W‖_F).
pub fn transform_first_order_residual(
    w: &DMatrix<C64>,
    x: &DMatrix<C64>,
    b: &DMatrix<C64>,
    lambda: f64,
) -> Result<f64> {
    let w_inv = w
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Feasibility("transform is singular".into()))?;
    let two = C64::new(2.0, 0.0);
    let lam = C64::new(lambda, 0.0);
    let bx = b * x.adjoint();
    let lhs = (w * x) * x.adjoint() * two - &bx * two + w * lam - w_inv.adjoint() * lam;
    let fro = |m: &DMatrix<C64>| -> f64 { m.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() };
    Ok(fro(&lhs) / (2.0 * fro(&bx) + lambda * fro(w)))
}
