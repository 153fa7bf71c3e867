//! Exact image update under the energy constraint ‖x‖₂ ≤ C.
//!
//! The update minimizes Σ_j‖WP_jx − b_j‖² + ν‖Ax − y‖² subject to the
//! constraint. Its normal operator G = Σ_j P_jᵀWᴴWP_j is positive definite,
//! and for stride-1 wrap-around patches it is block circulant with circulant
//! blocks, hence diagonalized by the 2D DFT: G = Fᴴ Γ F. With Fourier
//! sensing the whole system is diagonal in k-space, giving a closed-form
//! per-frequency solution; the Lagrange multiplier for the constraint is the
//! root of a monotone convex scalar function found by safeguarded Newton.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::patches::{adjoint_accumulate, extract_patches, ImageGrid, PatchConfig};
use crate::sensing::{dft2, idft2, KSpaceData, SensingOperator};
use crate::sparse::SparseCodes;
use crate::transform::Transform;
use crate::C64;

/// Eigenvalues of G = Σ P_jᵀWᴴWP_j on the (unshifted) 2D DFT grid.
#[derive(Debug, Clone)]
pub struct BccbSpectrum {
    gamma: Vec<f64>,
    height: usize,
    width: usize,
}

impl BccbSpectrum {
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

/// Result of the Lagrange-multiplier search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierState {
    pub mu: f64,
    /// f̃(μ̂) − C² at the returned multiplier.
    pub residual: f64,
    pub iterations: usize,
}

/// The squared-radius curve f̃(μ) = ‖x(μ)‖² and its derivative. Strictly
/// decreasing and convex on [0, ∞) for any nonzero right-hand side.
pub trait RadiusCurve {
    fn value(&self, mu: f64) -> f64;
    fn slope(&self, mu: f64) -> f64;
}

/// f̃(μ) = Σᵢ wᵢ/(dᵢ+μ)² with weights wᵢ = |zᵢ|² ≥ 0 and dᵢ > 0.
pub struct SpectralRadius {
    terms: Vec<(f64, f64)>,
}

impl SpectralRadius {
    /// Builds from (|numerator|², denominator) pairs, dropping zero weights.
    pub fn new(terms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let kept: Vec<(f64, f64)> = terms.into_iter().filter(|&(w, _)| w > 0.0).collect();
        if kept.iter().any(|&(w, d)| !w.is_finite() || !(d > 0.0) || !d.is_finite()) {
            return Err(Error::Numerical(
                "radius curve requires finite weights and positive denominators".into(),
            ));
        }
        Ok(Self { terms: kept })
    }
}

impl RadiusCurve for SpectralRadius {
    fn value(&self, mu: f64) -> f64 {
        self.terms.iter().map(|&(w, d)| w / ((d + mu) * (d + mu))).sum()
    }

    fn slope(&self, mu: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(w, d)| -2.0 * w / ((d + mu) * (d + mu) * (d + mu)))
            .sum()
    }
}

/// Relative tolerance for the multiplier root find.
pub const MULTIPLIER_RTOL: f64 = 1e-10;
const MULTIPLIER_MAX_ITER: usize = 100;

/// Finds μ̂ ≥ 0 with ‖x(μ̂)‖ ≤ C active or slack: returns μ̂ = 0 when
/// f̃(0) ≤ C², otherwise the unique root of f̃(μ) = C², by Newton iteration
/// safeguarded with a bisection bracket.
pub fn newton_multiplier(curve: &dyn RadiusCurve, c: f64, rtol: f64) -> Result<MultiplierState> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Argument(format!("energy cap must be positive and finite, got {c}")));
    }
    let target = c * c;
    let at_zero = curve.value(0.0);
    if !at_zero.is_finite() {
        return Err(Error::Numerical("radius curve is not finite at zero".into()));
    }
    if at_zero <= target {
        return Ok(MultiplierState { mu: 0.0, residual: at_zero - target, iterations: 0 });
    }

    let mut hi = 1.0;
    let mut doublings = 0;
    while curve.value(hi) >= target {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::Convergence("no upper bracket for the multiplier".into()));
        }
    }

    let mut lo = 0.0;
    let mut mu = 0.0;
    let mut value = at_zero;
    for iterations in 1..=MULTIPLIER_MAX_ITER {
        let slope = curve.slope(mu);
        let newton = if slope < 0.0 { mu - (value - target) / slope } else { f64::INFINITY };
        mu = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        value = curve.value(mu);
        if (value - target).abs() <= rtol * target {
            return Ok(MultiplierState { mu, residual: value - target, iterations });
        }
        if value > target {
            lo = mu;
        } else {
            hi = mu;
        }
    }
    Err(Error::Convergence(format!(
        "multiplier search did not reach tolerance {rtol} in {MULTIPLIER_MAX_ITER} iterations"
    )))
}

/// Computes the DFT-domain eigenvalues of G by applying the patch operators
/// to an impulse image and transforming the response: γ = √p · DFT(G e₀).
pub fn build_bccb_spectrum(
    w: &Transform,
    cfg: &PatchConfig,
    height: usize,
    width: usize,
) -> Result<BccbSpectrum> {
    if cfg.stride != 1 || !cfg.wrap {
        return Err(Error::Config(
            "the circulant spectrum requires stride 1 with wrap-around patches".into(),
        ));
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
    let mut impulse = ImageGrid::zeros(height, width);
    impulse.as_mut_slice()[0] = C64::new(1.0, 0.0);
    let gram = w.data.adjoint() * &w.data;
    let response = adjoint_accumulate(&(gram * extract_patches(&impulse, cfg)?.data), cfg, height, width)?;
    let transformed = dft2(&response);
    let p = (height * width) as f64;
    let scale = p.sqrt();

    let max_mag = transformed.as_slice().iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    let mut gamma = Vec::with_capacity(height * width);
    for z in transformed.as_slice() {
        if z.im.abs() > 1e-10 * max_mag {
            return Err(Error::Numerical(format!(
                "circulant spectrum has imaginary residue {} beyond tolerance",
                z.im.abs()
            )));
        }
        let g = z.re * scale;
        if !(g > 0.0) {
            return Err(Error::Numerical(format!("non-positive spectrum entry {g}")));
        }
        gamma.push(g);
    }
    Ok(BccbSpectrum { gamma, height, width })
}

fn check_codes(w: &Transform, b: &SparseCodes, cfg: &PatchConfig, count: usize) -> Result<()> {
    if b.data.nrows() != cfg.n() || b.data.ncols() != count {
        return Err(Error::Config(format!(
            "code matrix is {}x{}, geometry requires {}x{}",
            b.data.nrows(),
            b.data.ncols(),
            cfg.n(),
            count
        )));
    }
    if w.n() != cfg.n() {
        return Err(Error::Config(format!(
            "transform is {}x{}, patch geometry requires n={}",
            w.n(),
            w.n(),
            cfg.n()
        )));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Argument(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

/// Closed-form constrained image update for Fourier sensing.
///
/// `s0` is the zero-filled measured k-space and `mask` the sampling pattern,
/// both in the unshifted layout that [`dft2`] produces. Solves
/// (G + νFᴴdiag(mask)F + μI)x = Σ P_jᵀWᴴb_j + νFᴴs0 per frequency:
/// Fx = S/(γ+μ) off-mask and (S + νS0)/(γ+ν+μ) on-mask, with μ from the
/// energy constraint.
#[allow(clippy::too_many_arguments)]
pub fn mri_image_update(
    w: &Transform,
    b: &SparseCodes,
    s0: &[C64],
    mask: &[bool],
    nu: f64,
    energy_cap: f64,
    spectrum: &BccbSpectrum,
    cfg: &PatchConfig,
) -> Result<ImageGrid> {
    let (height, width) = spectrum.shape();
    let p = height * width;
    if s0.len() != p || mask.len() != p {
        return Err(Error::Config(format!(
            "k-space and mask must have {p} samples, got {} and {}",
            s0.len(),
            mask.len()
        )));
    }
    if cfg.stride != 1 || !cfg.wrap {
        return Err(Error::Config(
            "the closed-form update requires stride 1 with wrap-around patches".into(),
        ));
    }
    check_codes(w, b, cfg, p)?;
    check_positive("fidelity weight", nu)?;
    check_positive("energy cap", energy_cap)?;

    let rhs_patches = adjoint_accumulate(&(w.data.adjoint() * &b.data), cfg, height, width)?;
    let s = dft2(&rhs_patches);

    let mut numer = Vec::with_capacity(p);
    let mut denom = Vec::with_capacity(p);
    for (k, (&sk, &on)) in s.as_slice().iter().zip(mask).enumerate() {
        let gk = spectrum.gamma()[k];
        if on {
            numer.push(sk + s0[k] * nu);
            denom.push(gk + nu);
        } else {
            numer.push(sk);
            denom.push(gk);
        }
    }
    let curve = SpectralRadius::new(numer.iter().zip(&denom).map(|(n, &d)| (n.norm_sqr(), d)))?;
    let state = newton_multiplier(&curve, energy_cap, MULTIPLIER_RTOL)?;

    let solved: Vec<C64> = numer
        .into_iter()
        .zip(&denom)
        .map(|(n, &d)| n / (d + state.mu))
        .collect();
    Ok(idft2(&KSpaceData::new(height, width, solved)?))
}

const CG_RTOL: f64 = 1e-8;

/// Dense EVD guard: beyond this pixel count the constrained fallback refuses.
pub const EVD_PIXEL_GUARD: usize = 4096;

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Conjugate gradient for the Hermitian positive definite normal operator.
fn conjugate_gradient(
    apply: &dyn Fn(&[C64]) -> Result<Vec<C64>>,
    rhs: &[C64],
    rtol: f64,
    max_iter: usize,
) -> Result<Vec<C64>> {
    let rhs_norm = dot(rhs, rhs).re.sqrt();
    if rhs_norm == 0.0 {
        return Ok(vec![C64::new(0.0, 0.0); rhs.len()]);
    }
    let mut x = vec![C64::new(0.0, 0.0); rhs.len()];
    let mut r = rhs.to_vec();
    let mut d = r.clone();
    let mut rho = dot(&r, &r).re;
    for _ in 0..max_iter {
        if rho.sqrt() <= rtol * rhs_norm {
            return Ok(x);
        }
        let ad = apply(&d)?;
        let dad = dot(&d, &ad).re;
        if !(dad > 0.0) {
            return Err(Error::Numerical("normal operator lost positive definiteness".into()));
        }
        let alpha = rho / dad;
        for i in 0..x.len() {
            x[i] += d[i] * alpha;
            r[i] -= ad[i] * alpha;
        }
        let rho_next = dot(&r, &r).re;
        let beta = rho_next / rho;
        for i in 0..d.len() {
            d[i] = r[i] + d[i] * beta;
        }
        rho = rho_next;
    }
    if rho.sqrt() <= rtol * rhs_norm {
        Ok(x)
    } else {
        Err(Error::Convergence(format!(
            "conjugate gradient missed tolerance {rtol} after {max_iter} iterations"
        )))
    }
}

/// Image update for an arbitrary sensing operator.
///
/// Solves the unconstrained normal equation by conjugate gradient first; when
/// that solution violates ‖x‖₂ ≤ C, falls back to a dense eigendecomposition
/// of G + νAᴴA plus the multiplier search (guarded to p ≤ 4096).
pub fn generic_image_update(
    w: &Transform,
    b: &SparseCodes,
    op: &SensingOperator,
    y: &[C64],
    nu: f64,
    energy_cap: f64,
    cfg: &PatchConfig,
) -> Result<ImageGrid> {
    let (height, width) = op.image_shape();
    let p = height * width;
    cfg.validate_for(height, width)?;
    check_codes(w, b, cfg, cfg.patch_count(height, width))?;
    check_positive("fidelity weight", nu)?;
    check_positive("energy cap", energy_cap)?;
    if y.len() != op.rows() {
        return Err(Error::Config(format!(
            "measurement vector has {} entries, operator has {} rows",
            y.len(),
            op.rows()
        )));
    }

    let gram = w.data.adjoint() * &w.data;
    let apply_normal = |v: &[C64]| -> Result<Vec<C64>> {
        let img = ImageGrid::new(height, width, v.to_vec())?;
        let patch_term =
            adjoint_accumulate(&(&gram * extract_patches(&img, cfg)?.data), cfg, height, width)?;
        let fidelity_term = op.adjoint(&op.apply(&img)?)?;
        Ok(patch_term
            .as_slice()
            .iter()
            .zip(fidelity_term.as_slice())
            .map(|(&g, &f)| g + f * nu)
            .collect())
    };

    let aty = op.adjoint(y)?;
    let rhs_grid = adjoint_accumulate(&(w.data.adjoint() * &b.data), cfg, height, width)?;
    let rhs: Vec<C64> = rhs_grid
        .as_slice()
        .iter()
        .zip(aty.as_slice())
        .map(|(&r, &a)| r + a * nu)
        .collect();

    let unconstrained = conjugate_gradient(&apply_normal, &rhs, CG_RTOL, 10 * p)?;
    let norm = dot(&unconstrained, &unconstrained).re.sqrt();
    if norm <= energy_cap {
        return ImageGrid::new(height, width, unconstrained);
    }

    if p > EVD_PIXEL_GUARD {
        return Err(Error::Capability(format!(
            "constrained fallback needs a dense eigendecomposition; p = {p} exceeds {EVD_PIXEL_GUARD}"
        )));
    }
    let mut h = DMatrix::<C64>::zeros(p, p);
    for j in 0..p {
        let mut e = vec![C64::new(0.0, 0.0); p];
        e[j] = C64::new(1.0, 0.0);
        let col = apply_normal(&e)?;
        for (i, v) in col.into_iter().enumerate() {
            h[(i, j)] = v;
        }
    }
    let evd = nalgebra::SymmetricEigen::new(h);
    let z = evd.eigenvectors.adjoint() * DVector::from_column_slice(&rhs);
    let curve = SpectralRadius::new(
        z.iter()
            .zip(evd.eigenvalues.iter())
            .map(|(zi, &sig)| (zi.norm_sqr(), sig)),
    )?;
    let state = newton_multiplier(&curve, energy_cap, MULTIPLIER_RTOL)?;
    let scaled = DVector::from_iterator(
        p,
        z.iter()
            .zip(evd.eigenvalues.iter())
            .map(|(zi, &sig)| zi / (sig + state.mu)),
    );
    let x = evd.eigenvectors * scaled;
    ImageGrid::new(height, width, x.as_slice().to_vec())
}
