//! Transform penalty and the closed-form transform update steps.
//!
//! The well-conditioned update minimizes
//! ‖WX − B‖_F² + λ(0.5‖W‖_F² − log|det W|) exactly: with
//! XXᴴ + 0.5λI = LLᴴ and the full SVD L⁻¹XBᴴ = VΣRᴴ, the minimizer is
//! W = 0.5 R(Σ + (Σ² + 2λI)^{1/2})Vᴴ L⁻¹, which is nonsingular by
//! construction. The unitary update is the orthogonal Procrustes solution:
//! with XBᴴ = UΣVᴴ, W = VUᴴ.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::patches::PatchMatrix;
use crate::sparse::SparseCodes;
use crate::svd::jacobi_svd;
use crate::C64;

/// Which constraint or penalty the transform was produced under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformMode {
    /// Penalized by λ(0.5‖W‖_F² − log|det W|); nonsingular, bounded condition number.
    WellConditioned,
    /// Constrained to WᴴW = I.
    Unitary,
}

/// Square n×n sparsifying transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    pub data: DMatrix<C64>,
    pub mode: TransformMode,
}

impl Transform {
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Deviation ‖WᴴW − I‖_F, for checking the unitary constraint.
    pub fn unitary_defect(&self) -> f64 {
        let n = self.n();
        let gram = self.data.adjoint() * &self.data;
        let mut acc = 0.0;
        for r in 0..n {
            for c in 0..n {
                let expect = if r == c { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                acc += (gram[(r, c)] - expect).norm_sqr();
            }
        }
        acc.sqrt()
    }
}

/// Factorization used for XXᴴ + 0.5λI = LLᴴ. The update is invariant to the
/// choice; both are kept so tests can verify that invariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LFactor {
    #[default]
    Cholesky,
    /// Hermitian eigendecomposition square root, with eigenvalues clamped at
    /// 1e-14 times the largest to guard rounding.
    EvdSqrt,
}

/// Conditioning penalty Q(W) = 0.5‖W‖_F² − log|det W| = Σᵢ (0.5σᵢ² − log σᵢ).
///
/// Returns +∞ for singular W. The minimum over all W is n/2, attained exactly
/// at unitary W. log|det W| is accumulated from the LU diagonal so large
/// determinants cannot overflow.
pub fn eval_q(w: &DMatrix<C64>) -> f64 {
    let norm_sqr: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    let lu = w.clone().lu();
    let u = lu.u();
    let mut log_det = 0.0;
    for i in 0..w.nrows() {
        let d = u[(i, i)].norm();
        if d == 0.0 {
            return f64::INFINITY;
        }
        log_det += d.ln();
    }
    0.5 * norm_sqr - log_det
}

fn check_update_inputs(x: &PatchMatrix, b: &SparseCodes) -> Result<usize> {
    let n = x.n();
    if b.data.nrows() != n || b.data.ncols() != x.count() {
        return Err(Error::Config(format!(
            "code matrix is {}x{}, patch matrix requires {}x{}",
            b.data.nrows(),
            b.data.ncols(),
            n,
            x.count()
        )));
    }
    let finite = |m: &DMatrix<C64>| m.iter().all(|z| z.re.is_finite() && z.im.is_finite());
    if !finite(&x.data) || !finite(&b.data) {
        return Err(Error::Argument("transform update input has non-finite entries".into()));
    }
    Ok(n)
}

/// Exact minimizer of the penalized transform subproblem.
pub fn update_transform_well_conditioned(
    x: &PatchMatrix,
    b: &SparseCodes,
    lambda: f64,
) -> Result<Transform> {
    update_transform_well_conditioned_with(x, b, lambda, LFactor::default())
}

/// As [`update_transform_well_conditioned`], with an explicit factorization choice.
pub fn update_transform_well_conditioned_with(
    x: &PatchMatrix,
    b: &SparseCodes,
    lambda: f64,
    factor: LFactor,
) -> Result<Transform> {
    let n = check_update_inputs(x, b)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Argument(format!(
            "conditioning weight must be positive and finite, got {lambda}"
        )));
    }

    let mut k = &x.data * x.data.adjoint();
    let shift = C64::new(0.5 * lambda, 0.0);
    for i in 0..n {
        k[(i, i)] += shift;
    }
    let xb = &x.data * b.data.adjoint();

    // t = L⁻¹XBᴴ, and a closure applying ·L⁻¹ on the right
    type RightInv = Box<dyn Fn(&DMatrix<C64>) -> Result<DMatrix<C64>>>;
    let (t, right_inv): (DMatrix<C64>, RightInv) = match factor {
        LFactor::Cholesky => {
            let chol = nalgebra::Cholesky::new(k).ok_or_else(|| {
                Error::Numerical("patch Gram plus shift is not positive definite".into())
            })?;
            let l = chol.l();
            let t = l
                .solve_lower_triangular(&xb)
                .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
            let apply = move |m: &DMatrix<C64>| {
                // M L⁻¹ from Lᴴ (M L⁻¹)ᴴ = Mᴴ
                l.adjoint()
                    .solve_upper_triangular(&m.adjoint())
                    .map(|s| s.adjoint())
                    .ok_or_else(|| Error::Numerical("triangular solve failed".into()))
            };
            (t, Box::new(apply))
        }
        LFactor::EvdSqrt => {
            let evd = nalgebra::SymmetricEigen::new(k);
            let max_eig = evd.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
            if !(max_eig > 0.0) {
                return Err(Error::Numerical(
                    "patch Gram plus shift is not positive definite".into(),
                ));
            }
            let floor = 1e-14 * max_eig;
            let q = evd.eigenvectors;
            let mut scaled = q.clone();
            for (j, &e) in evd.eigenvalues.iter().enumerate() {
                scaled.column_mut(j).scale_mut(1.0 / e.max(floor).sqrt());
            }
            let l_inv = scaled * q.adjoint();
            let t = &l_inv * &xb;
            (t, Box::new(move |m: &DMatrix<C64>| Ok(m * &l_inv)))
        }
    };

    let svd = jacobi_svd(&t);

    // R diag(0.5(σ + √(σ²+2λ))) Vᴴ
    let mut core = svd.v;
    for (j, &sigma) in svd.sigma.iter().enumerate() {
        let d = 0.5 * (sigma + (sigma * sigma + 2.0 * lambda).sqrt());
        core.column_mut(j).scale_mut(d);
    }
    let data = right_inv(&(core * svd.u.adjoint()))?;
    Ok(Transform { data, mode: TransformMode::WellConditioned })
}

/// Exact minimizer of ‖WX − B‖_F² over unitary W (orthogonal Procrustes).
pub fn update_transform_unitary(x: &PatchMatrix, b: &SparseCodes) -> Result<Transform> {
    check_update_inputs(x, b)?;
    let xb = &x.data * b.data.adjoint();
    let svd = jacobi_svd(&xb);
    let data = svd.v * svd.u.adjoint();
    Ok(Transform { data, mode: TransformMode::Unitary })
}

/// Scalar specialization of the well-conditioned update, used as a test oracle.
pub fn scalar_well_conditioned_update(x2: f64, xb: Complex64, lambda: f64) -> Complex64 {
    // minimize |wx − b|² + λ(0.5|w|² − log|w|): phase aligns with conj(xb),
    // modulus from the 1D problem with σ = |xb| / sqrt(x² + λ/2)
    let l = (x2 + 0.5 * lambda).sqrt();
    let sigma = xb.norm() / l;
    let d = 0.5 * (sigma + (sigma * sigma + 2.0 * lambda).sqrt());
    let phase = if xb.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { xb.conj() / xb.norm() };
    phase * d / l
}
