//! Exact sparse coding operators.
//!
//! Both operators solve their subproblem in closed form: projection onto the
//! aggregate l0 ball keeps the `s` largest-magnitude entries of the whole
//! matrix, and hard thresholding keeps every entry whose magnitude reaches
//! the threshold. Neither is a heuristic; each is the exact minimizer of
//! ‖Z − B‖_F² over its feasible set.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::C64;

/// Sparse code matrix B with the budget it was produced under, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCodes {
    pub data: DMatrix<C64>,
    /// `Some(s)` when produced by the aggregate-budget projection.
    pub budget: Option<usize>,
}

impl SparseCodes {
    pub fn nnz(&self) -> usize {
        self.data.iter().filter(|z| z.norm_sqr() > 0.0).count()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Projects Z onto { B : ‖B‖₀ ≤ s }: keeps the s largest-magnitude entries.
///
/// Magnitude ties are broken toward the lexicographically lowest
/// (row, column) position, so the result is a deterministic function of Z.
pub fn project_s_l0(z: &DMatrix<C64>, s: usize) -> Result<SparseCodes> {
    let total = z.nrows() * z.ncols();
    if s > total {
        return Err(Error::Argument(format!(
            "sparsity budget {s} exceeds matrix size {total}"
        )));
    }
    if z.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Argument("sparse coding input has non-finite entries".into()));
    }
    let mut order: Vec<(usize, usize)> = (0..z.nrows())
        .flat_map(|r| (0..z.ncols()).map(move |c| (r, c)))
        .collect();
    order.sort_by(|&(ra, ca), &(rb, cb)| {
        z[(rb, cb)]
            .norm_sqr()
            .total_cmp(&z[(ra, ca)].norm_sqr())
            .then(ra.cmp(&rb))
            .then(ca.cmp(&cb))
    });
    let mut data = DMatrix::zeros(z.nrows(), z.ncols());
    for &(r, c) in order.iter().take(s) {
        data[(r, c)] = z[(r, c)];
    }
    Ok(SparseCodes { data, budget: Some(s) })
}

/// Hard thresholding: keeps entries with |z| ≥ eta, zeroing the rest.
///
/// This is the exact minimizer of ‖Z − B‖_F² + eta²‖B‖₀ (entries at exactly
/// the threshold are retained).
pub fn hard_threshold(z: &DMatrix<C64>, eta: f64) -> Result<SparseCodes> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::Argument(format!("threshold must be positive and finite, got {eta}")));
    }
    if z.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Argument("sparse coding input has non-finite entries".into()));
    }
    let data = z.map(|v| if v.norm() >= eta { v } else { C64::new(0.0, 0.0) });
    Ok(SparseCodes { data, budget: None })
}
