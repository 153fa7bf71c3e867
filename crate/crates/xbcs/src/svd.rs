//! One-sided Jacobi SVD for small complex matrices.
//!
//! The closed-form transform updates need a full SVD whose factors reproduce
//! the input at machine precision even when singular values span many orders
//! of magnitude or hit zero. Bidiagonalization-based SVDs can lose several
//! digits of backward error on such matrices; one-sided Jacobi does not, and
//! the matrices here are patch-sized, so the extra sweeps cost nothing.

use nalgebra::{DMatrix, DVector};

use crate::C64;

/// Full SVD m = u·diag(sigma)·vᴴ with sigma sorted descending.
///
/// For rows ≥ cols, `u` is rows×cols with orthonormal columns and `v` is
/// cols×cols unitary; for square inputs both factors are unitary. For
/// rows < cols the roles swap.
#[derive(Debug, Clone)]
pub struct FullSvd {
    pub u: DMatrix<C64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<C64>,
}

const PAIR_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 64;

/// Compute the SVD of `m` by cyclic one-sided Jacobi rotations.
pub fn jacobi_svd(m: &DMatrix<C64>) -> FullSvd {
    let (rows, cols) = m.shape();
    if rows < cols {
        let flipped = jacobi_svd(&m.adjoint());
        return FullSvd { u: flipped.v, sigma: flipped.sigma, v: flipped.u };
    }
    let mut a = m.clone();
    let mut v = DMatrix::<C64>::identity(cols, cols);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols.saturating_sub(1) {
            for q in (p + 1)..cols {
                let mut app = 0.0f64;
                let mut aqq = 0.0f64;
                let mut apq = C64::new(0.0, 0.0);
                for i in 0..rows {
                    let e_p = a[(i, p)];
                    let e_q = a[(i, q)];
                    app += e_p.norm_sqr();
                    aqq += e_q.norm_sqr();
                    apq += e_p.conj() * e_q;
                }
                let r = apq.norm();
                if app == 0.0 || aqq == 0.0 || r <= PAIR_TOL * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                // rotate the pair so the columns become orthogonal: absorb the
                // phase of the inner product, then a real Jacobi rotation
                let ph_c = (apq / r).conj();
                let tau = (app - aqq) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                for i in 0..rows {
                    let e_p = a[(i, p)];
                    let e_q = ph_c * a[(i, q)];
                    a[(i, p)] = e_p * cs + e_q * sn;
                    a[(i, q)] = e_q * cs - e_p * sn;
                }
                for i in 0..cols {
                    let e_p = v[(i, p)];
                    let e_q = ph_c * v[(i, q)];
                    v[(i, p)] = e_p * cs + e_q * sn;
                    v[(i, q)] = e_q * cs - e_p * sn;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..cols).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());
    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let v_sorted = DMatrix::from_fn(cols, cols, |i, jj| v[(i, order[jj])]);

    let mut u = DMatrix::<C64>::zeros(rows, cols);
    let mut set = vec![false; cols];
    for (jj, &j) in order.iter().enumerate() {
        if sigma[jj] > 0.0 {
            u.set_column(jj, &(a.column(j) / C64::new(sigma[jj], 0.0)));
            set[jj] = true;
        }
    }
    // zero singular values leave their left vectors unconstrained; complete
    // the basis with the coordinate vector farthest from the span so far
    for j in 0..cols {
        if set[j] {
            continue;
        }
        let mut best: Option<(f64, DVector<C64>)> = None;
        for k in 0..rows {
            let mut cand = DVector::<C64>::zeros(rows);
            cand[k] = C64::new(1.0, 0.0);
            for _ in 0..2 {
                for (jj, &used) in set.iter().enumerate() {
                    if !used {
                        continue;
                    }
                    let coef = u.column(jj).dotc(&cand);
                    let proj = u.column(jj) * coef;
                    cand -= proj;
                }
            }
            let nrm = cand.norm();
            if best.as_ref().is_none_or(|(b, _)| nrm > *b) {
                best = Some((nrm, cand));
            }
        }
        let (nrm, mut cand) = best.expect("rows is at least one");
        cand /= C64::new(nrm, 0.0);
        u.set_column(j, &cand);
        set[j] = true;
    }

    FullSvd { u, sigma, v: v_sorted }
}
