//! Objective evaluation and the outer block coordinate descent loop.
//!
//! Three problem formulations share one loop skeleton. Per outer iteration:
//! M̂ inner alternations of (exact transform update, exact sparse coding) on
//! the patches of the current image, then one exact image update. Every
//! sub-step minimizes the joint objective over its own block, so the
//! objective is non-increasing after every sub-step; the solver enforces
//! that as a runtime invariant and aborts if numerics ever break it.

use std::io::Write as IoWrite;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::image_update::{build_bccb_spectrum, generic_image_update, mri_image_update};
use crate::metrics;
use crate::patches::{extract_patches, ImageGrid, PatchConfig};
use crate::sensing::{
    fftshift2, ifftshift2, zero_fill_recon, KSpaceData, SamplingMask, SensingOperator,
};
use crate::sparse::{hard_threshold, project_s_l0, SparseCodes};
use crate::transform::{
    eval_q, update_transform_unitary, update_transform_well_conditioned, Transform, TransformMode,
};
use crate::C64;

/// Which formulation the solver runs.
///
/// A1: penalized well-conditioned transform with an aggregate sparsity
/// budget. A2: unitary transform with the same budget. A3: penalized
/// transform with a per-entry threshold penalty instead of a budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    A1,
    A2,
    A3,
}

/// Aggregate sparsity target for A1/A2: an absolute count or a fraction of
/// the total n·N code entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SparsityLevel {
    Count(usize),
    Fraction(f64),
}

/// All solver knobs. `lambda0` scales with the patch count: λ = λ₀·N.
#[derive(Debug, Clone)]
pub struct SolverParams {
    pub algo: Algo,
    pub nu: f64,
    pub lambda0: f64,
    pub sparsity: Option<SparsityLevel>,
    pub eta: Option<f64>,
    pub energy_cap: f64,
    pub inner: usize,
    pub outer: usize,
    /// Ramp the sparsity budget from 60% to 100% of target over the first
    /// half of the outer iterations (A1/A2 only).
    pub schedule: bool,
    /// Stop early when the relative objective drop falls below this.
    pub early_stop: Option<f64>,
}

impl SolverParams {
    /// Reference defaults: ν = 3.81, λ₀ = 0.2, s = 0.055·nN, C = 10⁵,
    /// M̂ = 1, J = 40, no schedule. A3 still needs `eta` set by the caller.
    pub fn defaults(algo: Algo) -> Self {
        Self {
            algo,
            nu: 3.81,
            lambda0: 0.2,
            sparsity: match algo {
                Algo::A1 | Algo::A2 => Some(SparsityLevel::Fraction(0.055)),
                Algo::A3 => None,
            },
            eta: None,
            energy_cap: 1e5,
            inner: 1,
            outer: 40,
            schedule: false,
            early_stop: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| -> Result<()> {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
            Ok(())
        };
        positive("fidelity weight nu", self.nu)?;
        positive("energy cap", self.energy_cap)?;
        if self.inner == 0 {
            return Err(Error::Config("inner alternation count must be at least 1".into()));
        }
        match self.algo {
            Algo::A1 | Algo::A2 => {
                if self.eta.is_some() {
                    return Err(Error::Config(
                        "threshold eta applies only to the penalized formulation A3".into(),
                    ));
                }
                match self.sparsity {
                    None => {
                        return Err(Error::Config("A1/A2 require a sparsity target".into()));
                    }
                    Some(SparsityLevel::Fraction(f)) => {
                        if !(f > 0.0 && f <= 1.0) {
                            return Err(Error::Config(format!(
                                "sparsity fraction must lie in (0, 1], got {f}"
                            )));
                        }
                    }
                    Some(SparsityLevel::Count(_)) => {}
                }
            }
            Algo::A3 => {
                if self.sparsity.is_some() {
                    return Err(Error::Config(
                        "sparsity budgets apply only to A1/A2; A3 uses eta".into(),
                    ));
                }
                match self.eta {
                    Some(eta) => positive("threshold eta", eta)?,
                    None => return Err(Error::Config("A3 requires a threshold eta".into())),
                }
            }
        }
        if matches!(self.algo, Algo::A1 | Algo::A3) {
            positive("conditioning weight lambda0", self.lambda0)?;
        }
        if self.schedule && self.algo == Algo::A3 {
            return Err(Error::Config("the sparsity schedule applies only to A1/A2".into()));
        }
        if let Some(tol) = self.early_stop {
            positive("early-stop tolerance", tol)?;
        }
        Ok(())
    }

    /// λ = λ₀·N.
    pub fn lambda(&self, patch_count: usize) -> f64 {
        self.lambda0 * patch_count as f64
    }

    /// Absolute aggregate budget for A1/A2 (`None` for A3).
    pub fn target_budget(&self, n: usize, patch_count: usize) -> Result<Option<usize>> {
        let total = n * patch_count;
        match self.sparsity {
            None => Ok(None),
            Some(SparsityLevel::Count(s)) => {
                if s > total {
                    return Err(Error::Config(format!(
                        "sparsity budget {s} exceeds the {total} code entries"
                    )));
                }
                Ok(Some(s))
            }
            Some(SparsityLevel::Fraction(f)) => {
                Ok(Some(((f * total as f64).round() as usize).min(total)))
            }
        }
    }

    /// Budget in force at outer iteration t (1-based). Non-decreasing in t.
    pub fn budget_at(&self, t: usize, target: usize) -> usize {
        if !self.schedule {
            return target;
        }
        let half = (self.outer / 2).max(1);
        if t >= half {
            return target;
        }
        let frac = 0.6 + 0.4 * (t.saturating_sub(1)) as f64 / (half.saturating_sub(1)).max(1) as f64;
        ((frac * target as f64).round() as usize).min(target)
    }
}

/// The objective value split into its constituent terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveBreakdown {
    /// Σ_j ‖WP_jx − b_j‖².
    pub sparsification_error: f64,
    /// ν‖Ax − y‖².
    pub fidelity: f64,
    /// λ(0.5‖W‖_F² − log|det W|); zero for A2.
    pub regularizer: f64,
    /// η²‖B‖₀; zero for A1/A2.
    pub sparsity_penalty: f64,
    pub total: f64,
}

/// One outer iteration of the trace.
#[derive(Debug, Clone)]
pub struct IterationRow {
    pub iter: usize,
    pub objective: ObjectiveBreakdown,
    /// ‖xᵗ − xᵗ⁻¹‖₂.
    pub dx: f64,
    /// nnz(B)/(nN).
    pub sparsity_fraction: f64,
    /// κ(W).
    pub kappa: f64,
    pub psnr_db: Option<f64>,
    pub hfen: Option<f64>,
    /// Objective totals after each sub-step of this iteration, in order:
    /// (transform update, sparse coding) × inner, then the image update.
    pub substeps: Vec<f64>,
}

/// Per-iteration history of a solve.
#[derive(Debug, Clone, Default)]
pub struct IterationTrace {
    pub rows: Vec<IterationRow>,
}

impl IterationTrace {
    pub fn objectives(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.objective.total).collect()
    }

    /// Writes the CSV trace. `subtract_offset` is removed from the objective
    /// column (pass λn/2 to plot the objective without its constant floor).
    pub fn to_csv<W: IoWrite>(&self, out: &mut W, subtract_offset: f64) -> std::io::Result<()> {
        writeln!(
            out,
            "iter,objective,sparsification_error,fidelity,regularizer,sparsity_penalty,dx,kappa,psnr,hfen"
        )?;
        for row in &self.rows {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                row.iter,
                row.objective.total - subtract_offset,
                row.objective.sparsification_error,
                row.objective.fidelity,
                row.objective.regularizer,
                row.objective.sparsity_penalty,
                row.dx,
                row.kappa,
                opt(row.psnr_db),
                opt(row.hfen),
            )?;
        }
        Ok(())
    }
}

/// Ratio of extreme singular values; +∞ for singular matrices.
pub fn condition_number(w: &DMatrix<C64>) -> f64 {
    let svd = crate::svd::jacobi_svd(w);
    let max = svd.sigma.iter().cloned().fold(0.0f64, f64::max);
    let min = svd.sigma.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Orthonormal 1D DCT-II matrix of the given side.
fn dct_1d(side: usize) -> DMatrix<f64> {
    let n = side as f64;
    DMatrix::from_fn(side, side, |k, j| {
        let alpha = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
        alpha * (std::f64::consts::PI * (j as f64 + 0.5) * k as f64 / n).cos()
    })
}

/// The n×n 2D DCT on column-major vectorized side×side patches, the
/// standard analytic initialization for the learned transform.
pub fn dct_transform(side: usize, mode: TransformMode) -> Transform {
    let d1 = dct_1d(side).map(|v| C64::new(v, 0.0));
    Transform { data: d1.kronecker(&d1), mode }
}

/// How measurements enter the solver.
///
/// `KSpace` carries centered-convention data (the simulator's output); the
/// solver converts to its internal unshifted frame at the boundary and uses
/// the closed-form Fourier image update. `Operator` carries a generic
/// sensing operator acting directly on image-frame vectors and uses the
/// CG/EVD image update.
pub enum Measurements<'a> {
    KSpace { kspace: &'a KSpaceData, mask: &'a SamplingMask },
    Operator { op: &'a SensingOperator, y: &'a [C64] },
}

/// Initial (W, B, x) triple. `x` lives in the solver's working frame: the
/// unshifted frame for k-space measurements (apply [`ifftshift2`] to an
/// image-frame initializer), the image frame for generic operators.
#[derive(Debug, Clone)]
pub struct InitState {
    pub w: Transform,
    pub b: SparseCodes,
    pub x: ImageGrid,
}

/// Result of a solve: the reconstruction (image frame), the learned
/// transform and codes, and the per-iteration trace.
#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub x: ImageGrid,
    pub w: Transform,
    pub b: SparseCodes,
    pub trace: IterationTrace,
}

/// Everything the per-iteration callback can observe.
pub struct IterationSnapshot<'a> {
    pub row: &'a IterationRow,
    pub w: &'a Transform,
    pub b: &'a SparseCodes,
    /// Working-frame iterate (see [`InitState::x`]).
    pub x: &'a ImageGrid,
}

fn transform_mode_for(algo: Algo) -> TransformMode {
    match algo {
        Algo::A1 | Algo::A3 => TransformMode::WellConditioned,
        Algo::A2 => TransformMode::Unitary,
    }
}

/// Evaluates the objective for the chosen formulation, first checking that
/// the triple is feasible: codes within budget (A1/A2), iterate inside the
/// energy ball, transform unitary (A2) or nonsingular (A1/A3).
pub fn eval_objective(
    w: &Transform,
    b: &SparseCodes,
    x: &ImageGrid,
    op: &SensingOperator,
    y: &[C64],
    params: &SolverParams,
    cfg: &PatchConfig,
    budget: Option<usize>,
) -> Result<ObjectiveBreakdown> {
    let patches = extract_patches(x, cfg)?;
    let n = cfg.n();
    let patch_count = patches.count();
    if w.n() != n || b.data.nrows() != n || b.data.ncols() != patch_count {
        return Err(Error::Config("transform/code dimensions do not match the patch geometry".into()));
    }

    let x_norm = x.norm();
    if x_norm > params.energy_cap * (1.0 + 1e-9) {
        return Err(Error::Feasibility(format!(
            "iterate norm {x_norm} exceeds the energy cap {}",
            params.energy_cap
        )));
    }
    let nnz = b.nnz();
    if matches!(params.algo, Algo::A1 | Algo::A2) {
        let allowed = match budget {
            Some(s) => s,
            None => params
                .target_budget(n, patch_count)?
                .expect("A1/A2 always carry a budget"),
        };
        if nnz > allowed {
            return Err(Error::Feasibility(format!(
                "codes have {nnz} nonzeros, budget allows {allowed}"
            )));
        }
    }
    let regularizer = match params.algo {
        Algo::A1 | Algo::A3 => {
            let q = eval_q(&w.data);
            if !q.is_finite() {
                return Err(Error::Feasibility("transform is singular".into()));
            }
            params.lambda(patch_count) * q
        }
        Algo::A2 => {
            let defect = w.unitary_defect();
            if defect > 1e-10 * n as f64 {
                return Err(Error::Feasibility(format!(
                    "transform deviates from unitary by {defect}"
                )));
            }
            0.0
        }
    };

    let residual = &w.data * &patches.data - &b.data;
    let sparsification_error: f64 = residual.iter().map(|z| z.norm_sqr()).sum();

    let ax = op.apply(x)?;
    if ax.len() != y.len() {
        return Err(Error::Config(format!(
            "measurement vector has {} entries, operator yields {}",
            y.len(),
            ax.len()
        )));
    }
    let fidelity: f64 =
        params.nu * ax.iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();

    let sparsity_penalty = match params.algo {
        Algo::A3 => {
            let eta = params.eta.expect("validated A3 params carry eta");
            eta * eta * nnz as f64
        }
        _ => 0.0,
    };

    Ok(ObjectiveBreakdown {
        sparsification_error,
        fidelity,
        regularizer,
        sparsity_penalty,
        total: sparsification_error + fidelity + regularizer + sparsity_penalty,
    })
}

fn sparse_code(z: &DMatrix<C64>, params: &SolverParams, budget: Option<usize>) -> Result<SparseCodes> {
    match params.algo {
        Algo::A1 | Algo::A2 => {
            project_s_l0(z, budget.expect("A1/A2 always carry a budget"))
        }
        Algo::A3 => hard_threshold(z, params.eta.expect("validated A3 params carry eta")),
    }
}

/// Builds the reference initialization: W⁰ the patch 2D DCT, x⁰ the
/// zero-fill (or adjoint) reconstruction rescaled onto the energy ball,
/// B⁰ the exact sparse coding of x⁰'s patches under W⁰.
pub fn initialize(meas: &Measurements, params: &SolverParams, cfg: &PatchConfig) -> Result<InitState> {
    params.validate()?;
    let w = dct_transform(cfg.side, transform_mode_for(params.algo));
    let mut x = match meas {
        Measurements::KSpace { kspace, mask } => {
            let img = zero_fill_recon(kspace, mask)?;
            let (h, wd) = img.shape();
            ImageGrid::new(h, wd, ifftshift2(img.as_slice(), h, wd))?
        }
        Measurements::Operator { op, y } => op.adjoint(y)?,
    };
    let norm = x.norm();
    if norm > params.energy_cap {
        x.scale(params.energy_cap / norm);
    }
    let patches = extract_patches(&x, cfg)?;
    let target = params.target_budget(cfg.n(), patches.count())?;
    let budget = target.map(|t| params.budget_at(1, t));
    let b = sparse_code(&(&w.data * &patches.data), params, budget)?;
    Ok(InitState { w, b, x })
}

struct MeasurementContext<'a> {
    op: SensingOperator,
    y: Vec<C64>,
    // internal-frame zero-filled k-space and mask for the closed-form path
    kspace_internal: Option<(Vec<C64>, Vec<bool>)>,
    reference: Option<&'a ImageGrid>,
    /// true when the working frame is the unshifted k-space frame and
    /// outputs must be fftshifted back to the image frame
    shifted_frame: bool,
}

impl MeasurementContext<'_> {
    fn to_image_frame(&self, x: &ImageGrid) -> ImageGrid {
        if self.shifted_frame {
            let (h, w) = x.shape();
            ImageGrid::new(h, w, fftshift2(x.as_slice(), h, w))
                .expect("frame conversion preserves finiteness")
        } else {
            x.clone()
        }
    }
}

fn build_context<'a>(
    meas: &Measurements<'a>,
    reference: Option<&'a ImageGrid>,
) -> Result<MeasurementContext<'a>> {
    match meas {
        Measurements::KSpace { kspace, mask } => {
            if kspace.shape() != mask.shape() {
                return Err(Error::Config(format!(
                    "k-space is {:?} but mask is {:?}",
                    kspace.shape(),
                    mask.shape()
                )));
            }
            if !kspace.is_supported_on(mask) {
                return Err(Error::Argument(
                    "k-space carries nonzero samples at unsampled locations".into(),
                ));
            }
            let (h, w) = kspace.shape();
            let s0 = ifftshift2(kspace.as_slice(), h, w);
            let flags = ifftshift2(mask.flags(), h, w);
            let internal_mask = SamplingMask::new(h, w, flags.clone())?;
            let y: Vec<C64> = internal_mask.sampled_indices().iter().map(|&k| s0[k]).collect();
            Ok(MeasurementContext {
                op: SensingOperator::fourier(internal_mask),
                y,
                kspace_internal: Some((s0, flags)),
                reference,
                shifted_frame: true,
            })
        }
        Measurements::Operator { op, y } => {
            if y.len() != op.rows() {
                return Err(Error::Config(format!(
                    "measurement vector has {} entries, operator has {} rows",
                    y.len(),
                    op.rows()
                )));
            }
            Ok(MeasurementContext {
                op: (*op).clone(),
                y: y.to_vec(),
                kspace_internal: None,
                reference,
                shifted_frame: false,
            })
        }
    }
}

/// Runs the full descent loop from the reference initialization.
pub fn solve(
    meas: &Measurements,
    params: &SolverParams,
    cfg: &PatchConfig,
    reference: Option<&ImageGrid>,
    on_iter: Option<&mut dyn FnMut(&IterationSnapshot)>,
) -> Result<SolveOutput> {
    let init = initialize(meas, params, cfg)?;
    solve_from(init, meas, params, cfg, reference, on_iter)
}

/// Runs the descent loop from a caller-supplied starting triple, which must
/// be feasible for the chosen formulation.
pub fn solve_from(
    init: InitState,
    meas: &Measurements,
    params: &SolverParams,
    cfg: &PatchConfig,
    reference: Option<&ImageGrid>,
    mut on_iter: Option<&mut dyn FnMut(&IterationSnapshot)>,
) -> Result<SolveOutput> {
    params.validate()?;
    let ctx = build_context(meas, reference)?;
    let (height, width) = ctx.op.image_shape();
    cfg.validate_for(height, width)?;
    if init.x.shape() != (height, width) {
        return Err(Error::Config(format!(
            "initial image is {:?}, measurements imply {height}x{width}",
            init.x.shape()
        )));
    }

    let InitState { mut w, mut b, mut x } = init;
    let patch_count = cfg.patch_count(height, width);
    let target = params.target_budget(cfg.n(), patch_count)?;
    let lambda = params.lambda(patch_count);

    let mut budget = target.map(|t| params.budget_at(1, t));
    let mut g_prev = eval_objective(&w, &b, &x, &ctx.op, &ctx.y, params, cfg, budget)?;

    // scale anchor for the monotonicity slack, so exact-floor runs (objective
    // 0 or λn/2) tolerate round-off at the problem's natural energy scale
    let x0_patches = extract_patches(&x, cfg)?;
    let y_energy: f64 = ctx.y.iter().map(|z| z.norm_sqr()).sum();
    let scale0 = g_prev
        .total
        .abs()
        .max(x0_patches.frobenius_norm().powi(2) + params.nu * y_energy);
    drop(x0_patches);

    let check_descent = |from: f64, to: f64, step: &str| -> Result<()> {
        let slack = 1e-9 * from.abs() + 1e-12 * scale0;
        if to > from + slack {
            return Err(Error::Invariant(format!(
                "objective rose from {from} to {to} during {step}"
            )));
        }
        Ok(())
    };

    let mut trace = IterationTrace::default();
    for t in 1..=params.outer {
        budget = target.map(|tgt| params.budget_at(t, tgt));
        let x_prev = x.clone();
        let patches = extract_patches(&x, cfg)?;
        let mut substeps = Vec::with_capacity(2 * params.inner + 1);

        for _ in 0..params.inner {
            w = match params.algo {
                Algo::A1 | Algo::A3 => update_transform_well_conditioned(&patches, &b, lambda)?,
                Algo::A2 => update_transform_unitary(&patches, &b)?,
            };
            let g = eval_objective(&w, &b, &x, &ctx.op, &ctx.y, params, cfg, budget)?;
            check_descent(g_prev.total, g.total, "the transform update")?;
            substeps.push(g.total);
            g_prev = g;

            b = sparse_code(&(&w.data * &patches.data), params, budget)?;
            let g = eval_objective(&w, &b, &x, &ctx.op, &ctx.y, params, cfg, budget)?;
            check_descent(g_prev.total, g.total, "sparse coding")?;
            substeps.push(g.total);
            g_prev = g;
        }

        x = match &ctx.kspace_internal {
            Some((s0, flags)) => {
                let spectrum = build_bccb_spectrum(&w, cfg, height, width)?;
                mri_image_update(
                    &w,
                    &b,
                    s0,
                    flags,
                    params.nu,
                    params.energy_cap,
                    &spectrum,
                    cfg,
                )?
            }
            None => generic_image_update(
                &w,
                &b,
                &ctx.op,
                &ctx.y,
                params.nu,
                params.energy_cap,
                cfg,
            )?,
        };
        let g = eval_objective(&w, &b, &x, &ctx.op, &ctx.y, params, cfg, budget)?;
        check_descent(g_prev.total, g.total, "the image update")?;
        substeps.push(g.total);

        let dx = x
            .as_slice()
            .iter()
            .zip(x_prev.as_slice())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let (psnr_db, hfen) = match ctx.reference {
            Some(reference) => {
                let img = ctx.to_image_frame(&x);
                (Some(metrics::psnr(&img, reference)?), Some(metrics::hfen(&img, reference)?))
            }
            None => (None, None),
        };
        let row = IterationRow {
            iter: t,
            objective: g,
            dx,
            sparsity_fraction: b.nnz() as f64 / (cfg.n() * patch_count) as f64,
            kappa: condition_number(&w.data),
            psnr_db,
            hfen,
            substeps,
        };
        if let Some(cb) = on_iter.as_deref_mut() {
            cb(&IterationSnapshot { row: &row, w: &w, b: &b, x: &x });
        }
        let prev_total = g_prev.total;
        g_prev = g;
        trace.rows.push(row);

        if let Some(tol) = params.early_stop {
            if t >= 2 {
                let drop = prev_total - g.total;
                if drop.abs() <= tol * prev_total.abs().max(f64::MIN_POSITIVE) {
                    break;
                }
            }
        }
    }

    let x_out = ctx.to_image_frame(&x);
    Ok(SolveOutput { x: x_out, w, b, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::{gen_mask_random2d, simulate_kspace};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_image(h: usize, w: usize, seed: u64) -> ImageGrid {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        ImageGrid::from_fn(h, w, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn a1_params(outer: usize) -> SolverParams {
        SolverParams { outer, ..SolverParams::defaults(Algo::A1) }
    }

    #[test]
    fn parameter_validation_catches_misuse() {
        let mut p = SolverParams::defaults(Algo::A1);
        p.eta = Some(0.1);
        assert!(p.validate().is_err());

        let mut p = SolverParams::defaults(Algo::A3);
        assert!(p.validate().is_err());
        p.eta = Some(0.1);
        assert!(p.validate().is_ok());
        p.sparsity = Some(SparsityLevel::Count(5));
        assert!(p.validate().is_err());

        let mut p = SolverParams::defaults(Algo::A2);
        p.sparsity = Some(SparsityLevel::Fraction(1.5));
        assert!(p.validate().is_err());
        p.sparsity = None;
        assert!(p.validate().is_err());

        let mut p = SolverParams::defaults(Algo::A1);
        p.inner = 0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn budget_ramp_is_non_decreasing_with_correct_endpoints() {
        let mut p = SolverParams::defaults(Algo::A1);
        p.outer = 20;
        p.schedule = true;
        let target = 1000;
        let budgets: Vec<usize> = (1..=20).map(|t| p.budget_at(t, target)).collect();
        assert_eq!(budgets[0], 600);
        assert!(budgets.windows(2).all(|w| w[0] <= w[1]));
        assert!(budgets[9..].iter().all(|&b| b == target));
        // schedule off: constant target
        p.schedule = false;
        assert!((1..=20).all(|t| p.budget_at(t, target) == target));
    }

    #[test]
    fn dct_initialization_is_orthonormal() {
        for side in [2, 3, 6] {
            let w = dct_transform(side, TransformMode::Unitary);
            assert!(w.unitary_defect() <= 1e-12, "side {side}");
        }
    }

    #[test]
    fn objective_matches_independent_recomputation() {
        let (h, wd) = (6, 6);
        let cfg = PatchConfig::new(2, 1, true).unwrap();
        let img = random_image(h, wd, 1);
        let mask = gen_mask_random2d(h, wd, 2.0, 0.5, 1.0, 2).unwrap();
        let ks = simulate_kspace(&img, &mask, 0.0, 0).unwrap();
        let meas = Measurements::KSpace { kspace: &ks, mask: &mask };
        let params = a1_params(5);
        let init = initialize(&meas, &params, &cfg).unwrap();
        let ctx = build_context(&meas, None).unwrap();
        let budget = params
            .target_budget(cfg.n(), cfg.patch_count(h, wd))
            .unwrap();
        let g = eval_objective(&init.w, &init.b, &init.x, &ctx.op, &ctx.y, &params, &cfg, budget)
            .unwrap();

        // independent recomputation, term by term
        let patches = extract_patches(&init.x, &cfg).unwrap();
        let mut sparse_err = 0.0;
        for j in 0..patches.count() {
            let col = &init.w.data * patches.data.column(j) - init.b.data.column(j);
            sparse_err += col.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        assert!((g.sparsification_error - sparse_err).abs() <= 1e-10 * sparse_err.max(1.0));

        let ax = ctx.op.apply(&init.x).unwrap();
        let fid: f64 =
            params.nu * ax.iter().zip(&ctx.y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
        assert!((g.fidelity - fid).abs() <= 1e-10 * fid.max(1.0));

        let svd = init.w.data.clone().svd(false, false);
        let q: f64 = svd
            .singular_values
            .iter()
            .map(|&s| 0.5 * s * s - s.ln())
            .sum();
        let reg = params.lambda(patches.count()) * q;
        assert!((g.regularizer - reg).abs() <= 1e-10 * reg.max(1.0));
        assert_eq!(g.sparsity_penalty, 0.0);
        let total = sparse_err + fid + reg;
        assert!((g.total - total).abs() <= 1e-10 * total.max(1.0));
    }

    #[test]
    fn floor_objectives_for_trivial_triples() {
        let (h, wd) = (4, 4);
        let cfg = PatchConfig::new(2, 1, true).unwrap();
        let mask = SamplingMask::new(h, wd, vec![true; 16]).unwrap();
        let op = SensingOperator::fourier(mask);
        let y = vec![C64::new(0.0, 0.0); 16];
        let x = ImageGrid::zeros(h, wd);
        let b = SparseCodes { data: DMatrix::zeros(4, 16), budget: Some(0) };

        let params = a1_params(1);
        let w = dct_transform(2, TransformMode::WellConditioned);
        let g = eval_objective(&w, &b, &x, &op, &y, &params, &cfg, None).unwrap();
        let floor = params.lambda(16) * 2.0;
        assert!((g.total - floor).abs() <= 1e-12 * floor);

        let params = SolverParams::defaults(Algo::A2);
        let w = dct_transform(2, TransformMode::Unitary);
        let g = eval_objective(&w, &b, &x, &op, &y, &params, &cfg, None).unwrap();
        assert_eq!(g.total, 0.0);
    }

    #[test]
    fn signed_permutations_leave_the_objective_unchanged() {
        let (h, wd) = (6, 6);
        let cfg = PatchConfig::new(2, 1, true).unwrap();
        let img = random_image(h, wd, 3);
        let mask = gen_mask_random2d(h, wd, 2.0, 0.5, 1.0, 4).unwrap();
        let ks = simulate_kspace(&img, &mask, 0.0, 0).unwrap();
        let meas = Measurements::KSpace { kspace: &ks, mask: &mask };
        let params = a1_params(5);
        let init = initialize(&meas, &params, &cfg).unwrap();
        let ctx = build_context(&meas, None).unwrap();
        let g = eval_objective(&init.w, &init.b, &init.x, &ctx.op, &ctx.y, &params, &cfg, None)
            .unwrap();

        // signed permutation: reorder rows and flip signs
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let n = cfg.n();
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let mut theta = DMatrix::<C64>::zeros(n, n);
        for (r, &p) in perm.iter().enumerate() {
            theta[(r, p)] = C64::new(if rng.random_bool(0.5) { 1.0 } else { -1.0 }, 0.0);
        }
        let w2 = Transform { data: &theta * &init.w.data, mode: init.w.mode };
        let b2 = SparseCodes { data: &theta * &init.b.data, budget: init.b.budget };
        let g2 =
            eval_objective(&w2, &b2, &init.x, &ctx.op, &ctx.y, &params, &cfg, None).unwrap();
        assert!((g.total - g2.total).abs() <= 1e-9 * g.total.max(1.0));
    }

    #[test]
    fn infeasible_triples_are_rejected() {
        let (h, wd) = (4, 4);
        let cfg = PatchConfig::new(2, 1, true).unwrap();
        let mask = SamplingMask::new(h, wd, vec![true; 16]).unwrap();
        let op = SensingOperator::fourier(mask);
        let y = vec![C64::new(0.0, 0.0); 16];
        let params = a1_params(1);
        let w = dct_transform(2, TransformMode::WellConditioned);
        let x = ImageGrid::zeros(h, wd);

        // budget violation
        let b = SparseCodes {
            data: DMatrix::from_element(4, 16, C64::new(1.0, 0.0)),
            budget: None,
        };
        assert!(matches!(
            eval_objective(&w, &b, &x, &op, &y, &params, &cfg, Some(3)),
            Err(Error::Feasibility(_))
        ));

        // energy violation
        let b = SparseCodes { data: DMatrix::zeros(4, 16), budget: Some(0) };
        let mut big = ImageGrid::zeros(h, wd);
        big.as_mut_slice()[0] = C64::new(2e5, 0.0);
        assert!(matches!(
            eval_objective(&w, &b, &big, &op, &y, &params, &cfg, None),
            Err(Error::Feasibility(_))
        ));

        // A2 with a non-unitary transform
        let params2 = SolverParams::defaults(Algo::A2);
        let skewed = Transform {
            data: DMatrix::from_diagonal_element(4, 4, C64::new(2.0, 0.0)),
            mode: TransformMode::Unitary,
        };
        assert!(matches!(
            eval_objective(&skewed, &b, &x, &op, &y, &params2, &cfg, None),
            Err(Error::Feasibility(_))
        ));
    }

    #[test]
    fn initialization_recovers_truth_under_a_full_mask() {
        let (h, wd) = (8, 8);
        let cfg = PatchConfig::new(2, 1, true).unwrap();
        let img = random_image(h, wd, 6);
        let mask = SamplingMask::new(h, wd, vec![true; 64]).unwrap();
        let ks = simulate_kspace(&img, &mask, 0.0, 0).unwrap();
        let params = a1_params(5);
        let init =
            initialize(&Measurements::KSpace { kspace: &ks, mask: &mask }, &params, &cfg).unwrap();
        let internal_truth = ifftshift2(img.as_slice(), h, wd);
        for (a, b) in init.x.as_slice().iter().zip(&internal_truth) {
            assert!((a - b).norm() < 1e-12);
        }
        // DCT of a generic image has no zero coefficients, so the budget binds
        let target = params.target_budget(4, 64).unwrap().unwrap();
        assert_eq!(init.b.nnz(), target);
    }

    #[test]
    fn zero_measurements_freeze_the_iterates_at_zero() {
        let (h, wd) = (8, 8);
        let cfg = PatchConfig::new(2, 1, true).unwrap();
        let mask = gen_mask_random2d(h, wd, 2.0, 0.0, 1.0, 7).unwrap();
        let ks = KSpaceData::zeros(h, wd);
        for algo in [Algo::A1, Algo::A2, Algo::A3] {
            let mut params = SolverParams { outer: 5, ..SolverParams::defaults(algo) };
            if algo == Algo::A3 {
                params.eta = Some(0.1);
            }
            let out = solve(
                &Measurements::KSpace { kspace: &ks, mask: &mask },
                &params,
                &cfg,
                None,
                None,
            )
            .unwrap();
            assert_eq!(out.x.norm(), 0.0, "{algo:?} drifted from zero");
            assert_eq!(out.trace.rows.len(), 5);
            for row in &out.trace.rows {
                assert_eq!(row.dx, 0.0);
            }
        }
    }

    #[test]
    fn small_end_to_end_run_is_monotone_for_all_algorithms() {
        let (h, wd) = (12, 12);
        let cfg = PatchConfig::new(2, 1, true).unwrap();
        let img = random_image(h, wd, 8);
        let mask = gen_mask_random2d(h, wd, 2.5, 1.0, 1.5, 9).unwrap();
        let ks = simulate_kspace(&img, &mask, 0.0, 0).unwrap();
        let meas = Measurements::KSpace { kspace: &ks, mask: &mask };
        for algo in [Algo::A1, Algo::A2, Algo::A3] {
            let mut params = SolverParams { outer: 8, ..SolverParams::defaults(algo) };
            if algo == Algo::A3 {
                params.eta = Some(0.05);
            }
            let out = solve(&meas, &params, &cfg, Some(&img), None).unwrap();
            assert_eq!(out.trace.rows.len(), 8);
            let mut last = f64::INFINITY;
            for row in &out.trace.rows {
                for &g in &row.substeps {
                    assert!(
                        g <= last * (1.0 + 1e-9) + 1e-9,
                        "{algo:?} objective rose: {g} after {last}"
                    );
                    last = g;
                }
                assert!(row.kappa.is_finite());
                assert!(row.psnr_db.unwrap().is_finite());
                assert!(row.hfen.unwrap().is_finite());
            }
        }
    }

    #[test]
    fn schedule_keeps_descent_intact() {
        let (h, wd) = (12, 12);
        let cfg = PatchConfig::new(2, 1, true).unwrap();
        let img = random_image(h, wd, 10);
        let mask = gen_mask_random2d(h, wd, 2.5, 1.0, 1.5, 11).unwrap();
        let ks = simulate_kspace(&img, &mask, 0.0, 0).unwrap();
        let params = SolverParams { outer: 10, schedule: true, ..SolverParams::defaults(Algo::A1) };
        let out = solve(
            &Measurements::KSpace { kspace: &ks, mask: &mask },
            &params,
            &cfg,
            None,
            None,
        )
        .unwrap();
        // the budget ramp makes the sparsity fraction non-decreasing
        let fracs: Vec<f64> = out.trace.rows.iter().map(|r| r.sparsity_fraction).collect();
        for w in fracs.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "sparsity fraction fell under the ramp: {fracs:?}");
        }
    }

    #[test]
    fn operator_variant_matches_the_kspace_variant() {
        let (h, wd) = (8, 8);
        let cfg = PatchConfig::new(2, 1, true).unwrap();
        let img = random_image(h, wd, 12);
        let mask = gen_mask_random2d(h, wd, 2.0, 0.5, 1.0, 13).unwrap();
        let ks = simulate_kspace(&img, &mask, 0.0, 0).unwrap();
        let params = a1_params(4);
        let from_kspace = solve(
            &Measurements::KSpace { kspace: &ks, mask: &mask },
            &params,
            &cfg,
            None,
            None,
        )
        .unwrap();

        // the same measurements phrased as a generic operator in the
        // internal frame: y restricted from the ifftshifted k-space
        let s0 = ifftshift2(ks.as_slice(), h, wd);
        let flags = ifftshift2(mask.flags(), h, wd);
        let internal_mask = SamplingMask::new(h, wd, flags).unwrap();
        let y: Vec<C64> = internal_mask.sampled_indices().iter().map(|&k| s0[k]).collect();
        let op = SensingOperator::fourier(internal_mask);
        let from_op = solve(
            &Measurements::Operator { op: &op, y: &y },
            &params,
            &cfg,
            None,
            None,
        )
        .unwrap();

        // the operator variant works in the internal frame, so shift back
        let x_int = ImageGrid::new(h, wd, ifftshift2(from_kspace.x.as_slice(), h, wd)).unwrap();
        let err: f64 = x_int
            .as_slice()
            .iter()
            .zip(from_op.x.as_slice())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-6 * x_int.norm().max(1.0), "variants diverged by {err}");
    }

    #[test]
    fn early_stop_shortens_the_run() {
        let (h, wd) = (10, 10);
        let cfg = PatchConfig::new(2, 1, true).unwrap();
        let img = random_image(h, wd, 14);
        let mask = gen_mask_random2d(h, wd, 2.0, 0.5, 1.0, 15).unwrap();
        let ks = simulate_kspace(&img, &mask, 0.0, 0).unwrap();
        let params = SolverParams {
            outer: 60,
            early_stop: Some(1e-3),
            ..SolverParams::defaults(Algo::A1)
        };
        let out = solve(
            &Measurements::KSpace { kspace: &ks, mask: &mask },
            &params,
            &cfg,
            None,
            None,
        )
        .unwrap();
        assert!(out.trace.rows.len() < 60, "early stop never fired");
    }

    #[test]
    fn inconsistent_kspace_is_rejected() {
        let (h, wd) = (4, 4);
        let cfg = PatchConfig::new(2, 1, true).unwrap();
        let mut flags = vec![false; 16];
        flags[0] = true;
        let mask = SamplingMask::new(h, wd, flags).unwrap();
        let mut ks = KSpaceData::zeros(h, wd);
        ks.as_mut_slice()[5] = C64::new(1.0, 0.0);
        let params = a1_params(1);
        assert!(solve(
            &Measurements::KSpace { kspace: &ks, mask: &mask },
            &params,
            &cfg,
            None,
            None
        )
        .is_err());
    }

    #[test]
    fn zero_iterations_return_the_initialization() {
        let (h, wd) = (8, 8);
        let cfg = PatchConfig::new(2, 1, true).unwrap();
        let img = random_image(h, wd, 16);
        let mask = gen_mask_random2d(h, wd, 2.0, 0.5, 1.0, 17).unwrap();
        let ks = simulate_kspace(&img, &mask, 0.0, 0).unwrap();
        let params = a1_params(0);
        let out = solve(
            &Measurements::KSpace { kspace: &ks, mask: &mask },
            &params,
            &cfg,
            None,
            None,
        )
        .unwrap();
        assert!(out.trace.rows.is_empty());
        let zf = zero_fill_recon(&ks, &mask).unwrap();
        for (a, b) in out.x.as_slice().iter().zip(zf.as_slice()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn trace_serializes_to_csv() {
        let trace = IterationTrace {
            rows: vec![IterationRow {
                iter: 1,
                objective: ObjectiveBreakdown {
                    sparsification_error: 1.5,
                    fidelity: 0.5,
                    regularizer: 2.0,
                    sparsity_penalty: 0.0,
                    total: 4.0,
                },
                dx: 0.25,
                sparsity_fraction: 0.055,
                kappa: 1.0,
                psnr_db: Some(f64::INFINITY),
                hfen: None,
                substeps: vec![4.5, 4.25, 4.0],
            }],
        };
        let mut buf = Vec::new();
        trace.to_csv(&mut buf, 0.0).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "iter,objective,sparsification_error,fidelity,regularizer,sparsity_penalty,dx,kappa,psnr,hfen"
        );
        assert_eq!(lines.next().unwrap(), "1,4,1.5,0.5,2,0,0.25,1,inf,");

        let mut buf = Vec::new();
        trace.to_csv(&mut buf, 2.0).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("1,2,"));
    }

    #[test]
    fn condition_number_matches_svd() {
        let eye = DMatrix::<C64>::identity(4, 4);
        assert_eq!(condition_number(&eye), 1.0);
        let mut d = DMatrix::<C64>::zeros(2, 2);
        d[(0, 0)] = C64::new(2.0, 0.0);
        d[(1, 1)] = C64::new(1.0, 0.0);
        assert!((condition_number(&d) - 2.0).abs() < 1e-12);
        let z = DMatrix::<C64>::zeros(3, 3);
        assert_eq!(condition_number(&z), f64::INFINITY);
    }
}
