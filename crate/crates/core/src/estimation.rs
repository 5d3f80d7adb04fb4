//! Quantum Fisher information, SLD commutator and Cramér-Rao bounds for the
//! parameter vector `theta = [delta_t_s, delta_omega_s]`.

use nalgebra::Matrix2;
use num_complex::Complex64 as C64;

use crate::biphoton::{build_biphoton, BiphotonParams, IDLER, SIGNAL};
use crate::channel::{apply_channel_and_storage, ChannelParams};
use crate::error::{Error, Result};
use crate::gaussian::GaussianAmplitude;

/// Positive semidefinite 2x2 cost matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostMatrix(Matrix2<f64>);

impl CostMatrix {
    pub fn new(g: Matrix2<f64>) -> Result<Self> {
        if (g[(0, 1)] - g[(1, 0)]).abs() > 1e-12 * g.abs().max().max(1.0) {
            return Err(Error::InvalidParams("cost matrix must be symmetric".into()));
        }
        let g = (g + g.transpose()) * 0.5;
        if g.symmetric_eigenvalues().min() < -1e-12 {
            return Err(Error::InvalidParams("cost matrix must be positive semidefinite".into()));
        }
        Ok(CostMatrix(g))
    }

    pub fn diag(a: f64, b: f64) -> Result<Self> {
        Self::new(Matrix2::new(a, 0.0, 0.0, b))
    }

    pub fn matrix(&self) -> &Matrix2<f64> {
        &self.0
    }
}

fn t_sq(p: &BiphotonParams) -> f64 {
    p.sigma_coh.powi(2) + p.sigma_cor.powi(2) / 4.0
}

fn w_sq(p: &BiphotonParams) -> f64 {
    1.0 / (16.0 * p.sigma_coh.powi(2)) + 1.0 / (4.0 * p.sigma_cor.powi(2))
}

/// `J = 4 diag[W^2, T^2]`.
pub fn qfi_analytic(p: &BiphotonParams) -> Result<Matrix2<f64>> {
    p.validate()?;
    Ok(Matrix2::new(4.0 * w_sq(p), 0.0, 0.0, 4.0 * t_sq(p)))
}

/// `|<[L_t, L_w]>|`, the same for every biphoton.
pub fn commutator_term(p: &BiphotonParams) -> Result<f64> {
    p.validate()?;
    Ok(4.0)
}

/// Finite-difference steps for `(delta_t_s, delta_omega_s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDiffStep {
    pub dt: f64,
    pub dw: f64,
}

impl FiniteDiffStep {
    /// `1e-3 / W` and `1e-3 / T`.
    pub fn default_for(p: &BiphotonParams) -> Self {
        FiniteDiffStep {
            dt: 1e-3 / w_sq(p).sqrt(),
            dw: 1e-3 / t_sq(p).sqrt(),
        }
    }

    fn halved(&self) -> Self {
        FiniteDiffStep {
            dt: self.dt / 2.0,
            dw: self.dw / 2.0,
        }
    }

    fn check(&self, p: &BiphotonParams) -> Result<()> {
        let (t, w) = (t_sq(p).sqrt(), w_sq(p).sqrt());
        if !(self.dt > 0.0 && self.dw > 0.0 && self.dt.is_finite() && self.dw.is_finite()) {
            return Err(Error::InvalidParams("finite-difference steps must be positive".into()));
        }
        let scaled = (self.dt * w).max(self.dw * t);
        if scaled > 0.1 {
            return Err(Error::StepTooLarge(scaled));
        }
        Ok(())
    }
}

/// Returned-signal and stored-idler state for the given channel parameters.
pub fn receiver_state(p: &BiphotonParams, ch: &ChannelParams) -> Result<GaussianAmplitude> {
    apply_channel_and_storage(&build_biphoton(p)?, SIGNAL, IDLER, ch)
}

fn displaced(ch: &ChannelParams, dt: f64, dw: f64) -> ChannelParams {
    ChannelParams {
        delta_t_s: ch.delta_t_s + dt,
        delta_omega_s: ch.delta_omega_s + dw,
        ..*ch
    }
}

fn ln_fidelity(reference: &GaussianAmplitude, p: &BiphotonParams, ch: &ChannelParams, dt: f64, dw: f64) -> Result<f64> {
    let moved = receiver_state(p, &displaced(ch, dt, dw))?;
    Ok(2.0 * reference.log_overlap(&moved)?.re)
}

fn qfi_stencil(p: &BiphotonParams, ch: &ChannelParams, step: &FiniteDiffStep) -> Result<Matrix2<f64>> {
    let reference = receiver_state(p, ch)?;
    let f = |dt: f64, dw: f64| ln_fidelity(&reference, p, ch, dt, dw);
    let (h, k) = (step.dt, step.dw);
    let f0 = f(0.0, 0.0)?;
    // J = -2 d^2 F at zero offset; F = 1 and grad F = 0 there, so the
    // second derivatives of F and ln F coincide.
    let jtt = -2.0 * (f(h, 0.0)? + f(-h, 0.0)? - 2.0 * f0) / (h * h);
    let jww = -2.0 * (f(0.0, k)? + f(0.0, -k)? - 2.0 * f0) / (k * k);
    let jtw = -2.0 * (f(h, k)? - f(h, -k)? - f(-h, k)? + f(-h, -k)?) / (4.0 * h * k);
    Ok(Matrix2::new(jtt, jtw, jtw, jww))
}

fn relative_change(a: &Matrix2<f64>, b: &Matrix2<f64>) -> f64 {
    (a - b).abs().max() / b.abs().max()
}

/// Quantum Fisher information from central differences of the log-fidelity
/// `ln |<psi(theta)|psi(theta + d)>|^2`, Richardson-combined over `step` and
/// `step / 2`.
pub fn qfi_numeric(p: &BiphotonParams, ch: &ChannelParams, step: &FiniteDiffStep) -> Result<Matrix2<f64>> {
    step.check(p)?;
    let coarse = qfi_stencil(p, ch, step)?;
    let fine = qfi_stencil(p, ch, &step.halved())?;
    let change = relative_change(&coarse, &fine);
    if change > 1e-5 {
        return Err(Error::StepTooLarge(change));
    }
    Ok((fine * 4.0 - coarse) / 3.0)
}

fn commutator_stencil(p: &BiphotonParams, ch: &ChannelParams, step: &FiniteDiffStep) -> Result<f64> {
    // <d_t psi | d_w psi> is the mixed derivative of
    // K(x, y) = <psi(theta + x e_t) | psi(theta + y e_w)>.
    let (h, k) = (step.dt, step.dw);
    let bra = |x: f64| receiver_state(p, &displaced(ch, x, 0.0));
    let ket = |y: f64| receiver_state(p, &displaced(ch, 0.0, y));
    let (bp, bm) = (bra(h)?, bra(-h)?);
    let (kp, km) = (ket(k)?, ket(-k)?);
    let mixed: C64 = (bp.overlap(&kp)? - bp.overlap(&km)? - bm.overlap(&kp)? + bm.overlap(&km)?) / (4.0 * h * k);
    // <psi|[L_t, L_w]|psi> = 8 i Im <d_t psi | d_w psi>.
    Ok(8.0 * mixed.im.abs())
}

/// The SLD commutator magnitude from overlap derivatives.
pub fn commutator_numeric(p: &BiphotonParams, ch: &ChannelParams, step: &FiniteDiffStep) -> Result<f64> {
    step.check(p)?;
    let coarse = commutator_stencil(p, ch, step)?;
    let fine = commutator_stencil(p, ch, &step.halved())?;
    if ((coarse - fine) / fine).abs() > 1e-5 {
        return Err(Error::StepTooLarge(((coarse - fine) / fine).abs()));
    }
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Right-hand side `tr[G J^-1] + sqrt(det G) / det J |<[L, L]>|`.
pub fn cr_rhs(g: &CostMatrix, p: &BiphotonParams) -> Result<f64> {
    let j = qfi_analytic(p)?;
    let det_j = j.determinant();
    let j_inv = j.try_inverse().ok_or(Error::SingularJ)?;
    if !(det_j > 0.0) {
        return Err(Error::SingularJ);
    }
    let g = g.matrix();
    let det_g = g.determinant().max(0.0);
    Ok((g * j_inv).trace() + det_g.sqrt() / det_j * commutator_term(p)?)
}

/// Joint bound `delta_t delta_w >= (1 + 2TW) / (8 T^2 W^2)`.
pub fn product_bound(p: &BiphotonParams) -> Result<f64> {
    p.validate()?;
    let q = t_sq(p) * w_sq(p);
    Ok((1.0 + 2.0 * q.sqrt()) / (8.0 * q))
}

/// Output of the numeric product-bound search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZScan {
    pub bound: f64,
    /// Cost weight `z` maximising the bound at the optimal `delta_w`.
    pub z_star: f64,
    /// Frequency error at which the product bound is tightest.
    pub delta_omega_star: f64,
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a maximum of `f` on `[lo, hi]`.
fn golden_max<F: Fn(f64) -> Result<f64>>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<(f64, f64)> {
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while (hi - lo).abs() > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1)?;
        }
    }
    let x = 0.5 * (lo + hi);
    Ok((x, f(x)?))
}

/// Grid scan followed by golden-section refinement between the neighbours of
/// the best grid point.
fn scan_max<F: Fn(f64) -> Result<f64>>(f: F, lo: f64, hi: f64, points: usize) -> Result<(f64, f64)> {
    let step = (hi - lo) / (points - 1) as f64;
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..points {
        let v = f(lo + step * i as f64)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    let a = lo + step * best.0.saturating_sub(1) as f64;
    let b = lo + step * (best.0 + 1).min(points - 1) as f64;
    golden_max(&f, a, b, 1e-12)
}

/// Maximises the bracket
/// `(dw^2/W^2) [rhs(diag[W^2, z T^2]) - z T^2 dw^2]` over `z >= 0` for each
/// trial `dw`, then minimises over `dw`.
pub fn product_bound_numeric(p: &BiphotonParams) -> Result<ZScan> {
    p.validate()?;
    let (t2, w2) = (t_sq(p), w_sq(p));
    let q = t2 * w2;
    // log z grid over [1e-6, 1e6] / (T^2 W^2)
    let (ln_z_lo, ln_z_hi) = ((1e-6 / q).ln(), (1e6 / q).ln());
    let inner = |dw_sq: f64| -> Result<(f64, f64)> {
        let bracket = |ln_z: f64| -> Result<f64> {
            let z = ln_z.exp();
            let g = CostMatrix::diag(w2, z * t2)?;
            Ok(dw_sq / w2 * (cr_rhs(&g, p)? - z * t2 * dw_sq))
        };
        scan_max(bracket, ln_z_lo, ln_z_hi, 64)
    };
    // Outer variable u = ln(4 T^2 dw^2 - 1); the bracket is unbounded in z
    // for 4 T^2 dw^2 <= 1.
    let to_dw_sq = |u: f64| (1.0 + u.exp()) / (4.0 * t2);
    let outer = |u: f64| -> Result<f64> { Ok(-inner(to_dw_sq(u))?.1) };
    let (u, neg) = scan_max(outer, -30.0, 10.0, 81)?;
    let dw_sq = to_dw_sq(u);
    let (ln_z, _) = inner(dw_sq)?;
    Ok(ZScan {
        bound: (-neg).sqrt(),
        z_star: ln_z.exp(),
        delta_omega_star: dw_sq.sqrt(),
    })
}

/// Bound summary for one cost matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CRReport {
    pub j: Matrix2<f64>,
    pub commutator_magnitude: f64,
    pub rhs: f64,
    /// `(delta_t_min, delta_omega_min)`.
    pub marginal_bounds: (f64, f64),
    pub product_bound: f64,
}

pub fn cr_report(g: &CostMatrix, p: &BiphotonParams) -> Result<CRReport> {
    let dt = cr_rhs(&CostMatrix::diag(1.0, 0.0)?, p)?.sqrt();
    let dw = cr_rhs(&CostMatrix::diag(0.0, 1.0)?, p)?.sqrt();
    Ok(CRReport {
        j: qfi_analytic(p)?,
        commutator_magnitude: commutator_term(p)?,
        rhs: cr_rhs(g, p)?,
        marginal_bounds: (dt, dw),
        product_bound: product_bound(p)?,
    })
}
