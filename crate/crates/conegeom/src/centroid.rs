//! `L_p` moment bodies, floating bodies, and section asymptotics.
//!
//! For a unit-volume origin-symmetric body `K` the moment body `Z_p(K)` has
//! support function
//!
//! ```text
//! h_{Z_p}(θ) = ( ∫_K |⟨x,θ⟩|^p dx )^{1/p},
//! ```
//!
//! increasing in `p` from `Z_1` through the ellipsoid `Z_2` (whose quadratic
//! form is the second-moment matrix) up to `Z_∞ = K`. The polar volumes
//! `|Z_p°|` decrease to `|K°|`, and the decay carries the same curvature
//! information as the affine invariant `Ω`: [`theorem1_first_limit`] extracts
//! the leading coefficient `(n(n+1)/2)|K°|` of the `log p / p` deficit, and
//! [`theorem1_second_limit`] the next-order constant, which is also a closed
//! surface integral ([`deficit_rhs_integral`]) and an expression in `Ω`
//! ([`deficit_rhs_invariant_form`]); the two evaluations cross-check each
//! other.
//!
//! Floating bodies enter through the symmetric slab construction:
//! `h_{K_δ}(θ)` is the half-width `t` with `|{x ∈ K : |⟨x,θ⟩| ≤ t}| = 1 − δ`.
//! For small `δ` the floating body is sandwiched between dilates of
//! `Z_{log(1/δ)}(K)`; [`sandwich_ratios`] tabulates the dilation factors
//! empirically. The log-Laplace transform provides a third member of the
//! family: [`lambda_star`] evaluates the Legendre dual
//! `Λ*(x) = sup_u { ⟨x,u⟩ − log ∫_K e^{⟨y,u⟩} dy }`, whose sublevel sets play
//! the role of `K_δ` at `δ = e^{-r}`.
//!
//! Supporting section machinery: [`section_derivatives`] evaluates the first
//! two derivatives of the parallel-section function
//! `f(t) = vol_{n-1}(K ∩ {⟨x,θ⟩ = t})` as boundary integrals, and
//! [`tp_maximizer`] locates the maximizer of `t^p f(t)`, which climbs toward
//! the support value at speed `C/p`.

use std::cell::RefCell;
use std::f64::consts::{LN_2, PI};

use serde::Serialize;

use crate::asymptotics::{fit_limit, FitModel, LimitFit};
use crate::body::{dot, norm2, tangent_basis, Body, Coords, Smoothness, UnitDirection};
use crate::error::{Error, Result};
use crate::linalg::{det, invert, mat_vec, SmallMat, MAX_DIM};
use crate::omega::{log_f_h, omega_entropy};
use crate::quadrature::{
    adaptive_1d, cap_volume, gauss_legendre, integrate_sphere_adaptive, ray_exit, section_volume,
    Accuracy,
};
use crate::rng;
use crate::tol;

/// Moment-body normalizations assume `|K| = 1`; everything downstream (deficit
/// limits, sandwich constants, isotropic constant) is stated at that scale.
fn require_unit_volume(body: &Body) -> Result<()> {
    let v = body.volume();
    if (v - 1.0).abs() > tol::UNIT_VOLUME {
        return Err(Error::NotUnitVolume(v));
    }
    Ok(())
}

fn plane_through(dir: &[f64]) -> Coords {
    let mut p = [0.0; MAX_DIM];
    p[..dir.len()].copy_from_slice(dir);
    p
}

// ---------------------------------------------------------------------------
// Moment bodies
// ---------------------------------------------------------------------------

// Crossover exponents between the direct quadrature and the peak-anchored
// routes. Past these the integrand ρ^{n+p}|⟨ω,θ⟩|^p concentrates so sharply
// that panels without an anchor at the peak resolve it poorly.
const DIRECT_P_MAX_PLANAR: f64 = 128.0;
const DIRECT_P_MAX_SPATIAL: f64 = 32.0;
const DIRECT_P_MAX_HIGH: f64 = 500.0;

/// log ∫_K |⟨x,θ⟩|^p dx by polar reduction:
/// (n+p)^{-1} ∫_{S^{n-1}} ρ(ω)^{n+p} |⟨ω,θ⟩|^p dσ(ω).
fn log_zp_moment(body: &Body, p: f64, theta: &UnitDirection, acc: Accuracy) -> Result<f64> {
    let n = body.dim();
    match n {
        2 if p <= DIRECT_P_MAX_PLANAR => log_moment_direct(body, p, theta, acc),
        2 => log_moment_planar_shifted(body, p, theta, acc),
        3 if p <= DIRECT_P_MAX_SPATIAL => log_moment_direct(body, p, theta, acc),
        3 => log_moment_axial_shifted(body, p, theta, acc),
        _ if p <= DIRECT_P_MAX_HIGH => log_moment_direct(body, p, theta, acc),
        _ => Err(Error::OutOfRange(format!(
            "moment exponent {p} too large for dimension {n}; shifted evaluation covers n <= 3"
        ))),
    }
}

fn log_moment_direct(body: &Body, p: f64, theta: &UnitDirection, acc: Accuracy) -> Result<f64> {
    let n = body.dim();
    let np = n as f64 + p;
    let mut planes = body.singular_planes();
    // |⟨ω,θ⟩|^p is rough on the great sphere ω ⊥ θ
    planes.push(plane_through(theta.coords()));
    let integral = integrate_sphere_adaptive(
        n,
        |u: &UnitDirection| {
            let a = dot(u.coords(), theta.coords()).abs();
            if a == 0.0 {
                return 0.0;
            }
            body.radial(u).powf(np) * a.powf(p)
        },
        &planes,
        acc,
    )?;
    if !(integral.value > 0.0) {
        return Err(Error::DomainError("moment integral vanished".into()));
    }
    Ok((integral.value / np).ln())
}

/// Planar large-p route: integrate e^{g(ω) - G} with
/// g = (2+p) log ρ + p log|⟨ω,θ⟩| and G the scanned peak value, anchoring
/// panels both at the zeros of ⟨ω,θ⟩ and at the two (antipodal) peaks.
fn log_moment_planar_shifted(
    body: &Body,
    p: f64,
    theta: &UnitDirection,
    acc: Accuracy,
) -> Result<f64> {
    let np = 2.0 + p;
    let tc = theta.coords();
    let scan = 256;
    let mut peak = f64::NEG_INFINITY;
    let mut peak_dir = [1.0, 0.0];
    for k in 0..scan {
        let beta = 2.0 * PI * k as f64 / scan as f64;
        let u = UnitDirection::from_angle(beta);
        let a = dot(u.coords(), tc).abs();
        if a == 0.0 {
            continue;
        }
        let g = np * body.radial(&u).ln() + p * a.ln();
        if g > peak {
            peak = g;
            peak_dir = [u.coords()[0], u.coords()[1]];
        }
    }
    let mut planes = body.singular_planes();
    planes.push(plane_through(tc));
    planes.push(plane_through(&[-peak_dir[1], peak_dir[0]]));
    let shift = peak;
    let integral = integrate_sphere_adaptive(
        2,
        |u: &UnitDirection| {
            let a = dot(u.coords(), tc).abs();
            if a == 0.0 {
                return 0.0;
            }
            (np * body.radial(u).ln() + p * a.ln() - shift).exp()
        },
        &planes,
        acc,
    )?;
    Ok(shift + integral.value.ln() - np.ln())
}

/// Spatial large-p route in the θ-aligned frame ω(z, φ) = zθ + √(1-z²)(φ-circle),
/// where the surface measure is exactly dz dφ and ⟨ω,θ⟩ = z factors out of the
/// inner integral.
fn log_moment_axial_shifted(
    body: &Body,
    p: f64,
    theta: &UnitDirection,
    acc: Accuracy,
) -> Result<f64> {
    let np = 3.0 + p;
    let frame = tangent_basis(theta);
    let (b0, b1) = (frame[0], frame[1]);
    let tc = theta.coords();
    let direction = |z: f64, phi: f64| -> UnitDirection {
        let s = (1.0 - z * z).max(0.0).sqrt();
        let (sp, cp) = phi.sin_cos();
        let mut w = [0.0; MAX_DIM];
        for i in 0..3 {
            w[i] = z * tc[i] + s * (cp * b0[i] + sp * b1[i]);
        }
        UnitDirection::new(&w[..3])
    };
    // coarse azimuthal scan for the per-layer exponent scale; its only job is
    // overflow protection, so the O((2π/64)²·p) slack is acceptable
    let layer_peak = |z: f64| -> f64 {
        let scan = 64;
        let mut g = f64::NEG_INFINITY;
        for k in 0..scan {
            let phi = 2.0 * PI * k as f64 / scan as f64;
            g = g.max(np * body.radial(&direction(z, phi)).ln());
        }
        g
    };
    let zscan = 256;
    let mut total_peak = f64::NEG_INFINITY;
    for k in 0..=zscan {
        let z = -1.0 + 2.0 * k as f64 / zscan as f64;
        if z == 0.0 {
            continue;
        }
        total_peak = total_peak.max(p * z.abs().ln() + layer_peak(z));
    }
    let inner_acc = acc.tightened(1.0 / 16.0);
    let fail: RefCell<Option<Error>> = RefCell::new(None);
    let integrand = |z: f64| -> f64 {
        if fail.borrow().is_some() || z == 0.0 {
            return 0.0;
        }
        let gz = layer_peak(z);
        let inner = adaptive_1d(
            |phi| (np * body.radial(&direction(z, phi)).ln() - gz).exp(),
            0.0,
            2.0 * PI,
            &[],
            inner_acc,
        );
        match inner {
            Ok(j) => (p * z.abs().ln() + gz + j.value.ln() - total_peak).exp(),
            Err(e) => {
                *fail.borrow_mut() = Some(e);
                0.0
            }
        }
    };
    // |z|^p concentrates the mass within O(1/p) of the poles; plant panel
    // boundaries there so the first Kronrod pass cannot overlook the spike
    let mut splits = vec![0.0];
    for c in [24.0, 8.0, 2.0, 0.5] {
        let d = 1.0 - c / p;
        if d > 0.1 {
            splits.push(d);
            splits.push(-d);
        }
    }
    let outer = adaptive_1d(integrand, -1.0, 1.0, &splits, acc);
    if let Some(e) = fail.into_inner() {
        return Err(e);
    }
    let outer = outer?;
    Ok(total_peak + outer.value.ln() - np.ln())
}

/// Support function h_{Z_p(K)}(θ) of the moment body.
///
/// pre: `|K| = 1`, `p >= 1`; `p = ∞` returns `h_K(θ)` (the moment bodies
/// increase to `K` itself).
pub fn zp_support(body: &Body, p: f64, theta: &UnitDirection, acc: Accuracy) -> Result<f64> {
    require_unit_volume(body)?;
    if theta.dim() != body.dim() {
        return Err(Error::DimensionMismatch { expected: body.dim(), got: theta.dim() });
    }
    if !(p >= 1.0) {
        return Err(Error::ExponentTooSmall(p));
    }
    if p.is_infinite() {
        return Ok(body.support(theta));
    }
    let lm = log_zp_moment(body, p, theta, acc)?;
    Ok((lm / p).exp())
}

/// Polar volume |Z_p°(K)| = (1/n) ∫ h_{Z_p}(u)^{-n} dσ(u).
///
/// Among unit-volume bodies the ball maximizes this quantity for every `p`;
/// the value decreases to `|K°|` as `p → ∞` (and `p = ∞` returns `|K°|`).
pub fn zp_polar_volume(body: &Body, p: f64, acc: Accuracy) -> Result<f64> {
    require_unit_volume(body)?;
    if !(p >= 1.0) {
        return Err(Error::ExponentTooSmall(p));
    }
    if p.is_infinite() {
        return body.polar_volume();
    }
    let n = body.dim();
    let inner = acc.tightened(1.0 / 16.0);
    let planes = body.singular_planes();
    let fail: RefCell<Option<Error>> = RefCell::new(None);
    let result = integrate_sphere_adaptive(
        n,
        |u: &UnitDirection| {
            if fail.borrow().is_some() {
                return f64::NAN;
            }
            match log_zp_moment(body, p, u, inner) {
                Ok(lm) => (-(n as f64) * lm / p).exp(),
                Err(e) => {
                    *fail.borrow_mut() = Some(e);
                    f64::NAN
                }
            }
        },
        &planes,
        acc,
    );
    if let Some(e) = fail.into_inner() {
        return Err(e);
    }
    Ok(result?.value / n as f64)
}

/// A fixed moment body `Z_p(K)`: support evaluations share the normalization
/// gate, the exponent, and the quadrature accuracy chosen at construction.
#[derive(Clone)]
pub struct CentroidBody {
    base: Body,
    p: f64,
    acc: Accuracy,
}

impl CentroidBody {
    pub fn new(base: &Body, p: f64, acc: Accuracy) -> Result<CentroidBody> {
        require_unit_volume(base)?;
        if !(p >= 1.0) {
            return Err(Error::ExponentTooSmall(p));
        }
        Ok(CentroidBody { base: base.clone(), p, acc })
    }

    pub fn support(&self, theta: &UnitDirection) -> Result<f64> {
        zp_support(&self.base, self.p, theta, self.acc)
    }

    pub fn polar_volume(&self) -> Result<f64> {
        zp_polar_volume(&self.base, self.p, self.acc)
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    pub fn base(&self) -> &Body {
        &self.base
    }
}

// ---------------------------------------------------------------------------
// Second moments
// ---------------------------------------------------------------------------

/// Second-moment matrix M_ij = ∫_K x_i x_j dx by polar reduction:
/// (n+2)^{-1} ∫ ω_i ω_j ρ(ω)^{n+2} dσ. The quadratic form of `Z_2(K)` is
/// exactly θ ↦ θᵀMθ.
pub fn second_moment_matrix(body: &Body, acc: Accuracy) -> Result<SmallMat> {
    let n = body.dim();
    let planes = body.singular_planes();
    let mut m = [[0.0; MAX_DIM]; MAX_DIM];
    for i in 0..n {
        for j in i..n {
            let integral = integrate_sphere_adaptive(
                n,
                |u: &UnitDirection| {
                    let w = u.coords();
                    body.radial(u).powi(n as i32 + 2) * w[i] * w[j]
                },
                &planes,
                acc,
            )?;
            m[i][j] = integral.value / (n as f64 + 2.0);
            m[j][i] = m[i][j];
        }
    }
    Ok(m)
}

/// Isotropic constant L_K = det(M)^{1/(2n)} of a unit-volume body; equals
/// (|Z_2(K)| / |B_2^n|)^{1/n} up to the same determinant.
pub fn isotropic_constant(body: &Body, acc: Accuracy) -> Result<f64> {
    require_unit_volume(body)?;
    let m = second_moment_matrix(body, acc)?;
    let d = det(&m, body.dim());
    if !(d > 0.0) {
        return Err(Error::DegenerateBody);
    }
    Ok(d.powf(0.5 / body.dim() as f64))
}

// ---------------------------------------------------------------------------
// Deficit limits of the polar moment-body volume
// ---------------------------------------------------------------------------

/// Fit of the second-order deficit together with the two closed-form
/// evaluations of its limit constant.
#[derive(Debug, Clone, Serialize)]
pub struct SecondDeficit {
    pub fit: LimitFit,
    /// -(1/2) ∫ h^{-n} log(2^{n+1} π^{n-1} f h^{n+1}) dσ, one quadrature.
    pub rhs_integral: f64,
    /// -(|K°|/2) log(Ω_K · 2^{n(n+1)} π^{n(n-1)}), composed from the entropy
    /// route for Ω and the polar volume.
    pub rhs_invariant_form: f64,
    /// |rhs_integral - rhs_invariant_form|; a consistency measure for the two
    /// pipelines, not a fit quality.
    pub rhs_residual: f64,
}

/// First-order deficit rate: (p/log p)(|Z_p°| - |K°|) → (n(n+1)/2)|K°|.
pub fn theorem1_first_limit(body: &Body, grid: &[f64], acc: Accuracy) -> Result<LimitFit> {
    require_unit_volume(body)?;
    if body.smoothness() != Smoothness::C2Plus {
        return Err(Error::NonSmoothBody("deficit limits integrate log-curvature"));
    }
    let pv = body.polar_volume()?;
    let mut samples = Vec::with_capacity(grid.len());
    for &p in grid {
        let vp = zp_polar_volume(body, p, acc)?;
        samples.push(p / p.ln() * (vp - pv));
    }
    fit_limit(grid, &samples, FitModel::Theorem1First)
}

/// Second-order deficit: p(|Z_p°| - |K°|) - (n(n+1)/2)(log p)|K°| converges,
/// and the limit equals the closed surface integral reported alongside.
pub fn theorem1_second_limit(body: &Body, grid: &[f64], acc: Accuracy) -> Result<SecondDeficit> {
    require_unit_volume(body)?;
    if body.smoothness() != Smoothness::C2Plus {
        return Err(Error::NonSmoothBody("deficit limits integrate log-curvature"));
    }
    let nf = body.dim() as f64;
    let pv = body.polar_volume()?;
    let correction = 0.5 * nf * (nf + 1.0);
    let mut samples = Vec::with_capacity(grid.len());
    for &p in grid {
        let vp = zp_polar_volume(body, p, acc)?;
        samples.push(p * (vp - pv) - correction * p.ln() * pv);
    }
    let fit = fit_limit(grid, &samples, FitModel::Theorem1Second)?;
    let rhs_integral = deficit_rhs_integral(body, acc)?;
    let rhs_invariant_form = deficit_rhs_invariant_form(body, acc)?;
    Ok(SecondDeficit {
        fit,
        rhs_integral,
        rhs_invariant_form,
        rhs_residual: (rhs_integral - rhs_invariant_form).abs(),
    })
}

/// The second-deficit constant as a single surface integral:
/// -(1/2) ∫ h^{-n} log(2^{n+1} π^{n-1} f h^{n+1}) dσ.
pub fn deficit_rhs_integral(body: &Body, acc: Accuracy) -> Result<f64> {
    if body.smoothness() != Smoothness::C2Plus {
        return Err(Error::NonSmoothBody("the deficit constant integrates log-curvature"));
    }
    let n = body.dim();
    let nf = n as f64;
    let c = (nf + 1.0) * LN_2 + (nf - 1.0) * PI.ln();
    let planes = body.singular_planes();
    let integral = integrate_sphere_adaptive(
        n,
        |u: &UnitDirection| match log_f_h(body, u, nf + 1.0) {
            Some(lg) if lg.is_finite() => -0.5 * (-nf * body.support(u).ln()).exp() * (c + lg),
            // sign decides which infinity the singular-point handling sees
            Some(lg) => -lg,
            None => f64::NAN,
        },
        &planes,
        acc,
    )?;
    Ok(integral.value)
}

/// The same constant through the affine invariant:
/// -(|K°|/2) log(Ω_K · 2^{n(n+1)} π^{n(n-1)}).
pub fn deficit_rhs_invariant_form(body: &Body, acc: Accuracy) -> Result<f64> {
    if body.smoothness() != Smoothness::C2Plus {
        return Err(Error::NonSmoothBody("the deficit constant integrates log-curvature"));
    }
    let nf = body.dim() as f64;
    let pv = body.polar_volume()?;
    let log_omega = omega_entropy(body, acc)?.ln();
    Ok(-0.5 * pv * (log_omega + nf * (nf + 1.0) * LN_2 + nf * (nf - 1.0) * PI.ln()))
}

// ---------------------------------------------------------------------------
// Floating bodies
// ---------------------------------------------------------------------------

/// Directionwise support of the symmetric floating body: the half-width `t`
/// with |{x ∈ K : |⟨x,θ⟩| ≤ t}| = 1 - δ, found by bisection-safeguarded
/// Newton on the cap volume (the derivative is the section area).
///
/// The value is reported per direction. The envelope of the slabs contains
/// the convex floating body, but no convexity of the directionwise function
/// itself is claimed; consumers treating the table as a support function must
/// check that separately.
pub fn floating_support(
    body: &Body,
    delta: f64,
    theta: &UnitDirection,
    acc: Accuracy,
) -> Result<f64> {
    require_unit_volume(body)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::OutOfRange(format!("slab parameter {delta} outside (0, 1)")));
    }
    if body.dim() > 3 {
        return Err(Error::UnsupportedBody("floating supports are computed for n <= 3"));
    }
    let h = body.support(theta);
    let mut lo = 0.0;
    let mut hi = h;
    let mut t = 0.5 * h;
    // the cap volume carries quadrature error ~ acc; resolving g below that
    // level would only chase noise
    let gtol = 4.0 * (acc.tol_abs + acc.tol_rel * delta);
    for _ in 0..120 {
        let g = 2.0 * cap_volume(body, theta, t, acc)? - delta;
        if g.abs() <= gtol {
            return Ok(t);
        }
        if g > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        if hi - lo <= 1e-12 * h.max(1.0) {
            return Ok(0.5 * (lo + hi));
        }
        let slice = section_volume(body, theta, t, acc)?;
        let newton = t + g / (2.0 * slice);
        t = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::RootFindFailure("floating support did not converge".into()))
}

/// Floating-body support sampled over a direction set, serializable as a
/// report row.
#[derive(Debug, Clone, Serialize)]
pub struct FloatingBodySupport {
    pub delta: f64,
    pub directions: Vec<Vec<f64>>,
    pub support: Vec<f64>,
}

pub fn floating_body_support(
    body: &Body,
    delta: f64,
    directions: &[UnitDirection],
    acc: Accuracy,
) -> Result<FloatingBodySupport> {
    let mut support = Vec::with_capacity(directions.len());
    for theta in directions {
        support.push(floating_support(body, delta, theta, acc)?);
    }
    Ok(FloatingBodySupport {
        delta,
        directions: directions.iter().map(|d| d.coords().to_vec()).collect(),
        support,
    })
}

// ---------------------------------------------------------------------------
// Sandwich constants
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct SandwichRow {
    pub delta: f64,
    pub direction: Vec<f64>,
    pub floating: f64,
    pub moment: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub rows: Vec<SandwichRow>,
    /// Smallest observed ratio h_{K_δ} / h_{Z_{log(1/δ)}}.
    pub c1: f64,
    /// Largest observed ratio.
    pub c2: f64,
}

/// The δ-grid used by the reports: geometric decades down to 1e-4, capped at
/// 1/e where the matching moment exponent reaches its lower bound p = 1.
pub fn default_delta_grid() -> Vec<f64> {
    vec![1e-4, 1e-3, 1e-2, 0.1, (-1.0_f64).exp()]
}

/// Ratios h_{K_δ}(θ) / h_{Z_p}(θ) at the matched exponent p = log(1/δ).
///
/// pre: every δ ∈ (0, 1/e], so p >= 1. The extremes over the grid are the
/// empirical sandwich constants c1 (min) and c2 (max).
pub fn sandwich_ratios(
    body: &Body,
    deltas: &[f64],
    directions: &[UnitDirection],
    acc: Accuracy,
) -> Result<SandwichReport> {
    require_unit_volume(body)?;
    let cap = (-1.0_f64).exp() + 1e-15;
    let mut rows = Vec::with_capacity(deltas.len() * directions.len());
    let mut c1 = f64::INFINITY;
    let mut c2 = f64::NEG_INFINITY;
    for &delta in deltas {
        if !(delta > 0.0 && delta <= cap) {
            return Err(Error::OutOfRange(format!("sandwich parameter {delta} outside (0, 1/e]")));
        }
        let p = delta.recip().ln();
        for theta in directions {
            let floating = floating_support(body, delta, theta, acc)?;
            let moment = zp_support(body, p, theta, acc)?;
            let ratio = floating / moment;
            c1 = c1.min(ratio);
            c2 = c2.max(ratio);
            rows.push(SandwichRow {
                delta,
                direction: theta.coords().to_vec(),
                floating,
                moment,
                ratio,
            });
        }
    }
    Ok(SandwichReport { rows, c1, c2 })
}

// ---------------------------------------------------------------------------
// Log-Laplace transform
// ---------------------------------------------------------------------------

/// ∫_0^ρ s^k e^{a s - shift} ds by composite Gauss-Legendre panels narrow
/// enough that the exponential stays polynomial-tame on each.
fn radial_exp_moment(k: usize, a: f64, rho: f64, shift: f64, gl: &(Vec<f64>, Vec<f64>)) -> f64 {
    let panels = ((a.abs() * rho / 10.0).ceil() as usize).clamp(1, 400);
    let w = rho / panels as f64;
    let mut total = 0.0;
    for panel in 0..panels {
        let lo = panel as f64 * w;
        let mut sum = 0.0;
        for (node, weight) in gl.0.iter().zip(gl.1.iter()) {
            let s = lo + 0.5 * w * (node + 1.0);
            sum += weight * s.powi(k as i32) * (a * s - shift).exp();
        }
        total += 0.5 * w * sum;
    }
    total
}

fn tilted_sphere_integral<G: Fn(&[f64]) -> f64>(
    body: &Body,
    u: &Coords,
    k: usize,
    shift: f64,
    weight: G,
    acc: Accuracy,
) -> Result<f64> {
    let n = body.dim();
    let gl = gauss_legendre(16);
    let planes = body.singular_planes();
    let integral = integrate_sphere_adaptive(
        n,
        |w: &UnitDirection| {
            let rho = body.radial(w);
            let a = dot(w.coords(), &u[..n]);
            weight(w.coords()) * radial_exp_moment(k, a, rho, shift, &gl)
        },
        &planes,
        acc,
    )?;
    Ok(integral.value)
}

struct TiltedMoments {
    log_partition: f64,
    barycenter: [f64; MAX_DIM],
    covariance: SmallMat,
}

/// Z(u) = ∫_K e^{⟨y,u⟩} dy with barycenter and covariance of the tilted
/// measure, all shifted by L = h_K-extension at u so no exponent exceeds 0.
fn tilted_moments(body: &Body, u: &Coords, acc: Accuracy) -> Result<TiltedMoments> {
    let n = body.dim();
    let shift = body.support_raw(&u[..n]).max(0.0);
    let z = tilted_sphere_integral(body, u, n - 1, shift, |_| 1.0, acc)?;
    if !(z > 0.0) {
        return Err(Error::OptimizationFailure("tilted partition function vanished".into()));
    }
    let mut b = [0.0; MAX_DIM];
    for i in 0..n {
        b[i] = tilted_sphere_integral(body, u, n, shift, |w| w[i], acc)? / z;
    }
    let mut c = [[0.0; MAX_DIM]; MAX_DIM];
    for i in 0..n {
        for j in i..n {
            let raw = tilted_sphere_integral(body, u, n + 1, shift, |w| w[i] * w[j], acc)? / z;
            c[i][j] = raw - b[i] * b[j];
            c[j][i] = c[i][j];
        }
    }
    Ok(TiltedMoments { log_partition: shift + z.ln(), barycenter: b, covariance: c })
}

fn tilted_log_partition(body: &Body, u: &Coords, acc: Accuracy) -> Result<f64> {
    let n = body.dim();
    let shift = body.support_raw(&u[..n]).max(0.0);
    let z = tilted_sphere_integral(body, u, n - 1, shift, |_| 1.0, acc)?;
    if !(z > 0.0) {
        return Err(Error::OptimizationFailure("tilted partition function vanished".into()));
    }
    Ok(shift + z.ln())
}

/// Damped Newton ascent of the strictly concave u ↦ ⟨x,u⟩ - log Z(u);
/// gradient is x minus the tilted barycenter, Hessian is minus the tilted
/// covariance. Returns the value and the maximizer (for warm starts).
fn lambda_star_from(
    body: &Body,
    x: &[f64],
    start: Coords,
    acc: Accuracy,
) -> Result<(f64, Coords)> {
    let n = body.dim();
    let mut u = start;
    let scale = 1.0 + norm2(x);
    let gtol = 10.0 * (acc.tol_abs + acc.tol_rel).max(1e-12) * scale;
    for _ in 0..80 {
        let m = tilted_moments(body, &u, acc)?;
        let phi = dot(x, &u[..n]) - m.log_partition;
        let mut grad = [0.0; MAX_DIM];
        for i in 0..n {
            grad[i] = x[i] - m.barycenter[i];
        }
        let gn = norm2(&grad[..n]);
        if gn <= gtol {
            return Ok((phi, u));
        }
        let inv = invert(&m.covariance, n)
            .ok_or_else(|| Error::OptimizationFailure("tilted covariance is singular".into()))?;
        let step = mat_vec(&inv, &grad[..n], n);
        if gn <= 1e-4 * scale {
            // quadratic regime: a full Newton step of a concave objective
            // contracts without a line search, and the predicted gain is
            // below what quadrature noise lets Armijo verify
            for i in 0..n {
                u[i] += step[i];
            }
            continue;
        }
        let slope = dot(&grad[..n], &step[..n]);
        let mut lambda = 1.0;
        let mut advanced = false;
        for _ in 0..50 {
            let mut trial = u;
            for i in 0..n {
                trial[i] += lambda * step[i];
            }
            let log_z = tilted_log_partition(body, &trial, acc)?;
            if dot(x, &trial[..n]) - log_z >= phi + 1e-4 * lambda * slope {
                u = trial;
                advanced = true;
                break;
            }
            lambda *= 0.5;
        }
        if !advanced {
            return Err(Error::OptimizationFailure("log-Laplace line search stalled".into()));
        }
    }
    Err(Error::OptimizationFailure("log-Laplace ascent did not converge".into()))
}

/// Legendre dual of the log-Laplace functional:
/// Λ*(x) = sup_u { ⟨x,u⟩ - log ∫_K e^{⟨y,u⟩} dy }.
///
/// Zero at the origin, finite and increasing along rays inside `K`, +∞ from
/// the boundary outward (the supremum diverges once x leaves the open body).
pub fn lambda_star(body: &Body, x: &[f64], acc: Accuracy) -> Result<f64> {
    require_unit_volume(body)?;
    let n = body.dim();
    if n > 3 {
        return Err(Error::UnsupportedBody("log-Laplace transforms are computed for n <= 3"));
    }
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    if body.gauge(x) >= 1.0 - 1e-12 {
        return Ok(f64::INFINITY);
    }
    Ok(lambda_star_from(body, x, [0.0; MAX_DIM], acc)?.0)
}

/// Radial level crossing of Λ* along θ: the s with Λ*(sθ) = r, by bisection
/// with warm-started inner ascents. Monotonicity along rays makes the
/// crossing unique once the level is exceeded below the boundary.
pub fn log_laplace_level_support(
    body: &Body,
    r: f64,
    theta: &UnitDirection,
    acc: Accuracy,
) -> Result<f64> {
    require_unit_volume(body)?;
    let n = body.dim();
    if n > 3 {
        return Err(Error::UnsupportedBody("log-Laplace transforms are computed for n <= 3"));
    }
    if !(r >= 1.0) {
        return Err(Error::OutOfRange(format!("level {r} below 1")));
    }
    let rho = body.radial(theta);
    let mut warm = [0.0; MAX_DIM];
    let mut level_at = |s: f64, warm: &mut Coords| -> Result<f64> {
        let mut x = [0.0; MAX_DIM];
        for i in 0..n {
            x[i] = s * theta.coords()[i];
        }
        if body.gauge(&x[..n]) >= 1.0 - 1e-12 {
            return Ok(f64::INFINITY);
        }
        let (value, maximizer) = lambda_star_from(body, &x[..n], *warm, acc)?;
        *warm = maximizer;
        Ok(value)
    };
    let mut hi = 0.9 * rho;
    while level_at(hi, &mut warm)? < r {
        hi = rho - 0.5 * (rho - hi);
        if rho - hi < 1e-9 * rho {
            return Err(Error::RootFindFailure(
                "level is not reached within the boundary resolution".into(),
            ));
        }
    }
    let mut lo = 0.0;
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if level_at(mid, &mut warm)? >= r {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

// ---------------------------------------------------------------------------
// Section derivatives and maximizers
// ---------------------------------------------------------------------------

/// First and second derivatives of the parallel-section function
/// f(t) = vol_{n-1}(K ∩ {⟨x,θ⟩ = t}) for planar and spatial smooth bodies.
///
/// Both are integrals over the boundary sphere ∂K ∩ {⟨x,θ⟩ = t}: with
/// cos α = ⟨N(x), θ⟩ and κ the Gauss curvature,
///
/// ```text
/// f'(t)  = -∫ cos α / √(1-cos²α) dμ,
/// f''(t) = -∫ [ κ^{1/(n-1)} / (1-cos²α)^{3/2}
///             - (n-2) cos²α / (⟨N_sect, x⟩ (1-cos²α)) ] dμ,
/// ```
///
/// where N_sect is the in-plane unit normal of the section at x. For n = 2
/// the "integral" is a two-point sum and the second term vanishes.
pub fn section_derivatives(
    body: &Body,
    theta: &UnitDirection,
    t: f64,
    acc: Accuracy,
) -> Result<(f64, f64)> {
    if body.smoothness() != Smoothness::C2Plus {
        return Err(Error::NonSmoothBody("section derivatives need positive curvature"));
    }
    let n = body.dim();
    if n != 2 && n != 3 {
        return Err(Error::UnsupportedBody("section derivatives are computed for n = 2, 3"));
    }
    if theta.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: theta.dim() });
    }
    let h = body.support(theta);
    if !(t.abs() < h) {
        return Err(Error::OutOfRange(format!("section offset {t} outside (-{h}, {h})")));
    }
    let tc = theta.coords();
    // interior anchor of the section plane: shrink the touching point of θ
    let touch = body.support_gradient_raw(tc);
    let mut c = [0.0; MAX_DIM];
    for i in 0..n {
        c[i] = touch[i] * t / h;
    }

    let derivs = |x: &[f64], u: &UnitDirection| -> Result<(f64, f64)> {
        let ca = dot(u.coords(), tc);
        let s2 = 1.0 - ca * ca;
        if !(s2 > 0.0) {
            return Err(Error::DomainError("section meets the boundary tangentially".into()));
        }
        let fk = body.curvature_function(u)?;
        let d1 = -ca / s2.sqrt();
        let d2 = if n == 2 {
            -fk.recip() / (s2 * s2.sqrt())
        } else {
            let nsx = (dot(u.coords(), x) - ca * t) / s2.sqrt();
            -(fk.recip().sqrt() / (s2 * s2.sqrt()) - ca * ca / (nsx * s2))
        };
        Ok((d1, d2))
    };

    if n == 2 {
        let e = tangent_basis(theta)[0];
        let mut f1 = 0.0;
        let mut f2 = 0.0;
        for sign in [1.0_f64, -1.0] {
            let mut d = [0.0; MAX_DIM];
            for i in 0..2 {
                d[i] = sign * e[i];
            }
            let r = ray_exit(body, &c[..2], &d[..2])?;
            let mut x = [0.0; MAX_DIM];
            for i in 0..2 {
                x[i] = c[i] + r * d[i];
            }
            let u = body.normal_at(&x[..2])?;
            let (d1, d2) = derivs(&x[..2], &u)?;
            f1 += d1;
            f2 += d2;
        }
        return Ok((f1, f2));
    }

    // n = 3: the section curve is φ ↦ c + r(φ) d(φ) with dμ = √(r² + r'²) dφ,
    // and r' follows from ⟨∇gauge, x'⟩ = 0 along the boundary
    let frame = tangent_basis(theta);
    let (b0, b1) = (frame[0], frame[1]);
    let fail: RefCell<Option<Error>> = RefCell::new(None);
    let mut pass = |second: bool| -> Result<f64> {
        let integral = adaptive_1d(
            |phi: f64| {
                if fail.borrow().is_some() {
                    return 0.0;
                }
                let (sp, cp) = phi.sin_cos();
                let mut d = [0.0; MAX_DIM];
                let mut dp = [0.0; MAX_DIM];
                for i in 0..3 {
                    d[i] = cp * b0[i] + sp * b1[i];
                    dp[i] = cp * b1[i] - sp * b0[i];
                }
                let r = match ray_exit(body, &c[..3], &d[..3]) {
                    Ok(r) => r,
                    Err(e) => {
                        *fail.borrow_mut() = Some(e);
                        return 0.0;
                    }
                };
                let mut x = [0.0; MAX_DIM];
                for i in 0..3 {
                    x[i] = c[i] + r * d[i];
                }
                let g = body.gauge_gradient(&x[..3]);
                let rp = -r * dot(&g[..3], &dp[..3]) / dot(&g[..3], &d[..3]);
                let mu = (r * r + rp * rp).sqrt();
                let u = UnitDirection::new(&g[..3]);
                match derivs(&x[..3], &u) {
                    Ok((d1, d2)) => (if second { d2 } else { d1 }) * mu,
                    Err(e) => {
                        *fail.borrow_mut() = Some(e);
                        0.0
                    }
                }
            },
            0.0,
            2.0 * PI,
            &[],
            acc,
        );
        if let Some(e) = fail.borrow_mut().take() {
            return Err(e);
        }
        Ok(integral?.value)
    };
    let f1 = pass(false)?;
    let f2 = pass(true)?;
    Ok((f1, f2))
}

/// Maximizer t_p of t ↦ t^p f(t) on (0, h_K(θ)): the unique zero of
/// p f(t) + t f'(t). Uniqueness holds because p/t + f'/f is strictly
/// decreasing (f is log-concave); the scan asserts it numerically.
pub fn tp_maximizer(body: &Body, theta: &UnitDirection, p: f64, acc: Accuracy) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::ExponentTooSmall(p));
    }
    let h = body.support(theta);
    let eval = |t: f64| -> Result<(f64, f64)> {
        let f = section_volume(body, theta, t, acc)?;
        let (f1, f2) = section_derivatives(body, theta, t, acc)?;
        Ok((p * f + t * f1, (p + 1.0) * f1 + t * f2))
    };
    let lo = 1e-3 * h;
    let (glo, _) = eval(lo)?;
    if glo <= 0.0 {
        return Err(Error::RootFindFailure("section objective not increasing near the center".into()));
    }
    let mut hi = h * (1.0 - 1e-4);
    let (mut ghi, _) = eval(hi)?;
    let mut pushes = 0;
    while ghi >= 0.0 {
        pushes += 1;
        if pushes > 12 {
            return Err(Error::RootFindFailure("no sign change below the support value".into()));
        }
        hi = h - 0.25 * (h - hi);
        ghi = eval(hi)?.0;
    }
    let cells = 24;
    let mut a = lo;
    let mut b = hi;
    let mut prev_g = glo;
    let mut prev_t = lo;
    let mut crossings = 0;
    for k in 1..=cells {
        let t = if k == cells { hi } else { lo + (hi - lo) * k as f64 / cells as f64 };
        let g = if k == cells { ghi } else { eval(t)?.0 };
        if prev_g > 0.0 && g <= 0.0 {
            crossings += 1;
            a = prev_t;
            b = t;
        } else if prev_g <= 0.0 && g > 0.0 {
            crossings += 1;
        }
        prev_t = t;
        prev_g = g;
    }
    if crossings != 1 {
        return Err(Error::RootFindFailure(format!(
            "expected one stationary point, scan found {crossings}"
        )));
    }
    let mut t = 0.5 * (a + b);
    for _ in 0..60 {
        let (g, gd) = eval(t)?;
        if g > 0.0 {
            a = t;
        } else {
            b = t;
        }
        let newton = t - g / gd;
        let next = if newton.is_finite() && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (next - t).abs() <= 1e-11 * h || b - a <= 1e-12 * h {
            return Ok(next);
        }
        t = next;
    }
    Err(Error::RootFindFailure("maximizer refinement did not converge".into()))
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// Diagnostic ratio |Z_p(K)|^{1/n} / (√(p/(n+p)) L_K) for planar bodies.
///
/// The moment-body area comes from its support function by the polar formula
/// A = (1/2)∮(h² - h'²) on a fixed midpoint grid with finite-difference h'.
/// The value is reported, never asserted against a conjectured bound.
pub fn inverse_lyz_ratio(body: &Body, p: f64, acc: Accuracy) -> Result<f64> {
    if body.dim() != 2 {
        return Err(Error::UnsupportedBody("support-parametrized areas are planar only"));
    }
    require_unit_volume(body)?;
    if !(p >= 1.0) {
        return Err(Error::ExponentTooSmall(p));
    }
    let m = 256;
    let step = 2.0 * PI / m as f64;
    let fd = 1e-4;
    let mut area = 0.0;
    for k in 0..m {
        let beta = (k as f64 + 0.5) * step;
        let h0 = zp_support(body, p, &UnitDirection::from_angle(beta), acc)?;
        let hp = zp_support(body, p, &UnitDirection::from_angle(beta + fd), acc)?;
        let hm = zp_support(body, p, &UnitDirection::from_angle(beta - fd), acc)?;
        let hd = (hp - hm) / (2.0 * fd);
        area += 0.5 * (h0 * h0 - hd * hd) * step;
    }
    let lk = isotropic_constant(body, acc)?;
    Ok(area.sqrt() / ((p / (2.0 + p)).sqrt() * lk))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::late_p_grid;
    use crate::linalg::lstsq;
    use crate::special::ln_gamma;

    fn tight(n: usize) -> Accuracy {
        if n == 2 {
            Accuracy::abs_rel(1e-12, 1e-11)
        } else {
            Accuracy::abs_rel(1e-9, 1e-8)
        }
    }

    fn unit(body: Body) -> Body {
        body.normalized().unwrap()
    }

    fn disc() -> Body {
        unit(Body::ball(2))
    }

    fn ball3() -> Body {
        unit(Body::ball(3))
    }

    fn ellipse_n() -> Body {
        unit(Body::ellipse(2.0, 0.5))
    }

    fn b32() -> Body {
        unit(Body::lp_ball(2, 3.0).unwrap())
    }

    /// log ∫_{R B_2^n} |⟨x,θ⟩|^p dx = (n+p) log R + log 2 + ((n-1)/2) log π
    ///   + log Γ((p+1)/2) - log(n+p) - log Γ((n+p)/2).
    fn ball_log_moment(n: usize, radius: f64, p: f64) -> f64 {
        let nf = n as f64;
        (nf + p) * radius.ln() + LN_2 + 0.5 * (nf - 1.0) * PI.ln() + ln_gamma(0.5 * (p + 1.0))
            - (nf + p).ln()
            - ln_gamma(0.5 * (nf + p))
    }

    #[test]
    fn disc_z2_support_is_closed_form() {
        let h = zp_support(&disc(), 2.0, &UnitDirection::axis(2, 0), tight(2)).unwrap();
        let expected = 0.5 / PI.sqrt();
        assert!((h - expected).abs() < 1e-10, "{h} vs {expected}");
    }

    #[test]
    fn large_exponents_approach_the_body() {
        let body = disc();
        let theta = UnitDirection::from_angle(0.37);
        let hk = 1.0 / PI.sqrt();
        let h = zp_support(&body, 16384.0, &theta, tight(2)).unwrap();
        assert!((h / hk - 1.0).abs() < 0.01, "h_Z = {h}, h_K = {hk}");
        let exact = zp_support(&body, f64::INFINITY, &theta, tight(2)).unwrap();
        assert!((exact - hk).abs() < 1e-14);
    }

    #[test]
    fn cube_z2_is_isotropic() {
        for n in [2usize, 3] {
            let body = unit(Body::cube(n));
            let expected = (1.0_f64 / 12.0).sqrt();
            let tol = if n == 2 { 1e-10 } else { 5e-8 };
            let dirs = [UnitDirection::axis(n, 0), UnitDirection::new(&vec![1.0; n])];
            for theta in dirs {
                let h = zp_support(&body, 2.0, &theta, tight(n)).unwrap();
                assert!((h - expected).abs() < tol, "n={n}: {h} vs {expected}");
            }
        }
    }

    #[test]
    fn ball_moments_match_the_gamma_form() {
        let b3 = ball3();
        let r3 = (0.75 / PI).powf(1.0 / 3.0);
        for p in [8.0, 200.0] {
            let h = zp_support(&b3, p, &UnitDirection::new(&[0.3, -0.4, 0.86]), tight(3)).unwrap();
            let expected = (ball_log_moment(3, r3, p) / p).exp();
            assert!((h / expected - 1.0).abs() < 1e-7, "p={p}: {h} vs {expected}");
        }
        let h = zp_support(&disc(), 600.0, &UnitDirection::from_angle(1.1), tight(2)).unwrap();
        let expected = (ball_log_moment(2, 1.0 / PI.sqrt(), 600.0) / 600.0).exp();
        assert!((h / expected - 1.0).abs() < 1e-9, "{h} vs {expected}");
    }

    #[test]
    fn planar_routes_agree_at_the_crossover() {
        let body = ellipse_n();
        let theta = UnitDirection::from_angle(0.7);
        let direct = log_moment_direct(&body, 420.0, &theta, tight(2)).unwrap();
        let shifted = log_moment_planar_shifted(&body, 420.0, &theta, tight(2)).unwrap();
        assert!((direct - shifted).abs() < 1e-8, "{direct} vs {shifted}");
    }

    #[test]
    fn spatial_routes_agree_at_the_crossover() {
        let shape = [
            vec![0.7, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0 / 0.7],
        ];
        let body = unit(Body::ellipsoid(&shape).unwrap());
        let theta = UnitDirection::new(&[0.2, 0.5, 0.84]);
        let direct = log_moment_direct(&body, 32.0, &theta, tight(3)).unwrap();
        let shifted = log_moment_axial_shifted(&body, 32.0, &theta, tight(3)).unwrap();
        assert!((direct - shifted).abs() < 1e-6, "{direct} vs {shifted}");
    }

    #[test]
    fn inclusion_chain_is_monotone() {
        let bodies = [disc(), ellipse_n(), b32(), unit(Body::cube(2)), ball3()];
        for body in &bodies {
            let n = body.dim();
            let chain: &[f64] = if n == 2 { &[1.0, 2.0, 8.0, 64.0] } else { &[1.0, 2.0, 8.0] };
            for k in 0..4 {
                let theta = if n == 2 {
                    UnitDirection::from_angle(0.3 + 0.4 * k as f64)
                } else {
                    UnitDirection::new(&[0.3 + k as f64, 1.2, -0.7])
                };
                let mut prev = 0.0;
                for &p in chain {
                    let h = zp_support(body, p, &theta, tight(n)).unwrap();
                    assert!(prev <= h + 1e-10, "chain broke at p={p}");
                    prev = h;
                }
                assert!(prev <= body.support(&theta) + 1e-10, "Z_p escaped the body");
            }
        }
    }

    #[test]
    fn polar_volume_closed_forms() {
        // Z_2(disc) is the disc of radius 1/(2√π): polar area 4π²
        let v = zp_polar_volume(&disc(), 2.0, tight(2)).unwrap();
        assert!((v - 4.0 * PI * PI).abs() < 1e-8, "{v}");
        // Z_2 of the unit cube is the disc of radius 1/√12: polar area 12π
        let v = zp_polar_volume(&unit(Body::cube(2)), 2.0, tight(2)).unwrap();
        assert!((v - 12.0 * PI).abs() < 1e-8, "{v}");
        // p = ∞ short-circuits to |K°| = π²
        let v = zp_polar_volume(&disc(), f64::INFINITY, tight(2)).unwrap();
        assert!((v - PI * PI).abs() < 1e-12, "{v}");
    }

    #[test]
    fn moment_polars_peak_at_the_ball() {
        for p in [1.0, 2.0, 4.0, 8.0] {
            let vb = zp_polar_volume(&disc(), p, tight(2)).unwrap();
            let ve = zp_polar_volume(&ellipse_n(), p, tight(2)).unwrap();
            let vc = zp_polar_volume(&unit(Body::cube(2)), p, tight(2)).unwrap();
            let vq = zp_polar_volume(&b32(), p, tight(2)).unwrap();
            assert!((ve - vb).abs() < 1e-6, "p={p}: ellipse {ve} vs ball {vb}");
            assert!(vc <= vb + 1e-8, "p={p}: cube {vc} above ball {vb}");
            assert!(vq <= vb + 1e-8, "p={p}: l3 ball {vq} above ball {vb}");
        }
    }

    #[test]
    fn moment_supports_are_affinely_covariant() {
        let t = [vec![1.2, 0.3], vec![0.1, 103.0 / 120.0]];
        let base = ellipse_n();
        let image = base.linear_image(&t).unwrap();
        for beta in [0.0, 0.5, 1.1, 2.0, 2.8] {
            let theta = UnitDirection::from_angle(beta);
            let tc = theta.coords();
            let pull = [1.2 * tc[0] + 0.1 * tc[1], 0.3 * tc[0] + (103.0 / 120.0) * tc[1]];
            let scale = norm2(&pull);
            let lhs = zp_support(&image, 3.0, &theta, tight(2)).unwrap();
            let rhs = scale * zp_support(&base, 3.0, &UnitDirection::new(&pull), tight(2)).unwrap();
            assert!((lhs / rhs - 1.0).abs() < 1e-8, "β={beta}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn z2_is_an_ellipsoid() {
        for body in [ellipse_n(), b32()] {
            let m = second_moment_matrix(&body, tight(2)).unwrap();
            let count = 100;
            let mut rows = Vec::new();
            let mut rhs = Vec::new();
            for k in 0..count {
                let beta = 2.0 * PI * k as f64 / count as f64 + 0.05;
                let theta = UnitDirection::from_angle(beta);
                let w = theta.coords();
                rows.push(vec![w[0] * w[0], 2.0 * w[0] * w[1], w[1] * w[1]]);
                rhs.push(zp_support(&body, 2.0, &theta, tight(2)).unwrap().powi(2));
            }
            let row_refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            let q = lstsq(&row_refs, &rhs).unwrap();
            assert!((q[0] - m[0][0]).abs() < 1e-8, "{} vs {}", q[0], m[0][0]);
            assert!((q[1] - m[0][1]).abs() < 1e-8, "{} vs {}", q[1], m[0][1]);
            assert!((q[2] - m[1][1]).abs() < 1e-8, "{} vs {}", q[2], m[1][1]);
            for (row, target) in rows.iter().zip(&rhs) {
                let fitted = q[0] * row[0] + q[1] * row[1] + q[2] * row[2];
                assert!((fitted - target).abs() < 1e-8, "quadratic fit misses a sample");
            }
        }
    }

    #[test]
    fn isotropic_constants_of_the_catalog() {
        let ld = isotropic_constant(&disc(), tight(2)).unwrap();
        assert!((ld - 0.5 / PI.sqrt()).abs() < 1e-10, "{ld}");
        let lc = isotropic_constant(&unit(Body::cube(2)), tight(2)).unwrap();
        assert!((lc - (1.0_f64 / 12.0).sqrt()).abs() < 1e-10, "{lc}");
        assert!(lc > ld, "the cube should dominate the disc");
    }

    #[test]
    fn first_deficit_limit_on_the_disc() {
        let fit = theorem1_first_limit(&disc(), &late_p_grid(), tight(2)).unwrap();
        let target = 3.0 * PI * PI;
        let rel = (fit.limit / target - 1.0).abs();
        assert!(rel < 0.02, "limit {} vs {target} (rel {rel:.2e})", fit.limit);
    }

    #[test]
    fn first_deficit_limit_is_affine_invariant() {
        let fit = theorem1_first_limit(&ellipse_n(), &late_p_grid(), tight(2)).unwrap();
        let target = 3.0 * PI * PI;
        assert!((fit.limit / target - 1.0).abs() < 0.02, "{} vs {target}", fit.limit);
    }

    #[test]
    fn first_deficit_limit_on_a_cubic_ball() {
        let body = b32();
        let fit = theorem1_first_limit(&body, &late_p_grid(), tight(2)).unwrap();
        let target = 3.0 * body.polar_volume().unwrap();
        assert!((fit.limit / target - 1.0).abs() < 0.03, "{} vs {target}", fit.limit);
    }

    #[test]
    fn second_deficit_limit_on_the_disc() {
        let out = theorem1_second_limit(&disc(), &late_p_grid(), tight(2)).unwrap();
        let target = -PI * PI * (8.0 / PI).ln();
        let rel = (out.fit.limit / target - 1.0).abs();
        assert!(rel < 0.05, "limit {} vs {target} (rel {rel:.2e})", out.fit.limit);
        assert!((out.rhs_integral - target).abs() < 1e-8, "integral {}", out.rhs_integral);
        assert!(out.rhs_residual < 1e-8, "residual {}", out.rhs_residual);
    }

    #[test]
    fn second_deficit_surface_identity_on_a_cubic_ball() {
        let body = b32();
        let lhs = deficit_rhs_integral(&body, tight(2)).unwrap();
        let rhs = deficit_rhs_invariant_form(&body, tight(2)).unwrap();
        assert!((lhs - rhs).abs() < 1e-6, "{lhs} vs {rhs}");
    }

    #[test]
    fn deficit_limits_need_curvature() {
        let err = theorem1_first_limit(&unit(Body::cube(2)), &late_p_grid(), tight(2)).unwrap_err();
        assert!(matches!(err, Error::NonSmoothBody(_)), "got {err:?}");
    }

    fn disc_cap_area(t: f64) -> f64 {
        let r = 1.0 / PI.sqrt();
        let x = (t / r).clamp(-1.0, 1.0);
        r * r * (x.acos() - x * (1.0 - x * x).sqrt())
    }

    #[test]
    fn floating_support_matches_the_segment_inversion() {
        let got = floating_support(&disc(), 0.1, &UnitDirection::from_angle(0.9), tight(2)).unwrap();
        let (mut lo, mut hi) = (0.0, 1.0 / PI.sqrt());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 2.0 * disc_cap_area(mid) > 0.1 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let expected = 0.5 * (lo + hi);
        assert!((got - expected).abs() < 1e-8, "{got} vs {expected}");
    }

    #[test]
    fn floating_support_round_trips_through_the_cap_volume() {
        for body in [ellipse_n(), ball3()] {
            let n = body.dim();
            let theta = if n == 2 {
                UnitDirection::from_angle(0.4)
            } else {
                UnitDirection::new(&[0.1, -0.5, 0.86])
            };
            let t0 = 0.3 * body.support(&theta);
            let delta = 2.0 * cap_volume(&body, &theta, t0, tight(n)).unwrap();
            let got = floating_support(&body, delta, &theta, tight(n)).unwrap();
            assert!((got - t0).abs() < 1e-7, "n={n}: {got} vs {t0}");
        }
    }

    #[test]
    fn floating_bodies_shrink_with_delta() {
        let body = ellipse_n();
        let theta = UnitDirection::axis(2, 0);
        let mut prev = f64::INFINITY;
        for delta in [0.02, 0.05, 0.1, 0.2, 0.4] {
            let t = floating_support(&body, delta, &theta, tight(2)).unwrap();
            assert!(t < prev, "support not decreasing at δ={delta}");
            prev = t;
        }
    }

    #[test]
    fn floating_support_rejects_bad_input() {
        let theta = UnitDirection::axis(2, 0);
        assert!(matches!(
            floating_support(&disc(), 0.0, &theta, tight(2)),
            Err(Error::OutOfRange(_))
        ));
        assert!(matches!(
            floating_support(&disc(), 1.0, &theta, tight(2)),
            Err(Error::OutOfRange(_))
        ));
        assert!(matches!(
            floating_support(&unit(Body::ball(4)), 0.1, &UnitDirection::axis(4, 0), tight(4)),
            Err(Error::UnsupportedBody(_))
        ));
        assert!(matches!(
            floating_support(&Body::ball(2), 0.1, &theta, tight(2)),
            Err(Error::NotUnitVolume(_))
        ));
    }

    #[test]
    fn sandwich_ratios_on_the_disc() {
        let dirs: Vec<UnitDirection> =
            (0..8).map(|k| UnitDirection::from_angle(0.1 + k as f64 * PI / 4.0)).collect();
        let report = sandwich_ratios(&disc(), &[(-4.0_f64).exp()], &dirs, tight(2)).unwrap();
        // frozen from the closed forms at δ = e^{-4}: the slab half-width
        // solves 2 cap(t) = δ (t = 0.52926483081712107), and h_{Z_4} is the
        // fourth root of R^6 π/8 (0.33546913348270696)
        let expected = 1.5776856288461008;
        assert!((report.c1 - expected).abs() < 1e-6, "c1 {}", report.c1);
        assert!((report.c2 - expected).abs() < 1e-6, "c2 {}", report.c2);
        assert!(report.c2 - report.c1 < 1e-8, "rotation symmetry broke");
        assert_eq!(report.rows.len(), 8);
    }

    #[test]
    fn sandwich_constants_stay_in_range() {
        let dirs: Vec<UnitDirection> =
            (0..8).map(|k| UnitDirection::from_angle(0.2 + k as f64 * PI / 4.0)).collect();
        for body in [disc(), ellipse_n(), b32()] {
            let report = sandwich_ratios(&body, &default_delta_grid(), &dirs, tight(2)).unwrap();
            assert!(report.c1 >= 0.2, "c1 {} fell out of range", report.c1);
            assert!(report.c2 <= 3.0, "c2 {} fell out of range", report.c2);
        }
        let err =
            sandwich_ratios(&disc(), &[0.5], &dirs, tight(2)).unwrap_err();
        assert!(matches!(err, Error::OutOfRange(_)), "got {err:?}");
    }

    #[test]
    fn log_laplace_vanishes_at_the_origin() {
        for body in [disc(), ball3()] {
            let v = lambda_star(&body, &vec![0.0; body.dim()], tight(body.dim())).unwrap();
            assert!(v.abs() < 1e-7, "Λ*(0) = {v}");
        }
    }

    #[test]
    fn log_laplace_is_infinite_from_the_boundary_on() {
        let r = 1.0 / PI.sqrt();
        assert!(lambda_star(&disc(), &[1.5 * r, 0.0], tight(2)).unwrap().is_infinite());
        assert!(lambda_star(&disc(), &[r, 0.0], tight(2)).unwrap().is_infinite());
    }

    #[test]
    fn log_laplace_is_affinely_invariant() {
        let t = [vec![1.2, 0.3], vec![0.1, 103.0 / 120.0]];
        let base = ellipse_n();
        let image = base.linear_image(&t).unwrap();
        for x in [[0.4, 0.05], [-0.5, 0.1], [0.2, -0.15], [0.7, 0.08], [-0.3, -0.12]] {
            assert!(base.gauge(&x) < 0.8, "test point drifted near the boundary");
            let y = [1.2 * x[0] + 0.3 * x[1], 0.1 * x[0] + (103.0 / 120.0) * x[1]];
            let lhs = lambda_star(&image, &y, tight(2)).unwrap();
            let rhs = lambda_star(&base, &x, tight(2)).unwrap();
            assert!((lhs - rhs).abs() < 1e-7, "{lhs} vs {rhs} at {x:?}");
        }
    }

    #[test]
    fn level_support_tracks_the_moment_body() {
        let body = disc();
        let theta = UnitDirection::from_angle(0.5);
        let s = log_laplace_level_support(&body, 3.0, &theta, tight(2)).unwrap();
        let h = zp_support(&body, 3.0, &theta, tight(2)).unwrap();
        let ratio = s / h;
        assert!(ratio > 0.2 && ratio < 3.0, "ratio {ratio}");
        assert!(matches!(
            log_laplace_level_support(&body, 0.5, &theta, tight(2)),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn ball_section_derivatives_are_exact() {
        let body = Body::ball(3);
        let theta = UnitDirection::axis(3, 2);
        let (f1, _) = section_derivatives(&body, &theta, 0.0, tight(3)).unwrap();
        assert!(f1.abs() < 1e-10, "f'(0) = {f1}");
        let (f1, f2) = section_derivatives(&body, &theta, 0.5, tight(3)).unwrap();
        assert!((f1 + PI).abs() < 1e-6, "f'(1/2) = {f1}");
        assert!((f2 + 2.0 * PI).abs() < 1e-6, "f''(1/2) = {f2}");
    }

    #[test]
    fn ellipse_section_derivatives_match_finite_differences() {
        let body = Body::ellipse(1.3, 0.7);
        let theta = UnitDirection::from_angle(0.6);
        let t = 0.3;
        let acc = tight(2);
        let (f1, f2) = section_derivatives(&body, &theta, t, acc).unwrap();
        let step = 1e-3;
        let fp = section_volume(&body, &theta, t + step, acc).unwrap();
        let fm = section_volume(&body, &theta, t - step, acc).unwrap();
        let f0 = section_volume(&body, &theta, t, acc).unwrap();
        let fd1 = (fp - fm) / (2.0 * step);
        let fd2 = (fp - 2.0 * f0 + fm) / (step * step);
        assert!((f1 - fd1).abs() < 1e-4, "{f1} vs {fd1}");
        assert!((f2 - fd2).abs() < 1e-4 * (1.0 + f2.abs()), "{f2} vs {fd2}");
    }

    #[test]
    fn ellipsoid_section_derivatives_match_finite_differences() {
        let shape = [
            vec![1.2, 0.0, 0.0],
            vec![0.0, 0.9, 0.0],
            vec![0.0, 0.0, 0.75],
        ];
        let body = Body::ellipsoid(&shape).unwrap();
        let theta = UnitDirection::new(&[0.3, 0.2, 0.93]);
        let t = 0.25;
        let (f1, f2) = section_derivatives(&body, &theta, t, tight(3)).unwrap();
        let acc = Accuracy::abs_rel(1e-11, 1e-10);
        let step = 1e-3;
        let fp = section_volume(&body, &theta, t + step, acc).unwrap();
        let fm = section_volume(&body, &theta, t - step, acc).unwrap();
        let f0 = section_volume(&body, &theta, t, acc).unwrap();
        let fd1 = (fp - fm) / (2.0 * step);
        let fd2 = (fp - 2.0 * f0 + fm) / (step * step);
        assert!((f1 - fd1).abs() < 1e-3 * (1.0 + f1.abs()), "{f1} vs {fd1}");
        assert!((f2 - fd2).abs() < 1e-3 * (1.0 + f2.abs()), "{f2} vs {fd2}");
    }

    #[test]
    fn section_derivative_gates() {
        assert!(matches!(
            section_derivatives(&Body::cube(2), &UnitDirection::axis(2, 0), 0.1, tight(2)),
            Err(Error::NonSmoothBody(_))
        ));
        assert!(matches!(
            section_derivatives(&Body::ball(2), &UnitDirection::axis(2, 0), 1.0, tight(2)),
            Err(Error::OutOfRange(_))
        ));
        assert!(matches!(
            section_derivatives(&Body::ball(4), &UnitDirection::axis(4, 0), 0.1, tight(4)),
            Err(Error::UnsupportedBody(_))
        ));
    }

    #[test]
    fn ball_maximizers_are_closed_form() {
        let b3 = Body::ball(3);
        let theta = UnitDirection::axis(3, 2);
        for p in [2.0, 8.0] {
            let t = tp_maximizer(&b3, &theta, p, tight(3)).unwrap();
            let expected = (p / (p + 2.0)).sqrt();
            assert!((t - expected).abs() < 1e-7, "p={p}: {t} vs {expected}");
        }
        let t = tp_maximizer(&Body::ball(2), &UnitDirection::from_angle(0.3), 8.0, tight(2)).unwrap();
        let expected = (8.0_f64 / 9.0).sqrt();
        assert!((t - expected).abs() < 1e-8, "{t} vs {expected}");
    }

    #[test]
    fn maximizers_increase_and_approach_the_support() {
        for body in [Body::ball(2), Body::ellipse(1.3, 0.7)] {
            let theta = UnitDirection::from_angle(0.8);
            let h = body.support(&theta);
            let mut prev = 0.0;
            let mut gaps = Vec::new();
            for k in 6..=12 {
                let p = (1u64 << k) as f64;
                let t = tp_maximizer(&body, &theta, p, tight(2)).unwrap();
                assert!(t > prev, "t_p not increasing at p={p}");
                prev = t;
                gaps.push(h - t);
            }
            // h - t_p ~ C/p: doubling p should roughly halve the gap
            for w in gaps.windows(2) {
                let ratio = w[0] / w[1];
                assert!(ratio > 1.6 && ratio < 2.4, "halving ratio {ratio}");
            }
        }
    }

    #[test]
    fn inverse_ratio_pipeline_on_the_disc() {
        let r = inverse_lyz_ratio(&disc(), 2.0, tight(2)).unwrap();
        let expected = (2.0 * PI).sqrt();
        assert!((r - expected).abs() < 1e-5, "{r} vs {expected}");
        assert!(matches!(
            inverse_lyz_ratio(&ball3(), 2.0, tight(3)),
            Err(Error::UnsupportedBody(_))
        ));
    }

    #[test]
    fn centroid_handles_expose_the_moment_body() {
        let body = disc();
        let handle = CentroidBody::new(&body, 3.0, tight(2)).unwrap();
        let theta = UnitDirection::from_angle(1.3);
        let direct = zp_support(&body, 3.0, &theta, tight(2)).unwrap();
        assert_eq!(handle.support(&theta).unwrap(), direct);
        assert_eq!(handle.exponent(), 3.0);
        assert_eq!(handle.base().dim(), 2);
        let pv = handle.polar_volume().unwrap();
        let direct_pv = zp_polar_volume(&body, 3.0, tight(2)).unwrap();
        assert_eq!(pv, direct_pv);
        assert!(matches!(
            CentroidBody::new(&body, 0.5, tight(2)),
            Err(Error::ExponentTooSmall(_))
        ));
        assert!(matches!(
            CentroidBody::new(&Body::ball(2), 2.0, tight(2)),
            Err(Error::NotUnitVolume(_))
        ));
    }

    #[test]
    fn floating_body_tables_serialize() {
        let dirs: Vec<UnitDirection> =
            (0..4).map(|k| UnitDirection::from_angle(k as f64 * PI / 2.0 + 0.1)).collect();
        let table = floating_body_support(&disc(), 0.05, &dirs, tight(2)).unwrap();
        assert_eq!(table.support.len(), 4);
        assert!(
            table.support.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-9),
            "disc supports should be direction independent"
        );
        let json = serde_json::to_string(&table).unwrap();
        assert!(json.contains("\"delta\":0.05"));
    }

    #[test]
    fn moment_gates_reject_bad_input() {
        let theta = UnitDirection::axis(2, 0);
        assert!(matches!(
            zp_support(&disc(), 0.5, &theta, tight(2)),
            Err(Error::ExponentTooSmall(_))
        ));
        assert!(matches!(
            zp_support(&disc(), f64::NAN, &theta, tight(2)),
            Err(Error::ExponentTooSmall(_))
        ));
        assert!(matches!(
            zp_support(&Body::ball(2), 2.0, &theta, tight(2)),
            Err(Error::NotUnitVolume(_))
        ));
        assert!(matches!(
            zp_support(&disc(), 2.0, &UnitDirection::axis(3, 0), tight(2)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            zp_support(&unit(Body::ball(4)), 600.0, &UnitDirection::axis(4, 0), tight(4)),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    #[ignore]
    fn probe_disc_polar_volumes() {
        let body = disc();
        let pv = PI * PI;
        for k in 8..=14 {
            let p = (1u64 << k) as f64;
            let vp = zp_polar_volume(&body, p, tight(2)).unwrap();
            let r = (ball_log_moment(2, 1.0 / PI.sqrt(), p) / p).exp();
            let exact = PI / (r * r);
            println!(
                "p={p}: vp={vp:.12} exact={exact:.12} err={:+.3e}  s_p={:.6} s_exact={:.6}",
                vp - exact,
                p / p.ln() * (vp - pv),
                p / p.ln() * (exact - pv)
            );
        }
    }

    #[test]
    #[ignore]
    fn probe_planar_routes() {
        let body = ellipse_n();
        let theta = UnitDirection::from_angle(0.7);
        let tc = theta.coords();
        // affine oracle: ellipse = T(ball), T = diag(2,0.5)/sqrt(pi)
        let t = [2.0 / PI.sqrt(), 0.5 / PI.sqrt()];
        let pull = [t[0] * tc[0], t[1] * tc[1]];
        let detl = (t[0] * t[1]).ln();
        for p in [64.0, 128.0, 256.0, 420.0, 500.0, 600.0, 1024.0, 4096.0, 16384.0] {
            let oracle = detl + p * norm2(&pull).ln() + ball_log_moment(2, 1.0, p);
            let shifted = log_moment_planar_shifted(&body, p, &theta, tight(2)).unwrap();
            let direct = if p <= 600.0 {
                log_moment_direct(&body, p, &theta, tight(2)).unwrap() - oracle
            } else {
                f64::NAN
            };
            println!(
                "p={p}: shifted-oracle={:+.3e} direct-oracle={:+.3e}",
                shifted - oracle,
                direct
            );
        }
    }

    #[test]
    fn four_dimensional_moments_use_the_direct_route() {
        let body = unit(Body::ball(4));
        let radius = (2.0 / (PI * PI)).powf(0.25);
        let h = zp_support(&body, 2.0, &UnitDirection::axis(4, 0), tight(4)).unwrap();
        let expected = (ball_log_moment(4, radius, 2.0) / 2.0).exp();
        assert!((h / expected - 1.0).abs() < 1e-6, "{h} vs {expected}");
    }
}
