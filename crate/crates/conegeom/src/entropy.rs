//! The two natural boundary measures of a convex body, their relative
//! entropies, and cone-measure quadratures and samplers to cross-check them.
//!
//! A C2+ body K carries two probability densities on ∂K against surface
//! measure μ,
//!
//! ```text
//! p(x) = κ(x) / (⟨x, N(x)⟩^n · n|K°|),    q(x) = ⟨x, N(x)⟩ / (n |K|),
//! ```
//!
//! where κ is the Gauss curvature and N the outer normal. Q = q μ is the
//! cone measure of K (mass of a boundary patch = volume fraction of its
//! cone); P = p μ is the cone measure of K° carried over to ∂K through the
//! two Gauss maps. Their relative entropies close a loop with the volume
//! product and the affine invariant Ω:
//!
//! ```text
//! D(P‖Q) = log(|K|/|K°|) - (1/n) log Ω_K,
//! D(Q‖P) = log(|K°|/|K|) - (1/n) log Ω_{K°},
//! ```
//!
//! both nonnegative, zero exactly on ellipsoids. The divergences here are
//! computed as single reduced quadratures in normal coordinates; the
//! identities above are left to tests as independent assertions.

use std::cell::RefCell;

use crate::body::{dot, norm2, tangent_basis, Body, Coords, Smoothness, UnitDirection};
use crate::error::{Error, Result};
use crate::linalg::{mat_vec, MAX_DIM};
use crate::omega::{log_f_h, omega_entropy};
use crate::quadrature::{
    adaptive_1d, adaptive_1d_graded, integrate_sphere, integrate_sphere_adaptive, Accuracy,
    SphereRule,
};
use crate::rng;
use serde::Serialize;

/// The boundary densities p and q of a C2+ body, addressed by boundary
/// point. The normal is recovered from the point, so off-boundary inputs
/// fail with `OffBoundary` rather than extrapolating.
#[derive(Clone, Debug)]
pub struct DensityPair {
    body: Body,
    vol: f64,
    pvol: f64,
}

impl DensityPair {
    pub fn new(body: &Body) -> Result<DensityPair> {
        if body.smoothness() != Smoothness::C2Plus {
            return Err(Error::NonSmoothBody("boundary densities need curvature"));
        }
        Ok(DensityPair {
            body: body.clone(),
            vol: body.volume(),
            pvol: body.polar_volume()?,
        })
    }

    /// p(x) = κ(x) / (⟨x, N(x)⟩^n n|K°|); strictly positive on C2+ bodies.
    pub fn p_at(&self, x: &[f64]) -> Result<f64> {
        let u = self.body.normal_at(x)?;
        let f = self.body.curvature_function(&u)?;
        let h = dot(x, u.coords());
        let n = self.body.dim();
        Ok(1.0 / (f * h.powi(n as i32) * n as f64 * self.pvol))
    }

    /// q(x) = ⟨x, N(x)⟩ / (n|K|); strictly positive whenever 0 ∈ int K.
    pub fn q_at(&self, x: &[f64]) -> Result<f64> {
        let u = self.body.normal_at(x)?;
        Ok(dot(x, u.coords()) / (self.body.dim() as f64 * self.vol))
    }
}

/// D(P‖Q) = ∫ p log(p/q) dμ by one reduced quadrature in normal
/// coordinates: with p/q = |K| / (|K°| f h^{n+1}) and dP = h^{-n} dσ/(n|K°|),
///
/// ```text
/// D(P‖Q) = (1/(n|K°|)) ∫ h^{-n} [ log(|K|/|K°|) - log(f h^{n+1}) ] dσ.
/// ```
///
/// The identity with log(|K|/|K°|) - (1/n) log Ω_K is not assumed anywhere
/// here; tests assert it against the closed-form Ω of l_r balls.
pub fn kl_p_q(body: &Body, acc: Accuracy) -> Result<f64> {
    let n = need_curvature(body)?;
    let nf = n as f64;
    let vol = body.volume();
    let pvol = body.polar_volume()?;
    let balance = (vol / pvol).ln();
    let planes = body.singular_planes();
    let integral = integrate_sphere_adaptive(
        n,
        |u| {
            let lg = match log_f_h(body, u, nf + 1.0) {
                Some(v) => v,
                None => return f64::NAN,
            };
            if lg.is_infinite() {
                // flat direction pushes the integrand to +∞, a curvature
                // blow-up to -∞; both isolated and integrable
                return -lg;
            }
            (-nf * body.support(u).ln()).exp() * (balance - lg)
        },
        &planes,
        acc,
    )?;
    Ok(integral.value / (nf * pvol))
}

/// D(Q‖P) = ∫ q log(q/p) dμ, reduced the same way:
///
/// ```text
/// D(Q‖P) = (1/(n|K|)) ∫ f h [ log(|K°|/|K|) + log(f h^{n+1}) ] dσ.
/// ```
///
/// Zero curvature kills the integrand (f log f → 0), so the reduced form
/// stays finite wherever the body is merely flat, not edged.
pub fn kl_q_p(body: &Body, acc: Accuracy) -> Result<f64> {
    let n = need_curvature(body)?;
    let nf = n as f64;
    let vol = body.volume();
    let pvol = body.polar_volume()?;
    let balance = (pvol / vol).ln();
    let planes = body.singular_planes();
    let integral = integrate_sphere_adaptive(
        n,
        |u| {
            let f = match body.curvature_det(u) {
                Ok(v) => v,
                Err(_) => return f64::NAN,
            };
            if f <= 0.0 {
                return 0.0;
            }
            if f.is_infinite() {
                return f64::INFINITY;
            }
            let h = body.support(u);
            f * h * (balance + f.ln() + (nf + 1.0) * h.ln())
        },
        &planes,
        acc,
    )?;
    Ok(integral.value / (nf * vol))
}

fn need_curvature(body: &Body) -> Result<usize> {
    if body.smoothness() != Smoothness::C2Plus {
        return Err(Error::NonSmoothBody("relative entropy needs a curvature function"));
    }
    Ok(body.dim())
}

/// A geodesic cap of directions {u : ∠(u, center) ≤ angle}; radius π means
/// the whole sphere.
#[derive(Clone, Debug)]
pub struct Cap {
    pub center: UnitDirection,
    pub angle: f64,
}

impl Cap {
    pub fn new(center: UnitDirection, angle: f64) -> Result<Cap> {
        if !(angle > 0.0 && angle <= std::f64::consts::PI) {
            return Err(Error::OutOfRange(format!("cap radius {angle} not in (0, π]")));
        }
        Ok(Cap { center, angle })
    }

    /// Radial membership of a nonzero point.
    pub fn contains(&self, x: &[f64]) -> bool {
        let nrm = norm2(x);
        nrm > 0.0 && dot(x, self.center.coords()) >= self.angle.cos() * nrm
    }
}

/// ∫_cap g dσ. Planar caps are arcs; higher dimensions slice by height t
/// over the cap axis, where surface measure factors as
/// (1-t²)^{(n-3)/2} dt dσ_{S^{n-2}}.
fn cap_integral<G: FnMut(&UnitDirection) -> f64>(
    body: &Body,
    cap: &Cap,
    mut g: G,
    acc: Accuracy,
) -> Result<f64> {
    let n = body.dim();
    if cap.center.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: cap.center.dim() });
    }
    if n == 2 {
        let c = cap.center.coords();
        let theta = c[1].atan2(c[0]);
        return arc_integral(body, theta - cap.angle, theta + cap.angle, g, acc);
    }

    let basis = tangent_basis(&cap.center);
    let c = cap.center.coords();
    let inner_acc = acc.tightened(1.0 / 16.0);
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    // fixed rule on the slice sphere S^{n-2}; n = 3 gets an adaptive circle
    let slice_rule = if n >= 4 { Some(SphereRule::for_dimension(n - 1, 0)) } else { None };
    let outer = adaptive_1d(
        |t| {
            if failure.borrow().is_some() {
                return 0.0;
            }
            let s2 = (1.0 - t) * (1.0 + t);
            if s2 <= 0.0 {
                return 0.0;
            }
            let s = s2.sqrt();
            let embed = |w: &[f64]| {
                let mut x = [0.0; MAX_DIM];
                for (i, xi) in x.iter_mut().enumerate().take(n) {
                    *xi = t * c[i];
                    for (wj, b) in w.iter().zip(&basis) {
                        *xi += s * wj * b[i];
                    }
                }
                UnitDirection::new(&x[..n])
            };
            match &slice_rule {
                None => {
                    let inner = adaptive_1d(
                        |phi| {
                            let (sp, cp) = phi.sin_cos();
                            g(&embed(&[cp, sp]))
                        },
                        0.0,
                        2.0 * std::f64::consts::PI,
                        &[],
                        inner_acc,
                    );
                    match inner {
                        Ok(r) => r.value,
                        Err(e) => {
                            *failure.borrow_mut() = Some(e);
                            0.0
                        }
                    }
                }
                Some(rule) => {
                    let m = rule.dim();
                    s.powi(n as i32 - 3)
                        * integrate_sphere(rule, |w| g(&embed(&w.coords()[..m])))
                }
            }
        },
        cap.angle.cos(),
        1.0,
        &[],
        acc,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(outer.value)
}

/// ∫ g(u(β)) dβ over [lo, hi], splitting at the body's singular angles.
fn arc_integral<G: FnMut(&UnitDirection) -> f64>(
    body: &Body,
    lo: f64,
    hi: f64,
    mut g: G,
    acc: Accuracy,
) -> Result<f64> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut splits = Vec::new();
    for s in body.singular_angles_2d() {
        let d = (s - lo).rem_euclid(two_pi);
        if d > 0.0 && d < hi - lo {
            splits.push(lo + d);
        }
    }
    let r = adaptive_1d_graded(|beta| g(&UnitDirection::from_angle(beta)), lo, hi, &splits, acc)?;
    Ok(r.value)
}

/// Normalized cone measure of a radial cap: the volume fraction of K swept
/// by rays through the cap,
///
/// ```text
/// cm_K(cap) = (1/(n|K|)) ∫_cap ρ_K(u)^n dσ(u).
/// ```
pub fn cone_measure(body: &Body, cap: &Cap, acc: Accuracy) -> Result<f64> {
    let n = body.dim();
    let vol = body.volume();
    let integral = cap_integral(body, cap, |u| body.radial(u).powi(n as i32), acc)?;
    Ok(integral / (n as f64 * vol))
}

/// Cone measure of a union of caps with disjoint interiors; overlapping
/// caps are refused rather than double-counted.
pub fn cone_measure_union(body: &Body, caps: &[Cap], acc: Accuracy) -> Result<f64> {
    for (i, a) in caps.iter().enumerate() {
        for b in &caps[i + 1..] {
            let gap = dot(a.center.coords(), b.center.coords()).clamp(-1.0, 1.0).acos();
            if gap < a.angle + b.angle - 1e-12 {
                return Err(Error::OutOfRange(format!(
                    "caps at separation {gap} overlap (radii {} + {})",
                    a.angle, b.angle
                )));
            }
        }
    }
    let mut total = 0.0;
    for cap in caps {
        total += cone_measure(body, cap, acc)?;
    }
    Ok(total)
}

/// One boundary point drawn from the cone measure of K.
#[derive(Clone, Copy, Debug)]
pub struct ConeSample {
    pub x: Coords,
    pub stream_id: u64,
    pub weight: f64,
}

/// `count` points on ∂K distributed by the cone measure cm_K.
///
/// l_r balls use the product representation: coordinates drawn with
/// density ∝ exp(-|t|^r) and normalized to the l_r sphere land on ∂B_r^n
/// with exactly the cone measure. A linear image T(B) pushes base samples
/// through T, since cones and |K| scale by the same |det T|. Bodies
/// without an l_r factorization (the cube) are refused.
pub fn sample_cone_measure(body: &Body, count: usize, seed: u64) -> Result<Vec<ConeSample>> {
    let n = body.dim();
    let (r, transform) = body
        .lp_factorization()
        .ok_or(Error::UnsupportedBody("cone-measure sampling needs an l_r factorization"))?;
    let stream_id = 0u64;
    let mut gen = rng::stream(seed, "cone-measure", stream_id);
    let weight = 1.0 / count as f64;
    let mut samples = Vec::with_capacity(count);
    let mut a = [0.0; MAX_DIM];
    for _ in 0..count {
        rng::lp_cone_direction(&mut gen, n, r, &mut a[..n]);
        let x = match transform {
            Some(t) => mat_vec(t, &a[..n], n),
            None => a,
        };
        samples.push(ConeSample { x, stream_id, weight });
    }
    Ok(samples)
}

/// Fraction of samples whose radial direction lies in the cap, with its
/// binomial standard error.
pub fn empirical_cap_frequency(samples: &[ConeSample], cap: &Cap) -> (f64, f64) {
    let m = cap.center.dim();
    let hits = samples.iter().filter(|s| cap.contains(&s.x[..m])).count();
    let freq = hits as f64 / samples.len() as f64;
    let se = (freq * (1.0 - freq) / samples.len() as f64).sqrt();
    (freq, se)
}

/// Worst residual over the given caps of the two cone-measure identities
/// induced by the duality map x ↦ x* on ∂K (the point of ∂K° with
/// ⟨x, x*⟩ = 1). The map carries the boundary patch A = N_K^{-1}(U) with
/// normals in the cap U to the patch A* ⊂ ∂K° whose radial directions fill
/// U and whose normals fill the window W = { ∇h_K(u)/|∇h_K(u)| : u ∈ U }.
/// Writing each side once over U (support and curvature of K) and once
/// over W (radial gauge of K, surface side of K°):
///
/// ```text
/// cm_K(A)     = (1/(n|K|))  ∫_U h_K f_K dσ    = (1/(n|K|))  ∫_W ρ_K^n dσ,
/// cm_{K°}(A*) = (1/(n|K°|)) ∫_U h_K^{-n} dσ   = (1/(n|K°|)) ∫_W h_{K°} f_{K°} dσ,
/// ```
///
/// where the U-side of the second line is exactly the P-measure of A from
/// [`DensityPair`]. A wrong window map breaks both lines, so the residuals
/// exercise the full normal-to-radial correspondence. On the round ball
/// ∇h is the identity and W = U in any dimension; otherwise the image of
/// a cap is an arc only in the plane, so n ≥ 3 is refused.
pub fn pushforward_check(body: &Body, caps: &[Cap], acc: Accuracy) -> Result<f64> {
    let n = body.dim();
    let nf = n as f64;
    let polar = body.polar()?;
    let vol = body.volume();
    let pvol = polar.volume();
    if n > 2 && !body.is_unit_ball() {
        return Err(Error::UnsupportedBody(
            "pushforward images of caps are arcs only in the plane",
        ));
    }
    let mut worst = 0.0f64;
    for cap in caps {
        let p_normal =
            cap_integral(body, cap, |u| body.support(u).powi(-(n as i32)), acc)? / (nf * pvol);
        let q_normal = cap_integral(body, cap, |u| gauss_cone_weight(body, u), acc)? / (nf * vol);
        let (p_radial, q_radial) = if body.is_unit_ball() {
            let p = cap_integral(&polar, cap, |u| gauss_cone_weight(&polar, u), acc)? / (nf * pvol);
            let q = cone_measure(body, cap, acc)?;
            (p, q)
        } else {
            let (w0, width) = boundary_window(body, cap);
            let w1 = w0 + width;
            let p = arc_integral(&polar, w0, w1, |u| gauss_cone_weight(&polar, u), acc)?
                / (nf * pvol);
            let q = arc_integral(body, w0, w1, |u| body.radial(u).powi(2), acc)? / (nf * vol);
            (p, q)
        };
        worst = worst.max((p_normal - p_radial).abs());
        worst = worst.max((q_normal - q_radial).abs());
    }
    Ok(worst)
}

/// Pushforward density of the cone measure through the Gauss map at normal
/// u, up to the 1/(n|K|) normalization: h(u) f(u). Zero curvature weighs
/// nothing; isolated +∞ passes through for graded quadrature.
fn gauss_cone_weight(body: &Body, u: &UnitDirection) -> f64 {
    match body.curvature_det(u) {
        Ok(f) if f > 0.0 => {
            if f.is_finite() {
                f * body.support(u)
            } else {
                f64::INFINITY
            }
        }
        Ok(_) => 0.0,
        Err(_) => f64::NAN,
    }
}

/// Radial window of the boundary patch with normals in the cap, as
/// (start angle, width): the endpoints are the directions of ∇h at the
/// cap's edge normals, and ∇h preserves orientation on S^1, so an arc of
/// normals maps to an arc of radial directions. A cap of angle ≥ π covers
/// the whole circle.
fn boundary_window(body: &Body, cap: &Cap) -> (f64, f64) {
    let two_pi = 2.0 * std::f64::consts::PI;
    let c = cap.center.coords();
    let theta = c[1].atan2(c[0]);
    if cap.angle >= std::f64::consts::PI {
        return (theta, two_pi);
    }
    let radial_angle = |alpha: f64| -> f64 {
        let x = body.support_gradient_raw(UnitDirection::from_angle(alpha).coords());
        x[1].atan2(x[0])
    };
    let w0 = radial_angle(theta - cap.angle);
    let w1 = radial_angle(theta + cap.angle);
    (w0, (w1 - w0).rem_euclid(two_pi))
}

/// Per-cap row of an entropy report: quadrature cone measure, Monte Carlo
/// frequency when a sampler exists, and the pushforward residual where the
/// mapped region stays an arc.
#[derive(Clone, Debug, Serialize)]
pub struct CapRow {
    pub center: Vec<f64>,
    pub angle: f64,
    pub cone_measure: f64,
    pub mc_frequency: Option<f64>,
    pub mc_std_error: Option<f64>,
    pub pushforward_residual: Option<f64>,
}

/// Both divergences, their identity residuals against the entropy route
/// for Ω, and a table of equispaced caps.
#[derive(Clone, Debug, Serialize)]
pub struct EntropyReport {
    pub kl_pq: f64,
    pub kl_qp: f64,
    pub identity_residuals: [f64; 2],
    pub cap_table: Vec<CapRow>,
}

/// Assemble an [`EntropyReport`] with `caps` equispaced caps of radius
/// π/caps (centers on the first coordinate great circle) and `mc` cone
/// samples; `mc = 0` skips the Monte Carlo columns.
pub fn entropy_report(
    body: &Body,
    caps: usize,
    mc: usize,
    seed: u64,
    acc: Accuracy,
) -> Result<EntropyReport> {
    let n = body.dim();
    let nf = n as f64;
    let kl_pq = kl_p_q(body, acc)?;
    let kl_qp = kl_q_p(body, acc)?;
    let vol = body.volume();
    let pvol = body.polar_volume()?;
    let polar = body.polar()?;
    let omega_k = omega_entropy(body, acc)?;
    let omega_polar = omega_entropy(&polar, acc)?;
    let identity_residuals = [
        (kl_pq - ((vol / pvol).ln() - omega_k.ln() / nf)).abs(),
        (kl_qp - ((pvol / vol).ln() - omega_polar.ln() / nf)).abs(),
    ];

    let samples = if mc > 0 { sample_cone_measure(body, mc, seed).ok() } else { None };
    let mut cap_table = Vec::with_capacity(caps);
    for k in 0..caps {
        let beta = 2.0 * std::f64::consts::PI * k as f64 / caps as f64;
        let mut coords = [0.0; MAX_DIM];
        coords[0] = beta.cos();
        coords[1] = beta.sin();
        let cap = Cap::new(UnitDirection::new(&coords[..n]), std::f64::consts::PI / caps as f64)?;
        let cm = cone_measure(body, &cap, acc)?;
        let (mc_frequency, mc_std_error) = match &samples {
            Some(s) => {
                let (f, se) = empirical_cap_frequency(s, &cap);
                (Some(f), Some(se))
            }
            None => (None, None),
        };
        let pushforward_residual = pushforward_check(body, std::slice::from_ref(&cap), acc).ok();
        cap_table.push(CapRow {
            center: cap.center.coords().to_vec(),
            angle: cap.angle,
            cone_measure: cm,
            mc_frequency,
            mc_std_error,
            pushforward_residual,
        });
    }
    Ok(EntropyReport { kl_pq, kl_qp, identity_residuals, cap_table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{lp_ball_polar_volume, lp_ball_volume};
    use crate::omega::omega_lp_closed_form;

    fn tight(n: usize) -> Accuracy {
        if n == 2 {
            Accuracy::abs_rel(1e-12, 1e-11)
        } else {
            Accuracy::abs_rel(1e-9, 1e-8)
        }
    }

    #[test]
    fn ball_divergences_vanish() {
        // p ≡ q on the ball: κ = h = 1 and |K| = |K°|
        for n in 2..=4 {
            let ball = Body::ball(n);
            let acc = tight(n);
            assert!(kl_p_q(&ball, acc).unwrap().abs() < 1e-9, "n = {n}");
            assert!(kl_q_p(&ball, acc).unwrap().abs() < 1e-9, "n = {n}");
        }
    }

    #[test]
    fn ellipsoid_divergences_vanish() {
        // Gibbs equality case: affine images of the ball
        let e = Body::ellipse(1.5, 0.8);
        let acc = tight(2);
        let pq = kl_p_q(&e, acc).unwrap();
        let qp = kl_q_p(&e, acc).unwrap();
        assert!(pq > -1e-12 && pq.abs() < 1e-8, "D(P‖Q) = {pq}");
        assert!(qp > -1e-12 && qp.abs() < 1e-8, "D(Q‖P) = {qp}");
    }

    #[test]
    fn b3_forward_divergence_matches_volume_product_identity() {
        let body = Body::lp_ball(2, 3.0).unwrap();
        let got = kl_p_q(&body, tight(2)).unwrap();
        let vol = lp_ball_volume(2, 3.0);
        let pvol = lp_ball_polar_volume(2, 3.0).unwrap();
        let omega = omega_lp_closed_form(2, 3.0).unwrap();
        let want = (vol / pvol).ln() - omega.ln() / 2.0;
        assert!(got > 1e-4, "divergence must be strictly positive, got {got}");
        assert!((got - want).abs() < 1e-6, "D(P‖Q) = {got} vs identity {want}");
    }

    #[test]
    fn b3_reverse_divergence_uses_polar_omega() {
        // (B_3^2)° = B_{3/2}^2, so the identity runs through Ω of the dual ball
        let body = Body::lp_ball(2, 3.0).unwrap();
        let got = kl_q_p(&body, tight(2)).unwrap();
        let vol = lp_ball_volume(2, 3.0);
        let pvol = lp_ball_polar_volume(2, 3.0).unwrap();
        let omega_polar = omega_lp_closed_form(2, 1.5).unwrap();
        let want = (pvol / vol).ln() - omega_polar.ln() / 2.0;
        assert!(got > 1e-4, "divergence must be strictly positive, got {got}");
        assert!((got - want).abs() < 1e-6, "D(Q‖P) = {got} vs identity {want}");
    }

    #[test]
    fn gibbs_inequality_on_catalog() {
        let bodies = [
            Body::ball(2),
            Body::ball(3),
            Body::lp_ball(2, 3.0).unwrap(),
            Body::lp_ball(2, 1.5).unwrap(),
            Body::lp_ball(3, 3.0).unwrap(),
            Body::ellipse(2.0, 0.5),
        ];
        for body in &bodies {
            let acc = tight(body.dim());
            assert!(kl_p_q(body, acc).unwrap() >= -1e-12);
            assert!(kl_q_p(body, acc).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn exponential_identity_recovers_omega() {
        // Ω^{1/n} = (|K|/|K°|) exp(-D(P‖Q)) against the entropy route for Ω
        for body in [Body::lp_ball(2, 3.0).unwrap(), Body::lp_ball(3, 1.5).unwrap()] {
            let acc = tight(body.dim());
            let nf = body.dim() as f64;
            let omega = omega_entropy(&body, acc).unwrap();
            let vol = body.volume();
            let pvol = body.polar_volume().unwrap();
            let via_entropy = (vol / pvol) * (-kl_p_q(&body, acc).unwrap()).exp();
            let direct = omega.powf(1.0 / nf);
            assert!(
                (via_entropy - direct).abs() < 1e-6 * direct.abs().max(1.0),
                "exp identity {via_entropy} vs Ω^(1/n) {direct}"
            );
        }
    }

    #[test]
    fn densities_are_probability_measures() {
        // ∫ p dμ reduces to h^{-n}σ-mass of K°, ∫ q dμ to the cone-volume
        // mass of K; both must be 1
        let body = Body::lp_ball(2, 3.0).unwrap();
        let n = body.dim();
        let nf = n as f64;
        let vol = body.volume();
        let pvol = body.polar_volume().unwrap();
        let planes = body.singular_planes();
        let acc = tight(n);
        let p_total = integrate_sphere_adaptive(
            n,
            |u| (-nf * body.support(u).ln()).exp(),
            &planes,
            acc,
        )
        .unwrap()
        .value
            / (nf * pvol);
        let q_total = integrate_sphere_adaptive(
            n,
            |u| match body.curvature_det(u) {
                Ok(f) if f.is_finite() && f > 0.0 => f * body.support(u),
                Ok(f) if f > 0.0 => f64::INFINITY,
                Ok(_) => 0.0,
                Err(_) => f64::NAN,
            },
            &planes,
            acc,
        )
        .unwrap()
        .value
            / (nf * vol);
        assert!((p_total - 1.0).abs() < 1e-8, "∫p dμ = {p_total}");
        assert!((q_total - 1.0).abs() < 1e-8, "∫q dμ = {q_total}");
    }

    #[test]
    fn density_point_api_round_trips() {
        let body = Body::lp_ball(2, 3.0).unwrap();
        let pair = DensityPair::new(&body).unwrap();
        let vol = body.volume();
        let pvol = body.polar_volume().unwrap();
        for beta in [0.3, 1.1, 2.5, 4.0] {
            let u = UnitDirection::from_angle(beta);
            let bp = body.boundary_point(&u).unwrap();
            let p = pair.p_at(&bp.x[..2]).unwrap();
            let q = pair.q_at(&bp.x[..2]).unwrap();
            let f = body.curvature_det(&u).unwrap();
            let h = body.support(&u);
            let p_want = 1.0 / (f * h * h * 2.0 * pvol);
            let q_want = h / (2.0 * vol);
            assert!(p > 0.0 && q > 0.0, "densities must be positive");
            assert!((p - p_want).abs() < 1e-10 * p_want, "p {p} vs {p_want}");
            assert!((q - q_want).abs() < 1e-10 * q_want, "q {q} vs {q_want}");
        }
    }

    #[test]
    fn divergences_reject_polytopes() {
        let cube = Body::cube(2);
        assert!(matches!(kl_p_q(&cube, tight(2)), Err(Error::NonSmoothBody(_))));
        assert!(matches!(kl_q_p(&cube, tight(2)), Err(Error::NonSmoothBody(_))));
        assert!(matches!(DensityPair::new(&cube), Err(Error::NonSmoothBody(_))));
    }

    #[test]
    fn full_cap_has_measure_one() {
        let full = |n: usize| {
            Cap::new(UnitDirection::axis(n, 0), std::f64::consts::PI).unwrap()
        };
        let b2 = Body::lp_ball(2, 3.0).unwrap();
        let b3 = Body::lp_ball(3, 1.5).unwrap();
        let m2 = cone_measure(&b2, &full(2), tight(2)).unwrap();
        let m3 = cone_measure(&b3, &full(3), tight(3)).unwrap();
        assert!((m2 - 1.0).abs() < 1e-9, "full arc mass {m2}");
        assert!((m3 - 1.0).abs() < 1e-7, "full cap mass {m3}");
    }

    #[test]
    fn halfspace_cap_is_half_on_balls() {
        // symmetry pins the half-space cone measure at exactly 1/2
        for n in [2usize, 3, 4] {
            let cap = Cap::new(UnitDirection::axis(n, 0), std::f64::consts::PI / 2.0).unwrap();
            let got = cone_measure(&Body::ball(n), &cap, tight(n)).unwrap();
            assert!((got - 0.5).abs() < 1e-8, "n = {n}: {got}");
        }
    }

    #[test]
    fn tiling_arcs_sum_to_one() {
        // eight touching arcs of radius π/8 tile the circle exactly
        let body = Body::lp_ball(2, 3.0).unwrap();
        let caps: Vec<Cap> = (0..8)
            .map(|k| {
                let beta = 2.0 * std::f64::consts::PI * k as f64 / 8.0;
                Cap::new(UnitDirection::from_angle(beta), std::f64::consts::PI / 8.0).unwrap()
            })
            .collect();
        let total = cone_measure_union(&body, &caps, tight(2)).unwrap();
        assert!((total - 1.0).abs() < 1e-8, "tiling total {total}");

        let overlapping =
            [caps[0].clone(), Cap::new(UnitDirection::from_angle(0.1), 1.0).unwrap()];
        assert!(matches!(
            cone_measure_union(&body, &overlapping, tight(2)),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn samples_lie_on_the_boundary() {
        for body in [
            Body::lp_ball(2, 3.0).unwrap(),
            Body::ellipse(2.0, 0.5),
            Body::cross_polytope(2),
        ] {
            let samples = sample_cone_measure(&body, 500, 11).unwrap();
            assert_eq!(samples.len(), 500);
            let weight: f64 = samples.iter().map(|s| s.weight).sum();
            assert!((weight - 1.0).abs() < 1e-12);
            for s in &samples {
                let gauge = body.gauge(&s.x[..2]);
                assert!((gauge - 1.0).abs() < 1e-10, "gauge {gauge} off boundary");
            }
        }
        assert!(matches!(
            sample_cone_measure(&Body::cube(2), 10, 0),
            Err(Error::UnsupportedBody(_))
        ));
    }

    #[test]
    fn sample_symmetry_on_the_sphere() {
        // uniform surface measure: coordinate means vanish, E x_i² = 1/n
        let n = 100_000;
        let samples = sample_cone_measure(&Body::ball(3), n, 23).unwrap();
        for i in 0..3 {
            let mean: f64 = samples.iter().map(|s| s.x[i]).sum::<f64>() / n as f64;
            let sd = (1.0f64 / 3.0).sqrt();
            assert!(
                mean.abs() < 3.0 * sd / (n as f64).sqrt(),
                "coordinate {i} mean {mean}"
            );
        }
        let cap = Cap::new(UnitDirection::axis(3, 0), std::f64::consts::PI / 2.0).unwrap();
        let (freq, se) = empirical_cap_frequency(&samples, &cap);
        assert!((freq - 0.5).abs() < 3.0 * se, "half-space frequency {freq}");
    }

    #[test]
    fn empirical_caps_match_quadrature() {
        // the π/4 cap at e₁ on B_3^2, a genuinely asymmetric cone mass
        let body = Body::lp_ball(2, 3.0).unwrap();
        let cap = Cap::new(UnitDirection::axis(2, 0), std::f64::consts::PI / 4.0).unwrap();
        let want = cone_measure(&body, &cap, tight(2)).unwrap();
        let samples = sample_cone_measure(&body, 1_000_000, 7).unwrap();
        let (freq, se) = empirical_cap_frequency(&samples, &cap);
        assert!(
            (freq - want).abs() < 3.0 * se + 1e-9,
            "frequency {freq} vs quadrature {want} (se {se})"
        );
    }

    #[test]
    fn pushforward_is_identity_on_round_balls() {
        for n in [2usize, 3] {
            let caps = [
                Cap::new(UnitDirection::axis(n, 0), std::f64::consts::PI / 3.0).unwrap(),
                Cap::new(UnitDirection::new(&vec![0.6; n]), 0.8).unwrap(),
            ];
            let worst = pushforward_check(&Body::ball(n), &caps, tight(n)).unwrap();
            assert!(worst < 1e-10, "n = {n}: residual {worst}");
        }
    }

    #[test]
    fn pushforward_refuses_nonball_in_higher_dimensions() {
        let body = Body::lp_ball(3, 3.0).unwrap();
        let cap = Cap::new(UnitDirection::axis(3, 0), 0.5).unwrap();
        let err = pushforward_check(&body, &[cap], tight(3)).unwrap_err();
        assert!(matches!(err, Error::UnsupportedBody(_)), "got {err:?}");
    }

    #[test]
    fn pushforward_on_the_ellipse() {
        let body = Body::ellipse(2.0, 0.5);
        let cap = Cap::new(UnitDirection::axis(2, 0), std::f64::consts::PI / 4.0).unwrap();
        let worst = pushforward_check(&body, &[cap], tight(2)).unwrap();
        assert!(worst < 1e-6, "ellipse pushforward residual {worst}");
    }

    #[test]
    fn pushforward_on_b3_eight_caps() {
        let body = Body::lp_ball(2, 3.0).unwrap();
        let caps: Vec<Cap> = (0..8)
            .map(|k| {
                let beta = 2.0 * std::f64::consts::PI * k as f64 / 8.0;
                Cap::new(UnitDirection::from_angle(beta), std::f64::consts::PI / 8.0).unwrap()
            })
            .collect();
        let worst = pushforward_check(&body, &caps, tight(2)).unwrap();
        assert!(worst < 1e-6, "max pushforward residual {worst}");
    }

    #[test]
    fn report_assembles_for_lp_ball() {
        let body = Body::lp_ball(2, 3.0).unwrap();
        let report = entropy_report(&body, 4, 20_000, 5, tight(2)).unwrap();
        assert_eq!(report.cap_table.len(), 4);
        assert!(report.kl_pq > 0.0 && report.kl_qp > 0.0);
        assert!(report.identity_residuals[0] < 1e-6);
        assert!(report.identity_residuals[1] < 1e-6);
        let mass: f64 = report.cap_table.iter().map(|row| row.cone_measure).sum();
        assert!((mass - 1.0).abs() < 1e-8, "tiling rows sum to {mass}");
        for row in &report.cap_table {
            let f = row.mc_frequency.unwrap();
            let se = row.mc_std_error.unwrap();
            assert!((f - row.cone_measure).abs() < 4.0 * se, "row off: {row:?}");
            assert!(row.pushforward_residual.unwrap() < 1e-6);
        }
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("cap_table"));
    }
}
