//! The affine invariant Ω_K and its independent evaluation routes.
//!
//! Ω_K is defined for a convex body K with sufficiently smooth boundary by
//! the large-exponent limit of normalized affine surface areas,
//!
//! ```text
//! Ω_K = lim_{p→∞} (as_p(K) / (n|K°|))^{n+p}
//! ```
//!
//! and admits two independent reformulations computed here: an entropy
//! integral over the normal directions,
//!
//! ```text
//! log Ω_K = (1/|K°|) ∫_{S^{n-1}} h(u)^{-n} log(f(u) h(u)^{n+1}) dσ(u)
//! ```
//!
//! its polar-data twin with the integrand h f log(f h^{n+1}) taken on K°,
//! and a small-exponent limit through the polar body,
//!
//! ```text
//! Ω_K = lim_{q→0⁺} (as_q(K°) / (n|K°|))^{n(n+q)/q}.
//! ```
//!
//! The routes share no quadrature structure beyond the sphere rules, so
//! their agreement is a genuine correctness check. Ω transforms as
//! Ω_{TK} = |det T|^{2n} Ω_K, equals 1 on the unit ball (hence
//! |det T|^{2n} on ellipsoids), and vanishes on polytopes.

use crate::affine::{as_infinity_mixed, as_p, as_p_mixed, asp_accuracy, Pexp};
use crate::asymptotics::{default_p_grid, fit_limit, FitModel, LimitFit};
use crate::body::{Body, Smoothness, UnitDirection};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_sphere_adaptive, Accuracy};
use crate::special::digamma;
use serde::Serialize;

/// log(f h^{n+1}) with the conventions used by every entropy integrand here:
/// zero curvature determinant pushes the integrand to -∞, flat directions to
/// +∞; both are isolated and integrable.
pub(crate) fn log_f_h(body: &Body, u: &UnitDirection, n1: f64) -> Option<f64> {
    let f = match body.curvature_det(u) {
        Ok(v) => v,
        Err(_) => return None,
    };
    let h = body.support(u);
    if f <= 0.0 {
        return Some(f64::NEG_INFINITY);
    }
    if f.is_infinite() {
        return Some(f64::INFINITY);
    }
    Some(f.ln() + n1 * h.ln())
}

/// Ω_K through the primal entropy integral. Polytopes give 0 (their
/// curvature function vanishes almost everywhere, driving log Ω to -∞).
pub fn omega_entropy(body: &Body, acc: Accuracy) -> Result<f64> {
    if body.smoothness() == Smoothness::Polytope {
        return Ok(0.0);
    }
    let n = body.dim();
    let nf = n as f64;
    let polar_vol = body.polar_volume()?;
    let planes = body.singular_planes();
    let integral = integrate_sphere_adaptive(
        n,
        |u| {
            let lg = match log_f_h(body, u, nf + 1.0) {
                Some(v) => v,
                None => return f64::NAN,
            };
            let h = body.support(u);
            if lg.is_infinite() {
                // h^{-n}·(±∞): sign decides which infinity the quadrature's
                // singular-point handling sees
                return lg;
            }
            (-nf * h.ln()).exp() * lg
        },
        &planes,
        acc,
    )?;
    Ok((integral.value / polar_vol).exp())
}

/// Ω_K through the entropy integral over polar-body data:
/// log Ω_K = -(1/|K°|) ∫ h° f° log(f° h°^{n+1}) dσ.
pub fn omega_entropy_dual(body: &Body, acc: Accuracy) -> Result<f64> {
    if body.smoothness() == Smoothness::Polytope {
        return Ok(0.0);
    }
    let n = body.dim();
    let nf = n as f64;
    let polar = body.polar()?;
    let polar_vol = polar.volume();
    let planes = polar.singular_planes();
    let integral = integrate_sphere_adaptive(
        n,
        |u| {
            let f = match polar.curvature_det(u) {
                Ok(v) => v,
                Err(_) => return f64::NAN,
            };
            let h = polar.support(u);
            if f <= 0.0 {
                // f log f → 0 from below
                return 0.0;
            }
            if f.is_infinite() {
                return f64::INFINITY;
            }
            let lg = f.ln() + (nf + 1.0) * h.ln();
            h * f * lg
        },
        &planes,
        acc,
    )?;
    Ok((-integral.value / polar_vol).exp())
}

/// One extrapolated route to Ω: the value together with the fit evidence
/// (absent when a closed form for the route's limit made fitting
/// unnecessary, as for polytopes).
#[derive(Clone, Debug, Serialize)]
pub struct OmegaLimit {
    pub omega: f64,
    pub fit: Option<LimitFit>,
}

/// Ω_K by extrapolating g(p) = (n+p) log(as_p / (n|K°|)) over a geometric
/// exponent grid. Polytopes short-circuit to 0.
pub fn omega_p_limit(body: &Body, acc: Accuracy) -> Result<OmegaLimit> {
    if body.smoothness() == Smoothness::Polytope {
        return Ok(OmegaLimit { omega: 0.0, fit: None });
    }
    let nf = body.dim() as f64;
    let denom = (nf * body.polar_volume()?).ln();
    let grid = default_p_grid();
    let mut samples = Vec::with_capacity(grid.len());
    for &p in &grid {
        let v = as_p(body, Pexp::Finite(p), acc)?;
        samples.push((nf + p) * (v.value.ln() - denom));
    }
    let fit = fit_limit(&grid, &samples, FitModel::PLimit)?;
    Ok(OmegaLimit { omega: fit.limit.exp(), fit: Some(fit) })
}

/// Ω_K by the small-exponent limit through the polar body: extrapolates
/// g(q) = (n(n+q)/q) log(as_q(K°) / (n|K°|)) over q = n²/p, p on the
/// geometric grid, with a quadratic small-q model.
pub fn omega_dual_p_limit(body: &Body, acc: Accuracy) -> Result<OmegaLimit> {
    if body.smoothness() == Smoothness::Polytope {
        return Ok(OmegaLimit { omega: 0.0, fit: None });
    }
    let n = body.dim();
    let nf = n as f64;
    let polar = body.polar()?;
    let denom = (nf * polar.volume()).ln();
    let mut grid: Vec<f64> = default_p_grid().iter().map(|p| (n * n) as f64 / p).collect();
    grid.sort_by(f64::total_cmp);
    let mut samples = Vec::with_capacity(grid.len());
    for &q in &grid {
        let v = as_p(&polar, Pexp::Finite(q), acc)?;
        samples.push((nf * (nf + q) / q) * (v.value.ln() - denom));
    }
    let fit = fit_limit(&grid, &samples, FitModel::SmallQ)?;
    Ok(OmegaLimit { omega: fit.limit.exp(), fit: Some(fit) })
}

/// Closed form for l_r balls, r > 1:
///
/// ```text
/// Ω_{B_r^n} = exp(-(n²(r-2)/r) [ψ((r-1)/r) - ψ(n(r-1)/r)]) / (r-1)^{n(n-1)}
/// ```
pub fn omega_lp_closed_form(n: usize, r: f64) -> Result<f64> {
    if r <= 1.0 || !r.is_finite() {
        return Err(Error::OutOfRange(format!("closed form needs 1 < r < ∞, got {r}")));
    }
    let nf = n as f64;
    let s = (r - 1.0) / r;
    let expo = -(nf * nf * (r - 2.0) / r) * (digamma(s) - digamma(nf * s))
        - nf * (nf - 1.0) * (r - 1.0).ln();
    Ok(expo.exp())
}

/// Mixed entropy route for an n-tuple of bodies in R^n:
/// exp((1/W) ∫ [Σ_i log(f_i h_i^{n+1})] ∏_j h_j^{-1} dσ), W the mixed
/// infinite-exponent surface area of the tuple. Collapses to
/// [`omega_entropy`] when the tuple repeats one body.
pub fn omega_mixed_entropy(bodies: &[&Body], acc: Accuracy) -> Result<f64> {
    let n = bodies[0].dim();
    if bodies.len() != n {
        return Err(Error::OutOfRange(format!(
            "mixed Ω needs exactly n = {n} bodies, got {}",
            bodies.len()
        )));
    }
    for b in bodies {
        if b.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.dim() });
        }
        if b.smoothness() == Smoothness::Polytope {
            return Ok(0.0);
        }
    }
    let nf = n as f64;
    let normalizer = as_infinity_mixed(bodies, acc)?.value;
    let mut planes = Vec::new();
    for b in bodies {
        planes.extend(b.singular_planes());
    }
    let integral = integrate_sphere_adaptive(
        n,
        |u| {
            let mut log_sum = 0.0;
            let mut weight_log = 0.0;
            for b in bodies {
                let lg = match log_f_h(b, u, nf + 1.0) {
                    Some(v) => v,
                    None => return f64::NAN,
                };
                if lg.is_infinite() {
                    return lg;
                }
                log_sum += lg;
                weight_log -= b.support(u).ln();
            }
            log_sum * weight_log.exp()
        },
        &planes,
        acc,
    )?;
    Ok((integral.value / normalizer).exp())
}

/// Mixed Ω by the exponent limit g(p) = (n+p) log(as_p(tuple)/W).
pub fn omega_mixed_p_limit(bodies: &[&Body], acc: Accuracy) -> Result<OmegaLimit> {
    let n = bodies[0].dim();
    if bodies.len() != n {
        return Err(Error::OutOfRange(format!(
            "mixed Ω needs exactly n = {n} bodies, got {}",
            bodies.len()
        )));
    }
    for b in bodies {
        if b.smoothness() == Smoothness::Polytope {
            return Ok(OmegaLimit { omega: 0.0, fit: None });
        }
    }
    let nf = n as f64;
    let denom = as_infinity_mixed(bodies, acc)?.value.ln();
    let grid = default_p_grid();
    let mut samples = Vec::with_capacity(grid.len());
    for &p in &grid {
        let v = as_p_mixed(bodies, p, acc)?;
        samples.push((nf + p) * (v.value.ln() - denom));
    }
    let fit = fit_limit(&grid, &samples, FitModel::PLimit)?;
    Ok(OmegaLimit { omega: fit.limit.exp(), fit: Some(fit) })
}

/// Every route evaluated on one body, with the spread between them.
#[derive(Clone, Debug, Serialize)]
pub struct OmegaReport {
    pub dim: usize,
    pub via_entropy: f64,
    pub via_dual_entropy: f64,
    pub via_p_limit: OmegaLimit,
    pub via_dual_p_limit: OmegaLimit,
    /// Filled by callers that know a closed form for this body.
    pub closed_form: Option<f64>,
    /// Filled by callers that also ran the centroid-body asymptotics.
    pub via_centroid_asymptotics: Option<f64>,
    pub cross_route_max_rel_discrepancy: f64,
}

impl OmegaReport {
    /// Largest pairwise relative gap among the routes present.
    pub fn recompute_spread(&mut self) {
        let mut vals = vec![
            self.via_entropy,
            self.via_dual_entropy,
            self.via_p_limit.omega,
            self.via_dual_p_limit.omega,
        ];
        if let Some(c) = self.closed_form {
            vals.push(c);
        }
        if let Some(c) = self.via_centroid_asymptotics {
            vals.push(c);
        }
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let scale = hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE);
        self.cross_route_max_rel_discrepancy = (hi - lo) / scale;
    }
}

/// Run all four library routes on one body. `closed_form` is attached when
/// the caller knows one (l_r balls, linear images of them).
pub fn omega_report(body: &Body, closed_form: Option<f64>) -> Result<OmegaReport> {
    let acc = asp_accuracy(body.dim());
    let mut report = OmegaReport {
        dim: body.dim(),
        via_entropy: omega_entropy(body, acc)?,
        via_dual_entropy: omega_entropy_dual(body, acc)?,
        via_p_limit: omega_p_limit(body, acc)?,
        via_dual_p_limit: omega_dual_p_limit(body, acc)?,
        closed_form,
        via_centroid_asymptotics: None,
        cross_route_max_rel_discrepancy: 0.0,
    };
    report.recompute_spread();
    Ok(report)
}


#[cfg(test)]
mod dual_probe {
    use super::*;
    use crate::body::Body;

    #[test]
    #[ignore]
    fn probe_dual_entropy_convergence() {
        let body = Body::lp_ball(2, 1.5).unwrap();
        let want = omega_lp_closed_form(2, 1.5).unwrap();
        for (ta, tr) in [(1e-8, 1e-7), (1e-10, 1e-9), (1e-12, 1e-11), (1e-13, 1e-12)] {
            let got = omega_entropy_dual(&body, Accuracy::abs_rel(ta, tr)).unwrap();
            println!("tol ({ta:.0e},{tr:.0e}): rel err {:.3e}", ((got - want) / want).abs());
        }
        // primal on the polar body for comparison: same singular structure
        let polar = body.polar().unwrap();
        let want_p = omega_lp_closed_form(2, 3.0).unwrap();
        let got_p = omega_entropy(&polar, Accuracy::abs_rel(1e-12, 1e-11)).unwrap();
        println!("primal on polar rel err {:.3e}", ((got_p - want_p) / want_p).abs());
    }
}
