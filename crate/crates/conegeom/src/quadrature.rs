//! Deterministic quadrature on intervals and spheres.
//!
//! The workhorse is an adaptive 15-point Gauss–Kronrod scheme with
//! caller-supplied split points. Splits let a caller place panel boundaries
//! on the known singular hyperplanes of a body (a curvature integrand on an
//! `l_r` ball blows up or vanishes on the coordinate axes), so that panels
//! shrink toward the singularity geometrically and the node never lands on
//! it: Kronrod abscissae are interior to their panel.
//!
//! Refinement is worst-first with a total order on panels (error estimate,
//! then interval start), so results are bitwise reproducible run to run.
//! Panels narrower than [`tol::MIN_PANEL`] are frozen instead of split
//! further; for the integrable endpoint singularities in this crate the
//! unresolved tail mass is below every tolerance used.
//!
//! Sphere integration over S^{n-1} uses the unnormalized surface measure
//! throughout:
//!
//! * n = 2: the circle as one periodic interval `[0, 2π]`.
//! * n = 3: nested adaptive passes, outer in the polar angle with the
//!   `sin θ` factor, inner in the azimuth with splits where the azimuth
//!   circle crosses a singular plane.
//! * n = 4: product Gauss–Legendre × midpoint rules at increasing levels,
//!   with the level-to-level difference as the error estimate.
//! * n ≥ 5: randomized quasi-Monte Carlo (shifted Halton points mapped
//!   through the normal quantile and projected radially), doubling the
//!   sample count until the doubling difference is inside tolerance.
//!
//! Fixed (non-adaptive) rules are available as [`SphereRule`] for callers
//! that want one node set evaluated against several integrands.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::body::{tangent_basis, Body, Coords, UnitDirection};
use crate::error::{Error, Result};
use crate::linalg::{compensated_sum, MAX_DIM};
use crate::rng;
use crate::special::{inv_normal_cdf, ln_gamma};
use crate::tol;
use rand::Rng;

/// A computed integral with an a-posteriori error estimate.
#[derive(Clone, Copy, Debug)]
pub struct IntegralResult {
    pub value: f64,
    pub error_estimate: f64,
    pub nodes_used: usize,
}

impl IntegralResult {
    /// Enforce a tolerance after the fact; the adaptive drivers themselves
    /// never fail on budget, they report what they achieved.
    pub fn require(self, tol_abs: f64, tol_rel: f64) -> Result<IntegralResult> {
        let allowed = tol_abs.max(tol_rel * self.value.abs());
        if self.error_estimate > allowed {
            return Err(Error::QuadratureBudgetExceeded {
                achieved: self.error_estimate,
                requested: allowed,
            });
        }
        Ok(self)
    }
}

/// Absolute and relative tolerance targets for adaptive drivers.
#[derive(Clone, Copy, Debug)]
pub struct Accuracy {
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_panels: usize,
}

impl Default for Accuracy {
    fn default() -> Accuracy {
        Accuracy { tol_abs: 1e-13, tol_rel: 1e-11, max_panels: tol::MAX_PANELS }
    }
}

impl Accuracy {
    pub fn abs_rel(tol_abs: f64, tol_rel: f64) -> Accuracy {
        Accuracy { tol_abs, tol_rel, ..Accuracy::default() }
    }

    /// Tighten both targets by a factor.
    pub fn tightened(self, factor: f64) -> Accuracy {
        Accuracy {
            tol_abs: self.tol_abs * factor,
            tol_rel: self.tol_rel * factor,
            max_panels: self.max_panels,
        }
    }
}

// 15-point Kronrod extension of 7-point Gauss-Legendre; abscissae in
// descending order, XGK[1], XGK[3], XGK[5], XGK[7] are the Gauss points.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_2,
    0.949_107_912_342_758_524_5,
    0.864_864_423_359_769_072_8,
    0.741_531_185_599_394_439_9,
    0.586_087_235_467_691_130_3,
    0.405_845_151_377_397_166_9,
    0.207_784_955_007_898_467_6,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_96,
    0.063_092_092_629_978_553_29,
    0.104_790_010_322_250_183_8,
    0.140_653_259_715_525_918_7,
    0.169_004_726_639_267_902_8,
    0.190_350_578_064_785_409_9,
    0.204_432_940_075_298_892_4,
    0.209_482_141_084_727_828_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_3,
    0.279_705_391_489_276_667_9,
    0.381_830_050_505_118_944_95,
    0.417_959_183_673_469_387_8,
];

/// One Gauss–Kronrod pass over [a, b]: (value, error estimate).
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)> {
    let xm = 0.5 * (a + b);
    let xr = 0.5 * (b - a);
    let mut fv = [0.0f64; 15];
    for (i, &x) in XGK.iter().enumerate() {
        let lo = xm - xr * x;
        let v = f(lo);
        if !v.is_finite() {
            return Err(Error::NonFiniteIntegrand(vec![lo]));
        }
        fv[i] = v;
        if i < 7 {
            let hi = xm + xr * x;
            let v = f(hi);
            if !v.is_finite() {
                return Err(Error::NonFiniteIntegrand(vec![hi]));
            }
            fv[14 - i] = v;
        }
    }
    let mut resk = WGK[7] * fv[7];
    let mut resg = WG[3] * fv[7];
    let mut resabs = WGK[7] * fv[7].abs();
    for i in 0..7 {
        let pair = fv[i] + fv[14 - i];
        resk += WGK[i] * pair;
        resabs += WGK[i] * (fv[i].abs() + fv[14 - i].abs());
        if i % 2 == 1 {
            resg += WG[i / 2] * pair;
        }
    }
    let reskh = resk * 0.5;
    let mut resasc = WGK[7] * (fv[7] - reskh).abs();
    for i in 0..7 {
        resasc += WGK[i] * ((fv[i] - reskh).abs() + (fv[14 - i] - reskh).abs());
    }
    let value = resk * xr;
    resasc *= xr.abs();
    let _ = resabs;
    let mut err = ((resk - resg) * xr).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    Ok((value, err))
}

#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

// max-heap key: largest error first, ties broken toward the leftmost panel
// so refinement order is a total order independent of insertion history
struct PanelKey(Panel);

impl PartialEq for PanelKey {
    fn eq(&self, other: &PanelKey) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for PanelKey {}
impl PartialOrd for PanelKey {
    fn partial_cmp(&self, other: &PanelKey) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for PanelKey {
    fn cmp(&self, other: &PanelKey) -> Ordering {
        self.0
            .err
            .total_cmp(&other.0.err)
            .then_with(|| other.0.a.total_cmp(&self.0.a))
    }
}

/// Adaptive Gauss–Kronrod integration of `f` over [a, b] with initial panel
/// boundaries at the interior `splits`.
pub fn adaptive_1d<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    splits: &[f64],
    acc: Accuracy,
) -> Result<IntegralResult> {
    if a == b {
        return Ok(IntegralResult { value: 0.0, error_estimate: 0.0, nodes_used: 0 });
    }
    assert!(a < b, "integration range [{a}, {b}] must be ordered");
    let mut pts: Vec<f64> = vec![a];
    let mut interior: Vec<f64> = splits
        .iter()
        .copied()
        .filter(|s| *s > a && *s < b)
        .collect();
    interior.sort_by(f64::total_cmp);
    interior.dedup();
    pts.extend(interior);
    pts.push(b);

    let mut heap: BinaryHeap<PanelKey> = BinaryHeap::new();
    let mut frozen: Vec<Panel> = Vec::new();
    let mut nodes = 0usize;
    let mut total_val = 0.0f64;
    let mut total_err = 0.0f64;
    for w in pts.windows(2) {
        let (value, err) = gk15(&mut f, w[0], w[1])?;
        nodes += 15;
        total_val += value;
        total_err += err;
        heap.push(PanelKey(Panel { a: w[0], b: w[1], value, err }));
    }

    let span = b - a;
    while total_err > acc.tol_abs.max(acc.tol_rel * total_val.abs())
        && heap.len() + frozen.len() < acc.max_panels
    {
        let Some(PanelKey(worst)) = heap.pop() else { break };
        if worst.b - worst.a <= tol::MIN_PANEL * span {
            // unsplittable; park it and keep refining the rest
            frozen.push(worst);
            if heap.is_empty() {
                break;
            }
            continue;
        }
        total_val -= worst.value;
        total_err -= worst.err;
        let mid = 0.5 * (worst.a + worst.b);
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let (value, err) = gk15(&mut f, lo, hi)?;
            nodes += 15;
            total_val += value;
            total_err += err;
            heap.push(PanelKey(Panel { a: lo, b: hi, value, err }));
        }
    }

    let mut panels: Vec<Panel> = frozen;
    panels.extend(heap.into_iter().map(|k| k.0));
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = compensated_sum(panels.iter().map(|p| p.value));
    let error_estimate = panels.iter().map(|p| p.err).sum();
    Ok(IntegralResult { value, error_estimate, nodes_used: nodes })
}

/// Ninth-order smoothstep and its derivative: φ' = 630 τ⁴(1-τ)⁴ vanishes
/// quartically at both ends, so a power singularity x^{-α} at a run
/// endpoint transforms to τ^{4-5α}, integrable-and-bounded for every
/// α < 4/5; curvature integrands on this catalog stay below 0.65.
fn smooth9(tau: f64) -> (f64, f64) {
    let t2 = tau * tau;
    let phi = t2 * t2 * tau * (126.0 + tau * (-420.0 + tau * (540.0 + tau * (-315.0 + 70.0 * tau))));
    let omt = 1.0 - tau;
    let om2 = omt * omt;
    let dphi = 630.0 * t2 * t2 * om2 * om2;
    (phi, dphi)
}

/// Core of the graded integrator. Each node is reported to the integrand as
/// a run endpoint plus a signed offset with x = anchor + offset; the anchor
/// is bitwise one of a, b, or an interior split. Integrands singular at a
/// split can thus resolve their distance to it exactly; forming the sum
/// first would round offsets below one ulp of the anchor onto the
/// singularity and lose the (integrable) spike between the endpoint and the
/// first representable point.
pub fn adaptive_1d_graded_anchored<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    splits: &[f64],
    acc: Accuracy,
) -> Result<IntegralResult> {
    if a == b {
        return Ok(IntegralResult { value: 0.0, error_estimate: 0.0, nodes_used: 0 });
    }
    assert!(a < b, "integration range [{a}, {b}] must be ordered");
    let mut pts: Vec<f64> = vec![a];
    let mut interior: Vec<f64> = splits.iter().copied().filter(|s| *s > a && *s < b).collect();
    interior.sort_by(f64::total_cmp);
    interior.dedup();
    pts.extend(interior);
    pts.push(b);
    let runs = pts.len() - 1;
    let run_acc = Accuracy {
        tol_abs: acc.tol_abs / runs as f64,
        tol_rel: acc.tol_rel,
        max_panels: acc.max_panels,
    };
    let mut values = Vec::with_capacity(runs);
    let mut error_estimate = 0.0;
    let mut nodes_used = 0;
    for w in pts.windows(2) {
        let (s0, s1) = (w[0], w[1]);
        let len = s1 - s0;
        let r = adaptive_1d(
            |tau| {
                // anchor on the nearer endpoint; φ(1-τ) = 1-φ(τ), so both
                // halves map to the same point while the offset stays exact
                let (anchor, signed_phi, dphi) = if tau <= 0.5 {
                    let (phi, dphi) = smooth9(tau);
                    (s0, phi, dphi)
                } else {
                    let (phi, dphi) = smooth9(1.0 - tau);
                    (s1, -phi, dphi)
                };
                let v = f(anchor, len * signed_phi);
                if !v.is_finite() {
                    // inside the crush zone the node sits on the declared
                    // singularity to roundoff; the transformed integrand
                    // tends to 0 there for every integrable power, so the
                    // lost mass is below roundoff
                    if dphi < 1e-8 {
                        return 0.0;
                    }
                    return f64::NAN;
                }
                v * len * dphi
            },
            0.0,
            1.0,
            &[],
            run_acc,
        )?;
        values.push(r.value);
        error_estimate += r.error_estimate;
        nodes_used += r.nodes_used;
    }
    Ok(IntegralResult { value: compensated_sum(values), error_estimate, nodes_used })
}

/// Adaptive integration with an endpoint-grading change of variables on
/// each run between consecutive split points. Singularities declared as
/// splits (or sitting at a or b) are resolved to roundoff instead of being
/// frozen at the minimum panel width.
pub fn adaptive_1d_graded<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    splits: &[f64],
    acc: Accuracy,
) -> Result<IntegralResult> {
    adaptive_1d_graded_anchored(|anchor, offset| f(anchor + offset), a, b, splits, acc)
}

/// ∫_0^{2π} f(β) dβ with endpoint-graded panel runs between the given
/// angles; singular integrands must declare their angles as splits.
pub fn integrate_circle<F: FnMut(f64) -> f64>(
    f: F,
    splits: &[f64],
    acc: Accuracy,
) -> Result<IntegralResult> {
    adaptive_1d_graded(f, 0.0, 2.0 * std::f64::consts::PI, splits, acc)
}

/// A circle direction that is exactly representable in f64 together with
/// its nominal angle. Graded runs abut these angles, and nearby nodes are
/// built by rotating `dir` through the exact angular offset, so a singular
/// direction sits exactly at a run endpoint. Anchoring at the rounded angle
/// instead would miss the singularity by ~1 ulp and leave an unresolvable
/// spike carrying ~ulp^{1-α} of mass for an |angle|^{-α} integrand factor.
#[derive(Clone, Copy, Debug)]
pub(crate) struct CircleAnchor {
    angle: f64,
    dir: [f64; 2],
}

fn sorted_anchors(mut raw: Vec<CircleAnchor>) -> Vec<CircleAnchor> {
    raw.sort_by(|p, q| p.angle.total_cmp(&q.angle));
    raw.dedup_by(|p, q| (p.angle - q.angle).abs() < 1e-12);
    raw
}

/// Anchors for a planar integrand: the two unit directions ±(-w₁, w₀) along
/// each singular plane {⟨u, w⟩ = 0}. The inner product of the anchor with w
/// cancels exactly in f64, so the singularity is hit head-on.
fn circle_anchors(planes: &[Coords]) -> Vec<CircleAnchor> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut raw = Vec::new();
    for w in planes {
        for s in [1.0f64, -1.0] {
            let dir = [-s * w[1], s * w[0]];
            raw.push(CircleAnchor {
                angle: dir[1].atan2(dir[0]).rem_euclid(two_pi),
                dir,
            });
        }
    }
    sorted_anchors(raw)
}

fn rotate_dir(dir: [f64; 2], delta: f64) -> [f64; 2] {
    let (s, c) = delta.sin_cos();
    [dir[0] * c - dir[1] * s, dir[1] * c + dir[0] * s]
}

/// ∫_0^{2π} g(u(β)) dβ where u(β) is produced by rotating the anchor at the
/// run endpoint through the exact graded offset. Anchor angles serve as the
/// splits; runs not bounded by an anchor fall back to (cos β, sin β). The
/// 2π endpoint aliases the angle-0 anchor when one exists.
pub(crate) fn integrate_circle_anchored<G: FnMut(&[f64; 2]) -> f64>(
    mut g: G,
    anchors: &[CircleAnchor],
    acc: Accuracy,
) -> Result<IntegralResult> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let splits: Vec<f64> = anchors.iter().map(|a| a.angle).collect();
    adaptive_1d_graded_anchored(
        |anchor, offset| {
            let key = if anchor == two_pi { 0.0 } else { anchor };
            let dir = match anchors.iter().find(|a| a.angle == key) {
                Some(a) => rotate_dir(a.dir, offset),
                None => {
                    let beta = anchor + offset;
                    [beta.cos(), beta.sin()]
                }
            };
            g(&dir)
        },
        0.0,
        two_pi,
        &splits,
        acc,
    )
}

/// Crossings of the latitude circle {(R cos φ, R sin φ, z)} with each
/// singular plane, as exactly representable in-plane unit vectors. On the
/// unit circle the crossing c satisfies ⟨c, Ŵ⟩ = t where Ŵ is the plane
/// normal's horizontal direction and t = -z·w₂/(R·|w_horiz|).
fn latitude_anchors(z: f64, big_r: f64, planes: &[Coords]) -> Vec<CircleAnchor> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut raw = Vec::new();
    for w in planes {
        let horiz = w[0].hypot(w[1]);
        if horiz < 1e-14 || big_r <= 0.0 {
            continue;
        }
        let t = -z * w[2] / (big_r * horiz);
        if t.abs() > 1.0 {
            continue;
        }
        let s = ((1.0 - t) * (1.0 + t)).sqrt();
        let wx = w[0] / horiz;
        let wy = w[1] / horiz;
        for sign in [1.0f64, -1.0] {
            let dir = [t * wx - sign * s * wy, t * wy + sign * s * wx];
            raw.push(CircleAnchor {
                angle: dir[1].atan2(dir[0]).rem_euclid(two_pi),
                dir,
            });
        }
    }
    sorted_anchors(raw)
}

/// Heights at which a singular plane is tangent to a latitude circle (the
/// crossing pair collides there); the equator is always split. A plane with
/// unit normal w touches the circle at height z where |z·w₂| = R·|w_horiz|,
/// i.e. z = ±|w_horiz|.
fn z_breakpoints(planes: &[Coords]) -> Vec<f64> {
    let mut out = vec![0.0];
    for w in planes {
        let horiz = w[0].hypot(w[1]);
        if horiz > 1e-14 && w[2].abs() > 1e-14 {
            out.push(horiz);
            out.push(-horiz);
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    out
}

/// ∫_{S^2} f dσ by nested adaptive passes: outer over the height z = u₃
/// (Archimedes' projection makes the surface Jacobian exactly 1), inner over
/// the latitude azimuth. The z parametrization keeps distances to singular
/// heights exact, and the inner pass anchors its runs on exact crossing
/// directions, so graded runs resolve singular planes all the way down.
pub fn integrate_sphere3<F: FnMut(&UnitDirection) -> f64>(
    mut f: F,
    planes: &[Coords],
    acc: Accuracy,
) -> Result<IntegralResult> {
    let inner_acc = acc.tightened(1.0 / 16.0);
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    // worst amount by which an inner pass missed its accuracy contract
    let max_shortfall = RefCell::new(0.0f64);
    let inner_nodes = RefCell::new(0usize);

    let outer = adaptive_1d_graded_anchored(
        |z_anchor, z_offset| {
            if failure.borrow().is_some() {
                return 0.0;
            }
            let z = z_anchor + z_offset;
            // Distances to the poles, kept exact when the run is anchored
            // there: fl(1 - offset) collapses to 1 once the offset drops
            // below one ulp, and a curvature blow-up at a pole (two singular
            // planes crossing) would alias into unresolvable stair-steps.
            let (above, below) = if z_anchor == 1.0 {
                (-z_offset, 2.0 + z_offset)
            } else if z_anchor == -1.0 {
                (2.0 - z_offset, z_offset)
            } else {
                (1.0 - z, 1.0 + z)
            };
            let r2 = above * below;
            if r2 <= 0.0 {
                // pole circle of radius 0
                let pole = UnitDirection::new(&[0.0, 0.0, z.signum()]);
                return 2.0 * std::f64::consts::PI * f(&pole);
            }
            let big_r = r2.sqrt();
            let anchors = latitude_anchors(z, big_r, planes);
            let inner = integrate_circle_anchored(
                |c| f(&UnitDirection::new(&[big_r * c[0], big_r * c[1], z])),
                &anchors,
                inner_acc,
            );
            match inner {
                Ok(r) => {
                    let contract =
                        inner_acc.tol_abs.max(inner_acc.tol_rel * r.value.abs());
                    let mut e = max_shortfall.borrow_mut();
                    *e = e.max((r.error_estimate - contract).max(0.0));
                    *inner_nodes.borrow_mut() += r.nodes_used;
                    r.value
                }
                Err(err) => {
                    *failure.borrow_mut() = Some(err);
                    0.0
                }
            }
        },
        -1.0,
        1.0,
        &z_breakpoints(planes),
        acc,
    )?;
    if let Some(err) = failure.into_inner() {
        return Err(err);
    }
    // Inner errors obey err(z) ≤ max(tol_abs, tol_rel·|I(z)|) wherever the
    // inner pass met its contract, so their total contribution is bounded by
    // ∫ err dz ≤ 2·tol_abs + tol_rel·∫|I| dz; the last integral is |outer|
    // for one-signed integrands (doubled as a safety margin for mildly
    // signed ones). Contract misses are added via their worst case over the
    // length-2 range.
    let inner_part = 2.0 * inner_acc.tol_abs
        + 2.0 * inner_acc.tol_rel * outer.value.abs()
        + 2.0 * max_shortfall.into_inner();
    Ok(IntegralResult {
        value: outer.value,
        error_estimate: outer.error_estimate + inner_part,
        nodes_used: outer.nodes_used + inner_nodes.into_inner(),
    })
}

/// Surface area of S^{n-1}: n · |B_2^n| = 2 π^{n/2} / Γ(n/2).
pub fn sphere_surface(n: usize) -> f64 {
    let nf = n as f64;
    (2f64.ln() + (nf / 2.0) * std::f64::consts::PI.ln() - ln_gamma(nf / 2.0)).exp()
}

/// How a fixed sphere rule was constructed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleKind {
    /// Tensor product of Gauss–Legendre and periodic midpoint factors.
    ProductGauss,
    /// Equal-weight randomized quasi-Monte Carlo nodes.
    QuasiMonteCarlo,
}

/// A fixed node/weight set on S^{n-1} for the unnormalized surface measure.
#[derive(Clone, Debug)]
pub struct SphereRule {
    n: usize,
    kind: RuleKind,
    nodes: Vec<Coords>,
    weights: Vec<f64>,
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        // Chebyshev-like initial guess, then Newton on P_m
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_pair(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_pair(m, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// (P_m(x), P_m'(x)) by the three-term recurrence.
fn legendre_pair(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0f64;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

impl SphereRule {
    /// Product rule for n ∈ {2, 3, 4}; `level` is the node count of the
    /// smallest 1-D factor.
    pub fn product(n: usize, level: usize) -> SphereRule {
        assert!((2..=4).contains(&n), "product rules cover n ≤ 4, got {n}");
        assert!(level >= 2);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let two_pi = 2.0 * std::f64::consts::PI;
        match n {
            2 => {
                let m = 2 * level;
                for j in 0..m {
                    let beta = two_pi * (j as f64 + 0.5) / m as f64;
                    let mut c = [0.0; MAX_DIM];
                    c[0] = beta.cos();
                    c[1] = beta.sin();
                    nodes.push(c);
                    weights.push(two_pi / m as f64);
                }
            }
            3 => {
                // dσ = dt dφ with t = cos θ
                let (ts, ws) = gauss_legendre(level);
                let m = 2 * level;
                for (t, wt) in ts.iter().zip(&ws) {
                    let s = (1.0 - t * t).sqrt();
                    for j in 0..m {
                        let phi = two_pi * (j as f64 + 0.5) / m as f64;
                        let mut c = [0.0; MAX_DIM];
                        c[0] = s * phi.cos();
                        c[1] = s * phi.sin();
                        c[2] = *t;
                        nodes.push(c);
                        weights.push(wt * two_pi / m as f64);
                    }
                }
            }
            4 => {
                // dσ = sin²θ₁ dθ₁ dt₂ dφ with t₂ = cos θ₂
                let (xs, wxs) = gauss_legendre(level);
                let (ts, wts) = gauss_legendre(level);
                let m = 2 * level;
                for (x, wx) in xs.iter().zip(&wxs) {
                    let theta1 = std::f64::consts::FRAC_PI_2 * (x + 1.0);
                    let (s1, c1) = theta1.sin_cos();
                    let w1 = wx * std::f64::consts::FRAC_PI_2 * s1 * s1;
                    for (t, wt) in ts.iter().zip(&wts) {
                        let s2 = (1.0 - t * t).sqrt();
                        for j in 0..m {
                            let phi = two_pi * (j as f64 + 0.5) / m as f64;
                            let mut c = [0.0; MAX_DIM];
                            c[0] = c1;
                            c[1] = s1 * t;
                            c[2] = s1 * s2 * phi.cos();
                            c[3] = s1 * s2 * phi.sin();
                            nodes.push(c);
                            weights.push(w1 * wt * two_pi / m as f64);
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
        SphereRule { n, kind: RuleKind::ProductGauss, nodes, weights }
    }

    /// Equal-weight rule from `count` shifted-Halton points pushed through
    /// the normal quantile and projected to the sphere. The first half of a
    /// rule with the same seed is a prefix, which gives a cheap two-level
    /// error estimate.
    pub fn qmc(n: usize, count: usize, seed: u64) -> SphereRule {
        assert!((2..=MAX_DIM).contains(&n));
        assert!(count > 0);
        const PRIMES: [u64; MAX_DIM] = [2, 3, 5, 7, 11, 13, 17, 19];
        let mut rng = rng::stream(seed, "sphere-qmc-shift", n as u64);
        let shift: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let mut nodes = Vec::with_capacity(count);
        let w = sphere_surface(n) / count as f64;
        let mut idx = 0u64;
        while nodes.len() < count {
            idx += 1;
            let mut c = [0.0; MAX_DIM];
            let mut norm_sq = 0.0;
            for i in 0..n {
                let u = (radical_inverse(idx, PRIMES[i]) + shift[i]).fract();
                let u = u.clamp(1e-15, 1.0 - 1e-15);
                let g = inv_normal_cdf(u);
                c[i] = g;
                norm_sq += g * g;
            }
            if norm_sq < 1e-20 {
                continue;
            }
            let norm = norm_sq.sqrt();
            for ci in c.iter_mut().take(n) {
                *ci /= norm;
            }
            nodes.push(c);
        }
        let weights = vec![w; count];
        SphereRule { n, kind: RuleKind::QuasiMonteCarlo, nodes, weights }
    }

    /// Default construction: product Gauss for n ≤ 4, QMC above.
    pub fn for_dimension(n: usize, seed: u64) -> SphereRule {
        if n <= 4 {
            SphereRule::product(n, 24)
        } else {
            SphereRule::qmc(n, 1 << 15, seed)
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Coords, f64)> + '_ {
        self.nodes.iter().zip(self.weights.iter().copied())
    }

    /// Total weight; equals the sphere surface for any consistent rule.
    pub fn weight_sum(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }
}

/// Evaluate an integrand against a fixed rule (compensated sum).
pub fn integrate_sphere<F: FnMut(&UnitDirection) -> f64>(rule: &SphereRule, mut f: F) -> f64 {
    let vals: Vec<f64> = rule
        .iter()
        .map(|(c, w)| w * f(&UnitDirection::new(&c[..rule.dim()])))
        .collect();
    compensated_sum(vals)
}

/// Van der Corput radical inverse in the given base.
fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 0.0f64;
    let mut scale = 1.0f64;
    let b = base as f64;
    while i > 0 {
        scale /= b;
        inv += scale * (i % base) as f64;
        i /= base;
    }
    inv
}

/// ∫_{S^{n-1}} f dσ at the requested accuracy, dispatching on dimension.
/// `planes` are the singular hyperplane normals used as panel splits for
/// the adaptive paths (n ≤ 3); higher dimensions use level doubling.
pub fn integrate_sphere_adaptive<F: FnMut(&UnitDirection) -> f64>(
    n: usize,
    mut f: F,
    planes: &[Coords],
    acc: Accuracy,
) -> Result<IntegralResult> {
    match n {
        2 => {
            let anchors = circle_anchors(planes);
            integrate_circle_anchored(|d| f(&UnitDirection::new(d)), &anchors, acc)
        }
        3 => integrate_sphere3(f, planes, acc),
        4 => {
            let mut prev: Option<f64> = None;
            let mut nodes = 0usize;
            for level in [16usize, 24, 34, 48] {
                let rule = SphereRule::product(4, level);
                nodes += rule.len();
                let value = integrate_sphere(&rule, &mut f);
                if let Some(p) = prev {
                    let err = (value - p).abs();
                    if err <= acc.tol_abs.max(acc.tol_rel * value.abs()) || level == 48 {
                        return Ok(IntegralResult { value, error_estimate: err, nodes_used: nodes });
                    }
                }
                prev = Some(value);
            }
            unreachable!()
        }
        _ => {
            let mut prev: Option<f64> = None;
            let mut count = 1usize << 14;
            let mut nodes = 0usize;
            loop {
                let rule = SphereRule::qmc(n, count, 0);
                nodes += rule.len();
                let value = integrate_sphere(&rule, &mut f);
                if let Some(p) = prev {
                    let err = (value - p).abs();
                    if err <= acc.tol_abs.max(acc.tol_rel * value.abs()) || count >= (1 << 20) {
                        return Ok(IntegralResult { value, error_estimate: err, nodes_used: nodes });
                    }
                }
                prev = Some(value);
                count *= 2;
            }
        }
    }
}

/// |K| = (1/n) ∫ ρ(u)^n dσ(u).
pub fn volume_quad(body: &Body, acc: Accuracy) -> Result<IntegralResult> {
    let n = body.dim();
    let planes = body.singular_planes();
    let r = integrate_sphere_adaptive(n, |u| body.radial(u).powi(n as i32), &planes, acc)?;
    Ok(IntegralResult {
        value: r.value / n as f64,
        error_estimate: r.error_estimate / n as f64,
        nodes_used: r.nodes_used,
    })
}

/// |K°| = (1/n) ∫ h(u)^{-n} dσ(u).
pub fn polar_volume_quad(body: &Body, acc: Accuracy) -> Result<IntegralResult> {
    let n = body.dim();
    let planes = body.singular_planes();
    let r = integrate_sphere_adaptive(n, |u| body.support(u).powi(-(n as i32)), &planes, acc)?;
    Ok(IntegralResult {
        value: r.value / n as f64,
        error_estimate: r.error_estimate / n as f64,
        nodes_used: r.nodes_used,
    })
}

/// Largest s ≥ 0 with `from + s · dir ∈ K`, by doubling then bisection.
/// `from` must lie in the interior.
pub fn ray_exit(body: &Body, from: &[f64], dir: &[f64]) -> Result<f64> {
    let n = body.dim();
    if body.gauge(from) >= 1.0 {
        return Err(Error::DomainError(format!(
            "ray start has gauge {} >= 1",
            body.gauge(from)
        )));
    }
    let mut probe = [0.0; MAX_DIM];
    let mut eval = |s: f64| {
        for i in 0..n {
            probe[i] = from[i] + s * dir[i];
        }
        body.gauge(&probe[..n])
    };
    let mut hi = 1.0f64;
    let mut lo = 0.0f64;
    let mut grow = 0;
    while eval(hi) < 1.0 {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::RootFindFailure("ray never exits the body".into()));
        }
    }
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        if eval(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// (n-1)-volume of the hyperplane section K ∩ {⟨x, θ⟩ = t}.
///
/// n = 2 is a chord length by bisection; n = 3 integrates the squared
/// in-plane radial function; n ≥ 4 falls back to a seeded Monte Carlo box
/// count (coarse; only offered for completeness).
pub fn section_volume(body: &Body, theta: &UnitDirection, t: f64, acc: Accuracy) -> Result<f64> {
    let n = body.dim();
    let h = body.support(theta);
    if t.abs() >= h {
        return Ok(0.0);
    }
    // interior anchor on the hyperplane: scale the touching point inward
    let grad = body.support_gradient_raw(theta.coords());
    let mut c = [0.0; MAX_DIM];
    for i in 0..n {
        c[i] = (t / h) * grad[i];
    }
    let basis = tangent_basis(theta);
    match n {
        2 => {
            let e = &basis[0];
            let mut neg = [0.0; MAX_DIM];
            for i in 0..n {
                neg[i] = -e[i];
            }
            let s_plus = ray_exit(body, &c[..n], &e[..n])?;
            let s_minus = ray_exit(body, &c[..n], &neg[..n])?;
            Ok(s_plus + s_minus)
        }
        3 => {
            let failure: RefCell<Option<Error>> = RefCell::new(None);
            let area = adaptive_1d(
                |phi| {
                    if failure.borrow().is_some() {
                        return 0.0;
                    }
                    let (s, co) = phi.sin_cos();
                    let mut dir = [0.0; MAX_DIM];
                    for i in 0..n {
                        dir[i] = co * basis[0][i] + s * basis[1][i];
                    }
                    match ray_exit(body, &c[..n], &dir[..n]) {
                        Ok(r) => 0.5 * r * r,
                        Err(e) => {
                            *failure.borrow_mut() = Some(e);
                            0.0
                        }
                    }
                },
                0.0,
                2.0 * std::f64::consts::PI,
                &[],
                acc,
            )?;
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            Ok(area.value)
        }
        _ => {
            // bounding radius from the axis slabs: K ⊆ ball(√Σ h(e_i)²)
            let mut bound_sq = 0.0;
            for i in 0..n {
                let hi = body.support(&UnitDirection::axis(n, i));
                bound_sq += hi * hi;
            }
            let radius = bound_sq.sqrt();
            let samples = 200_000usize;
            let mut rng = rng::stream(0x5ec7, "section-mc", n as u64);
            let mut hits = 0usize;
            let mut x = [0.0; MAX_DIM];
            for _ in 0..samples {
                let coeffs: Vec<f64> =
                    (0..n - 1).map(|_| radius * (2.0 * rng.gen::<f64>() - 1.0)).collect();
                for i in 0..n {
                    x[i] = c[i];
                    for (j, cf) in coeffs.iter().enumerate() {
                        x[i] += cf * basis[j][i];
                    }
                }
                if body.membership(&x[..n]) {
                    hits += 1;
                }
            }
            let cell = (2.0 * radius).powi(n as i32 - 1);
            Ok(cell * hits as f64 / samples as f64)
        }
    }
}

/// Volume of the cap K ∩ {⟨x, θ⟩ ≥ t}: the section volume integrated from
/// t to h(θ).
pub fn cap_volume(body: &Body, theta: &UnitDirection, t: f64, acc: Accuracy) -> Result<f64> {
    let h = body.support(theta);
    if t >= h {
        return Ok(0.0);
    }
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let section_acc = acc.tightened(1.0 / 8.0);
    // graded panels: the section vanishes like a fractional power at s → h
    let r = adaptive_1d_graded(
        |s| {
            if failure.borrow().is_some() {
                return 0.0;
            }
            match section_volume(body, theta, s, section_acc) {
                Ok(v) => v,
                Err(e) => {
                    *failure.borrow_mut() = Some(e);
                    0.0
                }
            }
        },
        t,
        h,
        &[],
        acc,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(r.value)
}

#[cfg(test)]
mod probes {
    use super::*;
    use crate::body::Body;

    // strongest curvature blow-up in the catalog (exponent ≈ 0.643 at the
    // singular planes); prints cost scaling for the nested sphere pass
    #[test]
    #[ignore]
    fn probe_worst_asp_nodes() {
        let body = Body::lp_ball(3, 5.0).unwrap();
        let p = 0.5f64;
        let nf = 3.0;
        let ef = nf / (nf + p);
        let eh = -nf * (p - 1.0) / (nf + p);
        let planes = body.singular_planes();
        for (ta, tr) in [(1e-6, 1e-5), (1e-7, 1e-6), (1e-8, 1e-7), (1e-9, 1e-8)] {
            let t0 = std::time::Instant::now();
            let evals = std::cell::Cell::new(0usize);
            let r = integrate_sphere_adaptive(
                3,
                |u| {
                    evals.set(evals.get() + 1);
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
                    (ef * f.ln() + eh * h.ln()).exp()
                },
                &planes,
                Accuracy::abs_rel(ta, tr),
            )
            .unwrap();
            println!(
                "tol ({ta:.0e},{tr:.0e}): val {:.12}, est {:.3e}, nodes {}, evals {}, {:?}",
                r.value,
                r.error_estimate,
                r.nodes_used,
                evals.get(),
                t0.elapsed()
            );
        }
    }
}
