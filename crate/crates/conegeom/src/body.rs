//! Convex bodies as dual analytic descriptions: support function, radial
//! function, membership, and curvature, for a closed-form catalog.
//!
//! A [`Body`] is origin-symmetric with the origin interior. The catalog
//! covers Euclidean balls, `l_r` balls (`1 < r < ∞` smooth; `r ∈ {1, ∞}` as
//! the cross-polytope and cube with a polytope flag), ellipsoids, and
//! invertible linear images of any of these. Every quantity is evaluated
//! from closed forms; no meshes are built anywhere.
//!
//! Conventions:
//!
//! * `h(x)` is the 1-homogeneous support function; its Euclidean Hessian is
//!   (-1)-homogeneous and annihilates the radial direction, so the curvature
//!   function `f(u)` (reciprocal Gauss curvature at the boundary point with
//!   outer normal `u`) is the determinant of the Hessian restricted to any
//!   orthonormal basis of `u^⊥`. The spherical-Hessian formulation carries an
//!   extra `+ h·Id` shift; that shift is already contained in the Euclidean
//!   Hessian restriction, which is what this module computes.
//! * The gauge (Minkowski functional) is `‖x‖_K = inf{t : x ∈ tK}`; the
//!   radial function is its reciprocal on unit vectors, and the polar body's
//!   support function equals the gauge.
//! * For `T K`: `h(x) = h_K(Tᵀx)`, gradient `T ∇h_K(Tᵀx)`, Hessian
//!   `T H_K(Tᵀx) Tᵀ`, gauge `‖T⁻¹x‖_K`.

use crate::error::{Error, Result};
use crate::linalg::{self, SmallMat, MAX_DIM};
use crate::special::ln_gamma;
use crate::tol;
use serde::{Deserialize, Serialize};

/// Fixed-size coordinate buffer; only the leading `n` entries are meaningful.
pub type Coords = [f64; MAX_DIM];

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// A point of the unit sphere S^{n-1}, renormalized on construction.
#[derive(Clone, Copy, Debug)]
pub struct UnitDirection {
    n: usize,
    x: Coords,
}

impl UnitDirection {
    /// Build from coordinates, renormalizing to unit Euclidean norm.
    pub fn new(coords: &[f64]) -> UnitDirection {
        let n = coords.len();
        assert!((2..=MAX_DIM).contains(&n), "dimension {n} out of range");
        let norm = norm2(coords);
        assert!(norm > 0.0 && norm.is_finite(), "cannot normalize {coords:?}");
        let mut x = [0.0; MAX_DIM];
        for (xi, ci) in x.iter_mut().zip(coords) {
            *xi = ci / norm;
        }
        UnitDirection { n, x }
    }

    /// Planar direction (cos β, sin β).
    pub fn from_angle(beta: f64) -> UnitDirection {
        let mut x = [0.0; MAX_DIM];
        x[0] = beta.cos();
        x[1] = beta.sin();
        UnitDirection { n: 2, x }
    }

    /// Spherical direction (sin θ cos φ, sin θ sin φ, cos θ).
    pub fn from_spherical(theta: f64, phi: f64) -> UnitDirection {
        let mut x = [0.0; MAX_DIM];
        let st = theta.sin();
        x[0] = st * phi.cos();
        x[1] = st * phi.sin();
        x[2] = theta.cos();
        UnitDirection { n: 3, x }
    }

    pub fn axis(n: usize, i: usize) -> UnitDirection {
        let mut x = [0.0; MAX_DIM];
        x[i] = 1.0;
        UnitDirection { n, x }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn coords(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub fn neg(&self) -> UnitDirection {
        let mut x = [0.0; MAX_DIM];
        for (xi, ci) in x.iter_mut().zip(&self.x) {
            *xi = -ci;
        }
        UnitDirection { n: self.n, x }
    }
}

/// Boundary regularity class; gates curvature-based operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Smoothness {
    /// Twice differentiable boundary with strictly positive Gauss curvature.
    C2Plus,
    /// Flat facets; curvature vanishes almost everywhere.
    Polytope,
    /// No curvature information available.
    Generic,
}

/// A boundary point with its differential data.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryPoint {
    pub x: Coords,
    pub normal: UnitDirection,
    /// Gauss curvature κ at `x`; reciprocal of the curvature function.
    pub gauss_curvature: f64,
    /// ⟨x, N(x)⟩ = h(N(x)); positive for symmetric bodies.
    pub support_value: f64,
}

#[derive(Clone, Debug)]
enum Shape {
    /// Unit Euclidean ball.
    Ball,
    /// Unit l_r ball, 1 < r < ∞.
    LpBall { r: f64 },
    /// Cube [-1, 1]^n.
    Cube,
    /// Unit l_1 ball.
    CrossPolytope,
    /// T(base) for invertible T.
    LinearImage {
        base: Box<Body>,
        t: SmallMat,
        tinv: SmallMat,
        tdet: f64,
    },
}

/// An origin-symmetric convex body with closed-form support and radial data.
#[derive(Clone, Debug)]
pub struct Body {
    n: usize,
    shape: Shape,
}

impl Body {
    pub fn ball(n: usize) -> Body {
        assert!((2..=MAX_DIM).contains(&n));
        Body { n, shape: Shape::Ball }
    }

    /// The l_r unit ball. `r ∈ (1, ∞)` is the smooth range; `r = 1` builds
    /// the cross-polytope and `r = ∞` the cube, both flagged as polytopes.
    pub fn lp_ball(n: usize, r: f64) -> Result<Body> {
        assert!((2..=MAX_DIM).contains(&n));
        if r == 1.0 {
            return Ok(Body { n, shape: Shape::CrossPolytope });
        }
        if r.is_infinite() && r > 0.0 {
            return Ok(Body { n, shape: Shape::Cube });
        }
        if !(r > 1.0 && r.is_finite()) {
            return Err(Error::DomainError(format!("l_r exponent {r} outside [1, ∞]")));
        }
        Ok(Body { n, shape: Shape::LpBall { r } })
    }

    pub fn cube(n: usize) -> Body {
        assert!((2..=MAX_DIM).contains(&n));
        Body { n, shape: Shape::Cube }
    }

    pub fn cross_polytope(n: usize) -> Body {
        assert!((2..=MAX_DIM).contains(&n));
        Body { n, shape: Shape::CrossPolytope }
    }

    /// Ellipsoid A(B_2^n) for a symmetric positive-definite matrix given
    /// row-wise.
    pub fn ellipsoid(matrix: &[Vec<f64>]) -> Result<Body> {
        let n = matrix.len();
        for row in matrix {
            if row.len() != n {
                return Err(Error::InvalidConfig("ellipsoid matrix must be square".into()));
            }
        }
        for i in 0..n {
            for j in 0..i {
                if (matrix[i][j] - matrix[j][i]).abs() > 1e-12 * matrix[i][j].abs().max(1.0) {
                    return Err(Error::InvalidConfig("ellipsoid matrix must be symmetric".into()));
                }
            }
        }
        Body::ball(n).linear_image(matrix)
    }

    /// Axis-aligned ellipse with semi-axes a, b.
    pub fn ellipse(a: f64, b: f64) -> Body {
        Body::ellipsoid(&[vec![a, 0.0], vec![0.0, b]]).expect("diagonal SPD")
    }

    /// The image T(K); linear images compose by matrix product.
    pub fn linear_image(&self, matrix: &[Vec<f64>]) -> Result<Body> {
        let n = self.n;
        if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: matrix.len() });
        }
        let mut t: SmallMat = [[0.0; MAX_DIM]; MAX_DIM];
        for (ti, row) in t.iter_mut().zip(matrix) {
            ti[..n].copy_from_slice(row);
        }
        // collapse nested images so evaluation stays one indirection deep
        let (base, t) = match &self.shape {
            Shape::LinearImage { base, t: t1, .. } => (base.as_ref().clone(), mat_mul(&t, t1, n)),
            _ => (self.clone(), t),
        };
        let tdet = linalg::det(&t, n);
        if tdet.abs() < 1e-300 {
            return Err(Error::SingularMatrix(tdet.abs()));
        }
        let tinv = linalg::invert(&t, n).ok_or(Error::SingularMatrix(0.0))?;
        Ok(Body {
            n,
            shape: Shape::LinearImage { base: Box::new(base), t, tinv, tdet },
        })
    }

    /// λK for λ > 0.
    pub fn scaled(&self, lambda: f64) -> Result<Body> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::DomainError(format!("scale {lambda} must be positive")));
        }
        let eye: Vec<Vec<f64>> = (0..self.n)
            .map(|i| (0..self.n).map(|j| if i == j { lambda } else { 0.0 }).collect())
            .collect();
        self.linear_image(&eye)
    }

    /// The dilate of volume exactly 1.
    pub fn normalized(&self) -> Result<Body> {
        let v = self.volume();
        self.scaled(v.powf(-1.0 / self.n as f64))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn smoothness(&self) -> Smoothness {
        match &self.shape {
            Shape::Ball | Shape::LpBall { .. } => Smoothness::C2Plus,
            Shape::Cube | Shape::CrossPolytope => Smoothness::Polytope,
            Shape::LinearImage { base, .. } => base.smoothness(),
        }
    }

    /// Support function h(u) = max{⟨x, u⟩ : x ∈ K} on the unit sphere.
    pub fn support(&self, u: &UnitDirection) -> f64 {
        self.support_raw(u.coords())
    }

    /// 1-homogeneous support function at an arbitrary nonzero vector.
    pub fn support_raw(&self, x: &[f64]) -> f64 {
        match &self.shape {
            Shape::Ball => norm2(x),
            Shape::LpBall { r } => lr_norm(x, dual_exponent(*r)),
            Shape::Cube => x.iter().map(|v| v.abs()).sum(),
            Shape::CrossPolytope => x.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            Shape::LinearImage { base, t, .. } => {
                let y = mat_t_vec(t, x, self.n);
                base.support_raw(&y[..self.n])
            }
        }
    }

    /// Gradient of the 1-homogeneous support function; equals the boundary
    /// point with outer normal `x/‖x‖` (0-homogeneous).
    pub fn support_gradient_raw(&self, x: &[f64]) -> Coords {
        let n = self.n;
        let mut g = [0.0; MAX_DIM];
        match &self.shape {
            Shape::Ball => {
                let nx = norm2(x);
                for i in 0..n {
                    g[i] = x[i] / nx;
                }
            }
            Shape::LpBall { r } => {
                let rp = dual_exponent(*r);
                let phi: f64 = x.iter().map(|v| v.abs().powf(rp)).sum();
                let scale = phi.powf(1.0 / rp - 1.0);
                for i in 0..n {
                    g[i] = scale * x[i].signum() * x[i].abs().powf(rp - 1.0);
                }
            }
            Shape::Cube => {
                for i in 0..n {
                    g[i] = x[i].signum();
                }
            }
            Shape::CrossPolytope => {
                let mut k = 0;
                for i in 1..n {
                    if x[i].abs() > x[k].abs() {
                        k = i;
                    }
                }
                g[k] = x[k].signum();
            }
            Shape::LinearImage { base, t, .. } => {
                let y = mat_t_vec(t, x, n);
                let gb = base.support_gradient_raw(&y[..n]);
                g = mat_vec(t, &gb, n);
            }
        }
        g
    }

    /// Euclidean Hessian of the 1-homogeneous support function
    /// ((-1)-homogeneous; annihilates the radial direction).
    pub fn support_hessian_raw(&self, x: &[f64]) -> Result<SmallMat> {
        let n = self.n;
        let mut h: SmallMat = [[0.0; MAX_DIM]; MAX_DIM];
        match &self.shape {
            Shape::Ball => {
                let nx = norm2(x);
                for i in 0..n {
                    for j in 0..n {
                        let id = if i == j { 1.0 } else { 0.0 };
                        h[i][j] = (id - x[i] * x[j] / (nx * nx)) / nx;
                    }
                }
            }
            Shape::LpBall { r } => {
                let rp = dual_exponent(*r);
                let phi: f64 = x.iter().map(|v| v.abs().powf(rp)).sum();
                let s1 = phi.powf(1.0 / rp - 1.0);
                let s2 = phi.powf(1.0 / rp - 2.0);
                let mut psi = [0.0; MAX_DIM];
                let mut d = [0.0; MAX_DIM];
                for i in 0..n {
                    psi[i] = x[i].signum() * x[i].abs().powf(rp - 1.0);
                    d[i] = x[i].abs().powf(rp - 2.0);
                }
                for i in 0..n {
                    for j in 0..n {
                        let diag = if i == j { s1 * d[i] } else { 0.0 };
                        h[i][j] = (rp - 1.0) * (diag - s2 * psi[i] * psi[j]);
                    }
                }
            }
            Shape::Cube | Shape::CrossPolytope => {
                // piecewise linear support: Hessian vanishes a.e.
            }
            Shape::LinearImage { base, t, .. } => {
                let y = mat_t_vec(t, x, n);
                let hb = base.support_hessian_raw(&y[..n])?;
                // T H Tᵀ
                for i in 0..n {
                    for j in 0..n {
                        let mut s = 0.0;
                        for (k, hbk) in hb.iter().enumerate().take(n) {
                            let mut inner = 0.0;
                            for l in 0..n {
                                inner += hbk[l] * t[j][l];
                            }
                            s += t[i][k] * inner;
                        }
                        h[i][j] = s;
                    }
                }
            }
        }
        Ok(h)
    }

    /// Minkowski gauge ‖x‖_K = inf{t > 0 : x ∈ tK}; equals the polar body's
    /// support function.
    pub fn gauge(&self, x: &[f64]) -> f64 {
        match &self.shape {
            Shape::Ball => norm2(x),
            Shape::LpBall { r } => lr_norm(x, *r),
            Shape::Cube => x.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            Shape::CrossPolytope => x.iter().map(|v| v.abs()).sum(),
            Shape::LinearImage { base, tinv, .. } => {
                let y = mat_vec(tinv, x, self.n);
                base.gauge(&y[..self.n])
            }
        }
    }

    /// Gradient of the gauge (0-homogeneous scale; outward normal direction
    /// at the boundary point x/gauge(x)).
    pub fn gauge_gradient(&self, x: &[f64]) -> Coords {
        let n = self.n;
        let mut g = [0.0; MAX_DIM];
        match &self.shape {
            Shape::Ball => {
                let nx = norm2(x);
                for i in 0..n {
                    g[i] = x[i] / nx;
                }
            }
            Shape::LpBall { r } => {
                let nr = lr_norm(x, *r);
                for i in 0..n {
                    g[i] = x[i].signum() * (x[i].abs() / nr).powf(r - 1.0);
                }
            }
            Shape::Cube => {
                let mut k = 0;
                for i in 1..n {
                    if x[i].abs() > x[k].abs() {
                        k = i;
                    }
                }
                g[k] = x[k].signum();
            }
            Shape::CrossPolytope => {
                for i in 0..n {
                    g[i] = x[i].signum();
                }
            }
            Shape::LinearImage { base, tinv, .. } => {
                let y = mat_vec(tinv, x, n);
                let gb = base.gauge_gradient(&y[..n]);
                // ∇(g ∘ T⁻¹) = T⁻ᵀ ∇g
                g = mat_t_vec(tinv, &gb, n);
            }
        }
        g
    }

    /// Radial function ρ(u): the boundary is at ρ(u)·u.
    pub fn radial(&self, u: &UnitDirection) -> f64 {
        1.0 / self.gauge(u.coords())
    }

    /// x ∈ K (closed, up to a relative gauge slack of 1e-12).
    pub fn membership(&self, x: &[f64]) -> bool {
        self.gauge(x) <= 1.0 + 1e-12
    }

    /// Support function of the polar body: h_{K°} = gauge of K.
    pub fn polar_support(&self, u: &UnitDirection) -> f64 {
        self.gauge(u.coords())
    }

    /// The polar body K° = {y : ⟨x, y⟩ ≤ 1 for all x ∈ K}.
    pub fn polar(&self) -> Result<Body> {
        let n = self.n;
        Ok(match &self.shape {
            Shape::Ball => Body::ball(n),
            Shape::LpBall { r } => Body { n, shape: Shape::LpBall { r: dual_exponent(*r) } },
            Shape::Cube => Body::cross_polytope(n),
            Shape::CrossPolytope => Body::cube(n),
            Shape::LinearImage { base, t, tinv, tdet } => Body {
                n,
                shape: Shape::LinearImage {
                    base: Box::new(base.polar()?),
                    t: transpose(tinv, n),
                    tinv: transpose(t, n),
                    tdet: 1.0 / tdet,
                },
            },
        })
    }

    /// The l_r exponent of the underlying ball, and the linear map carrying
    /// it onto this body, when the body is an l_r ball or a linear image of
    /// one. `None` identifies the transform as the identity. Cubes have no
    /// finite exponent. Linear images store a non-image base, so one level
    /// of unwrapping is exhaustive.
    pub(crate) fn lp_factorization(&self) -> Option<(f64, Option<&SmallMat>)> {
        fn exponent(shape: &Shape) -> Option<f64> {
            match shape {
                Shape::Ball => Some(2.0),
                Shape::LpBall { r } => Some(*r),
                Shape::CrossPolytope => Some(1.0),
                _ => None,
            }
        }
        match &self.shape {
            Shape::LinearImage { base, t, .. } => Some((exponent(&base.shape)?, Some(t))),
            other => Some((exponent(other)?, None)),
        }
    }

    /// True exactly for the round unit ball, whose Gauss and radial maps
    /// are both the identity on directions.
    pub(crate) fn is_unit_ball(&self) -> bool {
        matches!(self.shape, Shape::Ball)
    }

    /// Curvature function f(u): determinant of the support Hessian restricted
    /// to u^⊥; the reciprocal Gauss curvature at the boundary point with
    /// outer normal u. `+∞` signals a flat boundary direction (κ = 0), which
    /// l_r balls with r > 2 attain on the coordinate axes.
    pub fn curvature_function(&self, u: &UnitDirection) -> Result<f64> {
        if self.smoothness() != Smoothness::C2Plus {
            return Err(Error::NonSmoothBody("polytope boundary has no curvature function"));
        }
        let h = self.support_hessian_raw(u.coords())?;
        let f = restricted_det(&h, u);
        if f.is_nan() {
            return Err(Error::SingularHessian(u.coords().to_vec(), f));
        }
        if f <= tol::FLAT_CURVATURE && f.is_finite() {
            return Err(Error::SingularHessian(u.coords().to_vec(), f));
        }
        Ok(f)
    }

    /// Raw restricted Hessian determinant for integrands: no flatness gate,
    /// no polytope gate. Zero, negative, and `+∞` values pass through so the
    /// caller can map them (a.e.-zero curvature integrates to zero; isolated
    /// `+∞` is handled by graded quadrature). Only NaN is an error.
    pub fn curvature_det(&self, u: &UnitDirection) -> Result<f64> {
        match self.shape {
            Shape::Cube | Shape::CrossPolytope => return Ok(0.0),
            _ => {}
        }
        if let Shape::LinearImage { ref base, .. } = self.shape {
            if base.smoothness() == Smoothness::Polytope {
                return Ok(0.0);
            }
        }
        let h = self.support_hessian_raw(u.coords())?;
        let f = restricted_det(&h, u);
        if f.is_nan() {
            return Err(Error::SingularHessian(u.coords().to_vec(), f));
        }
        Ok(f)
    }

    /// Finite-difference curvature function: central differences of the
    /// support function on the 1-homogeneous extension with a relative step,
    /// Richardson-extrapolated once. Cross-check for the analytic route.
    pub fn curvature_function_fd(&self, u: &UnitDirection) -> Result<f64> {
        if self.smoothness() != Smoothness::C2Plus {
            return Err(Error::NonSmoothBody("polytope boundary has no curvature function"));
        }
        let step = tol::FD_HESSIAN_STEP * self.support(u);
        let coarse = self.fd_hessian(u.coords(), step);
        let fine = self.fd_hessian(u.coords(), step / 2.0);
        let mut h: SmallMat = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..self.n {
            for j in 0..self.n {
                h[i][j] = (4.0 * fine[i][j] - coarse[i][j]) / 3.0;
            }
        }
        let f = restricted_det(&h, u);
        if !f.is_finite() || f <= tol::FLAT_CURVATURE {
            return Err(Error::SingularHessian(u.coords().to_vec(), f));
        }
        Ok(f)
    }

    fn fd_hessian(&self, x: &[f64], a: f64) -> SmallMat {
        let n = self.n;
        let mut h: SmallMat = [[0.0; MAX_DIM]; MAX_DIM];
        let mut y = [0.0; MAX_DIM];
        y[..n].copy_from_slice(x);
        for i in 0..n {
            for j in 0..=i {
                let mut eval = |si: f64, sj: f64| {
                    y[i] += si * a;
                    y[j] += sj * a;
                    let v = self.support_raw(&y[..n]);
                    y[i] -= si * a;
                    y[j] -= sj * a;
                    v
                };
                let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                    / (4.0 * a * a);
                h[i][j] = v;
                h[j][i] = v;
            }
        }
        h
    }

    /// The boundary point with outer normal u, with curvature data.
    pub fn boundary_point(&self, u: &UnitDirection) -> Result<BoundaryPoint> {
        let f = self.curvature_function(u)?;
        let x = self.support_gradient_raw(u.coords());
        Ok(BoundaryPoint {
            x,
            normal: *u,
            gauss_curvature: 1.0 / f,
            support_value: dot(&x[..self.n], u.coords()),
        })
    }

    /// Outer unit normal at a boundary point (gauge gradient, normalized).
    pub fn normal_at(&self, x: &[f64]) -> Result<UnitDirection> {
        let g = self.gauge(x);
        if (g - 1.0).abs() > tol::ON_BOUNDARY {
            return Err(Error::OffBoundary(g));
        }
        let grad = self.gauge_gradient(x);
        Ok(UnitDirection::new(&grad[..self.n]))
    }

    /// Lebesgue volume by closed form.
    pub fn volume(&self) -> f64 {
        let n = self.n as f64;
        match &self.shape {
            Shape::Ball => ((n / 2.0) * std::f64::consts::PI.ln() - ln_gamma(n / 2.0 + 1.0)).exp(),
            Shape::LpBall { r } => lp_ball_volume(self.n, *r),
            Shape::Cube => 2f64.powi(self.n as i32),
            Shape::CrossPolytope => (n * 2f64.ln() - ln_gamma(n + 1.0)).exp(),
            Shape::LinearImage { base, tdet, .. } => tdet.abs() * base.volume(),
        }
    }

    /// |K°| by closed form (polar catalog).
    pub fn polar_volume(&self) -> Result<f64> {
        Ok(self.polar()?.volume())
    }

    /// Unit normals w of the hyperplanes {⟨u, w⟩ = 0} where support or radial
    /// data loses smoothness. Quadrature places panel boundaries there.
    pub fn singular_planes(&self) -> Vec<Coords> {
        let n = self.n;
        let mut planes: Vec<Coords> = Vec::new();
        let mut push = |v: &[f64]| {
            let norm = norm2(v);
            if norm > 0.0 {
                let mut w = [0.0; MAX_DIM];
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi = vi / norm;
                }
                planes.push(w);
            }
        };
        match &self.shape {
            Shape::Ball => {}
            Shape::LpBall { r } => {
                if (*r - 2.0).abs() > 1e-12 {
                    for i in 0..n {
                        let mut e = [0.0; MAX_DIM];
                        e[i] = 1.0;
                        push(&e[..n]);
                    }
                }
            }
            Shape::Cube | Shape::CrossPolytope => {
                // support kinks on coordinate hyperplanes, radial kinks on
                // the diagonal hyperplanes |u_i| = |u_j|
                for i in 0..n {
                    let mut e = [0.0; MAX_DIM];
                    e[i] = 1.0;
                    push(&e[..n]);
                }
                for i in 0..n {
                    for j in i + 1..n {
                        for s in [1.0, -1.0] {
                            let mut e = [0.0; MAX_DIM];
                            e[i] = 1.0;
                            e[j] = s;
                            push(&e[..n]);
                        }
                    }
                }
            }
            Shape::LinearImage { base, t, tinv, .. } => {
                // h_{TK}(u) = h(Tᵀu) is singular where Tᵀu hits a base plane
                // w: ⟨Tᵀu, w⟩ = ⟨u, Tw⟩ = 0; radial data via T⁻¹u gives T⁻ᵀw.
                for w in base.singular_planes() {
                    let tw = mat_vec(t, &w, n);
                    push(&tw[..n]);
                    let titw = mat_t_vec(tinv, &w, n);
                    push(&titw[..n]);
                }
            }
        }
        planes
    }

    /// Split angles on [0, 2π) for planar quadrature: the directions lying on
    /// any singular plane.
    pub fn singular_angles_2d(&self) -> Vec<f64> {
        assert_eq!(self.n, 2);
        let mut angles = Vec::new();
        for w in self.singular_planes() {
            // u(β) ⊥ w at β0 and β0 + π where β0 is the angle of (-w2, w1)
            let b0 = w[1].atan2(w[0]) + std::f64::consts::FRAC_PI_2;
            for k in 0..2 {
                let mut b = (b0 + k as f64 * std::f64::consts::PI)
                    .rem_euclid(2.0 * std::f64::consts::PI);
                if b >= 2.0 * std::f64::consts::PI {
                    b = 0.0;
                }
                angles.push(b);
            }
        }
        angles.sort_by(f64::total_cmp);
        angles.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        angles
    }
}

/// Dual exponent r' with 1/r + 1/r' = 1.
pub fn dual_exponent(r: f64) -> f64 {
    r / (r - 1.0)
}

fn lr_norm(x: &[f64], r: f64) -> f64 {
    x.iter().map(|v| v.abs().powf(r)).sum::<f64>().powf(1.0 / r)
}

/// |B_r^n| = 2^n Γ(1 + 1/r)^n / Γ(1 + n/r).
pub fn lp_ball_volume(n: usize, r: f64) -> f64 {
    let nf = n as f64;
    (nf * 2f64.ln() + nf * ln_gamma(1.0 + 1.0 / r) - ln_gamma(1.0 + nf / r)).exp()
}

/// |(B_r^n)°| = |B_{r'}^n| in the digamma-friendly product form
/// 2^n (r-1)^{n-1} / (n r^{n-1}) · Γ((r-1)/r)^n / Γ(n(r-1)/r).
pub fn lp_ball_polar_volume(n: usize, r: f64) -> Result<f64> {
    if !(r > 1.0 && r.is_finite()) {
        return Err(Error::DomainError(format!("polar volume form needs r ∈ (1, ∞), got {r}")));
    }
    let nf = n as f64;
    let a = (r - 1.0) / r;
    Ok(
        (nf * 2f64.ln() + (nf - 1.0) * (r - 1.0).ln() - nf.ln() - (nf - 1.0) * r.ln()
            + nf * ln_gamma(a)
            - ln_gamma(nf * a))
        .exp(),
    )
}

/// Gauss curvature of ∂B_r^n at a boundary point:
/// κ(x) = (r-1)^{n-1} ∏|x_i|^{r-2} / (Σ|x_i|^{2r-2})^{(n+1)/2}.
pub fn lp_ball_boundary_curvature(n: usize, r: f64, x: &[f64]) -> Result<f64> {
    if !(r > 1.0 && r.is_finite()) {
        return Err(Error::DomainError(format!("curvature form needs r ∈ (1, ∞), got {r}")));
    }
    let g = lr_norm(x, r);
    if (g - 1.0).abs() > tol::ON_BOUNDARY {
        return Err(Error::OffBoundary(g));
    }
    if r < 2.0 && x[..n].iter().any(|v| *v == 0.0) {
        return Err(Error::UndefinedCurvature);
    }
    let prod: f64 = x[..n].iter().map(|v| v.abs().powf(r - 2.0)).product();
    let denom: f64 = x[..n].iter().map(|v| v.abs().powf(2.0 * r - 2.0)).sum();
    Ok((r - 1.0).powi(n as i32 - 1) * prod / denom.powf((n as f64 + 1.0) / 2.0))
}

/// Outer unit normal of ∂B_r^n at a boundary point:
/// N(x) = (sgn(x_i)|x_i|^{r-1})_i / (Σ|x_i|^{2r-2})^{1/2}.
pub fn lp_ball_normal(n: usize, r: f64, x: &[f64]) -> Result<UnitDirection> {
    let g = lr_norm(x, r);
    if (g - 1.0).abs() > tol::ON_BOUNDARY {
        return Err(Error::OffBoundary(g));
    }
    let mut v = [0.0; MAX_DIM];
    for i in 0..n {
        v[i] = x[i].signum() * x[i].abs().powf(r - 1.0);
    }
    Ok(UnitDirection::new(&v[..n]))
}

/// Orthonormal basis of u^⊥: the non-pivot columns of the Householder
/// reflector carrying the largest-magnitude axis of u to ±u. Pivoting on
/// the largest component keeps each small axis's basis vector close to that
/// axis, so a Hessian with a large diagonal entry on a small axis couples
/// it to one basis vector; a fixed pivot smears such an entry over every
/// basis vector and the restricted determinant cancels catastrophically.
pub fn tangent_basis(u: &UnitDirection) -> Vec<Coords> {
    let n = u.dim();
    let x = u.coords();
    let mut k = 0;
    for i in 1..n {
        if x[i].abs() > x[k].abs() {
            k = i;
        }
    }
    let s = if x[k] >= 0.0 { 1.0 } else { -1.0 };
    let mut w = [0.0; MAX_DIM];
    w[..n].copy_from_slice(x);
    w[k] += s;
    let wtw = dot(&w[..n], &w[..n]);
    // columns q_j = e_j - (2 w_j / ⟨w,w⟩) w, j ≠ k
    let mut basis = Vec::with_capacity(n - 1);
    for j in (0..n).filter(|&j| j != k) {
        let c = 2.0 * w[j] / wtw;
        let mut q = [0.0; MAX_DIM];
        for i in 0..n {
            q[i] = -c * w[i];
        }
        q[j] += 1.0;
        basis.push(q);
    }
    basis
}

/// Determinant of the bilinear form induced by `h` on u^⊥, in the
/// orthonormal basis from [`tangent_basis`].
fn restricted_det(h: &SmallMat, u: &UnitDirection) -> f64 {
    let n = u.dim();
    let q = tangent_basis(u);
    let mut m: SmallMat = [[0.0; MAX_DIM]; MAX_DIM];
    for a in 0..n - 1 {
        // Hq_a
        let mut hq = [0.0; MAX_DIM];
        for i in 0..n {
            hq[i] = dot(&h[i][..n], &q[a][..n]);
        }
        for b in 0..n - 1 {
            m[a][b] = dot(&q[b][..n], &hq[..n]);
        }
    }
    linalg::det(&m, n - 1)
}

fn mat_vec(m: &SmallMat, x: &[f64], n: usize) -> Coords {
    let mut y = [0.0; MAX_DIM];
    for i in 0..n {
        y[i] = dot(&m[i][..n], &x[..n]);
    }
    y
}

/// Mᵀx.
fn mat_t_vec(m: &SmallMat, x: &[f64], n: usize) -> Coords {
    let mut y = [0.0; MAX_DIM];
    for (j, yj) in y.iter_mut().enumerate().take(n) {
        let mut s = 0.0;
        for i in 0..n {
            s += m[i][j] * x[i];
        }
        *yj = s;
    }
    y
}

fn mat_mul(a: &SmallMat, b: &SmallMat, n: usize) -> SmallMat {
    let mut c: SmallMat = [[0.0; MAX_DIM]; MAX_DIM];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for (k, bk) in b.iter().enumerate().take(n) {
                s += a[i][k] * bk[j];
            }
            c[i][j] = s;
        }
    }
    c
}

fn transpose(m: &SmallMat, n: usize) -> SmallMat {
    let mut t: SmallMat = [[0.0; MAX_DIM]; MAX_DIM];
    for i in 0..n {
        for j in 0..n {
            t[i][j] = m[j][i];
        }
    }
    t
}

/// Declarative body description; the JSON vocabulary of the CLI.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BodyConfig {
    Ball { n: usize },
    LpBall { n: usize, r: f64 },
    Ellipsoid { matrix: Vec<Vec<f64>> },
    LinearImage { base: Box<BodyConfig>, matrix: Vec<Vec<f64>> },
    Cube { n: usize },
    CrossPolytope { n: usize },
    Normalized { base: Box<BodyConfig> },
}

impl BodyConfig {
    pub fn build(&self) -> Result<Body> {
        match self {
            BodyConfig::Ball { n } => Ok(Body::ball(*n)),
            BodyConfig::LpBall { n, r } => Body::lp_ball(*n, *r),
            BodyConfig::Ellipsoid { matrix } => Body::ellipsoid(matrix),
            BodyConfig::LinearImage { base, matrix } => base.build()?.linear_image(matrix),
            BodyConfig::Cube { n } => Ok(Body::cube(*n)),
            BodyConfig::CrossPolytope { n } => Ok(Body::cross_polytope(*n)),
            BodyConfig::Normalized { base } => base.build()?.normalized(),
        }
    }
}

impl Body {
    /// Parse the declarative JSON config into a body.
    pub fn from_json(s: &str) -> Result<Body> {
        let cfg: BodyConfig =
            serde_json::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    fn random_direction<R: Rng>(rng: &mut R, n: usize) -> UnitDirection {
        loop {
            let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            if norm2(&v) > 0.1 {
                return UnitDirection::new(&v);
            }
        }
    }

    fn catalog() -> Vec<(&'static str, Body)> {
        vec![
            ("ball2", Body::ball(2)),
            ("ball3", Body::ball(3)),
            ("b3_2", Body::lp_ball(2, 3.0).unwrap()),
            ("b15_3", Body::lp_ball(3, 1.5).unwrap()),
            ("ellipse", Body::ellipse(2.0, 0.5)),
            (
                "sheared",
                Body::lp_ball(2, 3.0)
                    .unwrap()
                    .linear_image(&[vec![1.0, 0.3], vec![0.0, 1.0]])
                    .unwrap(),
            ),
        ]
    }

    #[test]
    fn unit_directions_are_normalized() {
        let u = UnitDirection::new(&[3.0, 4.0]);
        assert!((norm2(u.coords()) - 1.0).abs() < tol::DIRECTION_NORM);
        assert!((u.coords()[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn radial_times_polar_support_is_one() {
        let mut rng = stream(3, "radial-polar", 0);
        for (name, body) in catalog() {
            let polar = body.polar().unwrap();
            for _ in 0..200 {
                let u = random_direction(&mut rng, body.dim());
                let prod = body.radial(&u) * polar.support(&u);
                assert!(
                    (prod - 1.0).abs() < 1e-10,
                    "{name}: rho * h_polar = {prod} at {:?}",
                    u.coords()
                );
            }
        }
    }

    #[test]
    fn symmetry_and_sublinearity_spot_checks() {
        let mut rng = stream(4, "convexity", 0);
        for (name, body) in catalog() {
            for _ in 0..50 {
                let u = random_direction(&mut rng, body.dim());
                let hu = body.support(&u);
                assert!((hu - body.support(&u.neg())).abs() < 1e-12 * hu, "{name}: h not even");
                let rho = body.radial(&u);
                assert!((rho - body.radial(&u.neg())).abs() < 1e-12 * rho, "{name}: rho not even");
                // h(x + y) <= h(x) + h(y) on the raw extension
                let v = random_direction(&mut rng, body.dim());
                let mut sum = [0.0; MAX_DIM];
                for i in 0..body.dim() {
                    sum[i] = u.coords()[i] + v.coords()[i];
                }
                let lhs = body.support_raw(&sum[..body.dim()]);
                let rhs = hu + body.support(&v);
                assert!(lhs <= rhs + 1e-12, "{name}: sublinearity violated");
            }
        }
    }

    #[test]
    fn membership_brackets_radial_point() {
        let mut rng = stream(5, "membership", 0);
        for (name, body) in catalog() {
            for _ in 0..50 {
                let u = random_direction(&mut rng, body.dim());
                let rho = body.radial(&u);
                let mut inside = [0.0; MAX_DIM];
                let mut outside = [0.0; MAX_DIM];
                for i in 0..body.dim() {
                    inside[i] = rho * u.coords()[i];
                    outside[i] = rho * (1.0 + 1e-6) * u.coords()[i];
                }
                assert!(body.membership(&inside[..body.dim()]), "{name}: rho u must be in K");
                assert!(!body.membership(&outside[..body.dim()]), "{name}: (1+eps) rho u must not");
            }
        }
    }

    #[test]
    fn euler_identities_for_support_derivatives() {
        // 1-homogeneity: ⟨∇h(u), u⟩ = h(u) and Hess h(u) · u = 0
        let mut rng = stream(6, "euler", 0);
        for (name, body) in catalog() {
            if body.smoothness() != Smoothness::C2Plus {
                continue;
            }
            for _ in 0..40 {
                let u = random_direction(&mut rng, body.dim());
                let h = body.support(&u);
                let g = body.support_gradient_raw(u.coords());
                assert!(
                    (dot(&g[..body.dim()], u.coords()) - h).abs() < 1e-10 * h,
                    "{name}: Euler identity fails"
                );
                let hess = body.support_hessian_raw(u.coords()).unwrap();
                for i in 0..body.dim() {
                    let hi = dot(&hess[i][..body.dim()], u.coords());
                    assert!(hi.abs() < 1e-8, "{name}: (Hess u)_{i} = {hi}");
                }
            }
        }
    }

    #[test]
    fn ball_curvature_is_one() {
        let body = Body::ball(3);
        let mut rng = stream(7, "ballcurv", 0);
        for _ in 0..20 {
            let u = random_direction(&mut rng, 3);
            let f = body.curvature_function(&u).unwrap();
            assert!((f - 1.0).abs() < 1e-12, "f = {f}");
        }
    }

    #[test]
    fn ellipse_curvature_at_axis_ends() {
        // ellipse semi-axes a, b: curvature at the end of the a-axis is a/b²,
        // so the curvature function there is b²/a
        let (a, b) = (2.0, 1.0);
        let body = Body::ellipse(a, b);
        let f1 = body.curvature_function(&UnitDirection::axis(2, 0)).unwrap();
        assert!((f1 - b * b / a).abs() < 1e-12, "f(e1) = {f1}, want {}", b * b / a);
        let f2 = body.curvature_function(&UnitDirection::axis(2, 1)).unwrap();
        assert!((f2 - a * a / b).abs() < 1e-12, "f(e2) = {f2}, want {}", a * a / b);
    }

    #[test]
    fn ellipse_curvature_matches_parametric_formula() {
        // boundary (a cos t, b sin t): κ(t) = a b / (a² sin²t + b² cos²t)^{3/2}
        let (a, b) = (2.0, 1.0);
        let body = Body::ellipse(a, b);
        for t in [0.3f64, 1.0, 2.2, 4.0] {
            let x = [a * t.cos(), b * t.sin()];
            let u = body.normal_at(&x).unwrap();
            let kappa = a * b / (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).powf(1.5);
            let f = body.curvature_function(&u).unwrap();
            assert!((f * kappa - 1.0).abs() < 1e-10, "t = {t}: f κ = {}", f * kappa);
        }
    }

    #[test]
    fn curvature_reciprocal_matches_boundary_curvature() {
        // κ(x) f(N(x)) = 1 on l_r balls away from the axes
        let mut rng = stream(8, "kappa-f", 0);
        for (n, r) in [(2usize, 3.0), (2, 1.5), (3, 2.5)] {
            let body = Body::lp_ball(n, r).unwrap();
            for _ in 0..30 {
                let u = random_direction(&mut rng, n);
                let rho = body.radial(&u);
                let mut x = [0.0; MAX_DIM];
                for i in 0..n {
                    x[i] = rho * u.coords()[i];
                }
                let kappa = lp_ball_boundary_curvature(n, r, &x[..n]).unwrap();
                let normal = lp_ball_normal(n, r, &x[..n]).unwrap();
                let f = body.curvature_function(&normal).unwrap();
                assert!(
                    (kappa * f - 1.0).abs() < 1e-8,
                    "n={n} r={r}: κ f = {} at {:?}",
                    kappa * f,
                    &x[..n]
                );
            }
        }
    }

    #[test]
    fn lp_ball_axis_point_has_flat_curvature_for_r_gt_2() {
        // x = e_1 on ∂B_3^2: the κ product contains |x_2|^{r-2} = 0
        let kappa = lp_ball_boundary_curvature(2, 3.0, &[1.0, 0.0]).unwrap();
        assert_eq!(kappa, 0.0);
        // the curvature function at that normal direction is +∞
        let body = Body::lp_ball(2, 3.0).unwrap();
        let f = body.curvature_function(&UnitDirection::axis(2, 0)).unwrap();
        assert!(f.is_infinite() && f > 0.0, "f = {f}");
        // r < 2: the formula is singular instead
        assert!(matches!(
            lp_ball_boundary_curvature(2, 1.5, &[1.0, 0.0]),
            Err(Error::UndefinedCurvature)
        ));
    }

    #[test]
    fn lp_ball_normal_formula_is_consistent() {
        let mut rng = stream(9, "normals", 0);
        for (n, r) in [(2usize, 3.0), (3, 1.5)] {
            let body = Body::lp_ball(n, r).unwrap();
            for _ in 0..30 {
                let u = random_direction(&mut rng, n);
                let rho = body.radial(&u);
                let mut x = [0.0; MAX_DIM];
                for i in 0..n {
                    x[i] = rho * u.coords()[i];
                }
                let nrm = lp_ball_normal(n, r, &x[..n]).unwrap();
                assert!((norm2(nrm.coords()) - 1.0).abs() < 1e-12);
                let h = body.support(&nrm);
                let xn = dot(&x[..n], nrm.coords());
                assert!((xn - h).abs() < 1e-8 * h, "⟨x,N⟩ = {xn} vs h = {h}");
            }
        }
    }

    #[test]
    fn fd_hessian_matches_analytic_curvature() {
        let mut rng = stream(10, "fd", 0);
        for (name, body) in catalog() {
            if body.smoothness() != Smoothness::C2Plus {
                continue;
            }
            for _ in 0..10 {
                let u = random_direction(&mut rng, body.dim());
                let fa = body.curvature_function(&u).unwrap();
                let fd = body.curvature_function_fd(&u).unwrap();
                assert!(
                    ((fa - fd) / fa).abs() < 1e-5,
                    "{name}: analytic {fa} vs fd {fd} at {:?}",
                    u.coords()
                );
            }
        }
    }

    #[test]
    fn volumes_match_closed_forms() {
        assert!((Body::ball(2).volume() - std::f64::consts::PI).abs() < 1e-14);
        assert!((Body::ball(4).volume() - std::f64::consts::PI.powi(2) / 2.0).abs() < 1e-13);
        // cross-polytope in R³: 2³/3! = 4/3
        assert!((Body::cross_polytope(3).volume() - 4.0 / 3.0).abs() < 1e-14);
        assert!((Body::cube(3).volume() - 8.0).abs() < 1e-12);
        // l_r polar volume product form equals the direct volume of B_{r'}
        for (n, r) in [(2usize, 3.0), (2, 1.5), (3, 3.0), (3, 5.0)] {
            let direct = lp_ball_volume(n, dual_exponent(r));
            let form = lp_ball_polar_volume(n, r).unwrap();
            assert!(
                ((direct - form) / direct).abs() < 1e-13,
                "n={n} r={r}: {direct} vs {form}"
            );
        }
    }

    #[test]
    fn linear_image_volume_scales_by_det() {
        let mut rng = stream(11, "detvol", 0);
        for _ in 0..20 {
            let t: Vec<Vec<f64>> = (0..2)
                .map(|_| (0..2).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
                .collect();
            let det = t[0][0] * t[1][1] - t[0][1] * t[1][0];
            if det.abs() < 0.1 {
                continue;
            }
            let body = Body::lp_ball(2, 3.0).unwrap().linear_image(&t).unwrap();
            let want = det.abs() * lp_ball_volume(2, 3.0);
            assert!(((body.volume() - want) / want).abs() < 1e-12);
        }
    }

    #[test]
    fn polar_round_trips() {
        for (name, body) in catalog() {
            let back = body.polar().unwrap().polar().unwrap();
            let mut rng = stream(12, "polar-rt", 0);
            for _ in 0..20 {
                let u = random_direction(&mut rng, body.dim());
                let a = body.support(&u);
                let b = back.support(&u);
                assert!(((a - b) / a).abs() < 1e-12, "{name}: polar twice changed h");
            }
        }
        // scaling: (λK)° = (1/λ)K°
        let k = Body::lp_ball(2, 3.0).unwrap();
        let lhs = k.scaled(2.5).unwrap().polar().unwrap();
        let rhs = k.polar().unwrap().scaled(1.0 / 2.5).unwrap();
        let u = UnitDirection::from_angle(0.77);
        assert!((lhs.support(&u) - rhs.support(&u)).abs() < 1e-14);
    }

    #[test]
    fn normalized_body_has_unit_volume() {
        for (name, body) in catalog() {
            let nb = body.normalized().unwrap();
            assert!((nb.volume() - 1.0).abs() < 1e-10, "{name}: volume {}", nb.volume());
        }
    }

    #[test]
    fn config_json_round_trip() {
        let body = Body::from_json(
            r#"{"kind": "normalized", "base": {"kind": "lp_ball", "n": 2, "r": 3.0}}"#,
        )
        .unwrap();
        assert!((body.volume() - 1.0).abs() < 1e-10);
        let e = Body::from_json(r#"{"kind": "ellipsoid", "matrix": [[2.0, 0.0], [0.0, 0.5]]}"#)
            .unwrap();
        assert!((e.volume() - std::f64::consts::PI).abs() < 1e-12);
        assert!(Body::from_json(r#"{"kind": "nonsense"}"#).is_err());
    }

    #[test]
    fn singular_angles_cover_axes() {
        let body = Body::lp_ball(2, 3.0).unwrap();
        let angles = body.singular_angles_2d();
        assert_eq!(angles.len(), 4, "axes give 4 angles, got {angles:?}");
        for want in [0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI] {
            assert!(
                angles.iter().any(|a| (a - want).abs() < 1e-9),
                "missing split at {want}: {angles:?}"
            );
        }
        assert!(Body::ball(2).singular_angles_2d().is_empty());
    }
}
