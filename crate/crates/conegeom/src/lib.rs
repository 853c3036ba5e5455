//! Numerical convex geometry for smooth origin-symmetric bodies.
//!
//! The crate evaluates the classical functionals of a convex body `K` in
//! `R^n` — support function `h_K`, radial function `rho_K`, curvature
//! function `f_K`, volumes of `K` and its polar `K°` — and builds on them to
//! compute a scale of curvature integrals
//!
//! ```text
//! as_p(K) = ∫_{S^{n-1}} f_K(u)^{n/(n+p)} / h_K(u)^{n(p-1)/(n+p)} dσ(u)
//! ```
//!
//! together with the affine invariant
//!
//! ```text
//! Ω_K = lim_{p→∞} ( as_p(K) / (n|K°|) )^{n+p},
//! ```
//!
//! which the library computes by several independent routes and cross-checks:
//!
//! | route                   | entry point                       |
//! |-------------------------|-----------------------------------|
//! | entropy integral on `K` | [`omega::omega_entropy`]          |
//! | entropy integral on `K°`| [`omega::omega_entropy_dual`]     |
//! | large-`p` extrapolation | [`omega::omega_p_limit`]          |
//! | small-`q` polar route   | [`omega::omega_dual_p_limit`]     |
//! | digamma closed form     | [`omega::omega_lp_closed_form`]   |
//! | centroid-body asymptotics | [`centroid::theorem1_second_limit`] |
//!
//! Supporting machinery: relative entropies of the two natural boundary
//! measures ([`entropy`]), `L_p` centroid bodies, floating bodies and
//! section-function derivatives ([`centroid`]), adaptive spherical quadrature
//! with singularity-aware panel splitting ([`quadrature`]), extended-precision
//! Beta/Gamma asymptotics ([`asymptotics`]), and a small closed-form catalog
//! of bodies (`l_r` balls, ellipsoids, cubes, cross-polytopes) in [`body`].
//!
//! # What can go wrong
//!
//! * `l_r` balls with `r ≠ 2` have curvature singularities on the coordinate
//!   hyperplanes. Every integrator here accepts explicit split hints so the
//!   singular directions are panel endpoints, never interior nodes.
//! * Quantities defined through limits (`Ω` by extrapolation) carry a fitted
//!   model whose residual is reported; a large residual flags the fit as
//!   unreliable rather than silently returning the intercept.
//! * Polytopes have zero curvature almost everywhere: `as_p = 0` for `p > 0`
//!   and `Ω = 0` exactly. Operations that require positive curvature return
//!   [`Error::NonSmoothBody`] instead of integrating garbage.
//!
//! Determinism: all summation is compensated and order-fixed, Monte Carlo
//! streams are keyed by `(seed, experiment, stream)`, and repeated runs
//! reproduce results bit for bit.

pub mod affine;
pub mod asymptotics;
pub mod body;
pub mod centroid;
pub mod dd;
pub mod entropy;
mod error;
pub mod linalg;
pub mod omega;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod tol;

pub use body::{Body, BoundaryPoint, Smoothness, UnitDirection};
pub use error::{Error, Result};
