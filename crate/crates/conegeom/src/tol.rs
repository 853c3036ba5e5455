//! Centralized numeric tolerances with the reasoning behind each value.
//!
//! These are defaults; integration entry points accept explicit tolerances
//! where a caller needs tighter or looser behavior.

/// Unit directions are renormalized on construction to this norm defect.
pub const DIRECTION_NORM: f64 = 1e-14;

/// A curvature function value at or below this is treated as a flat spot and
/// poisons smooth-body operations with an explicit error. Well below any
/// genuine curvature of the catalog bodies away from their singular sets.
pub const FLAT_CURVATURE: f64 = 1e-12;

/// Curvature integrals refuse exponents within this distance of p = -n,
/// where the defining exponents blow up, rather than extrapolate.
pub const EXPONENT_GUARD: f64 = 1e-3;

/// Default absolute tolerance for deterministic sphere quadrature, n <= 3.
pub const SPHERE_TOL: f64 = 1e-10;

/// Adaptive panels shorter than this are frozen instead of refined. Panels
/// adjacent to a marked singular endpoint shrink geometrically, so this floor
/// bounds the unresolved tail mass of an integrable log singularity by about
/// `floor * ln(1/floor)` ~ 3e-12 per singular point, below every acceptance
/// tolerance used downstream.
pub const MIN_PANEL: f64 = 1e-13;

/// Hard cap on adaptive panel count per 1-D integral.
pub const MAX_PANELS: usize = 4000;

/// Relative agreement required of a boundary point claimed to lie on a body.
pub const ON_BOUNDARY: f64 = 1e-10;

/// Volume defect accepted by operations that require a volume-1 body.
pub const UNIT_VOLUME: f64 = 1e-8;

/// Extrapolation fits are flagged unreliable when the max absolute deviation
/// exceeds `FIT_FRACTION * |limit| + FIT_FLOOR`. The fraction is loose: the
/// pinned 3-term models carry structural misfit terms of relative size ~1e-3
/// on doubling grids, far below this, while a wrong model blows well past it.
/// The floor absorbs quadrature noise on flat sample sets: limit exponents
/// scale a ~1e-11 relative integral error by p up to 2^14, so noise-limited
/// samples sit near 1e-7 even when the true limit is 0.
pub const FIT_FRACTION: f64 = 0.05;
pub const FIT_FLOOR: f64 = 1e-6;

/// Default Monte Carlo budget.
pub const MC_SAMPLES: u64 = 10_000_000;

/// Step used by the finite-difference support Hessian fallback, relative to
/// the support value; Richardson-extrapolated once.
pub const FD_HESSIAN_STEP: f64 = 1e-4;
