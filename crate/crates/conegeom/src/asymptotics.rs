//! Large-exponent expansions and limit extrapolation.
//!
//! Two jobs live here. First, pinned basis sets for least-squares limit
//! extraction: quantities like `(n+p) log(as_p / (n|K°|))` converge to their
//! limit with known correction shapes (`log p / p`, `1/p`, powers of
//! `1/log p`), so fitting the matching basis on a geometric grid and reading
//! the constant term recovers the limit far more accurately than the last
//! sample. Second, high-precision verification data for the Beta-integral
//! expansion
//!
//! ```text
//! (B(p+1, (n+1)/2))^{n/p}
//!   = 1 - (n(n+1)/2) log p / p + n log Γ((n+1)/2) / p + O(log²p / p²)
//! ```
//!
//! including its weighted generalization with the factor
//! `(1 - a(1-u))^{(n-1)/2}` in the integrand. Exact values are computed in
//! double-double arithmetic (log-gamma closed form when the weight is absent,
//! tanh-sinh integration otherwise) so that the `p^{-2}`-order agreement of
//! the expansion is measurable: residuals sit near `p^{-2} log²p`, far below
//! f64 noise on the exact side.

use crate::dd::{ln_beta_dd, tanh_sinh_01, Dd};
use crate::error::{Error, Result};
use crate::linalg::lstsq;
use crate::special::ln_gamma;
use crate::tol;
use serde::Serialize;

/// Correction-shape menu for limit fits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitModel {
    /// a + b log p / p + c / p: limits of (n+p) log(as_p / (n|K°|)).
    PLimit,
    /// a + b / log p: slowly converging first-order quantities.
    InvLog,
    /// a + b / log p + c log p / p: the polar-volume deficit rate.
    Theorem1First,
    /// a + b log²p / p + c log p / p + d / p: the second-order deficit.
    Theorem1Second,
    /// a + b q + c q²: small-exponent limits q → 0⁺.
    SmallQ,
}

impl FitModel {
    pub fn name(self) -> &'static str {
        match self {
            FitModel::PLimit => "p_limit",
            FitModel::InvLog => "inv_log",
            FitModel::Theorem1First => "theorem1_first",
            FitModel::Theorem1Second => "theorem1_second",
            FitModel::SmallQ => "small_q",
        }
    }

    /// Basis functions at abscissa p; the constant comes first, so the
    /// fitted limit is always the leading coefficient.
    pub fn basis(self, p: f64) -> Vec<f64> {
        let lp = p.ln();
        match self {
            FitModel::PLimit => vec![1.0, lp / p, 1.0 / p],
            FitModel::InvLog => vec![1.0, 1.0 / lp],
            FitModel::Theorem1First => vec![1.0, 1.0 / lp, lp / p],
            FitModel::Theorem1Second => vec![1.0, lp * lp / p, lp / p, 1.0 / p],
            FitModel::SmallQ => vec![1.0, p, p * p],
        }
    }

    pub fn arity(self) -> usize {
        match self {
            FitModel::InvLog => 2,
            FitModel::Theorem1Second => 4,
            _ => 3,
        }
    }
}

/// A fitted limit with its evidence.
#[derive(Clone, Debug, Serialize)]
pub struct LimitFit {
    pub model: &'static str,
    pub grid: Vec<f64>,
    pub samples: Vec<f64>,
    pub coefficients: Vec<f64>,
    /// The constant term: the extrapolated limit.
    pub limit: f64,
    /// Max absolute deviation of the fit at the sample points.
    pub fit_residual: f64,
}

/// Least-squares limit extraction on (grid, samples) under the given model.
///
/// Fails with `FitUnreliable` when the residual exceeds
/// `FIT_FRACTION · |limit| + FIT_FLOOR`: the model shape does not describe
/// the data, so the constant term is not evidence of a limit.
pub fn fit_limit(grid: &[f64], samples: &[f64], model: FitModel) -> Result<LimitFit> {
    if grid.len() != samples.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: samples.len() });
    }
    let need = model.arity().max(3) + 1;
    if grid.len() < need {
        return Err(Error::OutOfRange(format!(
            "{} fit needs at least {need} samples, got {}",
            model.name(),
            grid.len()
        )));
    }
    let rows: Vec<Vec<f64>> = grid.iter().map(|&p| model.basis(p)).collect();
    let row_refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    let coefficients = lstsq(&row_refs, samples).ok_or(Error::SingularMatrix(0.0))?;
    let mut fit_residual = 0.0f64;
    for (row, &y) in rows.iter().zip(samples) {
        let pred: f64 = row.iter().zip(&coefficients).map(|(b, c)| b * c).sum();
        fit_residual = fit_residual.max((pred - y).abs());
    }
    let limit = coefficients[0];
    let threshold = tol::FIT_FRACTION * limit.abs() + tol::FIT_FLOOR;
    if fit_residual > threshold {
        return Err(Error::FitUnreliable { residual: fit_residual, threshold });
    }
    Ok(LimitFit {
        model: model.name(),
        grid: grid.to_vec(),
        samples: samples.to_vec(),
        coefficients,
        limit,
        fit_residual,
    })
}

/// Geometric exponent grid 2^4, 2^5, …, 2^14.
pub fn default_p_grid() -> Vec<f64> {
    (4..=14).map(|k| (1u64 << k) as f64).collect()
}

/// The reciprocal grid q = n²/p over [`default_p_grid`].
pub fn mirrored_q_grid(n: usize) -> Vec<f64> {
    default_p_grid().iter().map(|p| (n * n) as f64 / p).collect()
}

/// Truncated grid 2^8, …, 2^14 for limits whose early samples are still
/// outside the asymptotic regime.
pub fn late_p_grid() -> Vec<f64> {
    (8..=14).map(|k| (1u64 << k) as f64).collect()
}

/// (B(p+1, (n+1)/2))^{n/p} to double-double accuracy.
pub fn beta_power_exact(n: usize, p: f64) -> Dd {
    let y = Dd::from_f64((n as f64 + 1.0) / 2.0);
    let lnb = ln_beta_dd(Dd::from_f64(p).add_f64(1.0), y);
    (lnb.mul_f64(n as f64) / Dd::from_f64(p)).exp()
}

/// Large-p expansion of [`beta_power_exact`] and its weighted variant,
/// complete through order 1/p²; the omitted terms are O(log³p / p³).
pub fn beta_power_expansion(n: usize, p: f64, a: f64) -> f64 {
    let nf = n as f64;
    let lp = p.ln();
    let g = ln_gamma((nf + 1.0) / 2.0);
    let bracket = nf * g * g
        - (nf + 1.0) * (nf + 3.0) / 4.0
        - (nf + 1.0) * ((nf - 1.0) / 2.0) * a;
    1.0 - (nf * (nf + 1.0) / 2.0) * lp / p + nf * g / p
        + (nf * nf * (nf + 1.0) * (nf + 1.0) / 8.0) * lp * lp / (p * p)
        - (nf * nf * (nf + 1.0) / 2.0) * g * lp / (p * p)
        + (nf / (2.0 * p * p)) * bracket
}

/// (∫₀¹ u^p (1-u)^{(n-1)/2} (1 - a(1-u))^{(n-1)/2} du)^{n/p} by tanh-sinh
/// integration in double-double arithmetic. `a ∈ [0, 1]`.
pub fn weighted_beta_exact(n: usize, p: f64, a: f64) -> Dd {
    assert!((0.0..=1.0).contains(&a), "weight parameter {a} outside [0, 1]");
    let half = (n as f64 - 1.0) / 2.0;
    let pd = Dd::from_f64(p);
    let (integral, _) = tanh_sinh_01(
        |t, omt| {
            if t.hi <= 0.0 || omt.hi <= 0.0 {
                return Dd::ZERO;
            }
            let up = (t.ln() * pd).exp();
            let wfac = if omt.hi >= 1.0 && a == 1.0 {
                // 1 - a(1-u) = t here; avoid the cancelled form
                t.powf(Dd::from_f64(half))
            } else {
                (Dd::ONE - omt.mul_f64(a)).powf(Dd::from_f64(half))
            };
            up * omt.powf(Dd::from_f64(half)) * wfac
        },
        1e-32,
    );
    (integral.ln().mul_f64(n as f64) / pd).exp()
}

/// Binomial-series evaluation of the weighted Beta integral:
/// Σ_k C((n-1)/2, k) (-a)^k B(p+1, (n+1)/2 + k), independent of the
/// tanh-sinh route.
pub fn weighted_beta_series(n: usize, p: f64, a: f64) -> Dd {
    let s = (n as f64 - 1.0) / 2.0;
    let y = (n as f64 + 1.0) / 2.0;
    let pd = Dd::from_f64(p).add_f64(1.0);
    let mut coef = Dd::ONE;
    let mut sum = Dd::ZERO;
    for k in 0..2000 {
        let kf = k as f64;
        if k > 0 {
            // C(s, k) = C(s, k-1) · (s - k + 1)/k, folded with the -a power
            coef = coef.mul_f64((s - kf + 1.0) / kf).mul_f64(-a);
            if coef.hi == 0.0 {
                break;
            }
        }
        let term = coef * ln_beta_dd(pd, Dd::from_f64(y + kf)).exp();
        sum = sum + term;
        if term.abs().hi < 1e-36 * sum.abs().hi.max(1e-300) {
            break;
        }
    }
    (sum.ln().mul_f64(n as f64) / Dd::from_f64(p)).exp()
}

/// Stirling approximation with three correction terms past the leading one:
/// √(2π/x) (x/e)^x [1 + 1/(12x) + 1/(288x²) - 139/(51840x³)], valid x ≥ 8.
pub fn stirling_terms(x: f64) -> Result<f64> {
    if x < 8.0 {
        return Err(Error::OutOfRange(format!(
            "stirling_terms needs x ≥ 8 for its stated accuracy, got {x}"
        )));
    }
    let bracket = 1.0 + 1.0 / (12.0 * x) + 1.0 / (288.0 * x * x)
        - 139.0 / (51840.0 * x * x * x);
    Ok((2.0 * std::f64::consts::PI / x).sqrt() * (x / std::f64::consts::E).powf(x) * bracket)
}

/// One row of the expansion-accuracy table.
#[derive(Clone, Debug)]
pub struct ExpansionResult {
    pub n: usize,
    pub a: f64,
    pub p: f64,
    pub exact: Dd,
    pub expansion: f64,
    pub residual: f64,
    pub p2_residual: f64,
}

/// Exact value, expansion, and residual at one (n, a, p).
pub fn expansion_row(n: usize, a: f64, p: f64) -> ExpansionResult {
    let exact = if a == 0.0 {
        beta_power_exact(n, p)
    } else {
        weighted_beta_exact(n, p, a)
    };
    let expansion = beta_power_expansion(n, p, a);
    let residual = (exact - Dd::from_f64(expansion)).to_f64().abs();
    ExpansionResult { n, a, p, exact, expansion, residual, p2_residual: p * p * residual }
}
