//! Double-double arithmetic: unevaluated sums `hi + lo` of two doubles,
//! giving ~31-32 significant decimal digits.
//!
//! This module exists for one consumer: the Beta/Gamma asymptotics, whose
//! acceptance checks need exact sides evaluated to >= 30 significant digits
//! so that `p^2 * residual` remains meaningful at `p = 2^14`. Everything
//! else in the crate is plain `f64`.
//!
//! The arithmetic kernels (`two_sum`, `two_prod` via FMA, renormalization)
//! are the standard error-free transforms; `exp` uses argument reduction by
//! `ln 2` plus 512-fold halving and a short Taylor series, `ln` is Newton's
//! iteration on `exp`, and `ln_gamma` shifts the argument to `x >= 64` and
//! sums a 20-term Stirling series. A tanh-sinh rule integrates smooth or
//! endpoint-singular functions on (0,1) at full double-double accuracy.

/// Unevaluated sum of two doubles, `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Requires |a| >= |b|.
#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn new(hi: f64, lo: f64) -> Dd {
        let (s, e) = two_sum(hi, lo);
        Dd { hi: s, lo: e }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    /// Exact scaling by a power of two.
    #[inline]
    pub fn mul_pwr2(self, k: f64) -> Dd {
        Dd { hi: self.hi * k, lo: self.lo * k }
    }

    #[inline]
    pub fn add_f64(self, b: f64) -> Dd {
        let (s1, s2) = two_sum(self.hi, b);
        let (hi, lo) = quick_two_sum(s1, s2 + self.lo);
        Dd { hi, lo }
    }

    #[inline]
    pub fn mul_f64(self, b: f64) -> Dd {
        let (p1, p2) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p1, p2 + self.lo * b);
        Dd { hi, lo }
    }

    /// Natural exponential.
    pub fn exp(self) -> Dd {
        if self.hi > 709.0 {
            return Dd::from_f64(f64::INFINITY);
        }
        if self.hi < -709.0 {
            return Dd::ZERO;
        }
        // e^x = 2^k * e^r, r = x - k ln2, then e^r = (e^(r/512))^512
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2.mul_f64(k)).mul_pwr2(1.0 / 512.0);
        // expm1 by Taylor: |r| <= ln2/1024, 12 terms reach ~1e-40
        let mut term = r;
        let mut sum = r;
        for i in 2..=12 {
            term = term * r / Dd::from_f64(i as f64);
            sum = sum + term;
        }
        // 9 squarings of s = e^u - 1 via s <- 2s + s^2
        let mut s = sum;
        for _ in 0..9 {
            s = s.mul_pwr2(2.0) + s * s;
        }
        let e = s.add_f64(1.0);
        let scale = (2.0f64).powi(k as i32);
        Dd { hi: e.hi * scale, lo: e.lo * scale }
    }

    /// Natural logarithm; requires a positive value.
    pub fn ln(self) -> Dd {
        assert!(self.hi > 0.0, "Dd::ln of non-positive value {self:?}");
        // Newton on exp: y <- y + x e^-y - 1, two steps from the f64 seed
        let mut y = Dd::from_f64(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Dd::ONE;
        }
        y
    }

    /// `self^p` for a positive base via exp(p ln self).
    pub fn powf(self, p: Dd) -> Dd {
        (p * self.ln()).exp()
    }

    pub fn sinh(self) -> Dd {
        let e = self.exp();
        (e - Dd::ONE / e).mul_pwr2(0.5)
    }

    pub fn cosh(self) -> Dd {
        let e = self.exp();
        (e + Dd::ONE / e).mul_pwr2(0.5)
    }

    /// Render with `sig` significant decimal digits (max 33).
    pub fn to_string_sig(self, sig: usize) -> String {
        let sig = sig.clamp(1, 33);
        if self.hi == 0.0 && self.lo == 0.0 {
            return "0".to_string();
        }
        if !self.hi.is_finite() {
            return format!("{}", self.hi);
        }
        let neg = self.hi < 0.0;
        let mut x = self.abs();
        // normalize into [1, 10)
        let mut e10: i32 = 0;
        let ten = Dd::from_f64(10.0);
        while x.hi >= 10.0 {
            x = x / ten;
            e10 += 1;
        }
        while x.hi < 1.0 {
            x = x * ten;
            e10 -= 1;
        }
        let mut digits = Vec::with_capacity(sig + 1);
        for _ in 0..=sig {
            let d = x.hi.floor();
            digits.push(d as i32);
            x = (x.add_f64(-d)) * ten;
        }
        // round by the guard digit, propagating carries
        if digits[sig] >= 5 {
            let mut i = sig as isize - 1;
            loop {
                if i < 0 {
                    digits.insert(0, 1);
                    e10 += 1;
                    break;
                }
                digits[i as usize] += 1;
                if digits[i as usize] < 10 {
                    break;
                }
                digits[i as usize] = 0;
                i -= 1;
            }
        }
        let mantissa: String = digits[..sig].iter().map(|d| (b'0' + *d as u8) as char).collect();
        let (first, rest) = mantissa.split_at(1);
        format!("{}{first}.{rest}e{e10}", if neg { "-" } else { "" })
    }

    /// Parse a decimal literal (`-1.2345e-6` style) into double-double.
    pub fn parse(s: &str) -> Option<Dd> {
        let s = s.trim();
        let (neg, s) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (mant, exp) = match s.find(['e', 'E']) {
            Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
            None => (s, 0),
        };
        let (int_part, frac_part) = match mant.find('.') {
            Some(i) => (&mant[..i], &mant[i + 1..]),
            None => (mant, ""),
        };
        let mut acc = Dd::ZERO;
        let ten = Dd::from_f64(10.0);
        for c in int_part.chars().chain(frac_part.chars()) {
            let d = c.to_digit(10)?;
            acc = acc * ten;
            acc = acc.add_f64(d as f64);
        }
        let mut scale = exp - frac_part.len() as i32;
        while scale > 0 {
            acc = acc * ten;
            scale -= 1;
        }
        while scale < 0 {
            acc = acc / ten;
            scale += 1;
        }
        Some(if neg { -acc } else { acc })
    }
}

impl std::ops::Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl std::ops::Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Dd { hi, lo }
    }
}

impl std::ops::Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl std::ops::Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, b.hi);
        let (hi, lo) = quick_two_sum(p1, p2 + self.hi * b.lo + self.lo * b.hi);
        Dd { hi, lo }
    }
}

impl std::ops::Div for Dd {
    type Output = Dd;
    #[inline]
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (s, e) = quick_two_sum(q1, q2);
        Dd::new(s, e + q3)
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Dd) -> Option<std::cmp::Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(std::cmp::Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            ord => ord,
        }
    }
}

pub const LN2: Dd = Dd { hi: 0.6931471805599453, lo: 2.3190468138462996e-17 };
pub const PI: Dd = Dd { hi: 3.141592653589793, lo: 1.2246467991473532e-16 };
pub const HALF_PI: Dd = Dd { hi: 1.5707963267948966, lo: 6.123233995736766e-17 };
const HALF_LN_TWO_PI: Dd = Dd { hi: 0.9189385332046728, lo: -3.8782941580672414e-17 };

/// Stirling-series coefficients B_2k/(2k(2k-1)), k = 1..20.
const STIRLING_DD: [Dd; 20] = [
    Dd { hi: 0.08333333333333333, lo: 4.625929269271485e-18 },
    Dd { hi: -0.002777777777777778, lo: 1.0601087908747154e-19 },
    Dd { hi: 0.0007936507936507937, lo: 6.883823317368282e-22 },
    Dd { hi: -0.0005952380952380953, lo: 5.36938218754726e-20 },
    Dd { hi: 0.0008417508417508417, lo: 3.6870174889237694e-20 },
    Dd { hi: -0.0019175269175269176, lo: 1.0675702776872475e-19 },
    Dd { hi: 0.00641025641025641, lo: 2.2240044563805217e-19 },
    Dd { hi: -0.029550653594771242, lo: 4.861760957508855e-19 },
    Dd { hi: 0.17964437236883057, lo: -6.401600482710946e-19 },
    Dd { hi: -1.3924322169059011, lo: 1.5837056989230303e-17 },
    Dd { hi: 13.402864044168393, lo: -6.154114101993966e-16 },
    Dd { hi: -156.84828462600203, lo: 9.391823141715389e-15 },
    Dd { hi: 2193.1033333333335, lo: -1.3339255626002948e-13 },
    Dd { hi: -36108.77125372499, lo: 5.897583353514365e-13 },
    Dd { hi: 691472.268851313, lo: 2.5585296305158e-11 },
    Dd { hi: -15238221.539407415, lo: -8.76774522490625e-10 },
    Dd { hi: 382900751.39141417, lo: -2.4082684757733585e-08 },
    Dd { hi: -10882266035.784391, lo: 3.141830930219749e-07 },
    Dd { hi: 347320283765.00226, lo: -6.048528997747748e-06 },
    Dd { hi: -12369602142269.275, lo: 0.0009363732896507286 },
];

/// ln Gamma in double-double for positive arguments.
///
/// Shifts the argument to `x >= 64` by the recurrence and sums the Stirling
/// series; at the shift threshold the k = 20 term is below 1e-57, so the
/// series truncation is far below the double-double rounding floor.
pub fn ln_gamma_dd(x: Dd) -> Dd {
    assert!(x.hi > 0.0, "ln_gamma_dd requires x > 0");
    let mut shift = Dd::ZERO;
    let mut y = x;
    while y.hi < 64.0 {
        shift = shift + y.ln();
        y = y.add_f64(1.0);
    }
    let ln_y = y.ln();
    let inv = Dd::ONE / y;
    let inv2 = inv * inv;
    let mut series = Dd::ZERO;
    let mut pw = inv;
    for c in STIRLING_DD {
        series = series + c * pw;
        pw = pw * inv2;
    }
    (y - Dd::from_f64(0.5)) * ln_y - y + HALF_LN_TWO_PI + series - shift
}

/// ln B(a, b) in double-double.
pub fn ln_beta_dd(a: Dd, b: Dd) -> Dd {
    ln_gamma_dd(a) + ln_gamma_dd(b) - ln_gamma_dd(a + b)
}

/// Tanh-sinh quadrature of `f` over (0, 1) in double-double.
///
/// The integrand receives `(t, 1 - t)` with both arguments accurate to
/// double-double precision near their respective endpoints, so integrable
/// endpoint singularities in either variable are handled without
/// cancellation. Levels halve the step until two successive levels agree to
/// `tol` (relative) or level 10 is reached; returns `(value, |last delta|)`.
pub fn tanh_sinh_01<F: Fn(Dd, Dd) -> Dd>(f: F, tol: f64) -> (Dd, f64) {
    // g = (pi/2) sinh(u); t = 1/(1 + e^(-2g)); 1-t = 1/(1 + e^(2g));
    // dt/du = (pi/2) cosh(u) / (2 cosh^2 g)
    let eval = |u: f64| -> Dd {
        let ud = Dd::from_f64(u);
        let g = HALF_PI * ud.sinh();
        let e2g = g.mul_pwr2(2.0).exp();
        let t = Dd::ONE / (Dd::ONE / e2g + Dd::ONE);
        let omt = Dd::ONE / (e2g + Dd::ONE);
        let sech2 = {
            let c = g.cosh();
            Dd::ONE / (c * c)
        };
        let w = HALF_PI * ud.cosh() * sech2.mul_pwr2(0.5);
        w * f(t, omt)
    };
    const U_MAX: f64 = 6.1;
    let mut h = 1.0;
    // level 0: u = 0, +-1, +-2, ...
    let mut sum = eval(0.0);
    let mut k = 1.0;
    while k * h <= U_MAX {
        sum = sum + eval(k * h) + eval(-k * h);
        k += 1.0;
    }
    let mut value = sum.mul_pwr2(h);
    let mut delta = f64::INFINITY;
    for _level in 1..=10 {
        h *= 0.5;
        // new nodes: odd multiples of h
        let mut k = 1.0;
        while k * h <= U_MAX {
            sum = sum + eval(k * h) + eval(-k * h);
            k += 2.0;
        }
        let next = sum.mul_pwr2(h);
        delta = (next - value).abs().to_f64();
        value = next;
        if delta <= tol * value.abs().to_f64().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    (value, delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(got: Dd, want: &str, rel: f64, what: &str) {
        let w = Dd::parse(want).unwrap();
        let err = ((got - w).abs() / w.abs()).to_f64();
        assert!(err < rel, "{what}: got {}, want {want}, rel err {err:e}", got.to_string_sig(33));
    }

    #[test]
    fn arithmetic_identities() {
        let a = Dd::from_f64(1.0) / Dd::from_f64(3.0);
        let b = a.mul_f64(3.0).add_f64(-1.0);
        assert!(b.abs().to_f64() < 1e-31, "1/3*3-1 = {b:?}");
        let c = Dd::from_f64(2.0).powf(Dd::from_f64(0.5));
        let d = c * c - Dd::from_f64(2.0);
        assert!(d.abs().to_f64() < 1e-30, "sqrt2^2-2 = {d:?}");
    }

    #[test]
    fn exp_and_ln_reference_values() {
        assert_close(
            Dd::ONE.exp(),
            "2.718281828459045235360287471352662497757",
            1e-30,
            "exp(1)",
        );
        assert_close(
            Dd::from_f64(-20.25).exp(),
            "1.605228055185611608653934309109539657171e-9",
            1e-30,
            "exp(-20.25)",
        );
        assert_close(
            Dd::from_f64(3.0).ln(),
            "1.098612288668109691395245236922525704647",
            1e-30,
            "ln(3)",
        );
        // round trip across magnitudes
        for &x in &[1e-8, 0.3, 1.0 + 1e-14, 42.0, 3e11] {
            let r = Dd::from_f64(x).ln().exp().add_f64(-x);
            assert!((r.to_f64() / x).abs() < 1e-29, "exp(ln({x})) off by {r:?}");
        }
    }

    #[test]
    fn ln_gamma_reference_values() {
        assert_close(
            ln_gamma_dd(Dd::from_f64(0.75)),
            "0.2032809514312953714814329718624296997597",
            1e-29,
            "lgamma(0.75)",
        );
        assert_close(
            ln_gamma_dd(Dd::from_f64(10.5)),
            "13.9406252194037636331612378879718494798",
            1e-29,
            "lgamma(10.5)",
        );
        assert_close(
            ln_gamma_dd(Dd::from_f64(16385.0)),
            "142613.0986620014026029964758372850362029",
            1e-28,
            "lgamma(16385)",
        );
        // recurrence: lgamma(x+1) - lgamma(x) = ln x
        for &x in &[0.8, 3.25, 77.0] {
            let d = ln_gamma_dd(Dd::from_f64(x + 1.0)) - ln_gamma_dd(Dd::from_f64(x))
                - Dd::from_f64(x).ln();
            assert!(d.abs().to_f64() < 1e-28, "recurrence at {x}: {d:?}");
        }
    }

    #[test]
    fn string_round_trip() {
        let x = Dd::parse("-4.712388980384689857693965074919254326296e-1").unwrap();
        let s = x.to_string_sig(33);
        let y = Dd::parse(&s).unwrap();
        assert!(((x - y).abs() / x.abs()).to_f64() < 1e-31, "{s}");
    }

    #[test]
    fn tanh_sinh_smooth_and_singular() {
        // smooth: int_0^1 t^100 dt = 1/101
        let (v, _) = tanh_sinh_01(|t, _| t.powf(Dd::from_f64(100.0)), 1e-31);
        let want = Dd::ONE / Dd::from_f64(101.0);
        assert!(
            ((v - want).abs() / want).to_f64() < 1e-28,
            "t^100: {} vs {}",
            v.to_string_sig(33),
            want.to_string_sig(33)
        );
        // endpoint-singular: int_0^1 dt / (2 sqrt(1-t)) = 1
        let (v, _) = tanh_sinh_01(
            |_, omt| Dd::from_f64(0.5) * omt.powf(Dd::from_f64(-0.5)),
            1e-31,
        );
        assert!((v.add_f64(-1.0)).abs().to_f64() < 1e-28, "sqrt singularity: {}", v.to_string_sig(33));
        // sharp interior peak: int_0^1 t^p (1-t) dt = B(p+1, 2) at p = 2^14
        let p = 16384.0;
        let (v, _) = tanh_sinh_01(|t, omt| t.powf(Dd::from_f64(p)) * omt, 1e-31);
        let want = (ln_beta_dd(Dd::from_f64(p + 1.0), Dd::from_f64(2.0))).exp();
        assert!(
            ((v - want).abs() / want).to_f64() < 1e-27,
            "beta spike: {} vs {}",
            v.to_string_sig(33),
            want.to_string_sig(33)
        );
    }
}
