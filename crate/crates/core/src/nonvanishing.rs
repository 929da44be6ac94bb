//! Beta-distribution medians and the non-vanishing thresholds for the
//! averaged model functions `P f_{k,m}`: the series is not identically
//! zero on level-`N` principal-congruence covers once
//! `N > 4 M^{1/2} / (1 - M)` with `M = M(k/2+1, m/2-1)` the beta median.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::group::HalfWeight;
use crate::Result;

/// Beta distribution parameters; the threshold uses `a = k/2 + 1`,
/// `b = m/2 - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
}

impl BetaParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::BadParameter {
                name: "a/b",
                why: format!("beta parameters must be positive, got ({a}, {b})"),
            });
        }
        Ok(Self { a, b })
    }

    pub fn for_threshold(k: u32, m: HalfWeight) -> Result<Self> {
        Self::new(k as f64 / 2.0 + 1.0, m.m() / 2.0 - 1.0)
    }
}

/// `ln B(a,b) = ln Γ(a) + ln Γ(b) - ln Γ(a+b)`.
fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Lanczos log-gamma (g = 7, 9 terms); |rel err| < 1e-13 on the positive axis.
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx).
        return std::f64::consts::PI.ln()
            - (std::f64::consts::PI * x).sin().abs().ln()
            - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete beta `I_x(a, b)`, by the modified Lentz
/// continued fraction with the symmetric-argument switch at
/// `x = (a+1)/(a+b+2)`.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::BadParameter {
            name: "a/b",
            why: format!("need positive parameters, got ({a}, {b})"),
        });
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("x = {x} outside [0, 1]")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let front = (a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b)).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_cf(x, a, b) / a)
    } else {
        let front_sym = (b * (1.0 - x).ln() + a * x.ln() - ln_beta(b, a)).exp();
        Ok(1.0 - front_sym * beta_cf(1.0 - x, b, a) / b)
    }
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-30;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for i in 1..=300 {
        let m = i as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Median of the beta distribution with the bisection bracket
/// `(lo, hi)` that certifies `I_lo < 1/2 < I_hi` within `tol`.
pub fn beta_median_bracketed(a: f64, b: f64, tol: f64) -> Result<(f64, f64, f64)> {
    BetaParams::new(a, b)?;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    // I_x - 1/2 is strictly increasing with a sign change on (0, 1);
    // bisection cannot fail.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = reg_inc_beta(mid, a, b)?;
        if v < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < tol && (reg_inc_beta(0.5 * (lo + hi), a, b)? - 0.5).abs() < tol {
            break;
        }
    }
    Ok((0.5 * (lo + hi), lo, hi))
}

/// Median `M(a, b)` of the beta distribution.
pub fn beta_median(a: f64, b: f64, tol: f64) -> Result<f64> {
    Ok(beta_median_bracketed(a, b, tol)?.0)
}

/// Non-vanishing threshold `4 M^{1/2} / (1 - M)` with
/// `M = M(k/2+1, m/2-1)`: the series `P f_{k,m}` on a level-`N`
/// principal-congruence cover is nonzero once `N` exceeds this.
pub fn threshold(k: u32, m: HalfWeight) -> Result<f64> {
    let p = BetaParams::for_threshold(k, m)?;
    let med = beta_median(p.a, p.b, 1e-15)?;
    Ok(4.0 * med.sqrt() / (1.0 - med))
}

/// Closed form of [`threshold`] at `k = 0`:
/// `4 · 2^{1/(m-2)} √(4^{1/(m-2)} - 1)` (from `M(1,b) = 1 - 2^{-1/b}`).
pub fn threshold_closed_form_k0(m: HalfWeight) -> f64 {
    let e = 1.0 / (m.m() - 2.0);
    4.0 * 2f64.powf(e) * (4f64.powf(e) - 1.0).sqrt()
}

/// Verdict of the closed-form non-vanishing cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseVerdict {
    /// Which closed-form case fired (1-based), if any. Case 2 requires
    /// the integer weight m = 4 and can never fire for half-integral
    /// weights; it is evaluated verbatim and stays unreachable.
    pub applicable_case: Option<u8>,
    pub nonvanishing_guaranteed: bool,
    /// The sharp threshold from the beta median, for cross-checking.
    pub median_threshold: f64,
}

/// Closed-form non-vanishing cases for `P f_{k,m}` at level `N`:
///
/// 1. `k = 0` and `N > 4·2^{1/(m-2)}·√(4^{1/(m-2)} - 1)`
/// 2. `m = 4` and `N > 4 / (2^{1/(k+2)} - 2^{-1/(k+2)})`
/// 3. `0 < k ≤ m-4` and `N ≥ 4√((k+2)/(m-2)·(1 + (k+2)/(m-2)))`
/// 4. `0 < m-4 ≤ k` and `N ≥ 4√(k/(m-4)·(1 + k/(m-4)))`
///
/// Whenever a case fires, the median inequality holds as well (the cases
/// are derived from it); callers may assert that via `median_threshold`.
pub fn corollary_cases(k: u32, m: HalfWeight, level: i64) -> Result<CaseVerdict> {
    if level < 1 {
        return Err(Error::BadParameter {
            name: "level",
            why: "need N >= 1".into(),
        });
    }
    let n = level as f64;
    let mf = m.m();
    let kf = k as f64;
    let median_threshold = threshold(k, m)?;

    let case = if k == 0 && n > threshold_closed_form_k0(m) {
        Some(1)
    } else if mf == 4.0 {
        // Unreachable for odd 2m; kept verbatim.
        let e = 1.0 / (kf + 2.0);
        if n > 4.0 / (2f64.powf(e) - 2f64.powf(-e)) {
            Some(2)
        } else {
            None
        }
    } else if k > 0 && kf <= mf - 4.0 {
        let r = (kf + 2.0) / (mf - 2.0);
        if n >= 4.0 * (r * (1.0 + r)).sqrt() {
            Some(3)
        } else {
            None
        }
    } else if k > 0 && mf - 4.0 > 0.0 && mf - 4.0 <= kf {
        let r = kf / (mf - 4.0);
        if n >= 4.0 * (r * (1.0 + r)).sqrt() {
            Some(4)
        } else {
            None
        }
    } else {
        None
    };
    Ok(CaseVerdict {
        applicable_case: case,
        nonvanishing_guaranteed: case.is_some(),
        median_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hw(two_m: i64) -> HalfWeight {
        HalfWeight::new(two_m).unwrap()
    }

    /// Adaptive Simpson quadrature of t^{a-1}(1-t)^{b-1} as the
    /// independent oracle for the continued fraction.
    fn inc_beta_quadrature(x: f64, a: f64, b: f64) -> f64 {
        fn simpson<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, n: usize) -> f64 {
            let h = (hi - lo) / n as f64;
            let mut acc = 0.0;
            for i in 0..=n {
                let w = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                acc += w * f(lo + i as f64 * h);
            }
            acc * h / 3.0
        }
        // t = u⁴ (resp. 1-t = v⁴) tames the endpoint singularities for
        // all parameters a, b ≥ 1/4; the integrands are written in
        // exponent form so 1-v⁴ never collapses to 1 near v = 0.
        let g = |u: f64| 4.0 * u.powf(4.0 * a - 1.0) * (1.0 - u.powi(4)).powf(b - 1.0);
        let g2 = |v: f64| 4.0 * v.powf(4.0 * b - 1.0) * (1.0 - v.powi(4)).powf(a - 1.0);
        let num = if x <= 0.5 {
            simpson(&g, 0.0, x.powf(0.25), 40_000)
        } else {
            simpson(&g, 0.0, (0.5f64).powf(0.25), 40_000)
                + (simpson(&g2, 0.0, (0.5f64).powf(0.25), 40_000)
                    - simpson(&g2, 0.0, (1.0 - x).powf(0.25), 40_000))
        };
        let den = simpson(&g, 0.0, (0.5f64).powf(0.25), 40_000)
            + simpson(&g2, 0.0, (0.5f64).powf(0.25), 40_000);
        num / den
    }

    #[test]
    fn reg_inc_beta_endpoints_and_pins() {
        assert_eq!(reg_inc_beta(0.0, 2.0, 3.0).unwrap(), 0.0);
        assert_eq!(reg_inc_beta(1.0, 2.0, 3.0).unwrap(), 1.0);
        // I_x(1, b) = 1 - (1-x)^b.
        for (x, b) in [(0.3, 0.25), (0.7, 2.5), (0.5, 4.0)] {
            let v = reg_inc_beta(x, 1.0, b).unwrap();
            let closed = 1.0 - (1.0f64 - x).powf(b);
            assert!((v - closed).abs() < 1e-13, "x={x} b={b}");
        }
        // Symmetry point: I_{1/2}(2, 2) = 1/2.
        assert!((reg_inc_beta(0.5, 2.0, 2.0).unwrap() - 0.5).abs() < 1e-14);
        assert!(reg_inc_beta(-0.1, 1.0, 1.0).is_err());
        assert!(reg_inc_beta(0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn reg_inc_beta_matches_quadrature() {
        for (x, a, b) in [
            (0.25, 1.0, 0.25),
            (0.6, 2.5, 1.25),
            (0.9375, 1.0, 0.25),
            (0.42, 1.5, 0.75),
        ] {
            let cf = reg_inc_beta(x, a, b).unwrap();
            let quad = inc_beta_quadrature(x, a, b);
            assert!((cf - quad).abs() < 1e-9, "x={x} a={a} b={b} cf={cf} quad={quad}");
        }
    }

    proptest! {
        #[test]
        fn reg_inc_beta_monotone(a in 0.3f64..5.0, b in 0.2f64..5.0, lo in 0.02f64..0.8) {
            let hi = lo + 0.1;
            let vlo = reg_inc_beta(lo, a, b).unwrap();
            let vhi = reg_inc_beta(hi, a, b).unwrap();
            prop_assert!(vhi > vlo);
        }
    }

    #[test]
    fn beta_median_pins() {
        assert!((beta_median(1.0, 1.0, 1e-14).unwrap() - 0.5).abs() < 1e-13);
        assert!((beta_median(3.7, 3.7, 1e-14).unwrap() - 0.5).abs() < 1e-12);
        // M(1, 1/4) = 1 - 2^{-4} = 0.9375 from the closed form.
        assert!((beta_median(1.0, 0.25, 1e-14).unwrap() - 0.9375).abs() < 1e-12);
    }

    #[test]
    fn beta_median_bracket_certificate() {
        let (m, lo, hi) = beta_median_bracketed(2.3, 0.9, 1e-13).unwrap();
        assert!(lo <= m && m <= hi);
        assert!(reg_inc_beta(lo, 2.3, 0.9).unwrap() <= 0.5);
        assert!(reg_inc_beta(hi, 2.3, 0.9).unwrap() >= 0.5);
        assert!((reg_inc_beta(m, 2.3, 0.9).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn threshold_pins_and_dual_path() {
        // k = 0, m = 5/2: threshold = 16√15.
        let t = threshold(0, hw(5)).unwrap();
        assert!((t - 16.0 * 15f64.sqrt()).abs() < 1e-9, "t={t}");
        assert!((t - 61.967_733_539_318_66).abs() < 1e-6);
        // Dual-path identity across the weight range.
        for two_m in (5..=21).step_by(2) {
            let m = hw(two_m);
            let via_median = threshold(0, m).unwrap();
            let closed = threshold_closed_form_k0(m);
            assert!(
                (via_median - closed).abs() < 1e-10 * closed.max(1.0),
                "2m={two_m}: {via_median} vs {closed}"
            );
        }
        // Monotone decrease in m at k = 0.
        let mut prev = f64::INFINITY;
        for two_m in (5..=21).step_by(2) {
            let t = threshold(0, hw(two_m)).unwrap();
            assert!(t < prev);
            prev = t;
        }
    }

    #[test]
    fn corollary_case_pins() {
        // k=0, m=5/2, N=64: case 1 fires (64 > 61.97).
        let v = corollary_cases(0, hw(5), 64).unwrap();
        assert_eq!(v.applicable_case, Some(1));
        assert!(v.nonvanishing_guaranteed);
        // N=4: no conclusion.
        let v4 = corollary_cases(0, hw(5), 4).unwrap();
        assert_eq!(v4.applicable_case, None);
        // Case 3: k=1, m=13/2, N=8: r = 3/4.5 = 2/3, 4√(2/3·5/3) = 4.216...
        let v3 = corollary_cases(1, hw(13), 8).unwrap();
        assert_eq!(v3.applicable_case, Some(3));
        // Case 4: k=5, m=9/2, m-4=1/2 ≤ k: r = 10, 4√110 ≈ 41.95.
        let v4b = corollary_cases(5, hw(9), 42).unwrap();
        assert_eq!(v4b.applicable_case, Some(4));
        let v4c = corollary_cases(5, hw(9), 41).unwrap();
        assert_eq!(v4c.applicable_case, None);
    }

    #[test]
    fn corollary_consistent_with_median_inequality() {
        for two_m in (5..=13).step_by(2) {
            let m = hw(two_m);
            for k in 0..=6u32 {
                for n in [1i64, 4, 8, 16, 42, 64, 128] {
                    let v = corollary_cases(k, m, n).unwrap();
                    if v.nonvanishing_guaranteed {
                        assert!(
                            n as f64 >= v.median_threshold,
                            "2m={two_m} k={k} N={n}: case fired but N < sharp threshold {}",
                            v.median_threshold
                        );
                    }
                }
            }
        }
    }
}
