//! Arithmetic in the metaplectic double cover of `SL(2,ℝ)`.
//!
//! Elements are pairs `(g, η)` of a real unimodular matrix and a
//! holomorphic square root of `cz + d` on the upper half-plane. Since
//! `cz + d` never vanishes there, `η` is determined globally by its value
//! at `z = i`, which is all we store; see [`MetElement::eta_at`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::config::{self, DEGENERATE_IM, INVARIANT_TOL};
use crate::error::Error;
use crate::Result;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Square root with values in `{Re > 0} ∪ {Re = 0, Im ≥ 0}`.
///
/// This is the principal branch, with the negative real axis mapped onto
/// the positive imaginary axis. `sqrt_branch(0) = 0` by convention.
pub fn sqrt_branch(z: Complex64) -> Complex64 {
    if z.im == 0.0 {
        // Exact on the real axis, and immune to the sign of -0.0.
        if z.re >= 0.0 {
            Complex64::new(z.re.sqrt(), 0.0)
        } else {
            Complex64::new(0.0, (-z.re).sqrt())
        }
    } else {
        // Algebraic form of the principal square root; the larger
        // component comes from the stable difference, the other from
        // re·im = Im(z)/2.
        let r = z.norm();
        if z.re >= 0.0 {
            let re = ((r + z.re) / 2.0).sqrt();
            Complex64::new(re, z.im / (2.0 * re))
        } else {
            let im = ((r - z.re) / 2.0).sqrt().copysign(z.im);
            Complex64::new(z.im / (2.0 * im), im)
        }
    }
}

/// Integer power by binary exponentiation (exact complex multiplications,
/// no polar round trip).
pub fn cpowi(z: Complex64, n: i32) -> Complex64 {
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let mut base = if n < 0 { z.inv() } else { z };
    let mut e = n.unsigned_abs();
    let mut acc = Complex64::new(1.0, 0.0);
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        e >>= 1;
        if e > 0 {
            base *= base;
        }
    }
    acc
}

/// `z^{j/2} := sqrt_branch(z)^j` for any integer `j` (`j = 2m` recovers the
/// half-integral powers; even `j` gives ordinary integer powers).
pub fn half_integer_power(z: Complex64, j: i32) -> Result<Complex64> {
    if z == Complex64::new(0.0, 0.0) {
        return Err(Error::ZeroBase);
    }
    Ok(cpowi(sqrt_branch(z), j))
}

/// Binomial coefficient as `f64` (exact for the small ranges used here).
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

fn ensure_upper(z: Complex64) -> Result<()> {
    if z.im < DEGENERATE_IM {
        Err(Error::domain(format!(
            "point z = {z} too close to the real axis (Im < {DEGENERATE_IM:e})"
        )))
    } else {
        Ok(())
    }
}

/// A half-integral weight, stored as the odd integer `2m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HalfWeight {
    two_m: i64,
}

impl HalfWeight {
    /// Weights `2m ≥ 3` are valid for slash/lift arithmetic; the series
    /// modules additionally require `2m ≥ 5`, see [`Self::require_series`].
    pub fn new(two_m: i64) -> Result<Self> {
        if two_m < 3 || two_m % 2 == 0 {
            return Err(Error::BadWeight {
                two_m,
                why: "need an odd integer >= 3".into(),
            });
        }
        Ok(Self { two_m })
    }

    pub fn two_m(&self) -> i64 {
        self.two_m
    }

    /// `m` as a float; the numerator `2m` stays exact.
    pub fn m(&self) -> f64 {
        self.two_m as f64 / 2.0
    }

    /// The absolutely-convergent range `m ≥ 5/2` required by every series.
    pub fn require_series(&self) -> Result<()> {
        if self.two_m < 5 {
            return Err(Error::BadWeight {
                two_m: self.two_m,
                why: "series require 2m >= 5".into(),
            });
        }
        Ok(())
    }

    /// `∏_{r=0}^{k} (m - 1 + r)`.
    pub fn prod_m_minus_1(&self, k: u32) -> f64 {
        let mut acc = 1.0;
        for r in 0..=k {
            acc *= (self.two_m - 2 + 2 * r as i64) as f64 / 2.0;
        }
        acc
    }
}

/// Iwasawa coordinates `(x, y, t)`: the element `n_x a_y κ_t` with
/// `t` taken mod `4π` (the cover has degree 2 over the rotations).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IwasawaCoords {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl IwasawaCoords {
    pub fn new(x: f64, y: f64, t: f64) -> Result<Self> {
        if !(y > 0.0) {
            return Err(Error::domain(format!("Iwasawa y must be positive, got {y}")));
        }
        Ok(Self {
            x,
            y,
            t: t.rem_euclid(4.0 * PI),
        })
    }
}

/// Cartan coordinates `(θ₁, t, θ₂)`: the element `κ_{θ₁} h_t κ_{θ₂}`
/// with `t ≥ 0` and both angles mod `4π`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartanCoords {
    pub theta1: f64,
    pub t: f64,
    pub theta2: f64,
}

impl CartanCoords {
    pub fn new(theta1: f64, t: f64, theta2: f64) -> Result<Self> {
        if t < 0.0 {
            return Err(Error::domain(format!("Cartan t must be >= 0, got {t}")));
        }
        Ok(Self {
            theta1: theta1.rem_euclid(4.0 * PI),
            t,
            theta2: theta2.rem_euclid(4.0 * PI),
        })
    }
}

/// A metaplectic group element: a real matrix `(a b; c d)` with
/// `ad - bc = 1` together with the value `η(i)` of the chosen holomorphic
/// square root of `cz + d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetElement {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    eta_i: Complex64,
}

impl MetElement {
    pub fn new(a: f64, b: f64, c: f64, d: f64, eta_i: Complex64) -> Result<Self> {
        let det = a * d - b * c;
        if (det - 1.0).abs() > INVARIANT_TOL {
            return Err(Error::domain(format!("determinant {det} != 1")));
        }
        let target = c * I + Complex64::new(d, 0.0);
        if (eta_i * eta_i - target).norm() > INVARIANT_TOL {
            return Err(Error::domain(format!(
                "eta(i)^2 = {} does not match c*i + d = {target}",
                eta_i * eta_i
            )));
        }
        Ok(Self { a, b, c, d, eta_i })
    }

    fn raw(a: f64, b: f64, c: f64, d: f64, eta_i: Complex64) -> Self {
        Self { a, b, c, d, eta_i }
    }

    pub fn identity() -> Self {
        Self::raw(1.0, 0.0, 0.0, 1.0, Complex64::new(1.0, 0.0))
    }

    /// Unipotent translation `n_x = ((1 x; 0 1), 1)`.
    pub fn n_x(x: f64) -> Self {
        Self::raw(1.0, x, 0.0, 1.0, Complex64::new(1.0, 0.0))
    }

    /// Diagonal element `a_y = ((√y, 0; 0, 1/√y), y^{-1/4})`, `y > 0`.
    pub fn a_y(y: f64) -> Result<Self> {
        if !(y > 0.0) {
            return Err(Error::domain(format!("a_y requires y > 0, got {y}")));
        }
        let s = y.sqrt();
        Ok(Self::raw(
            s,
            0.0,
            0.0,
            1.0 / s,
            Complex64::new(y.powf(-0.25), 0.0),
        ))
    }

    /// Rotation lift `κ_t = ((cos t, -sin t; sin t, cos t), e^{it/2})`.
    /// `κ_{2π}` is the nontrivial central element; `κ_{4π}` is the identity.
    pub fn kappa(t: f64) -> Self {
        let (s, c) = t.sin_cos();
        Self::raw(c, -s, s, c, Complex64::from_polar(1.0, t / 2.0))
    }

    /// Cartan axis element `h_t = ((e^t, 0; 0, e^{-t}), e^{-t/2})`.
    pub fn h_t(t: f64) -> Self {
        Self::raw(
            t.exp(),
            0.0,
            0.0,
            (-t).exp(),
            Complex64::new((-t / 2.0).exp(), 0.0),
        )
    }

    pub fn matrix(&self) -> (f64, f64, f64, f64) {
        (self.a, self.b, self.c, self.d)
    }

    pub fn eta_i(&self) -> Complex64 {
        self.eta_i
    }

    /// `η(z)` reconstructed from `η(i)`.
    ///
    /// `cz + d` maps the upper half-plane into a fixed open half-plane (or a
    /// constant for `c = 0`), so `sqrt_branch(cz + d)` is continuous there
    /// and `η` differs from it by one global sign, fixed by the value at `i`.
    pub fn eta_at(&self, z: Complex64) -> Complex64 {
        self.sign() * sqrt_branch(self.c * z + self.d)
    }

    fn sign(&self) -> f64 {
        let s = sqrt_branch(self.c * I + self.d);
        if (self.eta_i - s).norm() <= (self.eta_i + s).norm() {
            1.0
        } else {
            -1.0
        }
    }

    /// Group law: matrices multiply, and
    /// `η(z) = η_1(g_2.z) · η_2(z)` evaluated at `z = i`.
    pub fn multiply(&self, other: &MetElement) -> MetElement {
        let a = self.a * other.a + self.b * other.c;
        let b = self.a * other.b + self.b * other.d;
        let c = self.c * other.a + self.d * other.c;
        let d = self.c * other.b + self.d * other.d;
        let w = other.moebius_unchecked(I);
        let eta = self.eta_at(w) * other.eta_i;
        MetElement::raw(a, b, c, d, eta)
    }

    /// Group inverse; `η_{σ^{-1}}(z) = 1 / η_σ(σ^{-1}.z)`, evaluated at `i`.
    pub fn inverse(&self) -> MetElement {
        let (a, b, c, d) = (self.d, -self.b, -self.c, self.a);
        let pre = (a * I + b) / (c * I + d);
        let eta = self.eta_at(pre).inv();
        MetElement::raw(a, b, c, d, eta)
    }

    fn moebius_unchecked(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    /// Möbius action on the upper half-plane.
    pub fn moebius(&self, z: Complex64) -> Result<Complex64> {
        ensure_upper(z)?;
        Ok(self.moebius_unchecked(z))
    }

    pub fn from_iwasawa(co: IwasawaCoords) -> Result<Self> {
        let ay = Self::a_y(co.y)?;
        Ok(Self::n_x(co.x).multiply(&ay).multiply(&Self::kappa(co.t)))
    }

    /// Recover `(x, y, t)` with `t ∈ [0, 4π)`. The sheet of `t` is decided
    /// by comparing `η(i)` against `y^{-1/4} e^{it/2}`.
    pub fn to_iwasawa(&self) -> IwasawaCoords {
        let w = self.moebius_unchecked(I);
        let (x, y) = (w.re, w.im);
        let rot = Self::a_y(y)
            .expect("Im(g.i) > 0 for unimodular g")
            .inverse()
            .multiply(&Self::n_x(-x))
            .multiply(self);
        let (ra, _rb, rc, _rd) = rot.matrix();
        let t0 = rc.atan2(ra);
        let candidate = Complex64::from_polar(1.0, t0 / 2.0);
        let t = if (rot.eta_i - candidate).norm() <= (rot.eta_i + candidate).norm() {
            t0
        } else {
            t0 + 2.0 * PI
        };
        IwasawaCoords {
            x,
            y,
            t: t.rem_euclid(4.0 * PI),
        }
    }

    pub fn from_cartan(co: CartanCoords) -> Self {
        Self::kappa(co.theta1)
            .multiply(&Self::h_t(co.t))
            .multiply(&Self::kappa(co.theta2))
    }

    pub fn approx_eq(&self, other: &MetElement, tol: f64) -> bool {
        (self.a - other.a).abs() <= tol
            && (self.b - other.b).abs() <= tol
            && (self.c - other.c).abs() <= tol
            && (self.d - other.d).abs() <= tol
            && (self.eta_i - other.eta_i).norm() <= tol
    }
}

/// Weight-`m` slash action `(f|_m σ)(z) = f(σ.z) η_σ(z)^{-2m}`.
pub fn slash_apply<F>(f: F, m: HalfWeight, sigma: &MetElement, z: Complex64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    ensure_upper(z)?;
    let w = sigma.moebius(z)?;
    let val = f(w)?;
    let eta = sigma.eta_at(z);
    Ok(val * cpowi(eta, -(m.two_m() as i32)))
}

/// Classical lift `F_f(σ) = (f|_m σ)(i)`.
pub fn lift_value<F>(f: F, m: HalfWeight, sigma: &MetElement) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    slash_apply(f, m, sigma, I)
}

/// The lift through Iwasawa coordinates:
/// `F_f(n_x a_y κ_t) = f(x + iy) · y^{m/2} · e^{-imt}`.
pub fn lift_value_iwasawa<F>(f: F, m: HalfWeight, sigma: &MetElement) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let co = sigma.to_iwasawa();
    let val = f(Complex64::new(co.x, co.y))?;
    let phase = Complex64::from_polar(1.0, -m.m() * co.t);
    Ok(val * co.y.powf(m.m() / 2.0) * phase)
}

/// Both lift formulas, with their relative disagreement (a self-check of
/// the group arithmetic; should sit at rounding level).
pub fn lift_value_checked<F>(
    f: F,
    m: HalfWeight,
    sigma: &MetElement,
) -> Result<(Complex64, f64)>
where
    F: Fn(Complex64) -> Result<Complex64> + Copy,
{
    let direct = lift_value(f, m, sigma)?;
    let via_coords = lift_value_iwasawa(f, m, sigma)?;
    Ok((direct, config::rel_err_c(direct, via_coords)))
}

/// Model function `f_{k,m}(z) = (2i)^m (z - i)^k / (z + i)^{m+k}`.
///
/// `f_{0,m}(i) = 1`, and every `f_{k,m}` is bounded on the upper half-plane.
pub fn f_km(z: Complex64, k: u32, m: HalfWeight) -> Result<Complex64> {
    ensure_upper(z)?;
    let two_m = m.two_m() as i32;
    let num = half_integer_power(2.0 * I, two_m)? * cpowi(z - I, k as i32);
    let den = half_integer_power(z + I, two_m + 2 * k as i32)?;
    Ok(num / den)
}

/// The lift of `f_{k,m}` in Cartan coordinates:
/// `F(κ_{θ₁} h_t κ_{θ₂}) = e^{-i(m+2k)θ₁} · tanh^k(t)/cosh^m(t) · e^{-imθ₂}`.
pub fn matrix_coeff_cartan(
    theta1: f64,
    t: f64,
    theta2: f64,
    k: u32,
    m: HalfWeight,
) -> Result<Complex64> {
    if t < 0.0 {
        return Err(Error::domain(format!("Cartan t must be >= 0, got {t}")));
    }
    let mf = m.m();
    let radial = t.tanh().powi(k as i32) / t.cosh().powf(mf);
    let phase1 = Complex64::from_polar(1.0, -(mf + 2.0 * k as f64) * theta1);
    let phase2 = Complex64::from_polar(1.0, -mf * theta2);
    Ok(phase1 * radial * phase2)
}

/// Squared `L²` norm of the lifted model function:
/// `4π k! / ∏_{r=0}^{k}(m - 1 + r)`.
pub fn f_km_l2norm_sq(k: u32, m: HalfWeight) -> f64 {
    let mut kfact = 1.0;
    for i in 1..=k {
        kfact *= i as f64;
    }
    4.0 * PI * kfact / m.prod_m_minus_1(k)
}

/// The same norm by quadrature in Cartan coordinates with Haar density
/// `sinh(2t)/(4π)` and both angles over `[0, 4π]`.
///
/// Returns `(value, error_estimate)`; the estimate is the Richardson
/// difference between the full and half-resolution Simpson rules.
pub fn f_km_l2norm_sq_numeric(k: u32, m: HalfWeight, t_intervals: usize) -> Result<(f64, f64)> {
    m.require_series()?;
    let n = t_intervals.max(8) & !1; // Simpson needs an even count
    // Integrand decays like e^{-(2m-2)t}; 30 units of t put the tail far
    // below f64 resolution already at m = 5/2.
    let t_max = 30.0;
    let n_theta = 4;
    let theta_step = 4.0 * PI / n_theta as f64;

    // |F|^2 averaged over the (θ1, θ2) grid at fixed t, times (4π)^2.
    let angular = |t: f64| -> Result<f64> {
        let mut acc = 0.0;
        for i in 0..n_theta {
            for j in 0..n_theta {
                let v =
                    matrix_coeff_cartan(i as f64 * theta_step, t, j as f64 * theta_step, k, m)?;
                acc += v.norm_sqr();
            }
        }
        Ok(acc / (n_theta * n_theta) as f64 * (4.0 * PI) * (4.0 * PI))
    };

    let simpson = |n: usize| -> Result<f64> {
        let h = t_max / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let t = i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * angular(t)? * (2.0 * t).sinh();
        }
        Ok(acc * h / 3.0 / (4.0 * PI))
    };

    let fine = simpson(n)?;
    let coarse = simpson(n / 2)?;
    Ok((fine, (fine - coarse).abs() / 15.0))
}

/// The pairing value `Σ_{l=0}^{k} C(k,l) (2i)^l · 4π/∏_{r=0}^{l}(m-1+r) · f^{(l)}(i)`
/// from the list of derivatives `f(i), f'(i), ..., f^{(k)}(i)`.
pub fn theorem61_rhs(derivs: &[Complex64], k: u32, m: HalfWeight) -> Result<Complex64> {
    if derivs.len() != k as usize + 1 {
        return Err(Error::LengthMismatch {
            expected: k as usize + 1,
            got: derivs.len(),
        });
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for l in 0..=k {
        let coeff = binomial(k, l) * 4.0 * PI / m.prod_m_minus_1(l);
        acc += coeff * cpowi(2.0 * I, l as i32) * derivs[l as usize];
    }
    Ok(acc)
}
