//! Truncated evaluation of the Poincaré series families on the theta
//! lift of `Γ₀(N) ∩ Γ₁(4)`:
//!
//! - `delta`: the reproducing kernel
//!   `Δ_{k,m,ξ,χ}(z) = (2i)^m/(4π) ∏_{r=0}^{k}(m-1+r) Σ_γ χ̄(γ) (γ.z - ξ̄)^{-(m+k)} J(γ,z)^{-2m}`
//!   summed over one representative per `±` pair (which halves the
//!   all-of-`Γ₀(N)` prefactor `1/(8π)` to `1/(4π)`);
//! - `psi`: the classical Poincaré series
//!   `ψ_{n,m,χ}(z) = Σ_{Γ∞\Γ₀(N)} χ̄(γ) e^{2πin γ.z} J(γ,z)^{-2m}`;
//! - `pfkm`: the averaged model function
//!   `(P f_{k,m})(z) = (2i)^m Σ_γ χ̄(γ) (γ.z-i)^k (γ.z+i)^{-(m+k)} J(γ,z)^{-2m}`;
//! - `delta-via-psi`: the expansion
//!   `Δ = (4π)^{m-1}(-2πi)^k/Γ(m-1) Σ_{n≥1} n^{m+k-1} e^{-2πinξ̄} ψ_n`.
//!
//! All sums converge absolutely for `m ≥ 5/2`, so terms are grouped by
//! strata of increasing `|c|` and accumulated with compensated summation.
//! Truncation is controlled by [`TruncationBudget`]; every result carries
//! an implementer-derived tail majorant in `tail_estimate` (the source
//! formulas come with no quantitative truncation error).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::arith::{
    epsilon_d, kronecker, mod_inverse, multiplier_j, CosetList, CosetTag, DirichletCharacter,
};
use crate::config::DEGENERATE_IM;
use crate::error::Error;
use crate::group::{binomial, cpowi, half_integer_power, sqrt_branch, HalfWeight};
use crate::kahan::CKahanSum;
use crate::Result;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesFamily {
    Delta,
    Psi,
    Pfkm,
    DeltaViaPsi,
}

/// Which series to evaluate, on which group, with which parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesSpec {
    pub family: SeriesFamily,
    pub level: i64,
    pub m: HalfWeight,
    /// Derivative index for the `delta` families and `pfkm`.
    pub k: u32,
    /// Fourier index for `psi`.
    pub n: u32,
    /// Kernel point for the `delta` families.
    pub xi: Complex64,
    pub chi: DirichletCharacter,
}

impl SeriesSpec {
    fn validate(self) -> Result<Self> {
        if self.level <= 0 || self.level % 4 != 0 {
            return Err(Error::BadLevel { level: self.level });
        }
        self.m.require_series()?;
        if self.chi.modulus() != self.level {
            return Err(Error::Character {
                what: format!(
                    "character modulus {} does not match level {}",
                    self.chi.modulus(),
                    self.level
                ),
            });
        }
        match self.family {
            SeriesFamily::Delta | SeriesFamily::DeltaViaPsi => {
                if self.xi.im < DEGENERATE_IM {
                    return Err(Error::domain(format!("Im(xi) = {} too small", self.xi.im)));
                }
            }
            SeriesFamily::Psi => {
                if self.n == 0 {
                    return Err(Error::BadParameter {
                        name: "n",
                        why: "psi requires n >= 1".into(),
                    });
                }
            }
            SeriesFamily::Pfkm => {}
        }
        Ok(self)
    }

    pub fn delta(
        level: i64,
        m: HalfWeight,
        k: u32,
        xi: Complex64,
        chi: DirichletCharacter,
    ) -> Result<Self> {
        Self {
            family: SeriesFamily::Delta,
            level,
            m,
            k,
            n: 1,
            xi,
            chi,
        }
        .validate()
    }

    pub fn psi(level: i64, m: HalfWeight, n: u32, chi: DirichletCharacter) -> Result<Self> {
        Self {
            family: SeriesFamily::Psi,
            level,
            m,
            k: 0,
            n,
            xi: I,
            chi,
        }
        .validate()
    }

    pub fn pfkm(level: i64, m: HalfWeight, k: u32, chi: DirichletCharacter) -> Result<Self> {
        Self {
            family: SeriesFamily::Pfkm,
            level,
            m,
            k,
            n: 1,
            xi: I,
            chi,
        }
        .validate()
    }

    pub fn delta_via_psi(
        level: i64,
        m: HalfWeight,
        k: u32,
        xi: Complex64,
        chi: DirichletCharacter,
    ) -> Result<Self> {
        Self {
            family: SeriesFamily::DeltaViaPsi,
            level,
            m,
            k,
            n: 1,
            xi,
            chi,
        }
        .validate()
    }
}

/// All cutoffs for one computation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TruncationBudget {
    /// Coset height bound: strata `c = N, 2N, ..., cmax·N`.
    pub cmax: u32,
    /// Absolute truncation target for dropped series terms (drives the
    /// per-stratum windows; the resulting loss is covered by the reported
    /// tail majorant).
    pub term_tol: f64,
    /// Tail tolerance for theta-series evaluation.
    pub theta_tol: f64,
    /// Length of partial sums over the classical-series index `n`.
    pub nmax: u32,
    /// Per-axis resolution of quadrature meshes built from this budget.
    pub quad_res: u32,
    /// Sample count for Fourier coefficient extraction.
    pub fourier_samples: u32,
}

impl Default for TruncationBudget {
    fn default() -> Self {
        Self {
            cmax: 150,
            term_tol: 1e-8,
            theta_tol: 1e-12,
            nmax: 16,
            quad_res: 120,
            fourier_samples: 512,
        }
    }
}

impl TruncationBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.term_tol > 0.0) || !(self.theta_tol > 0.0) {
            return Err(Error::BadParameter {
                name: "term_tol/theta_tol",
                why: "must be positive".into(),
            });
        }
        if self.nmax == 0 || self.quad_res == 0 || self.fourier_samples == 0 {
            return Err(Error::BadParameter {
                name: "nmax/quad_res/fourier_samples",
                why: "must be positive".into(),
            });
        }
        Ok(())
    }
}

/// A truncated series value together with its tail majorant.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: Complex64,
    /// Upper bound for everything the truncation dropped (documented
    /// majorants; see the stratum-loop comments).
    pub tail_estimate: f64,
    pub terms_used: u64,
    /// Set when the height bound `cmax` truncated strata whose majorant
    /// exceeds ten times the requested term tolerance.
    pub budget_warning: bool,
}

/// `Σ_{b∈ℤ} (w + b)^{-s2/2}` for `Im(w) ≠ 0`, `s2 ≥ 5`.
///
/// Direct summation over `2·half_width + 1` integers around `-Re(w)`,
/// plus Euler–Maclaurin midpoint tails: for `g` smooth and decaying,
/// `Σ_{b≥T} g(b) = ∫_{T-1/2}^∞ g + g'(T-1/2)/24 + O(g'''(T))`, and the
/// antiderivative of `(w+t)^{-s}` along a horizontal line is
/// `(w+t)^{1-s}/(1-s)` (the branch powers are continuous there).
/// Returns `(value, residual_bound)`.
pub(crate) fn periodized_power_sum(
    w: Complex64,
    s2: i64,
    half_width: i64,
) -> (Complex64, f64) {
    let s = s2 as f64 / 2.0;
    let center = (-w.re).round() as i64;
    let mut acc = CKahanSum::new();
    for b in (center - half_width)..=(center + half_width) {
        let base = w + b as f64;
        acc.add(cpowi(sqrt_branch(base), -(s2 as i32)));
    }
    let c3 = (s + 1.0) * (s + 2.0) * 7.0 / 5760.0;
    // Right tail over b >= center + half_width + 1 =: a, with
    // Σ_{b≥a} g(b) = ∫_{a-1/2}^∞ g + g'(a-1/2)/24 - 7 g'''(a-1/2)/5760 + R.
    let tr = (center + half_width) as f64 + 0.5;
    let zr = w + tr;
    let zr_pow = cpowi(sqrt_branch(zr), -(s2 as i32)); // (w+t)^{-s}
    let der_r = -s * zr_pow / zr;
    acc.add(zr_pow * zr / (s - 1.0) + der_r / 24.0 - c3 * der_r / (zr * zr));
    // Left tail via h(j) = g(-j) = (w-j)^{-s}, ∫_A^∞ h = -(w-A)^{1-s}/(s-1).
    let ta = (-(center - half_width)) as f64 + 0.5;
    let zl = w - ta;
    let zl_pow = cpowi(sqrt_branch(zl), -(s2 as i32));
    let der_l = s * zl_pow / zl;
    acc.add(-zl_pow * zl / (s - 1.0) + der_l / 24.0 - c3 * der_l / (zl * zl));
    // Remainder is the fifth-derivative Euler-Maclaurin term,
    // (31/967680)·g⁽⁵⁾, bounded on both sides with a factor-2 margin.
    let g5 = s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0);
    let residual =
        g5 * 31.0 / 967_680.0 * (zr.norm().powf(-s - 5.0) + zl.norm().powf(-s - 5.0)) * 2.0;
    (acc.value(), residual)
}

/// Half-width used for the inner translation sums; the Euler–Maclaurin
/// tail handles the rest.
const PERIODIZED_HALF_WIDTH: i64 = 10;

/// Periodized power kernel `Σ_b (w+b)^{-s2/2}` with its residual bound
/// (shared with the integral-formula quadrature).
pub(crate) fn periodized_kernel(w: Complex64, s2: i64) -> (Complex64, f64) {
    periodized_power_sum(w, s2, PERIODIZED_HALF_WIDTH)
}

/// `|Σ_b (w+b)^{-s}|` bound when `|Im w| ≥ a`: a peak term plus the
/// integral comparison `2∫_0^∞ (t²+a²)^{-s/2} dt ≤ 2·1.2·a^{1-s}` for
/// `s ≥ 5/2`.
fn periodized_sum_bound(a: f64, s: f64) -> f64 {
    a.powf(-s) + 2.4 * a.powf(1.0 - s)
}

struct StratumStats {
    terms: u64,
    /// Majorant for everything outside the kept region `|cz+d| ≤ rstar`,
    /// plus Euler–Maclaurin residuals accumulated by the term callback.
    tail: f64,
    capped: bool,
}

/// Walk all `±`-classes of bottom rows `(c, d)` (`N | c`, `c > 0`,
/// `gcd(c,d) = 1`) with `|cz+d| ≤ rstar`, calling `f` with
/// `(c, d, χ̄(γ)J(γ,z)^{-2m}, γ.z mod 1)` for the `d ≡ 1 (mod 4)`
/// representative. The `c = 0` stratum is the caller's business.
///
/// Returns the count, the lattice-tail majorant
/// `K Σ_{|cz+d| > R} |cz+d|^{-m} ≤ K·π/(N·y)·R^{2-m}/(m-2)·2` (factor 2
/// of safety; coprime density ≤ 1), and whether `cmax` cut strata off
/// before the window was exhausted.
fn for_each_coset<F>(
    level: i64,
    two_m: i64,
    chi: &DirichletCharacter,
    z: Complex64,
    rstar: f64,
    cmax: u32,
    term_amp: f64,
    mut f: F,
) -> StratumStats
where
    F: FnMut(i64, i64, Complex64, Complex64),
{
    let (x, y) = (z.re, z.im);
    let m = two_m as f64 / 2.0;
    let mut terms = 0u64;
    let mut capped = false;
    let mut c = level;
    loop {
        if c as f64 * y > rstar {
            break;
        }
        if c > level * cmax as i64 {
            capped = true;
            break;
        }
        let cf = c as f64;
        let half = (rstar * rstar - cf * y * cf * y).sqrt();
        let d_lo = (-cf * x - half).ceil() as i64;
        let d_hi = (-cf * x + half).floor() as i64;
        for d in d_lo..=d_hi {
            let Some(dinv) = mod_inverse(d, c) else {
                continue; // gcd(c, d) != 1
            };
            // Normalize to the Γ₁(4) member of {γ, -γ}.
            let (cn, dn) = if d.rem_euclid(4) == 1 { (c, d) } else { (-c, -d) };
            let eps = epsilon_d(dn).expect("dn odd since gcd(dn, 4|cn) = 1");
            let unit = eps.inv() * kronecker(cn, dn) as f64;
            let auto = chi.eval(dn).conj()
                * cpowi(unit, -(two_m as i32))
                * cpowi(sqrt_branch(cn as f64 * z + dn as f64), -(two_m as i32));
            // γ.z = a/c - 1/(c(cz+d)) with a ≡ d^{-1} (mod c); the integer
            // part is irrelevant to every caller (all use γ.z mod 1).
            let gamma_z =
                dinv as f64 / cf - ((cf * z + d as f64) * cf).inv();
            f(c, d, auto, gamma_z);
            terms += 1;
        }
        c += level;
    }
    let lattice_tail =
        term_amp * 2.0 * PI / (level as f64 * y) * rstar.powf(2.0 - m) / (m - 2.0);
    let cap_tail = if capped {
        // Strata beyond cmax·N up to the window radius, bounded by
        // Σ_c K[2.4(cy)^{1-m} + (cy)^{-m}] ≤ 3.4K/(N y^{m-1}) (cmax N)^{2-m}/(m-2).
        let cn = (level * cmax as i64) as f64;
        term_amp * 3.4 / (level as f64 * y.powf(m - 1.0)) * cn.powf(2.0 - m) / (m - 2.0)
    } else {
        0.0
    };
    StratumStats {
        terms,
        tail: lattice_tail + cap_tail,
        capped,
    }
}

/// Kept-region radius from the absolute term tolerance: terms beyond
/// `|cz+d| = R` contribute at most `K·π/(Ny)·R^{2-m}/(m-2)·2`, so choose
/// `R` to push that majorant below `tol`.
fn window_radius(level: i64, y: f64, m: f64, term_amp: f64, tol_abs: f64, cmax: u32) -> (f64, bool) {
    let base = term_amp * 2.0 * PI / (level as f64 * y) / (m - 2.0) / tol_abs;
    let r_tol = base.powf(1.0 / (m - 2.0)).max(4.0);
    // The height budget also caps the kept ball |cz+d| <= R; when it
    // binds, the reported tail grows and the warning flag fires.
    let r_cap = ((level * cmax as i64) as f64).max(8.0);
    (r_tol.min(r_cap), r_tol > r_cap)
}

/// Reproducing-kernel series `Δ_{k,m,ξ,χ}` at `z`.
pub fn delta_eval(spec: &SeriesSpec, z: Complex64, budget: &TruncationBudget) -> Result<SeriesValue> {
    if spec.family != SeriesFamily::Delta {
        return Err(Error::BadParameter {
            name: "family",
            why: "delta_eval needs a delta spec".into(),
        });
    }
    budget.validate()?;
    ensure_upper(z)?;
    let m = spec.m;
    let two_m = m.two_m();
    let k = spec.k;
    let s2 = two_m + 2 * k as i64;
    let s = s2 as f64 / 2.0;
    let pref = half_integer_power(2.0 * I, two_m as i32)? / (4.0 * PI) * m.prod_m_minus_1(k);
    let xi_bar = spec.xi.conj();

    // |S_{m+k}| is bounded independently of the coset since
    // Im(γ.z - ξ̄) ≥ Im(ξ).
    let amp = periodized_sum_bound(spec.xi.im, s);

    let (id_val, id_res) = periodized_power_sum(z - xi_bar, s2, PERIODIZED_HALF_WIDTH);
    let tol_abs = budget.term_tol * id_val.norm().max(1.0);
    let (rstar, window_capped) = window_radius(spec.level, z.im, m.m(), amp, tol_abs, budget.cmax);

    let mut acc = CKahanSum::new();
    let mut residuals = id_res;
    acc.add(id_val);
    let stats = for_each_coset(
        spec.level,
        two_m,
        &spec.chi,
        z,
        rstar,
        budget.cmax,
        amp,
        |_c, _d, auto, gamma_z| {
            let (s_val, s_res) = periodized_power_sum(gamma_z - xi_bar, s2, PERIODIZED_HALF_WIDTH);
            acc.add(auto * s_val);
            residuals += auto.norm() * s_res;
        },
    );
    let value = pref * acc.value();
    let tail = pref.norm() * (stats.tail + residuals);
    Ok(SeriesValue {
        value,
        tail_estimate: tail,
        terms_used: stats.terms + 1,
        budget_warning: (stats.capped || window_capped)
            && tail > 10.0 * budget.term_tol * value.norm().max(1.0),
    })
}

/// Classical Poincaré series `ψ_{n,m,χ}` at `z`.
pub fn psi_eval(spec: &SeriesSpec, z: Complex64, budget: &TruncationBudget) -> Result<SeriesValue> {
    if spec.family != SeriesFamily::Psi {
        return Err(Error::BadParameter {
            name: "family",
            why: "psi_eval needs a psi spec".into(),
        });
    }
    budget.validate()?;
    ensure_upper(z)?;
    let two_m = spec.m.two_m();
    let n = spec.n as f64;

    // |e^{2πin γ.z}| < 1 on every coset, so the term amplitude is 1.
    let amp = 1.0;
    let tol_abs = budget.term_tol;
    let (rstar, window_capped) =
        window_radius(spec.level, z.im, spec.m.m(), amp, tol_abs, budget.cmax);

    let mut acc = CKahanSum::new();
    // Identity coset.
    acc.add((2.0 * PI * I * n * z).exp());
    let stats = for_each_coset(
        spec.level,
        two_m,
        &spec.chi,
        z,
        rstar,
        budget.cmax,
        amp,
        |_c, _d, auto, gamma_z| {
            acc.add(auto * (2.0 * PI * I * n * gamma_z).exp());
        },
    );
    let value = acc.value();
    Ok(SeriesValue {
        value,
        tail_estimate: stats.tail,
        terms_used: stats.terms + 1,
        budget_warning: (stats.capped || window_capped)
            && stats.tail > 10.0 * budget.term_tol * value.norm().max(1.0),
    })
}

/// Averaged model function `(P f_{k,m})(z)`, with the inner translation
/// sums reduced through `(w-i)^k = Σ_j C(k,j)(-2i)^j (w+i)^{k-j}` to pure
/// power sums (an exact regrouping of the absolutely convergent series).
pub fn pfkm_eval(spec: &SeriesSpec, z: Complex64, budget: &TruncationBudget) -> Result<SeriesValue> {
    if spec.family != SeriesFamily::Pfkm {
        return Err(Error::BadParameter {
            name: "family",
            why: "pfkm_eval needs a pfkm spec".into(),
        });
    }
    budget.validate()?;
    ensure_upper(z)?;
    let m = spec.m;
    let two_m = m.two_m();
    let k = spec.k;
    let pref = half_integer_power(2.0 * I, two_m as i32)?;

    // Im(γ.z + i) ≥ 1, so each pure power sum is bounded by
    // periodized_sum_bound(1, m + j).
    let coeffs: Vec<Complex64> = (0..=k)
        .map(|j| binomial(k, j) * cpowi(-2.0 * I, j as i32))
        .collect();
    let amp: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(j, c)| c.norm() * periodized_sum_bound(1.0, m.m() + j as f64))
        .sum();

    let inner = |w: Complex64, residuals: &mut f64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, cj) in coeffs.iter().enumerate() {
            let (s_val, s_res) =
                periodized_power_sum(w + I, two_m + 2 * j as i64, PERIODIZED_HALF_WIDTH);
            acc += cj * s_val;
            *residuals += cj.norm() * s_res;
        }
        acc
    };

    let mut residuals = 0.0;
    let id_val = inner(z, &mut residuals);
    let tol_abs = budget.term_tol * id_val.norm().max(1.0);
    let (rstar, window_capped) = window_radius(spec.level, z.im, m.m(), amp, tol_abs, budget.cmax);

    let mut acc = CKahanSum::new();
    acc.add(id_val);
    let stats = for_each_coset(
        spec.level,
        two_m,
        &spec.chi,
        z,
        rstar,
        budget.cmax,
        amp,
        |_c, _d, auto, gamma_z| {
            acc.add(auto * inner(gamma_z, &mut residuals));
        },
    );
    let value = pref * acc.value();
    let tail = pref.norm() * (stats.tail + residuals);
    Ok(SeriesValue {
        value,
        tail_estimate: tail,
        terms_used: stats.terms + 1,
        budget_warning: (stats.capped || window_capped)
            && tail > 10.0 * budget.term_tol * value.norm().max(1.0),
    })
}

/// Literal term-by-term variant of [`pfkm_eval`]: the inner translation
/// sums run over `f_{k,m}(γ.z + b)` directly, with an integral-comparison
/// tail bound instead of closed-form tails. Slower; kept as the
/// independent route for cross-checks.
pub fn pfkm_eval_direct(
    spec: &SeriesSpec,
    z: Complex64,
    budget: &TruncationBudget,
    half_width: i64,
) -> Result<SeriesValue> {
    if spec.family != SeriesFamily::Pfkm {
        return Err(Error::BadParameter {
            name: "family",
            why: "pfkm_eval_direct needs a pfkm spec".into(),
        });
    }
    budget.validate()?;
    ensure_upper(z)?;
    let m = spec.m;
    let two_m = m.two_m();
    let k = spec.k;
    let pref = half_integer_power(2.0 * I, two_m as i32)?;
    let mf = m.m();

    // f-core(w) = (w-i)^k / (w+i)^{m+k} decays like |w|^{-m}; bound the
    // cut translation tails by 2(1+2/B)^k ∫_B^∞ t^{-m} dt per coset.
    let core = |w: Complex64| -> Complex64 {
        cpowi(w - I, k as i32)
            * cpowi(sqrt_branch(w + I), -(two_m as i32 + 2 * k as i32))
    };
    let b_tail = |_w: Complex64| -> f64 {
        2.0 * (1.0 + 2.0 / half_width as f64).powi(k as i32)
            * (half_width as f64).powf(1.0 - mf)
            / (mf - 1.0)
    };
    let inner = |w: Complex64, residuals: &mut f64| -> Complex64 {
        let center = (-w.re).round() as i64;
        let mut acc = CKahanSum::new();
        for b in (center - half_width)..=(center + half_width) {
            acc.add(core(w + b as f64));
        }
        *residuals += b_tail(w);
        acc.value()
    };

    let amp = periodized_sum_bound(1.0, mf) * 3f64.powi(k as i32);
    let mut residuals = 0.0;
    let id_val = inner(z, &mut residuals);
    let tol_abs = budget.term_tol * id_val.norm().max(1.0);
    let (rstar, window_capped) = window_radius(spec.level, z.im, mf, amp, tol_abs, budget.cmax);

    let mut acc = CKahanSum::new();
    acc.add(id_val);
    let stats = for_each_coset(
        spec.level,
        two_m,
        &spec.chi,
        z,
        rstar,
        budget.cmax,
        amp,
        |_c, _d, auto, gamma_z| {
            acc.add(auto * inner(gamma_z, &mut residuals));
        },
    );
    let value = pref * acc.value();
    let tail = pref.norm() * (stats.tail + residuals);
    Ok(SeriesValue {
        value,
        tail_estimate: tail,
        terms_used: stats.terms + 1,
        budget_warning: (stats.capped || window_capped)
            && tail > 10.0 * budget.term_tol * value.norm().max(1.0),
    })
}

/// `Δ_{k,m,ξ,χ}` through its expansion in classical Poincaré series,
/// truncated at `n = nmax`:
/// `(4π)^{m-1}(-2πi)^k/Γ(m-1) Σ_{n=1}^{nmax} n^{m+k-1} e^{-2πinξ̄} ψ_n(z)`.
pub fn delta_via_psi(
    spec: &SeriesSpec,
    z: Complex64,
    budget: &TruncationBudget,
) -> Result<SeriesValue> {
    if spec.family != SeriesFamily::DeltaViaPsi {
        return Err(Error::BadParameter {
            name: "family",
            why: "delta_via_psi needs a delta-via-psi spec".into(),
        });
    }
    budget.validate()?;
    ensure_upper(z)?;
    let m = spec.m;
    let k = spec.k;
    let mf = m.m();
    let pref = (4.0 * PI).powf(mf - 1.0) * cpowi(-2.0 * PI * I, k as i32)
        / gamma_half_integer(m.two_m() - 2);

    let mut acc = CKahanSum::new();
    let mut tail = 0.0;
    let mut terms = 0u64;
    let mut psi_bound: f64 = 1.0;
    for n in 1..=budget.nmax {
        let psi_spec = SeriesSpec::psi(spec.level, m, n, spec.chi.clone())?;
        let psi = psi_eval(&psi_spec, z, budget)?;
        let weight = (n as f64).powf(mf + k as f64 - 1.0)
            * (-2.0 * PI * I * n as f64 * spec.xi.conj()).exp();
        acc.add(weight * psi.value);
        tail += weight.norm() * psi.tail_estimate;
        terms += psi.terms_used;
        psi_bound = psi_bound.max(psi.value.norm() + psi.tail_estimate);
    }
    // Geometric-type bound for the dropped n > nmax (ratio test): the
    // weight ratio is ((n+1)/n)^{m+k-1} e^{-2π Im ξ} < 1 once that is
    // below one; warn otherwise.
    let nm = budget.nmax as f64;
    let ratio = ((nm + 1.0) / nm).powf(mf + k as f64 - 1.0) * (-2.0 * PI * spec.xi.im).exp();
    let mut warning = false;
    if ratio < 1.0 {
        let next = (nm + 1.0).powf(mf + k as f64 - 1.0)
            * (-2.0 * PI * (nm + 1.0) * spec.xi.im).exp()
            * psi_bound;
        tail += next / (1.0 - ratio);
    } else {
        warning = true;
    }
    Ok(SeriesValue {
        value: pref * acc.value(),
        tail_estimate: pref.norm() * tail,
        terms_used: terms,
        budget_warning: warning,
    })
}

/// `Γ(j/2)` for odd positive `j` (exact apart from rounding):
/// `Γ(1/2 + r) = √π ∏_{i=1}^{r} (i - 1/2)`.
pub fn gamma_half_integer(j: i64) -> f64 {
    assert!(j > 0 && j % 2 == 1, "gamma_half_integer needs odd positive j");
    let r = (j - 1) / 2;
    let mut acc = PI.sqrt();
    for i in 1..=r {
        acc *= i as f64 - 0.5;
    }
    acc
}

/// Literal evaluation of the `Δ` sum over an explicit element list from
/// [`crate::arith::enumerate_group`] (for cross-validation at small
/// heights; no tail estimate beyond the box).
pub fn delta_eval_flat(spec: &SeriesSpec, z: Complex64, list: &CosetList) -> Result<SeriesValue> {
    if spec.family != SeriesFamily::Delta {
        return Err(Error::BadParameter {
            name: "family",
            why: "delta_eval_flat needs a delta spec".into(),
        });
    }
    if list.tag != CosetTag::FullGroup || list.level != spec.level {
        return Err(Error::BadParameter {
            name: "list",
            why: "need a full-group list at the spec level".into(),
        });
    }
    ensure_upper(z)?;
    let m = spec.m;
    let two_m = m.two_m();
    let k = spec.k;
    let pref = half_integer_power(2.0 * I, two_m as i32)? / (4.0 * PI) * m.prod_m_minus_1(k);
    let xi_bar = spec.xi.conj();
    let mut acc = CKahanSum::new();
    for g in &list.entries {
        let j = multiplier_j(g, z)?;
        let w = g.moebius(z)?;
        let term = spec.chi.eval(g.d).conj()
            * half_integer_power(w - xi_bar, -(two_m as i32) - 2 * k as i32)?
            * cpowi(j, -(two_m as i32));
        acc.add(term);
    }
    Ok(SeriesValue {
        value: pref * acc.value(),
        tail_estimate: f64::NAN,
        terms_used: list.entries.len() as u64,
        budget_warning: false,
    })
}

/// Literal evaluation of the `ψ` sum over an explicit representative list
/// from [`crate::arith::coset_reps_infty`].
pub fn psi_eval_flat(spec: &SeriesSpec, z: Complex64, list: &CosetList) -> Result<SeriesValue> {
    if spec.family != SeriesFamily::Psi {
        return Err(Error::BadParameter {
            name: "family",
            why: "psi_eval_flat needs a psi spec".into(),
        });
    }
    if list.tag != CosetTag::InfinityCoset || list.level != spec.level {
        return Err(Error::BadParameter {
            name: "list",
            why: "need an infinity-coset list at the spec level".into(),
        });
    }
    ensure_upper(z)?;
    let two_m = spec.m.two_m();
    let n = spec.n as f64;
    let mut acc = CKahanSum::new();
    for g in &list.entries {
        let j = multiplier_j(g, z)?;
        let w = g.moebius(z)?;
        let term =
            spec.chi.eval(g.d).conj() * (2.0 * PI * I * n * w).exp() * cpowi(j, -(two_m as i32));
        acc.add(term);
    }
    Ok(SeriesValue {
        value: acc.value(),
        tail_estimate: f64::NAN,
        terms_used: list.entries.len() as u64,
        budget_warning: false,
    })
}

fn ensure_upper(z: Complex64) -> Result<()> {
    if z.im < DEGENERATE_IM {
        Err(Error::domain(format!(
            "point z = {z} too close to the real axis"
        )))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{coset_reps_infty, enumerate_group};
    use crate::config::rel_err_c;
    use crate::group::slash_apply;
    use crate::IntMatrix;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn m92() -> HalfWeight {
        HalfWeight::new(9).unwrap()
    }

    fn chi4() -> DirichletCharacter {
        DirichletCharacter::trivial(4).unwrap()
    }

    fn tight_budget() -> TruncationBudget {
        TruncationBudget {
            cmax: 600,
            term_tol: 1e-9,
            ..TruncationBudget::default()
        }
    }

    #[test]
    fn periodized_sum_matches_brute_force() {
        for (w, s2) in [
            (c64(0.3, 0.8), 9i64),
            (c64(-0.7, 2.4), 9),
            (c64(0.1, -1.3), 11),
            (c64(5.2, 0.15), 13),
        ] {
            let (fast, res) = periodized_power_sum(w, s2, PERIODIZED_HALF_WIDTH);
            let mut brute = CKahanSum::new();
            let center = (-w.re).round() as i64;
            for b in (center - 400_000)..=(center + 400_000) {
                brute.add(cpowi(sqrt_branch(w + b as f64), -(s2 as i32)));
            }
            // The discrepancy must sit inside the reported residual bound;
            // relative accuracy is only meaningful away from the heavy
            // cancellation that sets in for large Im(w).
            let rel = rel_err_c(fast, brute.value());
            if w.im.abs() <= 1.0 {
                assert!(rel < 1e-9, "w={w} s2={s2} rel={rel:.2e} res={res:.2e}");
            }
            assert!((fast - brute.value()).norm() <= res.max(1e-13), "w={w} s2={s2}");
        }
    }

    #[test]
    fn gamma_half_integer_pins() {
        assert!((gamma_half_integer(1) - PI.sqrt()).abs() < 1e-15);
        assert!((gamma_half_integer(3) - PI.sqrt() / 2.0).abs() < 1e-15);
        assert!((gamma_half_integer(7) - 15.0 * PI.sqrt() / 8.0).abs() < 1e-13);
    }

    #[test]
    fn delta_c0_stratum_only() {
        // cmax = 0 leaves only the translation stratum: the value is the
        // prefactor times the periodized power sum, exactly.
        let spec = SeriesSpec::delta(4, m92(), 0, c64(0.0, 1.5), chi4()).unwrap();
        let z = c64(0.2, 1.1);
        let budget = TruncationBudget { cmax: 0, ..TruncationBudget::default() };
        let v = delta_eval(&spec, z, &budget).unwrap();
        let pref = half_integer_power(2.0 * I, 9).unwrap() / (4.0 * PI) * m92().prod_m_minus_1(0);
        let (s, _) = periodized_power_sum(z - c64(0.0, -1.5), 9, 10);
        let expected = pref * s;
        assert!(rel_err_c(v.value, expected) < 1e-14);
        // The dropped strata are covered by the reported tail majorant.
        let full = delta_eval(&spec, z, &tight_budget()).unwrap();
        assert!((full.value - v.value).norm() <= v.tail_estimate);
    }

    #[test]
    fn psi_identity_coset_dominates_high_up() {
        // High in the cusp the non-identity strata decay like the lattice
        // majorant (the identity term itself decays even faster, so the
        // comparison is in absolute terms).
        let spec = SeriesSpec::psi(4, m92(), 1, chi4()).unwrap();
        let z = c64(0.3, 10.0);
        let v = psi_eval(&spec, z, &tight_budget()).unwrap();
        let expected = (2.0 * PI * I * z).exp();
        // Lattice majorant at |cz+d| >= 4y = 40 with m = 9/2.
        let majorant = 2.0 * PI / (4.0 * z.im) * 40f64.powf(-2.5) / 2.5 * 2.0;
        assert!((v.value - expected).norm() <= majorant, "v={:?}", v.value);
        assert!((v.value - expected).norm() < 1e-8);
        // At moderate height the identity term carries the bulk.
        let z2 = c64(0.3, 1.2);
        let v2 = psi_eval(&spec, z2, &tight_budget()).unwrap();
        let id2 = (2.0 * PI * I * z2).exp();
        assert!((v2.value - id2).norm() < 0.5 * id2.norm());
    }

    #[test]
    fn psi_truncation_stability() {
        let spec = SeriesSpec::psi(4, m92(), 1, chi4()).unwrap();
        let z = c64(0.0, 1.0);
        let coarse = psi_eval(
            &spec,
            z,
            &TruncationBudget { cmax: 300, term_tol: 3e-9, ..Default::default() },
        )
        .unwrap();
        let fine = psi_eval(
            &spec,
            z,
            &TruncationBudget { cmax: 700, term_tol: 5e-10, ..Default::default() },
        )
        .unwrap();
        assert!(rel_err_c(coarse.value, fine.value) < 1e-6);
        assert!((coarse.value - fine.value).norm() <= 10.0 * coarse.tail_estimate.max(1e-12));
    }

    #[test]
    fn strat_delta_matches_flat_enumeration() {
        // The windowed stratified engine against the literal box sum, at a
        // point where the series value is well above both truncation tails.
        let spec = SeriesSpec::delta(4, m92(), 1, c64(0.3, 1.2), chi4()).unwrap();
        let z = c64(0.13, 0.8);
        let strat = delta_eval(&spec, z, &tight_budget()).unwrap();
        let list = enumerate_group(4, 16).unwrap();
        let flat = delta_eval_flat(&spec, z, &list).unwrap();
        let rel = rel_err_c(strat.value, flat.value);
        // The gap is dominated by the flat box's own c-tail (~2e-4 rel here).
        assert!(rel < 1e-3, "strat={:?} flat={:?} rel={rel:.2e}", strat.value, flat.value);
    }

    #[test]
    fn strat_psi_matches_flat_enumeration() {
        let spec = SeriesSpec::psi(4, m92(), 1, chi4()).unwrap();
        let z = c64(0.37, 0.61);
        let strat = psi_eval(&spec, z, &tight_budget()).unwrap();
        let list = coset_reps_infty(4, 150).unwrap();
        let flat = psi_eval_flat(&spec, z, &list).unwrap();
        let rel = rel_err_c(strat.value, flat.value);
        assert!(rel < 1e-5, "strat={:?} flat={:?} rel={rel:.2e}", strat.value, flat.value);
    }

    #[test]
    fn psi_term_independent_of_completion() {
        // Changing the (a, b) completion of a representative multiplies by
        // a unipotent on the left and must not change the series term.
        let spec = SeriesSpec::psi(4, m92(), 2, chi4()).unwrap();
        let z = c64(0.37, 0.9);
        let g = IntMatrix::new(1, 0, 4, 1).unwrap();
        let shift = IntMatrix::new(1, 3, 0, 1).unwrap(); // n_3
        let g2 = shift.mul(&g).unwrap();
        let term = |g: &IntMatrix| {
            let j = multiplier_j(g, z).unwrap();
            spec.chi.eval(g.d).conj()
                * (2.0 * PI * I * 2.0 * g.moebius(z).unwrap()).exp()
                * cpowi(j, -9)
        };
        assert!((term(&g) - term(&g2)).norm() < 1e-14);
    }

    #[test]
    fn pfkm_fast_vs_direct() {
        let chi = chi4();
        for k in 0..=2u32 {
            let spec = SeriesSpec::pfkm(4, m92(), k, chi.clone()).unwrap();
            let z = c64(0.21, 0.8);
            let fast = pfkm_eval(&spec, z, &tight_budget()).unwrap();
            let direct = pfkm_eval_direct(&spec, z, &tight_budget(), 400).unwrap();
            let rel = rel_err_c(fast.value, direct.value);
            assert!(rel < 1e-4, "k={k} rel={rel:.2e}");
        }
    }

    /// P f_{k,m} = Σ_l C(k,l)(-2i)^l · 4π/∏_{r=0}^{l}(m-1+r) · Δ_{l,m,i,χ},
    /// checked with the literal (direct) route on the left.
    #[test]
    fn pfkm_is_binomial_combination_of_delta() {
        let chi = chi4();
        let z = c64(-0.17, 1.1);
        let budget = tight_budget();
        for k in 0..=3u32 {
            let spec = SeriesSpec::pfkm(4, m92(), k, chi.clone()).unwrap();
            let lhs = pfkm_eval_direct(&spec, z, &budget, 400).unwrap().value;
            let mut rhs = Complex64::new(0.0, 0.0);
            for l in 0..=k {
                let dspec = SeriesSpec::delta(4, m92(), l, I, chi.clone()).unwrap();
                let dval = delta_eval(&dspec, z, &budget).unwrap().value;
                rhs += binomial(k, l) * cpowi(-2.0 * I, l as i32) * 4.0 * PI
                    / m92().prod_m_minus_1(l)
                    * dval;
            }
            let rel = rel_err_c(lhs, rhs);
            assert!(rel < 1e-4, "k={k} rel={rel:.2e}");
        }
    }

    #[test]
    fn delta_two_paths_agree() {
        let chi = chi4();
        let spec_d = SeriesSpec::delta(4, m92(), 0, c64(0.0, 2.0), chi.clone()).unwrap();
        let spec_p = SeriesSpec::delta_via_psi(4, m92(), 0, c64(0.0, 2.0), chi).unwrap();
        let z = c64(0.0, 1.0);
        let budget = TruncationBudget { cmax: 800, term_tol: 1e-10, nmax: 8, ..Default::default() };
        let direct = delta_eval(&spec_d, z, &budget).unwrap();
        let via = delta_via_psi(&spec_p, z, &budget).unwrap();
        let rel = rel_err_c(direct.value, via.value);
        assert!(rel < 1e-3, "direct={:?} via={:?} rel={rel:.2e}", direct.value, via.value);
        assert!(
            (direct.value - via.value).norm()
                <= (direct.tail_estimate + via.tail_estimate).max(1e-9)
                    * 10.0
        );
    }

    #[test]
    fn delta_automorphy() {
        // Δ|_m γ = χ(γ) Δ for the generator γ = (1 0; 4 1).
        let chi = chi4();
        let spec = SeriesSpec::delta(4, m92(), 0, c64(0.3, 1.5), chi).unwrap();
        let budget = TruncationBudget { cmax: 600, term_tol: 1e-9, ..Default::default() };
        let z = c64(0.23, 0.9);
        let gamma = IntMatrix::new(1, 0, 4, 1).unwrap().lift_theta().unwrap();
        let f = |w: Complex64| Ok(delta_eval(&spec, w, &budget)?.value);
        let lhs = slash_apply(f, m92(), &gamma, z).unwrap();
        let rhs = delta_eval(&spec, z, &budget).unwrap();
        let rel = rel_err_c(lhs, rhs.value);
        assert!(rel < 1e-5, "rel={rel:.2e}");
    }

    #[test]
    fn psi_automorphy() {
        let chi = chi4();
        let spec = SeriesSpec::psi(4, m92(), 1, chi).unwrap();
        let budget = TruncationBudget { cmax: 600, term_tol: 1e-9, ..Default::default() };
        let z = c64(-0.31, 0.8);
        for (a, b, c, d) in [(1i64, 1, 0, 1), (1, 0, 4, 1), (5, 1, 4, 1)] {
            let gamma = IntMatrix::new(a, b, c, d).unwrap().lift_theta().unwrap();
            let f = |w: Complex64| Ok(psi_eval(&spec, w, &budget)?.value);
            let lhs = slash_apply(f, m92(), &gamma, z).unwrap();
            let rhs = psi_eval(&spec, z, &budget).unwrap();
            let rel = rel_err_c(lhs, rhs.value);
            assert!(rel < 1e-5, "gamma=({a},{b};{c},{d}) rel={rel:.2e}");
        }
    }

    #[test]
    fn holomorphy_proxy() {
        // Discrete Cauchy-Riemann residual of the evaluated series.
        let chi = chi4();
        let spec = SeriesSpec::psi(4, m92(), 1, chi).unwrap();
        let budget = TruncationBudget { cmax: 600, term_tol: 1e-9, ..Default::default() };
        let z = c64(0.11, 1.3);
        let h = 1e-3;
        let f = |w: Complex64| psi_eval(&spec, w, &budget).unwrap().value;
        let dx = (f(z + h) - f(z - h)) / (2.0 * h);
        let dy = (f(z + I * h) - f(z - I * h)) / (2.0 * h);
        let residual = (dx + I * dy).norm() / 2.0;
        assert!(residual < 1e-6, "residual={residual:.2e}");
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(SeriesSpec::delta(6, m92(), 0, I, chi4()).is_err());
        assert!(SeriesSpec::delta(4, m92(), 0, c64(1.0, -0.5), chi4()).is_err());
        assert!(SeriesSpec::psi(4, m92(), 0, chi4()).is_err());
        assert!(SeriesSpec::delta(4, HalfWeight::new(3).unwrap(), 0, I, chi4()).is_err());
        let spec = SeriesSpec::psi(4, m92(), 1, chi4()).unwrap();
        assert!(psi_eval(&spec, c64(0.0, 0.0), &TruncationBudget::default()).is_err());
    }
}
