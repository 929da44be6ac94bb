//! Fourier-coefficient extraction, the two expansions of the reproducing
//! kernels, Hecke operators `T_{p²}` on q-expansions, and empirical
//! sup-norm scans.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::arith::{kronecker, DirichletCharacter};
use crate::config::rel_err_c;
use crate::error::Error;
use crate::group::HalfWeight;
use crate::kahan::CKahanSum;
use crate::petersson::cauchy_derivative;
use crate::series::{delta_eval, gamma_half_integer, psi_eval, SeriesSpec, TruncationBudget};
use crate::Result;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Finite q-expansion `a_1 .. a_nmax` of a width-1 cusp form
/// (`a_0 = 0` by cuspidality; `a_n = 0` implicitly for `n ≤ 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QExpansion {
    coeffs: Vec<Complex64>,
}

impl QExpansion {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Self { coeffs }
    }

    pub fn zero(len: usize) -> Self {
        Self {
            coeffs: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `a_n`; zero for `n ≤ 0` (cuspidality) and for `n` beyond the stored
    /// range (callers that cannot tolerate that must check `len`).
    pub fn a(&self, n: i64) -> Complex64 {
        if n < 1 || n as usize > self.coeffs.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[n as usize - 1]
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn set(&mut self, n: usize, v: Complex64) {
        self.coeffs[n - 1] = v;
    }

    /// `Σ_n a_n e^{2πinz}`, truncated at the stored length.
    pub fn eval_at(&self, z: Complex64) -> Complex64 {
        let q = (2.0 * PI * I * z).exp();
        // Horner in q.
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * q + c;
        }
        acc * q
    }

    pub fn scale(&self, s: Complex64) -> QExpansion {
        QExpansion {
            coeffs: self.coeffs.iter().map(|&c| c * s).collect(),
        }
    }

    pub fn add(&self, other: &QExpansion) -> QExpansion {
        let len = self.coeffs.len().max(other.coeffs.len());
        let mut out = QExpansion::zero(len);
        for n in 1..=len {
            out.coeffs[n - 1] = self.a(n as i64) + other.a(n as i64);
        }
        out
    }
}

/// On-disk format: metadata header plus `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QExpansionFile {
    pub level: i64,
    pub two_m: i64,
    pub chi: String,
    pub provenance: String,
    pub coeffs: Vec<[f64; 2]>,
}

impl QExpansionFile {
    pub fn new(
        q: &QExpansion,
        level: i64,
        two_m: i64,
        chi: String,
        provenance: String,
    ) -> Self {
        Self {
            level,
            two_m,
            chi,
            provenance,
            coeffs: q.coeffs().iter().map(|c| [c.re, c.im]).collect(),
        }
    }

    pub fn expansion(&self) -> QExpansion {
        QExpansion::new(
            self.coeffs
                .iter()
                .map(|p| Complex64::new(p[0], p[1]))
                .collect(),
        )
    }
}

/// Fourier coefficients of a 1-periodic holomorphic `f` from equispaced
/// samples on the line `Im(z) = y0`:
/// `a_n = e^{2πn y0} (1/S) Σ_j f(x_j + iy0) e^{-2πin x_j}`.
///
/// Returns the expansion plus an aliasing indicator: the largest raw DFT
/// bin beyond `nmax`, relative to the sample magnitude (small when the
/// sampled spectrum has decayed below `nmax`). Extraction noise in `a_n`
/// grows like `e^{2πn y0}` times the sample error, so high coefficients
/// need small `y0`.
pub fn fourier_coefficients<F>(
    f: F,
    y0: f64,
    nmax: usize,
    samples: usize,
) -> Result<(QExpansion, f64)>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    if !(y0 > 0.0) {
        return Err(Error::domain(format!("y0 = {y0} must be positive")));
    }
    if nmax == 0 {
        return Err(Error::BadParameter {
            name: "nmax",
            why: "need nmax >= 1".into(),
        });
    }
    let extra = 4usize;
    if samples < 4 * (nmax + extra) {
        return Err(Error::InsufficientSamples {
            required: 4 * (nmax + extra),
            nmax,
            got: samples,
        });
    }
    let values: Vec<Complex64> = (0..samples)
        .into_par_iter()
        .map(|j| {
            let z = Complex64::new(j as f64 / samples as f64, y0);
            f(z).map_err(|e| e.at_node(z))
        })
        .collect::<Result<Vec<_>>>()?;
    let raw_bin = |n: usize| -> Complex64 {
        let mut acc = CKahanSum::new();
        for (j, &v) in values.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -2.0 * PI * (n * j % samples) as f64 / samples as f64);
            acc.add(v * phase);
        }
        acc.value() / samples as f64
    };
    let coeffs: Vec<Complex64> = (1..=nmax)
        .map(|n| raw_bin(n) * (2.0 * PI * n as f64 * y0).exp())
        .collect();
    let scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
    let alias = (nmax + 1..=nmax + extra)
        .map(|n| raw_bin(n).norm())
        .fold(0.0, f64::max)
        / scale;
    Ok((QExpansion::new(coeffs), alias))
}

/// Predicted Fourier coefficient of the kernel `Δ_{k,m,ξ,χ}`:
/// `a_n = (4π)^{m-1}/Γ(m-1) · n^{m-1} · conj(ψ_n^{(k)}(ξ))`
/// (width 1; `a_n = 0` for `n ≤ 0` by cuspidality).
///
/// For `k = 0` the classical-series value is used directly; derivatives
/// go through Cauchy circles, with the radius shrunk for large `n` so the
/// trapezoid rule resolves the oscillation of `e^{2πin γ.ζ}` along the
/// circle.
pub fn delta_coeff_predicted(
    n: i64,
    k: u32,
    m: HalfWeight,
    xi: Complex64,
    chi: &DirichletCharacter,
    level: i64,
    budget: &TruncationBudget,
) -> Result<Complex64> {
    if n <= 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let spec = SeriesSpec::psi(level, m, n as u32, chi.clone())?;
    let deriv = if k == 0 {
        psi_eval(&spec, xi, budget)?.value
    } else {
        let psi_fn = |z: Complex64| Ok(psi_eval(&spec, z, budget)?.value);
        let radius = (xi.im / 2.0).min(8.0 / n as f64);
        cauchy_derivative(psi_fn, xi, k, radius, 96)?
    };
    let mf = m.m();
    let pref = (4.0 * PI).powf(mf - 1.0) / gamma_half_integer(m.two_m() - 2);
    Ok(pref * (n as f64).powf(mf - 1.0) * deriv.conj())
}

/// Parameters of the Hecke operator `T_{p², m, χ}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeckeSpec {
    pub p: u32,
    pub m: HalfWeight,
    pub chi: DirichletCharacter,
    pub level: i64,
}

impl HeckeSpec {
    pub fn new(p: u32, m: HalfWeight, chi: DirichletCharacter, level: i64) -> Result<Self> {
        if !is_prime(p as i64) {
            return Err(Error::BadParameter {
                name: "p",
                why: format!("{p} is not prime"),
            });
        }
        Ok(Self { p, m, chi, level })
    }

    /// `p ∤ N`, required by the adjointness-derived statements.
    pub fn require_coprime_level(&self) -> Result<()> {
        if self.level % self.p as i64 == 0 {
            return Err(Error::BadParameter {
                name: "p",
                why: format!("p = {} divides the level {}", self.p, self.level),
            });
        }
        Ok(())
    }
}

fn is_prime(n: i64) -> bool {
    if n < 2 {
        return false;
    }
    let mut i = 2;
    while i * i <= n {
        if n % i == 0 {
            return false;
        }
        i += 1;
    }
    true
}

/// Legendre-type symbol in the Hecke formulas: the usual `(n|p)` for odd
/// primes, identically zero for `p = 2`.
fn hecke_legendre(n: i64, p: u32) -> i64 {
    if p == 2 {
        0
    } else {
        kronecker(n, p as i64)
    }
}

/// Coefficient action of `T_{p², m, χ}`:
/// `b(n) = a(p²n) + (-1|p)^{m-1/2} χ(p) (n|p) p^{m-3/2} a(n) + χ(p²) p^{2m-2} a(n/p²)`,
/// with `a(n/p²) = 0` unless `p² | n`.
///
/// `out_len` defaults to `len(q) / p²`; the input must hold `p²·out_len`
/// coefficients so every `a(p²n)` is available.
pub fn hecke_tp2(
    q: &QExpansion,
    spec: &HeckeSpec,
    out_len: Option<usize>,
) -> Result<QExpansion> {
    let p = spec.p as i64;
    let p2 = p * p;
    let out_len = out_len.unwrap_or(q.len() / p2 as usize);
    let required = p2 as usize * out_len;
    if q.len() < required {
        return Err(Error::ExpansionTooShort {
            required,
            got: q.len(),
        });
    }
    let two_m = spec.m.two_m();
    // m - 1/2 and m - 3/2 are integers for half-integral m.
    let sign = kronecker(-1, p).pow(((two_m - 1) / 2) as u32) as f64;
    let p_m32 = (p as f64).powi(((two_m - 3) / 2) as i32);
    let p_2m2 = (p as f64).powi((two_m - 2) as i32);
    let chi_p = spec.chi.eval(p);
    let chi_p2 = spec.chi.eval(p2);
    let mut out = QExpansion::zero(out_len);
    for n in 1..=out_len as i64 {
        let middle = sign * chi_p * hecke_legendre(n, spec.p) as f64 * p_m32 * q.a(n);
        let lower = if n % p2 == 0 {
            chi_p2 * p_2m2 * q.a(n / p2)
        } else {
            Complex64::new(0.0, 0.0)
        };
        out.set(n as usize, q.a(p2 * n) + middle + lower);
    }
    Ok(out)
}

/// The multiplier `E_{p,k,n,m,χ}(ξ)` describing how `T_{p²}` acts on the
/// classical-series expansion of the kernels:
/// `1_{p²|n} χ(p²) p^{-2k} e^{-2πi(n/p²)ξ̄} + (-1|p)^{m-1/2} χ(p)(n|p) p^{m-3/2} e^{-2πinξ̄} + p^{2m+2k-2} e^{-2πip²nξ̄}`.
pub fn e_factor(
    p: u32,
    k: u32,
    n: i64,
    m: HalfWeight,
    chi: &DirichletCharacter,
    xi: Complex64,
) -> Complex64 {
    let two_m = m.two_m();
    let pf = p as f64;
    let p2 = (p * p) as i64;
    let xi_bar = xi.conj();
    let e = |j: i64| (-2.0 * PI * I * j as f64 * xi_bar).exp();
    let mut acc = Complex64::new(0.0, 0.0);
    if n % p2 == 0 {
        acc += chi.eval(p2) * pf.powi(-2 * k as i32) * e(n / p2);
    }
    let sign = kronecker(-1, p as i64).pow(((two_m - 1) / 2) as u32) as f64;
    acc += sign
        * chi.eval(p as i64)
        * hecke_legendre(n, p) as f64
        * pf.powi(((two_m - 3) / 2) as i32)
        * e(n);
    acc += pf.powi((two_m - 2 + 2 * k as i64) as i32) * e(p2 * n);
    acc
}

/// Per-coefficient comparison from [`hecke_delta_check`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeckeCheckReport {
    /// `(n, pipeline A, pipeline B, relative error)`.
    pub rows: Vec<(usize, Complex64, Complex64, f64)>,
    pub max_rel_err: f64,
    /// Extraction-vs-predicted agreement on the overlap range of
    /// pipeline A (a consistency indicator for the hybrid route).
    pub overlap_max_rel: f64,
    /// Highest coefficient index taken from direct extraction.
    pub n_extracted: usize,
}

/// Two routes to the coefficients of `Δ|T_{p²}`:
///
/// - Pipeline A applies the coefficient formula to the kernel's own
///   q-expansion. Coefficients up to `n_extract` come from sampling the
///   kernel series on a horizontal line; beyond that the noise
///   amplification `e^{2πn y0}` swamps any attainable series accuracy,
///   so the predicted route (classical-series derivatives) supplies
///   them. Both routes are compared on the overlap.
/// - Pipeline B extracts the coefficients of the recombined partial sum
///   `Σ_j j^{m+k-1} E_{p,k,j}(ξ) ψ_j(z)` (scaled by the kernel-expansion
///   prefactor) directly.
pub fn hecke_delta_check(
    k: u32,
    m: HalfWeight,
    xi: Complex64,
    chi: &DirichletCharacter,
    level: i64,
    p: u32,
    budget: &TruncationBudget,
    nmax: usize,
) -> Result<HeckeCheckReport> {
    let hecke = HeckeSpec::new(p, m, chi.clone(), level)?;
    hecke.require_coprime_level()?;
    let p2 = (p * p) as usize;
    let need = p2 * nmax;
    let mf = m.m();

    // Pipeline A: hybrid coefficients for the kernel itself. Only the
    // indices the coefficient formula touches are needed: 1..nmax (the
    // a(n) and a(n/p²) arms, extracted), and the multiples p²·n (the
    // a(p²n) arm, predicted — those sit far beyond the reliable
    // extraction range, where noise amplified by e^{2πn y0} would exceed
    // any attainable kernel-series accuracy).
    let dspec = SeriesSpec::delta(level, m, k, xi, chi.clone())?;
    let y0 = 0.2;
    let n_extract = nmax.min(((2.2 / y0) as usize).max(1)).min(need);
    let delta_fn = |z: Complex64| Ok(delta_eval(&dspec, z, budget)?.value);
    let samples = (budget.fourier_samples as usize).max(8 * (n_extract + 4));
    let (extracted, _alias) = fourier_coefficients(&delta_fn, y0, n_extract, samples)?;

    let mut wanted: Vec<i64> = (1..=n_extract as i64).collect();
    for n in 1..=nmax as i64 {
        if (p2 as i64 * n) as usize > n_extract {
            wanted.push(p2 as i64 * n);
        }
    }
    let predicted: Vec<(i64, Complex64)> = wanted
        .par_iter()
        .map(|&n| Ok((n, delta_coeff_predicted(n, k, m, xi, chi, level, budget)?)))
        .collect::<Result<Vec<_>>>()?;
    let pred_at = |n: i64| -> Complex64 {
        predicted
            .iter()
            .find(|&&(j, _)| j == n)
            .map(|&(_, v)| v)
            .unwrap_or(Complex64::new(0.0, 0.0))
    };

    let mut overlap_max_rel: f64 = 0.0;
    for n in 1..=n_extract as i64 {
        overlap_max_rel = overlap_max_rel.max(rel_err_c(extracted.a(n), pred_at(n)));
    }
    let mut hybrid = QExpansion::zero(need);
    for n in 1..=need as i64 {
        let v = if n as usize <= n_extract {
            extracted.a(n)
        } else {
            pred_at(n)
        };
        hybrid.set(n as usize, v);
    }
    let b_a = hecke_tp2(&hybrid, &hecke, Some(nmax))?;

    // Pipeline B: extract the coefficients of the recombined sum.
    let jmax = (p2 * 2 + 10).max(nmax + 4);
    let pref = (4.0 * PI).powf(mf - 1.0) * crate::group::cpowi(-2.0 * PI * I, k as i32)
        / gamma_half_integer(m.two_m() - 2);
    let psi_specs: Vec<SeriesSpec> = (1..=jmax)
        .map(|j| SeriesSpec::psi(level, m, j as u32, chi.clone()))
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<Complex64> = (1..=jmax)
        .map(|j| (j as f64).powf(mf + k as f64 - 1.0) * e_factor(p, k, j as i64, m, chi, xi))
        .collect();
    let recombined = |z: Complex64| -> Result<Complex64> {
        let mut acc = CKahanSum::new();
        for (spec, w) in psi_specs.iter().zip(&weights) {
            if w.norm() == 0.0 {
                continue;
            }
            acc.add(*w * psi_eval(spec, z, budget)?.value);
        }
        Ok(pref * acc.value())
    };
    let y0b = 0.25;
    let samples_b = (budget.fourier_samples as usize).max(8 * (nmax + 4));
    let (b_b, _aliasb) = fourier_coefficients(&recombined, y0b, nmax, samples_b)?;

    let mut rows = Vec::with_capacity(nmax);
    let mut max_rel: f64 = 0.0;
    for n in 1..=nmax {
        let rel = rel_err_c(b_a.a(n as i64), b_b.a(n as i64));
        max_rel = max_rel.max(rel);
        rows.push((n, b_a.a(n as i64), b_b.a(n as i64), rel));
    }
    Ok(HeckeCheckReport {
        rows,
        max_rel_err: max_rel,
        overlap_max_rel,
        n_extracted: n_extract,
    })
}

/// Rectangular scan grid; `y` is log-spaced.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_lo: f64,
    pub x_hi: f64,
    pub nx: usize,
    pub y_lo: f64,
    pub y_hi: f64,
    pub ny: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.nx * self.ny);
        let (ul, uh) = (self.y_lo.ln(), self.y_hi.ln());
        for i in 0..self.nx {
            let x = self.x_lo
                + (self.x_hi - self.x_lo) * (i as f64 + 0.5) / self.nx as f64;
            for j in 0..self.ny {
                let u = ul + (uh - ul) * (j as f64 + 0.5) / self.ny as f64;
                out.push(Complex64::new(x, u.exp()));
            }
        }
        out
    }

    fn doubled_top(&self) -> GridSpec {
        GridSpec {
            y_lo: self.y_hi,
            y_hi: self.y_hi * 2.0,
            ny: (self.ny / 2).max(4),
            ..*self
        }
    }
}

/// Result of an empirical sup scan. `plateau_flag` records that doubling
/// the top of the `y` range did not raise the sup by more than 1%; this
/// is finiteness evidence, not a proof.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScanResult {
    pub sup_value: f64,
    pub argmax: Complex64,
    pub plateau_flag: bool,
    pub sup_in_extension: f64,
}

/// Empirical sup of a weighted quantity over a grid, with the doubling
/// test on the upper `y` boundary.
pub fn bound_scan<F>(weighted: F, grid: &GridSpec) -> Result<ScanResult>
where
    F: Fn(Complex64) -> Result<f64> + Sync,
{
    let eval = |pts: Vec<Complex64>| -> Result<Vec<(Complex64, f64)>> {
        pts.into_par_iter()
            .map(|z| weighted(z).map(|v| (z, v)).map_err(|e| e.at_node(z)))
            .collect()
    };
    let base = eval(grid.points())?;
    let ext = eval(grid.doubled_top().points())?;
    let (mut argmax, mut sup) = (Complex64::new(0.0, 0.0), f64::NEG_INFINITY);
    for &(z, v) in &base {
        if v > sup {
            sup = v;
            argmax = z;
        }
    }
    let mut sup_ext = f64::NEG_INFINITY;
    for &(z, v) in &ext {
        sup_ext = sup_ext.max(v);
        if v > sup {
            sup = v;
            argmax = z;
        }
    }
    Ok(ScanResult {
        sup_value: sup,
        argmax,
        plateau_flag: sup_ext <= base.iter().map(|p| p.1).fold(0.0, f64::max) * 1.01,
        sup_in_extension: sup_ext,
    })
}

/// Weighted quantity `|f^{(k)}(ξ)| Im(ξ)^{m/2+k}` for derivative-decay
/// scans; derivatives by Cauchy circles of radius `Im(ξ)/2`.
pub fn derivative_decay_weight<'a, F>(
    f: F,
    k: u32,
    m: HalfWeight,
) -> impl Fn(Complex64) -> Result<f64> + Sync + 'a
where
    F: Fn(Complex64) -> Result<Complex64> + Sync + 'a,
{
    move |xi: Complex64| {
        let d = cauchy_derivative(&f, xi, k, xi.im / 2.0, 48)?;
        Ok(d.norm() * xi.im.powf(m.m() / 2.0 + k as f64))
    }
}
