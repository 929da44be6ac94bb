//! Quadrature over fundamental domains of `Γ₀(N)`, Petersson inner
//! products, Cauchy-circle derivatives, the kernel integral formula for
//! `f^{(k)}(ξ)`, and the reproducing-property verifiers.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

use crate::arith::IntMatrix;
use crate::config::{rel_err_c, DEGENERATE_IM};
use crate::error::Error;
use crate::group::{half_integer_power, HalfWeight};
use crate::kahan::{CKahanSum, KahanSum};
use crate::series::{self, SeriesSpec, TruncationBudget};
use crate::Result;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// What region a mesh represents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coverage {
    /// A fundamental domain of `Γ₀(level)`, realized as coset images of
    /// the standard modular domain.
    FundamentalDomain { level: i64 },
    /// One unit-width vertical strip, standing for all of the upper
    /// half-plane against 1-periodic integrands with periodized kernels.
    PlanePeriodized,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MeshNode {
    pub z: Complex64,
    pub w: f64,
    /// Index parity `(col % 2)·2 + row % 2`; the parity-0 subset with
    /// weights ×4 is a valid half-resolution rule, used for error
    /// estimation without extra evaluations.
    pub parity: u8,
}

/// Weighted sample points representing an integral against the hyperbolic
/// measure `dv = dx dy / y²`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadratureMesh {
    pub nodes: Vec<MeshNode>,
    pub coverage: Coverage,
    pub ymax: f64,
    pub resolution: (u32, u32),
    /// Total weight of nodes dropped below the cusp floor (fundamental
    /// domains only); reported as part of the truncation loss.
    pub dropped_weight: f64,
    pub cusp_floor: f64,
    pub provenance: String,
}

impl QuadratureMesh {
    /// `Σ w`, which approximates the hyperbolic volume of the covered region.
    pub fn volume(&self) -> f64 {
        let mut acc = KahanSum::new();
        for n in &self.nodes {
            acc.add(n.w);
        }
        acc.value()
    }

    pub fn to_json_file(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string(self).map_err(|e| Error::domain(e.to_string()))?;
        std::fs::write(path, s).map_err(|e| Error::domain(e.to_string()))
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::domain(e.to_string()))?;
        serde_json::from_str(&s).map_err(|e| Error::domain(e.to_string()))
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
        (g, y, x - a.div_euclid(b) * y)
    }
}

/// Right-coset representatives of `Γ₀(N)` in `SL(2,ℤ)`, one per class of
/// bottom rows in `P¹(ℤ/N)`; the index is `N ∏_{p|N} (1 + 1/p)`.
pub fn gamma0_coset_reps(level: i64) -> Result<Vec<IntMatrix>> {
    if level <= 0 {
        return Err(Error::BadLevel { level });
    }
    let n = level;
    let units: Vec<i64> = (1..n).filter(|&u| gcd(u, n) == 1).collect();
    let mut seen = vec![false; (n * n) as usize];
    let mut reps = Vec::new();
    for c in 0..n {
        for d in 0..n {
            if gcd(gcd(c, d), n) != 1 || seen[(c * n + d) as usize] {
                continue;
            }
            for &u in &units {
                let key = ((u * c % n) * n + (u * d % n)) as usize;
                seen[key] = true;
            }
            // Lift (c, d) mod N to a coprime integer pair.
            let (mut c0, mut d0) = (c, d);
            let mut shift = 0;
            while gcd(c0, d0) != 1 {
                shift += 1;
                d0 = d + shift * n;
                if shift > n + 1 {
                    c0 = c + n;
                    d0 = d;
                    shift = 0;
                }
            }
            let (g, u, v) = ext_gcd(d0, c0);
            debug_assert_eq!(g, 1);
            reps.push(IntMatrix::new(u, -v, c0, d0)?);
        }
    }
    Ok(reps)
}

/// Midpoint tensor mesh on the standard modular domain
/// `{|x| ≤ 1/2, |z| ≥ 1}` in `(x, log y)`, truncated at `Im ≤ ymax`,
/// pushed through the `Γ₀(N)` coset maps with `dv`-invariant weights.
///
/// Pushed nodes falling below `cusp_floor` (deep in the horoball of a
/// finite cusp, where cusp-form integrands vanish) are dropped and their
/// total weight recorded for loss reporting.
pub fn fundamental_mesh(level: i64, ymax: f64, res: u32) -> Result<QuadratureMesh> {
    fundamental_mesh_with_floor(level, ymax, res, 0.03)
}

pub fn fundamental_mesh_with_floor(
    level: i64,
    ymax: f64,
    res: u32,
    cusp_floor: f64,
) -> Result<QuadratureMesh> {
    let reps = gamma0_coset_reps(level.max(1))?;
    fundamental_mesh_with_reps(level, ymax, res, cusp_floor, &reps)
}

/// As [`fundamental_mesh_with_floor`] but with caller-supplied coset
/// representatives (any section of `Γ₀(N)\SL(2,ℤ)` gives the same
/// integrals of invariant functions, up to quadrature error).
pub fn fundamental_mesh_with_reps(
    level: i64,
    ymax: f64,
    res: u32,
    cusp_floor: f64,
    reps: &[IntMatrix],
) -> Result<QuadratureMesh> {
    if level % 4 != 0 || level <= 0 {
        return Err(Error::BadLevel { level });
    }
    if !(ymax > 1.0) {
        return Err(Error::BadParameter {
            name: "ymax",
            why: "need ymax > 1".into(),
        });
    }
    let res = (res.max(4) + res % 2) as usize; // even
    let hx = 1.0 / res as f64;
    let mut nodes = Vec::with_capacity(reps.len() * res * res);
    let mut dropped = KahanSum::new();
    for (ci, col) in (0..res).map(|i| (i, -0.5 + (i as f64 + 0.5) * hx)) {
        // Exact curved lower boundary |z| = 1 per column.
        let ylo = (1.0 - col * col).sqrt();
        let ulo = ylo.ln();
        let uhi = ymax.ln();
        let hu = (uhi - ulo) / res as f64;
        for ri in 0..res {
            let u = ulo + (ri as f64 + 0.5) * hu;
            let y = u.exp();
            let z0 = Complex64::new(col, y);
            let w = hx * hu / y;
            let parity = ((ci % 2) * 2 + ri % 2) as u8;
            for rep in reps {
                let z = rep.moebius(z0)?;
                if z.im < cusp_floor {
                    dropped.add(w);
                    continue;
                }
                nodes.push(MeshNode { z, w, parity });
            }
        }
    }
    Ok(QuadratureMesh {
        nodes,
        coverage: Coverage::FundamentalDomain { level },
        ymax,
        resolution: (res as u32, res as u32),
        dropped_weight: dropped.value(),
        cusp_floor,
        provenance: format!(
            "gamma0({level}) fundamental domain; {} coset images of the standard domain; \
             midpoint grid {res}x{res} in (x, log y); ymax {ymax}; cusp floor {cusp_floor}",
            reps.len()
        ),
    })
}

/// Midpoint mesh on the strip `x ∈ [0,1)`, `y ∈ [y_lo, ymax]`, log-spaced
/// in `y`; represents plane integrals of 1-periodic integrands against
/// periodized kernels.
pub fn plane_strip_mesh(y_lo: f64, ymax: f64, res_x: u32, res_y: u32) -> Result<QuadratureMesh> {
    if !(y_lo > 0.0 && ymax > y_lo) {
        return Err(Error::BadParameter {
            name: "y_lo/ymax",
            why: "need 0 < y_lo < ymax".into(),
        });
    }
    let rx = (res_x.max(4) + res_x % 2) as usize;
    let ry = (res_y.max(4) + res_y % 2) as usize;
    let hx = 1.0 / rx as f64;
    let (ulo, uhi) = (y_lo.ln(), ymax.ln());
    let hu = (uhi - ulo) / ry as f64;
    let mut nodes = Vec::with_capacity(rx * ry);
    for ci in 0..rx {
        let x = (ci as f64 + 0.5) * hx;
        for ri in 0..ry {
            let u = ulo + (ri as f64 + 0.5) * hu;
            let y = u.exp();
            nodes.push(MeshNode {
                z: Complex64::new(x, y),
                w: hx * hu / y,
                parity: ((ci % 2) * 2 + ri % 2) as u8,
            });
        }
    }
    Ok(QuadratureMesh {
        nodes,
        coverage: Coverage::PlanePeriodized,
        ymax,
        resolution: (rx as u32, ry as u32),
        dropped_weight: 0.0,
        cusp_floor: y_lo,
        provenance: format!(
            "periodized plane strip; midpoint grid {rx}x{ry} in (x, log y); y in [{y_lo}, {ymax}]"
        ),
    })
}

/// Petersson inner product report.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InnerProductReport {
    pub value: Complex64,
    /// Richardson difference against the parity-0 half-resolution rule.
    pub quadrature_error_estimate: f64,
    /// Cusp-truncation loss: dropped node weight times the largest
    /// integrand magnitude seen in the lowest kept band, plus the
    /// height-`ymax` remainder scaled from the top band.
    pub truncation_height_loss: f64,
}

/// Evaluate `f` at every mesh node, in parallel, preserving node order.
pub fn eval_on_mesh<F>(f: F, mesh: &QuadratureMesh) -> Result<Vec<Complex64>>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    mesh.nodes
        .par_iter()
        .map(|node| f(node.z).map_err(|e| e.at_node(node.z)))
        .collect()
}

/// `⟨f, g⟩` from values already sampled on the mesh nodes (see
/// [`eval_on_mesh`]); lets callers reuse one expensive fill across
/// several pairings.
pub fn petersson_inner_sampled(
    f_vals: &[Complex64],
    g_vals: &[Complex64],
    m: HalfWeight,
    mesh: &QuadratureMesh,
) -> Result<InnerProductReport> {
    if !matches!(mesh.coverage, Coverage::FundamentalDomain { .. }) {
        return Err(Error::MeshCoverage {
            expected: "fundamental-domain".into(),
            got: format!("{:?}", mesh.coverage),
        });
    }
    if f_vals.len() != mesh.nodes.len() || g_vals.len() != mesh.nodes.len() {
        return Err(Error::LengthMismatch {
            expected: mesh.nodes.len(),
            got: f_vals.len().min(g_vals.len()),
        });
    }
    let mf = m.m();
    let mut total = CKahanSum::new();
    let mut coarse = CKahanSum::new();
    let mut low_max: f64 = 0.0;
    let mut top_max: f64 = 0.0;
    let mut global_max: f64 = 0.0;
    for ((fv, gv), node) in f_vals.iter().zip(g_vals).zip(&mesh.nodes) {
        let integrand = fv * gv.conj() * node.z.im.powf(mf);
        total.add(integrand * node.w);
        if node.parity == 0 {
            coarse.add(4.0 * integrand * node.w);
        }
        let mag = integrand.norm();
        global_max = global_max.max(mag);
        if node.z.im < 2.0 * mesh.cusp_floor {
            low_max = low_max.max(mag);
        }
        if node.z.im > 0.8 * mesh.ymax {
            top_max = top_max.max(mag);
        }
    }
    let value = total.value();
    let quad_est = (value - coarse.value()).norm() / 3.0;
    if low_max == 0.0 {
        low_max = global_max;
    }
    let loss = mesh.dropped_weight * low_max + top_max / (4.0 * PI);
    Ok(InnerProductReport {
        value,
        quadrature_error_estimate: quad_est,
        truncation_height_loss: loss,
    })
}

/// `⟨f, g⟩ = ∫ f(z) conj(g(z)) Im(z)^m dv(z)` over a fundamental-domain
/// mesh. Conjugate symmetry `⟨f,g⟩ = conj(⟨g,f⟩)` is exact by
/// construction (identical nodes and summation order).
pub fn petersson_inner<F, G>(
    f: F,
    g: G,
    m: HalfWeight,
    mesh: &QuadratureMesh,
) -> Result<InnerProductReport>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
    G: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let f_vals = eval_on_mesh(&f, mesh)?;
    let g_vals = eval_on_mesh(&g, mesh)?;
    petersson_inner_sampled(&f_vals, &g_vals, m, mesh)
}

/// `f^{(k)}(ξ)` by the Cauchy integral on a circle of the given radius,
/// trapezoid rule over `nodes` points (spectrally accurate for
/// holomorphic `f`).
pub fn cauchy_derivative<F>(
    f: F,
    xi: Complex64,
    k: u32,
    radius: f64,
    nodes: usize,
) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    if xi.im < DEGENERATE_IM {
        return Err(Error::domain(format!("Im(xi) = {} too small", xi.im)));
    }
    if !(radius > 0.0) || radius >= xi.im {
        return Err(Error::domain(format!(
            "circle of radius {radius} around {xi} leaves the upper half-plane"
        )));
    }
    if nodes < 8 + k as usize {
        return Err(Error::BadParameter {
            name: "nodes",
            why: "need at least 8 + k circle nodes".into(),
        });
    }
    let mut acc = CKahanSum::new();
    for j in 0..nodes {
        let th = 2.0 * PI * j as f64 / nodes as f64;
        let zeta = xi + Complex64::from_polar(radius, th);
        let val = f(zeta).map_err(|e| e.at_node(zeta))?;
        acc.add(val * Complex64::from_polar(1.0, -(k as f64) * th));
    }
    let mut kfact = 1.0;
    for i in 1..=k {
        kfact *= i as f64;
    }
    Ok(acc.value() * kfact / (nodes as f64 * radius.powi(k as i32)))
}

/// Convenience wrapper with radius `Im(ξ)/2` and 64 nodes.
pub fn cauchy_derivative_default<F>(f: F, xi: Complex64, k: u32) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    cauchy_derivative(f, xi, k, xi.im / 2.0, 64)
}

/// Kernel integral formula for cusp-form derivatives:
/// `f^{(k)}(ξ) = (-2i)^m/(4π) ∏_{r=0}^{k}(m-1+r) ∫_ℋ f(z) (z̄-ξ)^{-(m+k)} Im(z)^m dv(z)`,
/// evaluated over a periodized strip mesh (the kernel is summed over
/// integer horizontal shifts, using the 1-periodicity of `f`).
pub fn integral_formula_eval<F>(
    f: F,
    xi: Complex64,
    k: u32,
    m: HalfWeight,
    mesh: &QuadratureMesh,
) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    if mesh.coverage != Coverage::PlanePeriodized {
        return Err(Error::MeshCoverage {
            expected: "plane-periodized".into(),
            got: format!("{:?}", mesh.coverage),
        });
    }
    let f_vals = eval_on_mesh(&f, mesh)?;
    integral_formula_sampled(&f_vals, xi, k, m, mesh)
}

/// As [`integral_formula_eval`], with `f` already sampled on the nodes.
pub fn integral_formula_sampled(
    f_vals: &[Complex64],
    xi: Complex64,
    k: u32,
    m: HalfWeight,
    mesh: &QuadratureMesh,
) -> Result<Complex64> {
    if mesh.coverage != Coverage::PlanePeriodized {
        return Err(Error::MeshCoverage {
            expected: "plane-periodized".into(),
            got: format!("{:?}", mesh.coverage),
        });
    }
    if xi.im < DEGENERATE_IM {
        return Err(Error::domain("Im(xi) too small"));
    }
    if f_vals.len() != mesh.nodes.len() {
        return Err(Error::LengthMismatch {
            expected: mesh.nodes.len(),
            got: f_vals.len(),
        });
    }
    let two_m = m.two_m();
    let s2 = two_m + 2 * k as i64;
    let mf = m.m();
    let pref = half_integer_power(-2.0 * I, two_m as i32)? / (4.0 * PI) * m.prod_m_minus_1(k);
    let samples: Vec<Complex64> = mesh
        .nodes
        .par_iter()
        .zip(f_vals)
        .map(|(node, fv)| {
            let (kernel, _) = series::periodized_kernel(node.z.conj() - xi, s2);
            fv * kernel * node.z.im.powf(mf) * node.w
        })
        .collect();
    let mut acc = CKahanSum::new();
    for s in samples {
        acc.add(s);
    }
    Ok(pref * acc.value())
}

/// Two-sided comparison report used by the verifiers.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TwoSidedReport {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub quadrature_error_estimate: f64,
    pub truncation_height_loss: f64,
    pub kernel_tail_max: f64,
}

impl TwoSidedReport {
    fn from_parts(lhs: InnerProductReport, rhs: Complex64, kernel_tail_max: f64) -> Self {
        TwoSidedReport {
            lhs: lhs.value,
            rhs,
            abs_err: (lhs.value - rhs).norm(),
            rel_err: rel_err_c(lhs.value, rhs),
            quadrature_error_estimate: lhs.quadrature_error_estimate,
            truncation_height_loss: lhs.truncation_height_loss,
            kernel_tail_max,
        }
    }
}

/// Reproducing property: `⟨f, Δ_{k,m,ξ,χ}⟩ = f^{(k)}(ξ)`.
///
/// Left side by fundamental-domain quadrature against the kernel series,
/// right side by a Cauchy circle around `ξ`.
pub fn verify_reproducing<F>(
    f: F,
    k: u32,
    xi: Complex64,
    m: HalfWeight,
    chi: crate::arith::DirichletCharacter,
    level: i64,
    budget: &TruncationBudget,
    mesh: &QuadratureMesh,
) -> Result<TwoSidedReport>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let spec = SeriesSpec::delta(level, m, k, xi, chi)?;
    let tail_max = std::sync::atomic::AtomicU64::new(0);
    let kernel = |z: Complex64| -> Result<Complex64> {
        let v = series::delta_eval(&spec, z, budget)?;
        let bits = v.tail_estimate.to_bits();
        tail_max.fetch_max(bits, std::sync::atomic::Ordering::Relaxed);
        Ok(v.value)
    };
    let lhs = petersson_inner(&f, kernel, m, mesh)?;
    let rhs = cauchy_derivative(&f, xi, k, xi.im / 2.0, 96)?;
    Ok(TwoSidedReport::from_parts(
        lhs,
        rhs,
        f64::from_bits(tail_max.into_inner()),
    ))
}

/// Pairing formula for the averaged model functions:
/// `⟨f, P f_{k,m}⟩ = Σ_{l=0}^{k} C(k,l)(2i)^l 4π/∏_{r=0}^{l}(m-1+r) f^{(l)}(i)`.
pub fn verify_pairing_formula<F>(
    f: F,
    k: u32,
    m: HalfWeight,
    chi: crate::arith::DirichletCharacter,
    level: i64,
    budget: &TruncationBudget,
    mesh: &QuadratureMesh,
) -> Result<TwoSidedReport>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let spec = SeriesSpec::pfkm(level, m, k, chi)?;
    let tail_max = std::sync::atomic::AtomicU64::new(0);
    let kernel = |z: Complex64| -> Result<Complex64> {
        let v = series::pfkm_eval(&spec, z, budget)?;
        let bits = v.tail_estimate.to_bits();
        tail_max.fetch_max(bits, std::sync::atomic::Ordering::Relaxed);
        Ok(v.value)
    };
    let lhs = petersson_inner(&f, kernel, m, mesh)?;
    let derivs: Vec<Complex64> = (0..=k)
        .map(|l| cauchy_derivative(&f, I, l, 0.5, 96))
        .collect::<Result<Vec<_>>>()?;
    let rhs = crate::group::theorem61_rhs(&derivs, k, m)?;
    Ok(TwoSidedReport::from_parts(
        lhs,
        rhs,
        f64::from_bits(tail_max.into_inner()),
    ))
}
