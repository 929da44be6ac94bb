//! Integer-side arithmetic: Kronecker symbols, the theta series and its
//! multiplier on `Γ₀(4)`, Dirichlet characters, and enumeration of group
//! elements and cusp cosets of `Γ₀(N)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::config::DEGENERATE_IM;
use crate::error::Error;
use crate::group::{sqrt_branch, MetElement};
use crate::Result;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Full Kronecker symbol `(a | n)`, defined for all integers.
pub fn kronecker(a: i64, n: i64) -> i64 {
    if n == 0 {
        return i64::from(a == 1 || a == -1);
    }
    let mut a = a;
    let mut n = n;
    let mut result = 1i64;
    if n < 0 {
        n = -n;
        if a < 0 {
            result = -result;
        }
    }
    if n % 2 == 0 {
        if a % 2 == 0 {
            return 0;
        }
        let mut twos = 0u32;
        while n % 2 == 0 {
            n /= 2;
            twos += 1;
        }
        if twos % 2 == 1 {
            let am8 = a.rem_euclid(8);
            if am8 == 3 || am8 == 5 {
                result = -result;
            }
        }
    }
    // n now odd and positive: quadratic-reciprocity reduction.
    a = a.rem_euclid(n);
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            let nm8 = n % 8;
            if nm8 == 3 || nm8 == 5 {
                result = -result;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if a % 4 == 3 && n % 4 == 3 {
            result = -result;
        }
        a %= n;
    }
    if n == 1 {
        result
    } else {
        0
    }
}

/// `ε_d = 1` for `d ≡ 1 (mod 4)`, `i` for `d ≡ 3 (mod 4)`; requires odd `d`.
/// Satisfies `ε_d² = (-1 | d)`.
pub fn epsilon_d(d: i64) -> Result<Complex64> {
    if d % 2 == 0 {
        return Err(Error::EvenArgument { d });
    }
    Ok(if d.rem_euclid(4) == 1 {
        Complex64::new(1.0, 0.0)
    } else {
        I
    })
}

/// `Θ(z) = Σ_{n∈ℤ} e^{2πin²z}`, truncated with tail below `tol`.
///
/// The real part of `z` is reduced mod 1 before summing, so `Θ(z+1) = Θ(z)`
/// holds bit-exactly.
pub fn theta_value(z: Complex64, tol: f64) -> Result<Complex64> {
    if z.im < DEGENERATE_IM {
        return Err(Error::domain(format!("theta requires Im(z) > 0, got {}", z.im)));
    }
    let y = z.im;
    let x = z.re - z.re.floor();
    let mut acc = Complex64::new(1.0, 0.0);
    let mut n = 1u64;
    loop {
        let e = (-2.0 * PI * (n * n) as f64 * y).exp();
        let phase = Complex64::from_polar(1.0, 2.0 * PI * ((n * n) as f64 * x).fract());
        acc += 2.0 * e * phase;
        // Consecutive term ratio is below e^{-2π(2n+1)y}, so the remaining
        // tail is dominated by a geometric series with that ratio.
        let ratio = (-2.0 * PI * (2 * n + 1) as f64 * y).exp();
        let tail = 2.0 * e * ratio / (1.0 - ratio);
        if tail < tol / 4.0 {
            break;
        }
        n += 1;
        if n > 2_000_000 {
            return Err(Error::domain(format!(
                "theta truncation did not reach tol {tol:e} at Im(z) = {y:e}"
            )));
        }
    }
    Ok(acc)
}

/// Integer matrix with determinant 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IntMatrix {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl IntMatrix {
    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        let det = (a as i128) * (d as i128) - (b as i128) * (c as i128);
        if det != 1 {
            return Err(Error::NotInGroup {
                group: "SL2(Z)".into(),
                a,
                b,
                c,
                d,
            });
        }
        Ok(Self { a, b, c, d })
    }

    pub fn identity() -> Self {
        Self { a: 1, b: 0, c: 0, d: 1 }
    }

    pub fn mul(&self, o: &IntMatrix) -> Result<IntMatrix> {
        let prod = |x: i64, y: i64, u: i64, v: i64| -> Result<i64> {
            let r = (x as i128) * (y as i128) + (u as i128) * (v as i128);
            i64::try_from(r).map_err(|_| Error::Overflow { op: "matrix multiply" })
        };
        Ok(IntMatrix {
            a: prod(self.a, o.a, self.b, o.c)?,
            b: prod(self.a, o.b, self.b, o.d)?,
            c: prod(self.c, o.a, self.d, o.c)?,
            d: prod(self.c, o.b, self.d, o.d)?,
        })
    }

    pub fn neg(&self) -> IntMatrix {
        IntMatrix { a: -self.a, b: -self.b, c: -self.c, d: -self.d }
    }

    pub fn inverse(&self) -> IntMatrix {
        IntMatrix { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    pub fn in_gamma0(&self, n: i64) -> bool {
        self.c.rem_euclid(n) == 0
    }

    pub fn in_gamma1(&self, n: i64) -> bool {
        self.in_gamma0(n) && self.a.rem_euclid(n) == 1 && self.d.rem_euclid(n) == 1
    }

    pub fn moebius(&self, z: Complex64) -> Result<Complex64> {
        if z.im < DEGENERATE_IM {
            return Err(Error::domain(format!("Im(z) = {} too small", z.im)));
        }
        let (a, b, c, d) = (self.a as f64, self.b as f64, self.c as f64, self.d as f64);
        Ok((a * z + b) / (c * z + d))
    }

    /// The representative of `{γ, -γ}` with `d ≡ 1 (mod 4)` (requires odd `d`).
    pub fn normalize_pm(&self) -> Result<IntMatrix> {
        if self.d % 2 == 0 {
            return Err(Error::EvenArgument { d: self.d });
        }
        Ok(if self.d.rem_euclid(4) == 1 { *self } else { self.neg() })
    }

    /// Lift to the metaplectic group through the theta multiplier.
    /// Requires `γ ∈ Γ₀(4)` with `d ≡ 1 (mod 4)` (equivalently `γ ∈ Γ₁(4)`),
    /// which is exactly when `J(γ,z)² = cz + d`.
    pub fn lift_theta(&self) -> Result<MetElement> {
        if !self.in_gamma0(4) {
            return Err(Error::NotInGroup {
                group: "Gamma0(4)".into(),
                a: self.a,
                b: self.b,
                c: self.c,
                d: self.d,
            });
        }
        if self.d.rem_euclid(4) != 1 {
            return Err(Error::NotInGroup {
                group: "Gamma1(4)".into(),
                a: self.a,
                b: self.b,
                c: self.c,
                d: self.d,
            });
        }
        let eta = multiplier_j(self, I)?;
        MetElement::new(
            self.a as f64,
            self.b as f64,
            self.c as f64,
            self.d as f64,
            eta,
        )
    }
}

/// Theta multiplier in closed form: `J(γ,z) = ε_d^{-1} (c|d) √(cz+d)`
/// for `γ ∈ Γ₀(4)`.
pub fn multiplier_j(g: &IntMatrix, z: Complex64) -> Result<Complex64> {
    if !g.in_gamma0(4) {
        return Err(Error::NotInGroup {
            group: "Gamma0(4)".into(),
            a: g.a,
            b: g.b,
            c: g.c,
            d: g.d,
        });
    }
    let eps = epsilon_d(g.d)?;
    let sym = kronecker(g.c, g.d) as f64;
    Ok(eps.inv() * sym * sqrt_branch(g.c as f64 * z + g.d as f64))
}

/// Theta multiplier as the defining ratio `Θ(γ.z)/Θ(z)`.
pub fn multiplier_j_ratio(g: &IntMatrix, z: Complex64, tol: f64) -> Result<Complex64> {
    if !g.in_gamma0(4) {
        return Err(Error::NotInGroup {
            group: "Gamma0(4)".into(),
            a: g.a,
            b: g.b,
            c: g.c,
            d: g.d,
        });
    }
    let w = g.moebius(z)?;
    Ok(theta_value(w, tol)? / theta_value(z, tol)?)
}

/// An even Dirichlet character mod `N`, stored as a value table on all
/// residues (zero off the units).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirichletCharacter {
    modulus: i64,
    index: usize,
    values: Vec<Complex64>,
}

/// Cyclic decomposition of `(ℤ/NZ)^×` as generator/order pairs.
fn unit_group_generators(n: i64) -> Result<Vec<(i64, usize)>> {
    if n < 1 || n > 1_000_000 {
        return Err(Error::Character {
            what: format!("modulus {n} out of supported range 1..=10^6"),
        });
    }
    let mut gens: Vec<(i64, usize, i64)> = Vec::new(); // (gen mod p^e, order, p^e)
    let mut m = n;
    let mut two_e = 1i64;
    while m % 2 == 0 {
        m /= 2;
        two_e *= 2;
    }
    if two_e == 4 {
        gens.push((3, 2, 4));
    } else if two_e >= 8 {
        gens.push((two_e - 1, 2, two_e));
        gens.push((3, (two_e / 4) as usize, two_e));
    }
    let mut rest = m;
    let mut p = 3i64;
    while p * p <= rest {
        if rest % p == 0 {
            let mut pe = 1i64;
            while rest % p == 0 {
                rest /= p;
                pe *= p;
            }
            let phi = (pe / p) * (p - 1);
            gens.push((primitive_root_mod_pe(p, pe)?, phi as usize, pe));
        }
        p += 2;
    }
    if rest > 1 {
        gens.push((primitive_root_mod_pe(rest, rest)?, (rest - 1) as usize, rest));
    }
    // Lift each generator to mod n: g mod p^e, 1 mod the complement.
    let mut lifted = Vec::new();
    for (g, ord, pe) in gens {
        let other = n / pe;
        let lift = crt_pair(g, pe, 1, other)?;
        lifted.push((lift, ord));
    }
    Ok(lifted)
}

fn mod_pow(mut base: i64, mut exp: i64, modulus: i64) -> i64 {
    let mut acc = 1i128;
    let m = modulus as i128;
    let mut b = (base.rem_euclid(modulus)) as i128;
    base = 0;
    let _ = base;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        exp >>= 1;
    }
    acc as i64
}

fn primitive_root_mod_pe(p: i64, pe: i64) -> Result<i64> {
    let phi_p = p - 1;
    let mut factors = Vec::new();
    let mut f = phi_p;
    let mut q = 2;
    while q * q <= f {
        if f % q == 0 {
            factors.push(q);
            while f % q == 0 {
                f /= q;
            }
        }
        q += 1;
    }
    if f > 1 {
        factors.push(f);
    }
    let mut g = 0;
    for cand in 2..p {
        if factors.iter().all(|&q| mod_pow(cand, phi_p / q, p) != 1) {
            g = cand;
            break;
        }
    }
    if g == 0 {
        return Err(Error::Character {
            what: format!("no primitive root mod {p}"),
        });
    }
    if pe == p {
        return Ok(g);
    }
    // g lifts to a primitive root mod p^e unless g^{p-1} ≡ 1 (mod p²).
    if mod_pow(g, p - 1, p * p) == 1 {
        Ok(g + p)
    } else {
        Ok(g)
    }
}

fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
        (g, y, x - a.div_euclid(b) * y)
    }
}

fn crt_pair(r1: i64, m1: i64, r2: i64, m2: i64) -> Result<i64> {
    if m2 == 1 {
        return Ok(r1.rem_euclid(m1));
    }
    let (g, u, _) = ext_gcd(m1, m2);
    if g != 1 {
        return Err(Error::Character {
            what: "CRT moduli not coprime".into(),
        });
    }
    let m = (m1 as i128) * (m2 as i128);
    let diff = (r2 - r1).rem_euclid(m2) as i128;
    let x = (r1 as i128 + (m1 as i128) * (diff * (u.rem_euclid(m2)) as i128 % m2 as i128)) % m;
    Ok(x.rem_euclid(m) as i64)
}

/// Modular inverse of `a` mod `m` (`m > 0`), `None` when `gcd(a, m) != 1`.
pub fn mod_inverse(a: i64, m: i64) -> Option<i64> {
    let (g, x, _) = ext_gcd(a.rem_euclid(m), m);
    if g != 1 {
        None
    } else {
        Some(x.rem_euclid(m))
    }
}

impl DirichletCharacter {
    /// The trivial (principal) character mod `n`.
    pub fn trivial(n: i64) -> Result<Self> {
        Self::from_index(n, 0)
    }

    /// Character number `index` in the mixed-radix enumeration over the
    /// cyclic decomposition of `(ℤ/NZ)^×`. Index 0 is the principal
    /// character. Odd characters are rejected.
    pub fn from_index(n: i64, index: usize) -> Result<Self> {
        let gens = unit_group_generators(n)?;
        let total: usize = gens.iter().map(|&(_, ord)| ord).product::<usize>().max(1);
        if index >= total {
            return Err(Error::Character {
                what: format!("index {index} out of range: {total} characters mod {n}"),
            });
        }
        // Mixed-radix digits of the index select the exponent on each generator.
        let mut digits = Vec::new();
        let mut rest = index;
        for &(_, ord) in &gens {
            digits.push(rest % ord);
            rest /= ord;
        }
        let mut values = vec![Complex64::new(0.0, 0.0); n.max(1) as usize];
        // Walk the whole unit group as products of generator powers.
        let mut exps = vec![0usize; gens.len()];
        loop {
            let mut residue = 1i64;
            let mut phase = 0.0f64;
            for (j, &(g, ord)) in gens.iter().enumerate() {
                residue = ((residue as i128 * mod_pow(g, exps[j] as i64, n) as i128)
                    % n as i128) as i64;
                phase += 2.0 * PI * (digits[j] * exps[j]) as f64 / ord as f64;
            }
            values[residue.rem_euclid(n.max(1)) as usize] = Complex64::from_polar(1.0, phase);
            // Increment the exponent tuple.
            let mut j = 0;
            loop {
                if j == gens.len() {
                    break;
                }
                exps[j] += 1;
                if exps[j] < gens[j].1 {
                    break;
                }
                exps[j] = 0;
                j += 1;
            }
            if j == gens.len() {
                break;
            }
        }
        if n == 1 {
            values = vec![Complex64::new(1.0, 0.0)];
        }
        let chi = Self { modulus: n, index, values };
        if !chi.is_even() {
            return Err(Error::OddCharacter { modulus: n, index });
        }
        Ok(chi)
    }

    pub fn modulus(&self) -> i64 {
        self.modulus
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// `χ(k)`, zero off the units.
    pub fn eval(&self, k: i64) -> Complex64 {
        self.values[k.rem_euclid(self.modulus.max(1)) as usize]
    }

    /// `χ(γ) := χ(d)` for `γ = (a b; c d) ∈ Γ₀(N)`.
    pub fn eval_matrix(&self, g: &IntMatrix) -> Result<Complex64> {
        if !g.in_gamma0(self.modulus) {
            return Err(Error::NotInGroup {
                group: format!("Gamma0({})", self.modulus),
                a: g.a,
                b: g.b,
                c: g.c,
                d: g.d,
            });
        }
        Ok(self.eval(g.d))
    }

    pub fn is_even(&self) -> bool {
        (self.eval(-1) - Complex64::new(1.0, 0.0)).norm() < 1e-12
    }

    pub fn is_trivial(&self) -> bool {
        self.index == 0
    }

    /// Number of characters (even and odd) in this modulus' enumeration.
    pub fn character_count(n: i64) -> Result<usize> {
        let gens = unit_group_generators(n)?;
        Ok(gens.iter().map(|&(_, ord)| ord).product::<usize>().max(1))
    }
}

/// Which family of representatives a [`CosetList`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CosetTag {
    /// Elements of `Γ₀(N) ∩ Γ₁(4)` inside a height box (one per `±` pair,
    /// normalized to `d ≡ 1 mod 4`).
    FullGroup,
    /// Representatives of the cusp cosets `Γ₀(N)_∞ \ Γ₀(N)` inside a
    /// height box.
    InfinityCoset,
}

/// Explicit list of integer matrices with the box parameters used to
/// produce it. Completeness within the box is guaranteed: every group
/// element (resp. coset) whose `(c, d, b)` data fits the bounds appears
/// exactly once.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CosetList {
    pub entries: Vec<IntMatrix>,
    pub tag: CosetTag,
    pub level: i64,
    pub cmax: i64,
    pub dmax: i64,
    pub bmax: i64,
}

fn require_level(n: i64) -> Result<()> {
    if n <= 0 || n % 4 != 0 {
        return Err(Error::BadLevel { level: n });
    }
    Ok(())
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

/// All elements of `Γ₀(N) ∩ Γ₁(4)` with `|c| ≤ cmax·N`, `|d| ≤ dmax` and
/// `|b| ≤ bmax`, where `dmax = bmax = max(1, cmax·N)`.
///
/// Group elements correspond to bottom rows `(c, d)` with `N | c`,
/// `gcd(c,d) = 1` and `d ≡ 1 (mod 4)` (the `Γ₁(4)` member of each `±`
/// pair), together with all top-row completions `(a + tc, b + td)`.
pub fn enumerate_group(n: i64, cmax: i64) -> Result<CosetList> {
    require_level(n)?;
    if cmax < 0 {
        return Err(Error::BadParameter {
            name: "cmax",
            why: "must be >= 0".into(),
        });
    }
    let dmax = (n * cmax).max(1);
    let bmax = (n * cmax).max(1);
    let mut entries = Vec::new();
    // c = 0: unipotent translations (1 b; 0 1).
    for b in -bmax..=bmax {
        entries.push(IntMatrix { a: 1, b, c: 0, d: 1 });
    }
    for cu in 1..=cmax {
        for c in [cu * n, -(cu * n)] {
            for d in -dmax..=dmax {
                if d.rem_euclid(4) != 1 || gcd(c, d) != 1 {
                    continue;
                }
                // Base completion of the bottom row: a*d - b*c = 1.
                let (g, u, v) = ext_gcd(d, c);
                debug_assert_eq!(g, 1);
                let (a0, b0) = (u, -v);
                // All shifts (a0 + t c, b0 + t d) with |b| <= bmax.
                let lo = (-bmax - b0).div_euclid(d).min((bmax - b0).div_euclid(d));
                let hi = (-bmax - b0).div_euclid(d).max((bmax - b0).div_euclid(d));
                for t in lo..=hi {
                    let (a, b) = (a0 + t * c, b0 + t * d);
                    if b.abs() <= bmax {
                        entries.push(IntMatrix { a, b, c, d });
                    }
                }
            }
        }
    }
    entries.sort_by_key(|m| (m.c, m.d, m.a, m.b));
    entries.dedup();
    Ok(CosetList {
        entries,
        tag: CosetTag::FullGroup,
        level: n,
        cmax,
        dmax,
        bmax,
    })
}

/// One representative per cusp coset in `Γ₀(N)_∞ \ Γ₀(N)` within the
/// height box: the identity, plus one matrix for every bottom row
/// `±(c, d)` with `0 < c ≤ cmax·N`, `N | c`, `gcd(c, d) = 1`,
/// `|d| ≤ max(3, cmax·N)`, normalized so `d ≡ 1 (mod 4)` (negating the
/// pair when needed, which leaves every series term unchanged).
pub fn coset_reps_infty(n: i64, cmax: i64) -> Result<CosetList> {
    require_level(n)?;
    if cmax < 0 {
        return Err(Error::BadParameter {
            name: "cmax",
            why: "must be >= 0".into(),
        });
    }
    let dmax = (n * cmax).max(3);
    let mut entries = vec![IntMatrix::identity()];
    for cu in 1..=cmax {
        let c = cu * n;
        for d in -dmax..=dmax {
            if gcd(c, d) != 1 {
                continue;
            }
            let (g, u, v) = ext_gcd(d, c);
            debug_assert_eq!(g, 1);
            let m = IntMatrix { a: u, b: -v, c, d };
            entries.push(m.normalize_pm()?);
        }
    }
    entries.sort_by_key(|m| (m.c.abs(), m.c, m.d, m.a, m.b));
    entries.dedup();
    Ok(CosetList {
        entries,
        tag: CosetTag::InfinityCoset,
        level: n,
        cmax,
        dmax,
        bmax: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Legendre symbol by brute-force quadratic residues mod an odd prime.
    fn legendre_brute(a: i64, p: i64) -> i64 {
        let am = a.rem_euclid(p);
        if am == 0 {
            return 0;
        }
        for x in 1..p {
            if (x * x) % p == am {
                return 1;
            }
        }
        -1
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

    #[test]
    fn kronecker_pins() {
        assert_eq!(kronecker(1, 7), 1);
        assert_eq!(kronecker(2, 3), -1);
        assert_eq!(kronecker(3, 5), -1);
        assert_eq!(kronecker(0, 1), 1);
        assert_eq!(kronecker(0, -1), 1);
        assert_eq!(kronecker(0, 5), 0);
        assert_eq!(kronecker(-4, -1), -1);
    }

    #[test]
    fn kronecker_matches_brute_force_legendre() {
        for p in (3..200).filter(|&p| is_prime(p)) {
            for a in -30..30 {
                assert_eq!(kronecker(a, p), legendre_brute(a, p), "a={a} p={p}");
            }
        }
    }

    #[test]
    fn kronecker_multiplicative_in_n() {
        // (a | n1 n2) = (a | n1)(a | n2) for odd n, composed from the
        // brute-force Legendre values over the factorization.
        for n in (3..200i64).step_by(2) {
            let mut rest = n;
            let mut q = 3;
            let mut via_factors_ok = true;
            for a in [-7i64, -2, 2, 3, 10, 31] {
                let mut prod = 1i64;
                rest = n;
                q = 3;
                while rest > 1 {
                    while q * q <= rest && rest % q != 0 {
                        q += 2;
                    }
                    let p = if q * q > rest { rest } else { q };
                    while rest % p == 0 {
                        rest /= p;
                        prod *= legendre_brute(a, p);
                    }
                }
                if kronecker(a, n) != prod {
                    via_factors_ok = false;
                }
            }
            assert!(via_factors_ok, "n={n} rest={rest} q={q}");
        }
    }

    proptest! {
        #[test]
        fn kronecker_multiplicative_in_a(a1 in -200i64..200, a2 in -200i64..200, n in 1i64..150) {
            prop_assert_eq!(kronecker(a1 * a2, n), kronecker(a1, n) * kronecker(a2, n));
        }
    }

    #[test]
    fn epsilon_pins() {
        assert_eq!(epsilon_d(1).unwrap(), c64(1.0, 0.0));
        assert_eq!(epsilon_d(3).unwrap(), c64(0.0, 1.0));
        assert_eq!(epsilon_d(5).unwrap(), c64(1.0, 0.0));
        assert!(epsilon_d(2).is_err());
        // ε_d² = (-1 | d).
        for d in (-21..21).filter(|d| d % 2 != 0) {
            let e = epsilon_d(d).unwrap();
            let sq = e * e;
            assert!((sq - c64(kronecker(-1, d) as f64, 0.0)).norm() < 1e-15, "d={d}");
        }
    }

    #[test]
    fn theta_pins() {
        // Θ(i) = Σ e^{-2πn²} = π^{1/4}/Γ(3/4) · cos(π/8), the lemniscatic
        // value transported to the square-exponent normalization.
        let classical = 1.003_734_885_487_739_1;
        let v = theta_value(c64(0.0, 1.0), 1e-14).unwrap();
        assert!((v - c64(classical, 0.0)).norm() < 1e-13, "got {v}");
        // Θ(10i) = 1 + 2e^{-200π} + ...; the correction is far below 1 ulp.
        let v10 = theta_value(c64(0.0, 10.0), 1e-30).unwrap();
        assert!((v10.re - 1.0).abs() < 1e-15);
        // Bit-exact periodicity by construction.
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..20 {
            let z = c64(rng.gen_range(-3.0..3.0), rng.gen_range(0.05..2.0));
            let a = theta_value(z, 1e-12).unwrap();
            let b = theta_value(z + 1.0, 1e-12).unwrap();
            assert_eq!(a, b);
        }
        assert!(theta_value(c64(0.0, -1.0), 1e-10).is_err());
    }

    /// Random words in the generators of `Γ₀(4) ∩ Γ₁(4)` with bounded entries.
    fn random_gamma14(rng: &mut StdRng, len: usize) -> IntMatrix {
        let t = IntMatrix { a: 1, b: 1, c: 0, d: 1 };
        let ti = IntMatrix { a: 1, b: -1, c: 0, d: 1 };
        let v = IntMatrix { a: 1, b: 0, c: 4, d: 1 };
        let vi = IntMatrix { a: 1, b: 0, c: -4, d: 1 };
        let gens = [t, ti, v, vi];
        let mut m = IntMatrix::identity();
        for _ in 0..len {
            let g = gens[rng.gen_range(0..4)];
            let next = m.mul(&g).unwrap();
            if next.a.abs().max(next.b.abs()).max(next.c.abs()).max(next.d.abs()) > 5_000 {
                break;
            }
            m = next;
        }
        m
    }

    #[test]
    fn multiplier_explicit_vs_ratio() {
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..60 {
            let g = random_gamma14(&mut rng, 8);
            let z = c64(rng.gen_range(-1.0..1.0), rng.gen_range(0.4..2.0));
            let je = multiplier_j(&g, z).unwrap();
            let jr = multiplier_j_ratio(&g, z, 1e-13).unwrap();
            assert!(
                (je - jr).norm() < 1e-9 * je.norm().max(1.0),
                "g=({},{};{},{}) je={je} jr={jr}",
                g.a,
                g.b,
                g.c,
                g.d
            );
            // Also on the other ± representative, where d ≡ 3 (mod 4).
            let gn = g.neg();
            let jen = multiplier_j(&gn, z).unwrap();
            let jrn = multiplier_j_ratio(&gn, z, 1e-13).unwrap();
            assert!((jen - jrn).norm() < 1e-9 * jen.norm().max(1.0));
            // J(-γ, z) = J(γ, z): the ratio definition cannot see the sign.
            assert!((je - jen).norm() < 1e-12 * je.norm().max(1.0));
        }
    }

    #[test]
    fn multiplier_pins() {
        let id = IntMatrix::identity();
        assert_eq!(multiplier_j(&id, c64(0.3, 0.8)).unwrap(), c64(1.0, 0.0));
        let t = IntMatrix { a: 1, b: 1, c: 0, d: 1 };
        assert_eq!(multiplier_j(&t, c64(0.3, 0.8)).unwrap(), c64(1.0, 0.0));
        // g = (1 0; 4 1) at z = i: J = sqrt(1 + 4i), checked against Θ.
        let v = IntMatrix { a: 1, b: 0, c: 4, d: 1 };
        let expected = sqrt_branch(c64(1.0, 4.0));
        let je = multiplier_j(&v, c64(0.0, 1.0)).unwrap();
        assert!((je - expected).norm() < 1e-15);
        let jr = multiplier_j_ratio(&v, c64(0.0, 1.0), 1e-14).unwrap();
        assert!((je - jr).norm() < 1e-10);
        // Not in Γ₀(4):
        let s = IntMatrix { a: 0, b: -1, c: 1, d: 0 };
        assert!(multiplier_j(&s, c64(0.0, 1.0)).is_err());
    }

    #[test]
    fn multiplier_cocycle_and_square() {
        let mut rng = StdRng::seed_from_u64(77);
        for _ in 0..60 {
            let g1 = random_gamma14(&mut rng, 6);
            let g2 = random_gamma14(&mut rng, 6);
            let z = c64(rng.gen_range(-1.0..1.0), rng.gen_range(0.4..2.0));
            let g12 = g1.mul(&g2).unwrap();
            let lhs = multiplier_j(&g12, z).unwrap();
            let rhs = multiplier_j(&g1, g2.moebius(z).unwrap()).unwrap()
                * multiplier_j(&g2, z).unwrap();
            assert!((lhs - rhs).norm() < 1e-9 * lhs.norm().max(1.0));
            // Membership in the metaplectic group: J² = cz + d on Γ₁(4).
            let j = multiplier_j(&g1, z).unwrap();
            let target = g1.c as f64 * z + g1.d as f64;
            assert!((j * j - target).norm() < 1e-10 * target.norm().max(1.0));
        }
    }

    #[test]
    fn character_trivial_and_quadratic() {
        let chi = DirichletCharacter::trivial(4).unwrap();
        assert_eq!(chi.eval(1), c64(1.0, 0.0));
        assert_eq!(chi.eval(3), c64(1.0, 0.0));
        assert_eq!(chi.eval(2), c64(0.0, 0.0));
        assert!(chi.is_even());

        // Mod 8 there are two even characters; the nontrivial one is the
        // quadratic character d ↦ (2|d).
        let count = DirichletCharacter::character_count(8).unwrap();
        assert_eq!(count, 4);
        let mut evens = Vec::new();
        for idx in 0..count {
            if let Ok(chi) = DirichletCharacter::from_index(8, idx) {
                evens.push(chi);
            }
        }
        assert_eq!(evens.len(), 2);
        let quad = evens.iter().find(|c| !c.is_trivial()).unwrap();
        for d in [1i64, 3, 5, 7] {
            assert!(
                (quad.eval(d) - c64(kronecker(2, d) as f64, 0.0)).norm() < 1e-12,
                "d={d}"
            );
        }
        assert_eq!(quad.eval(7), c64(1.0, 0.0));
    }

    #[test]
    fn character_multiplicative() {
        for n in [4i64, 8, 12, 20] {
            let total = DirichletCharacter::character_count(n).unwrap();
            for idx in 0..total {
                let Ok(chi) = DirichletCharacter::from_index(n, idx) else {
                    continue;
                };
                for a in 0..n {
                    for b in 0..n {
                        let lhs = chi.eval(a * b);
                        let rhs = chi.eval(a) * chi.eval(b);
                        assert!((lhs - rhs).norm() < 1e-12, "n={n} idx={idx} a={a} b={b}");
                    }
                }
            }
        }
    }

    #[test]
    fn odd_characters_rejected() {
        // Mod 4 the nontrivial character is odd.
        assert!(matches!(
            DirichletCharacter::from_index(4, 1),
            Err(Error::OddCharacter { .. })
        ));
    }

    #[test]
    fn character_on_matrices() {
        let chi = DirichletCharacter::trivial(4).unwrap();
        let g = IntMatrix { a: 1, b: 0, c: 4, d: 1 };
        assert_eq!(chi.eval_matrix(&g).unwrap(), c64(1.0, 0.0));
        let not_in = IntMatrix { a: 0, b: -1, c: 1, d: 0 };
        assert!(chi.eval_matrix(&not_in).is_err());
    }

    #[test]
    fn enumerate_group_small_boxes() {
        // cmax = 0: translations only.
        let l0 = enumerate_group(4, 0).unwrap();
        assert!(l0.entries.iter().all(|m| m.c == 0 && m.d == 1 && m.a == 1));
        assert_eq!(l0.entries.len(), 3); // b ∈ {-1, 0, 1}

        let l1 = enumerate_group(4, 1).unwrap();
        assert!(l1.entries.contains(&IntMatrix { a: 1, b: 0, c: 4, d: 1 }));
        // (-1 0; 4 -1) normalizes to (1 0; -4 1).
        assert!(l1.entries.contains(&IntMatrix { a: 1, b: 0, c: -4, d: 1 }));
        for m in &l1.entries {
            assert_eq!((m.a as i128) * (m.d as i128) - (m.b as i128) * (m.c as i128), 1);
            assert!(m.in_gamma1(4), "({} {}; {} {})", m.a, m.b, m.c, m.d);
            assert_eq!(m.c.rem_euclid(4), 0);
            assert_eq!(m.d.rem_euclid(4), 1);
        }
        // Sorted and duplicate-free.
        let mut sorted = l1.entries.clone();
        sorted.sort_by_key(|m| (m.c, m.d, m.a, m.b));
        sorted.dedup();
        assert_eq!(sorted.len(), l1.entries.len());

        // Monotone growth in cmax.
        let l2 = enumerate_group(4, 2).unwrap();
        let l4 = enumerate_group(4, 4).unwrap();
        assert!(l1.entries.len() < l2.entries.len());
        assert!(l2.entries.len() < l4.entries.len());
        for m in &l1.entries {
            assert!(l2.entries.contains(m));
        }

        assert!(enumerate_group(6, 1).is_err());
    }

    #[test]
    fn coset_reps_small_boxes() {
        let l0 = coset_reps_infty(4, 0).unwrap();
        assert_eq!(l0.entries.len(), 1);
        assert_eq!(l0.entries[0], IntMatrix::identity());

        let l1 = coset_reps_infty(4, 1).unwrap();
        // Identity + bottom rows ±(4, d) with |d| ≤ 4 coprime to 4,
        // normalized to d ≡ 1 (mod 4).
        for m in &l1.entries {
            if m.c == 0 {
                assert_eq!(*m, IntMatrix::identity());
            } else {
                assert_eq!(m.c.abs() % 4, 0);
                assert_eq!(m.d.rem_euclid(4), 1);
                assert_eq!(gcd(m.c, m.d), 1);
            }
        }
        // Distinct cosets have distinct bottom rows up to sign; within any
        // window of length c there are φ(c) admissible residues.
        let c4: Vec<_> = l1.entries.iter().filter(|m| m.c.abs() == 4).collect();
        let in_window = c4
            .iter()
            .filter(|m| {
                let d = if m.c > 0 { m.d } else { -m.d };
                (0..4).contains(&d)
            })
            .count();
        assert_eq!(in_window, 2); // φ(4) = 2
    }
}
