//! Compensated (Kahan–Neumaier) summation for long series with mixed
//! term magnitudes.

use num_complex::Complex64;

/// Neumaier-compensated real accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    s: f64,
    c: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    pub fn value(&self) -> f64 {
        self.s + self.c
    }

    /// Merge another accumulator (for pairwise reduction of partial sums).
    pub fn merge(&mut self, other: &KahanSum) {
        self.add(other.s);
        self.add(other.c);
    }
}

/// Componentwise compensated complex accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CKahanSum {
    re: KahanSum,
    im: KahanSum,
}

impl CKahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }

    pub fn merge(&mut self, other: &CKahanSum) {
        self.re.merge(&other.re);
        self.im.merge(&other.im);
    }
}
