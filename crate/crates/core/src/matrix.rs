//! Small dense matrices with polynomial-jet entries.

use crate::multi::Poly;
use crate::scalar::Scalar;

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MatPoly {
    pub n: usize,
    pub entries: Vec<Poly>, // row-major
}

impl MatPoly {
    pub fn zero(n: usize) -> Self {
        MatPoly {
            n,
            entries: vec![Poly::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n);
        for i in 0..n {
            m.entries[i * n + i] = Poly::one();
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> &Poly {
        &self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: Poly) {
        self.entries[i * self.n + j] = p;
    }

    pub fn add(&self, other: &MatPoly) -> MatPoly {
        let mut out = Self::zero(self.n);
        for k in 0..self.entries.len() {
            out.entries[k] = self.entries[k].add(&other.entries[k]);
        }
        out
    }

    pub fn sub(&self, other: &MatPoly) -> MatPoly {
        let mut out = Self::zero(self.n);
        for k in 0..self.entries.len() {
            out.entries[k] = self.entries[k].sub(&other.entries[k]);
        }
        out
    }

    pub fn neg(&self) -> MatPoly {
        let mut out = Self::zero(self.n);
        for k in 0..self.entries.len() {
            out.entries[k] = self.entries[k].neg();
        }
        out
    }

    pub fn scale(&self, s: &Scalar) -> MatPoly {
        let mut out = Self::zero(self.n);
        for k in 0..self.entries.len() {
            out.entries[k] = self.entries[k].scale(s);
        }
        out
    }

    pub fn mul_capped(&self, other: &MatPoly, cap: u32) -> MatPoly {
        let n = self.n;
        let mut out = Self::zero(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = Poly::zero();
                for k in 0..n {
                    acc = acc.add(&self.get(i, k).mul_capped(other.get(k, j), Some(cap)));
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn transpose(&self) -> MatPoly {
        let n = self.n;
        let mut out = Self::zero(n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, self.get(j, i).clone());
            }
        }
        out
    }

    /// Apply to a vector of polynomials.
    pub fn apply(&self, v: &[Poly], cap: u32) -> Vec<Poly> {
        let n = self.n;
        let mut out = vec![Poly::zero(); n];
        for i in 0..n {
            for k in 0..n {
                out[i] = out[i].add(&self.get(i, k).mul_capped(&v[k], Some(cap)));
            }
        }
        out
    }

    /// Series inverse for matrices of the form constant-invertible + higher
    /// order. Requires the constant part to be the identity (sufficient for
    /// every use in this crate).
    pub fn series_inverse(&self, cap: u32) -> MatPoly {
        let id = Self::identity(self.n);
        let u = id.sub(self); // self = I - U, inverse = sum U^k
        let mut acc = Self::identity(self.n);
        let mut pow = Self::identity(self.n);
        for _ in 1..=cap {
            pow = pow.mul_capped(&u, cap);
            if pow.entries.iter().all(|p| p.is_zero()) {
                break;
            }
            acc = acc.add(&pow);
        }
        acc
    }

    /// Evaluate the power series Σ c_k M^k with scalar coefficients.
    pub fn power_series(&self, coeffs: &[Scalar], cap: u32) -> MatPoly {
        let mut acc = Self::identity(self.n).scale(&coeffs[0]);
        let mut pow = Self::identity(self.n);
        for c in coeffs.iter().skip(1) {
            pow = pow.mul_capped(self, cap);
            acc = acc.add(&pow.scale(c));
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_perturbed_identity() {
        let mut m = MatPoly::identity(2);
        m.set(0, 1, Poly::var(0));
        let inv = m.series_inverse(4);
        let prod = m.mul_capped(&inv, 4);
        assert_eq!(prod, MatPoly::identity(2));
    }
}
