//! Sparse multi-indices, antisymmetric index sets and multivariate
//! polynomials over [`Scalar`].

use crate::scalar::Scalar;
use smallvec::SmallVec;
use std::collections::BTreeMap;
use std::fmt;

/// A sparse multi-index: sorted `(variable, exponent)` pairs with all
/// exponents positive. Doubles as a commutative monomial.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MultiIndex(pub SmallVec<[(u16, u32); 4]>);

impl MultiIndex {
    pub fn empty() -> Self {
        MultiIndex(SmallVec::new())
    }

    pub fn single(var: u16, exp: u32) -> Self {
        if exp == 0 {
            return Self::empty();
        }
        MultiIndex(SmallVec::from_slice(&[(var, exp)]))
    }

    pub fn unit(var: u16) -> Self {
        Self::single(var, 1)
    }

    pub fn from_exponents(exps: &[u32]) -> Self {
        let mut v = SmallVec::new();
        for (i, &e) in exps.iter().enumerate() {
            if e > 0 {
                v.push((i as u16, e));
            }
        }
        MultiIndex(v)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn exp(&self, var: u16) -> u32 {
        self.0
            .iter()
            .find(|&&(v, _)| v == var)
            .map(|&(_, e)| e)
            .unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u16, u32)> + '_ {
        self.0.iter().copied()
    }

    pub fn mul(&self, other: &MultiIndex) -> MultiIndex {
        let mut out: SmallVec<[(u16, u32); 4]> = SmallVec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (va, ea) = self.0[i];
            let (vb, eb) = other.0[j];
            if va == vb {
                out.push((va, ea + eb));
                i += 1;
                j += 1;
            } else if va < vb {
                out.push((va, ea));
                i += 1;
            } else {
                out.push((vb, eb));
                j += 1;
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        MultiIndex(out)
    }

    /// Raise the exponent of `var` by one.
    pub fn raised(&self, var: u16) -> MultiIndex {
        self.mul(&MultiIndex::unit(var))
    }

    /// Lower the exponent of `var` by one; `None` if absent.
    pub fn lowered(&self, var: u16) -> Option<MultiIndex> {
        let pos = self.0.iter().position(|&(v, _)| v == var)?;
        let mut out = self.0.clone();
        if out[pos].1 == 1 {
            out.remove(pos);
        } else {
            out[pos].1 -= 1;
        }
        Some(MultiIndex(out))
    }

    /// Componentwise `self - other`; `None` if any exponent would go negative.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        let mut out = self.clone();
        for (v, e) in other.iter() {
            for _ in 0..e {
                out = out.lowered(v)?;
            }
        }
        Some(out)
    }

    /// ∏ (exponent!)
    pub fn factorial(&self) -> Scalar {
        let mut acc = Scalar::one();
        for (_, e) in self.iter() {
            acc = &acc * &crate::scalar::factorial(e);
        }
        acc
    }

    /// All sequences expanded: (i, i, j) for exponents {i:2, j:1}.
    pub fn expand(&self) -> Vec<u16> {
        let mut out = Vec::with_capacity(self.degree() as usize);
        for (v, e) in self.iter() {
            for _ in 0..e {
                out.push(v);
            }
        }
        out
    }

    /// Enumerate every multi-index over `nvars` variables of total degree
    /// exactly `deg`, in lexicographic order.
    pub fn enumerate_degree(nvars: usize, deg: u32) -> Vec<MultiIndex> {
        fn rec(nvars: usize, var: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            if var + 1 == nvars {
                cur.push(left);
                out.push(MultiIndex::from_exponents(cur));
                cur.pop();
                return;
            }
            for e in (0..=left).rev() {
                cur.push(e);
                rec(nvars, var + 1, left - e, cur, out);
                cur.pop();
            }
        }
        if nvars == 0 {
            return if deg == 0 {
                vec![MultiIndex::empty()]
            } else {
                vec![]
            };
        }
        let mut out = Vec::new();
        rec(nvars, 0, deg, &mut Vec::new(), &mut out);
        out
    }

    /// Every multi-index of degree at most `deg`.
    pub fn enumerate_up_to(nvars: usize, deg: u32) -> Vec<MultiIndex> {
        (0..=deg)
            .flat_map(|d| Self::enumerate_degree(nvars, d))
            .collect()
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (k, (v, e)) in self.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "x{}^{}", v, e)?;
        }
        write!(f, "]")
    }
}

/// A subset of antisymmetric generators as a bitmask (at most 32 of them).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FormSet(pub u32);

impl FormSet {
    pub fn empty() -> Self {
        FormSet(0)
    }

    pub fn single(var: u16) -> Self {
        FormSet(1 << var)
    }

    pub fn degree(&self) -> u32 {
        self.0.count_ones()
    }

    pub fn contains(&self, var: u16) -> bool {
        self.0 & (1 << var) != 0
    }

    pub fn iter(&self) -> impl Iterator<Item = u16> + '_ {
        let bits = self.0;
        (0..32u16).filter(move |&v| bits & (1 << v) != 0)
    }

    /// Wedge `η^var ∧ self` from the left: `None` if `var` already present,
    /// otherwise the union with the sign of moving `η^var` into place.
    pub fn wedge_left(&self, var: u16) -> Option<(FormSet, i32)> {
        if self.contains(var) {
            return None;
        }
        let below = (self.0 & ((1u32 << var) - 1)).count_ones();
        let sign = if below % 2 == 0 { 1 } else { -1 };
        Some((FormSet(self.0 | (1 << var)), sign))
    }

    /// Antisymmetric substitution `i_a(∂_var)`: remove `var` with the sign
    /// `(-1)^(position)`; `None` if absent.
    pub fn remove(&self, var: u16) -> Option<(FormSet, i32)> {
        if !self.contains(var) {
            return None;
        }
        let below = (self.0 & ((1u32 << var) - 1)).count_ones();
        let sign = if below % 2 == 0 { 1 } else { -1 };
        Some((FormSet(self.0 & !(1 << var)), sign))
    }

    /// Wedge of two sets: `None` on overlap, otherwise union and the sign
    /// of sorting the concatenated word self·other, i.e. the parity of
    /// inversion pairs (a in self, b in other, b < a).
    pub fn wedge(&self, other: &FormSet) -> Option<(FormSet, i32)> {
        if self.0 & other.0 != 0 {
            return None;
        }
        let mut pairs = 0u32;
        for a in self.iter() {
            pairs += (other.0 & ((1u32 << a) - 1)).count_ones();
        }
        Some((
            FormSet(self.0 | other.0),
            if pairs % 2 == 0 { 1 } else { -1 },
        ))
    }
}

impl fmt::Debug for FormSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, v) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", v)?;
        }
        write!(f, "}}")
    }
}

/// Sparse multivariate polynomial over [`Scalar`]. Used for Taylor jets of
/// base functions, symbolic Lie-algebra coefficients and series inversion.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct Poly {
    pub terms: BTreeMap<MultiIndex, Scalar>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly {
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(c: Scalar) -> Self {
        let mut p = Poly::zero();
        p.add_term(MultiIndex::empty(), c);
        p
    }

    pub fn one() -> Self {
        Poly::constant(Scalar::one())
    }

    pub fn var(v: u16) -> Self {
        let mut p = Poly::zero();
        p.add_term(MultiIndex::unit(v), Scalar::one());
        p
    }

    pub fn monomial(m: MultiIndex, c: Scalar) -> Self {
        let mut p = Poly::zero();
        p.add_term(m, c);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, m: MultiIndex, c: Scalar) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += &c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }

    pub fn neg(&self) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }

    pub fn scale(&self, s: &Scalar) -> Poly {
        if s.is_zero() {
            return Poly::zero();
        }
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c * s);
        }
        out
    }

    /// Product truncated at total degree `deg_cap` (None = untruncated).
    pub fn mul_capped(&self, other: &Poly, deg_cap: Option<u32>) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                if let Some(cap) = deg_cap {
                    if ma.degree() + mb.degree() > cap {
                        continue;
                    }
                }
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        self.mul_capped(other, None)
    }

    /// Partial derivative with respect to variable `v`.
    pub fn derivative(&self, v: u16) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let e = m.exp(v);
            if e > 0 {
                out.add_term(m.lowered(v).unwrap(), c.scale_int(e as i64));
            }
        }
        out
    }

    /// Keep only terms of total degree ≤ `deg`.
    pub fn truncate(&self, deg: u32) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            if m.degree() <= deg {
                out.add_term(m.clone(), c.clone());
            }
        }
        out
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn constant_term(&self) -> Scalar {
        self.terms
            .get(&MultiIndex::empty())
            .cloned()
            .unwrap_or_else(Scalar::zero)
    }

    pub fn coefficient(&self, m: &MultiIndex) -> Scalar {
        self.terms.get(m).cloned().unwrap_or_else(Scalar::zero)
    }

    /// Evaluate at a point given by scalar values per variable index.
    pub fn eval(&self, point: &[Scalar]) -> Scalar {
        let mut acc = Scalar::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (v, e) in m.iter() {
                t = &t * &point[v as usize].pow(e);
            }
            acc += &t;
        }
        acc
    }

    /// Multiplicative inverse as a power series, truncated at degree `deg`.
    /// Requires a nonzero constant term.
    pub fn series_inverse(&self, deg: u32) -> Poly {
        let c0 = self.constant_term();
        assert!(!c0.is_zero(), "series inverse needs nonzero constant term");
        let c0_inv = c0.inv();
        // f = c0 (1 - u), 1/f = (1/c0) sum u^k
        let u = Poly::constant(Scalar::one()).sub(&self.scale(&c0_inv)).neg();
        // u = self/c0 - 1, want sum over (-u)^k: 1/f = (1/c0) * 1/(1+u)
        let mut acc = Poly::one();
        let mut pow = Poly::one();
        for _ in 1..=deg {
            pow = pow.mul_capped(&u, Some(deg)).neg();
            acc = acc.add(&pow);
        }
        acc.scale(&c0_inv)
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({}){:?}", c, m)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_index_algebra() {
        let m = MultiIndex::from_exponents(&[2, 0, 1]);
        assert_eq!(m.degree(), 3);
        assert_eq!(m.exp(0), 2);
        assert_eq!(m.lowered(1), None);
        let r = m.raised(1);
        assert_eq!(r.degree(), 4);
        assert_eq!(r.checked_sub(&m), Some(MultiIndex::unit(1)));
        assert_eq!(m.expand(), vec![0, 0, 2]);
    }

    #[test]
    fn enumerate_counts() {
        assert_eq!(MultiIndex::enumerate_degree(3, 2).len(), 6);
        assert_eq!(MultiIndex::enumerate_up_to(2, 3).len(), 10);
    }

    #[test]
    fn formset_signs() {
        let a = FormSet::single(2);
        let (ab, s) = a.wedge_left(0).unwrap();
        assert_eq!(s, 1);
        let (_, s2) = ab.remove(2).unwrap();
        assert_eq!(s2, -1); // one generator (0) sits below 2
        assert!(ab.wedge_left(0).is_none());
        // η^1 ∧ η^0 = -η^0 ∧ η^1
        let (w, s3) = FormSet::single(1).wedge(&FormSet::single(0)).unwrap();
        assert_eq!(w, FormSet(0b11));
        assert_eq!(s3, -1);
    }

    #[test]
    fn poly_inverse() {
        // (1 + x0)^{-1} = 1 - x0 + x0^2 - x0^3
        let f = Poly::one().add(&Poly::var(0));
        let inv = f.series_inverse(3);
        let prod = f.mul(&inv).truncate(3);
        assert_eq!(prod, Poly::one());
    }

    #[test]
    fn poly_derivative() {
        let f = Poly::monomial(MultiIndex::from_exponents(&[2, 1]), Scalar::from_int(3));
        let d = f.derivative(0);
        assert_eq!(
            d.coefficient(&MultiIndex::from_exponents(&[1, 1])),
            Scalar::from_int(6)
        );
    }
}
