//! The formally graded Weyl algebra W⊗Λ over a single bundle chart of T*Q.
//!
//! Elements are sparse exact sums of terms
//!
//! ```text
//!     c · λ^ℓ · q^j · p^m · y^s · η^A
//! ```
//!
//! where `y^s` is a symmetric monomial in the 2n fibre generators
//! (y¹..yⁿ ↔ dq¹..dqⁿ, y^{n+1}..y^{2n} ↔ dp₁..dpₙ), `η^A` an antisymmetric
//! monomial in the matching form generators, `p^m` a momentum monomial and
//! `q^j` a truncated base Taylor jet at the chart origin. The coefficient
//! `c` is an exact Gaussian rational.
//!
//! Base-coordinate knowledge is bounded: every Deg-homogeneous component
//! carries a jet-validity order, consumed by base differentiation. Binary
//! operations propagate validity with the product rule
//! `v(fg) = min(val(f)+v(g), val(g)+v(f))` where `val` is the valuation of
//! the stored jet, so exact polynomial factors never destroy knowledge.

use crate::error::CoreError;
use crate::multi::{FormSet, MultiIndex, Poly};
use crate::scalar::{factorial, Scalar};
use crate::Result;
use std::collections::BTreeMap;
use std::fmt;

/// Jet validity of synthetic exact elements (polynomials known completely).
pub const JET_EXACT: i32 = 1 << 28;

/// Truncation caps carried by every element.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Caps {
    /// Highest retained power of λ.
    pub lam_max: u32,
    /// Highest retained total degree Deg = deg_s + 2 deg_λ.
    pub deg_max: u32,
    /// Highest retained antisymmetric degree.
    pub form_max: u32,
}

impl Caps {
    pub fn new(lam_max: u32, deg_max: u32) -> Self {
        Caps {
            lam_max,
            deg_max,
            form_max: 32,
        }
    }

    pub fn with_form_max(mut self, form_max: u32) -> Self {
        self.form_max = form_max;
        self
    }

    pub fn min(&self, other: &Caps) -> Caps {
        Caps {
            lam_max: self.lam_max.min(other.lam_max),
            deg_max: self.deg_max.min(other.deg_max),
            form_max: self.form_max.min(other.form_max),
        }
    }
}

/// One monomial slot of the algebra.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct TermKey {
    pub lam: u32,
    pub sym: MultiIndex,
    pub form: FormSet,
    pub mom: MultiIndex,
    pub jet: MultiIndex,
}

impl TermKey {
    pub fn scalar_key() -> Self {
        TermKey {
            lam: 0,
            sym: MultiIndex::empty(),
            form: FormSet::empty(),
            mom: MultiIndex::empty(),
            jet: MultiIndex::empty(),
        }
    }

    pub fn total_deg(&self) -> u32 {
        self.sym.degree() + 2 * self.lam
    }

    pub fn deg_s(&self) -> u32 {
        self.sym.degree()
    }

    pub fn deg_a(&self) -> u32 {
        self.form.degree()
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct ValidityMap(pub BTreeMap<u32, i32>);

impl ValidityMap {
    pub fn get(&self, deg: u32) -> i32 {
        self.0.get(&deg).copied().unwrap_or(JET_EXACT)
    }

    pub fn set_min(&mut self, deg: u32, v: i32) {
        if v >= JET_EXACT {
            return;
        }
        let cur = self.get(deg);
        if v < cur {
            self.0.insert(deg, v);
        }
    }

    pub fn min_validity(&self) -> i32 {
        self.0.values().copied().min().unwrap_or(JET_EXACT)
    }
}

/// Sparse element of W⊗Λ over a chart of T*Q with base dimension `n`.
///
/// Equality compares the stored terms only; caps and jet validity are
/// knowledge metadata, not part of the value.
#[derive(Clone)]
pub struct WeylElement {
    pub n: usize,
    pub caps: Caps,
    pub terms: BTreeMap<TermKey, Scalar>,
    pub validity: ValidityMap,
}

impl PartialEq for WeylElement {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.terms == other.terms
    }
}

impl Eq for WeylElement {}

impl WeylElement {
    pub fn zero(n: usize, caps: Caps) -> Self {
        WeylElement {
            n,
            caps,
            terms: BTreeMap::new(),
            validity: ValidityMap::default(),
        }
    }

    pub fn scalar(n: usize, caps: Caps, c: Scalar) -> Self {
        let mut e = Self::zero(n, caps);
        e.insert(TermKey::scalar_key(), c);
        e
    }

    pub fn one(n: usize, caps: Caps) -> Self {
        Self::scalar(n, caps, Scalar::one())
    }

    /// λ^k as an element.
    pub fn lambda_pow(n: usize, caps: Caps, k: u32) -> Self {
        let mut e = Self::zero(n, caps);
        e.insert(
            TermKey {
                lam: k,
                ..TermKey::scalar_key()
            },
            Scalar::one(),
        );
        e
    }

    /// The symmetric generator y^idx (0-based over 2n).
    pub fn y(n: usize, caps: Caps, idx: u16) -> Self {
        let mut e = Self::zero(n, caps);
        e.insert(
            TermKey {
                sym: MultiIndex::unit(idx),
                ..TermKey::scalar_key()
            },
            Scalar::one(),
        );
        e
    }

    /// The antisymmetric generator η^idx.
    pub fn eta(n: usize, caps: Caps, idx: u16) -> Self {
        let mut e = Self::zero(n, caps);
        e.insert(
            TermKey {
                form: FormSet::single(idx),
                ..TermKey::scalar_key()
            },
            Scalar::one(),
        );
        e
    }

    /// Coordinate function q^i (an exact polynomial jet).
    pub fn q_fn(n: usize, caps: Caps, i: u16) -> Self {
        let mut e = Self::zero(n, caps);
        e.insert(
            TermKey {
                jet: MultiIndex::unit(i),
                ..TermKey::scalar_key()
            },
            Scalar::one(),
        );
        e
    }

    /// Momentum function p_i.
    pub fn p_fn(n: usize, caps: Caps, i: u16) -> Self {
        let mut e = Self::zero(n, caps);
        e.insert(
            TermKey {
                mom: MultiIndex::unit(i),
                ..TermKey::scalar_key()
            },
            Scalar::one(),
        );
        e
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_q_type(&self, idx: u16) -> bool {
        (idx as usize) < self.n
    }

    /// Insert honoring caps and the component validity known so far.
    pub fn insert(&mut self, key: TermKey, c: Scalar) {
        if c.is_zero() {
            return;
        }
        if key.lam > self.caps.lam_max
            || key.total_deg() > self.caps.deg_max
            || key.form.degree() > self.caps.form_max
        {
            return;
        }
        if key.jet.degree() as i32 > self.validity.get(key.total_deg()) {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(key) {
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

    /// Re-apply validity truncation after validity entries tightened.
    fn retruncate(&mut self) {
        let validity = self.validity.clone();
        self.terms
            .retain(|k, _| (k.jet.degree() as i32) <= validity.get(k.total_deg()));
    }

    /// Lowest stored jet degree within one Deg component, or validity+1 for
    /// an empty component (the true function is O(q^{v+1}) there).
    pub fn valuation(&self, deg: u32) -> i32 {
        let mut val: Option<i32> = None;
        for (k, _) in self.terms.range(std::ops::RangeFull) {
            if k.total_deg() == deg {
                let j = k.jet.degree() as i32;
                val = Some(val.map_or(j, |v: i32| v.min(j)));
            }
        }
        val.unwrap_or_else(|| (self.validity.get(deg)).saturating_add(1))
    }

    fn valuations(&self) -> BTreeMap<u32, i32> {
        let mut m: BTreeMap<u32, i32> = BTreeMap::new();
        for k in self.terms.keys() {
            let d = k.total_deg();
            let j = k.jet.degree() as i32;
            m.entry(d).and_modify(|v| *v = (*v).min(j)).or_insert(j);
        }
        m
    }

    pub fn comp_validity(&self, deg: u32) -> i32 {
        self.validity.get(deg)
    }

    pub fn set_comp_validity(&mut self, deg: u32, v: i32) {
        self.validity.set_min(deg, v);
        self.retruncate();
    }

    /// Uniform validity for every currently nonempty component.
    pub fn with_validity(mut self, v: i32) -> Self {
        let degs: Vec<u32> = self.terms.keys().map(|k| k.total_deg()).collect();
        for d in degs {
            self.validity.set_min(d, v);
        }
        self.retruncate();
        self
    }

    pub fn min_validity(&self) -> i32 {
        self.validity.min_validity()
    }

    pub fn add(&self, other: &WeylElement) -> WeylElement {
        assert_eq!(self.n, other.n, "dimension mismatch in add");
        let mut out = WeylElement::zero(self.n, self.caps.min(&other.caps));
        for (d, v) in &self.validity.0 {
            out.validity.set_min(*d, *v);
        }
        for (d, v) in &other.validity.0 {
            out.validity.set_min(*d, *v);
        }
        for (k, c) in &self.terms {
            out.insert(k.clone(), c.clone());
        }
        for (k, c) in &other.terms {
            out.insert(k.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &WeylElement) -> WeylElement {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> WeylElement {
        self.scale(&-Scalar::one())
    }

    pub fn scale(&self, s: &Scalar) -> WeylElement {
        let mut out = WeylElement::zero(self.n, self.caps);
        out.validity = self.validity.clone();
        if s.is_zero() {
            return out;
        }
        for (k, c) in &self.terms {
            out.terms.insert(k.clone(), c * s);
        }
        out
    }

    /// Multiply every term by λ^k.
    pub fn mul_lambda_pow(&self, k: u32) -> WeylElement {
        let mut out = WeylElement::zero(self.n, self.caps);
        for (key, v) in &self.validity.0 {
            out.validity.set_min(key + 2 * k, *v);
        }
        for (key, c) in &self.terms {
            let mut nk = key.clone();
            nk.lam += k;
            out.insert(nk, c.clone());
        }
        out
    }

    /// Divide by λ: every term must carry at least λ^1.
    pub fn div_lambda(&self) -> Result<WeylElement> {
        let mut out = WeylElement::zero(self.n, self.caps);
        for (key, v) in &self.validity.0 {
            if *key >= 2 {
                out.validity.set_min(key - 2, *v);
            }
        }
        for (key, c) in &self.terms {
            if key.lam == 0 {
                return Err(CoreError::Invalid(format!(
                    "division by lambda of a term with no lambda power: {key:?}"
                )));
            }
            let mut nk = key.clone();
            nk.lam -= 1;
            out.insert(nk, c.clone());
        }
        Ok(out)
    }

    // ------------------------------------------------------------------
    // Gradings
    // ------------------------------------------------------------------

    pub fn component(&self, deg: u32) -> WeylElement {
        let mut out = WeylElement::zero(self.n, self.caps);
        out.validity.set_min(deg, self.validity.get(deg));
        for (k, c) in &self.terms {
            if k.total_deg() == deg {
                out.insert(k.clone(), c.clone());
            }
        }
        out
    }

    pub fn max_deg(&self) -> u32 {
        self.terms.keys().map(|k| k.total_deg()).max().unwrap_or(0)
    }

    pub fn max_lambda(&self) -> u32 {
        self.terms.keys().map(|k| k.lam).max().unwrap_or(0)
    }

    /// Keep components of total degree ≤ `max`.
    pub fn restrict_deg(&self, max: u32) -> WeylElement {
        let mut out = WeylElement::zero(self.n, self.caps);
        for (d, v) in &self.validity.0 {
            if *d <= max {
                out.validity.set_min(*d, *v);
            }
        }
        for (k, c) in &self.terms {
            if k.total_deg() <= max {
                out.insert(k.clone(), c.clone());
            }
        }
        out
    }

    /// Keep terms of λ-power ≤ `max`.
    pub fn restrict_lambda(&self, max: u32) -> WeylElement {
        let mut out = WeylElement::zero(self.n, self.caps);
        out.validity = self.validity.clone();
        for (k, c) in &self.terms {
            if k.lam <= max {
                out.insert(k.clone(), c.clone());
            }
        }
        out
    }

    /// Terms with λ-power exactly k, with λ stripped off.
    pub fn lambda_coefficient(&self, k: u32) -> WeylElement {
        let mut out = WeylElement::zero(self.n, self.caps);
        for (d, v) in &self.validity.0 {
            if *d >= 2 * k {
                out.validity.set_min(*d - 2 * k, *v);
            }
        }
        for (key, c) in &self.terms {
            if key.lam == k {
                let mut nk = key.clone();
                nk.lam = 0;
                out.insert(nk, c.clone());
            }
        }
        out
    }

    /// Liouville + λ homogeneity weight of a single key.
    pub fn h_weight(n: usize, k: &TermKey) -> i64 {
        let mut w = k.mom.degree() as i64 + k.lam as i64;
        for (v, e) in k.sym.iter() {
            if v as usize >= n {
                w += e as i64;
            }
        }
        for v in k.form.iter() {
            if v as usize >= n {
                w += 1;
            }
        }
        w
    }

    /// The homogeneity derivation H = L_ξ + λ∂_λ.
    pub fn homogeneity(&self) -> WeylElement {
        let mut out = WeylElement::zero(self.n, self.caps);
        out.validity = self.validity.clone();
        for (k, c) in &self.terms {
            let w = Self::h_weight(self.n, k);
            out.insert(k.clone(), c.scale_int(w));
        }
        out
    }

    /// Terms of homogeneity weight exactly `w`.
    pub fn h_component(&self, w: i64) -> WeylElement {
        let mut out = WeylElement::zero(self.n, self.caps);
        out.validity = self.validity.clone();
        for (k, c) in &self.terms {
            if Self::h_weight(self.n, k) == w {
                out.insert(k.clone(), c.clone());
            }
        }
        out
    }

    // ------------------------------------------------------------------
    // δ-calculus
    // ------------------------------------------------------------------

    /// δ = (1 ⊗ dxⁱ) i_s(∂_{xⁱ}): moves one symmetric generator into the
    /// matching form slot. Lowers Deg by one.
    pub fn delta(&self) -> WeylElement {
        let mut out = WeylElement::zero(self.n, self.caps);
        for (d, v) in &self.validity.0 {
            if *d >= 1 {
                out.validity.set_min(*d - 1, *v);
            }
        }
        for (k, c) in &self.terms {
            for (idx, e) in k.sym.iter() {
                if let Some((form, sign)) = k.form.wedge_left(idx) {
                    let mut nk = k.clone();
                    nk.sym = k.sym.lowered(idx).unwrap();
                    nk.form = form;
                    out.insert(nk, c.scale_int(sign as i64 * e as i64));
                }
            }
        }
        out
    }

    /// δ* = (dxⁱ ⊗ 1) i_a(∂_{xⁱ}): the reverse move. Raises Deg by one.
    pub fn delta_star(&self) -> WeylElement {
        let mut out = WeylElement::zero(self.n, self.caps);
        for (d, v) in &self.validity.0 {
            out.validity.set_min(*d + 1, *v);
        }
        for (k, c) in &self.terms {
            for idx in k.form.iter() {
                let (form, sign) = k.form.remove(idx).unwrap();
                let mut nk = k.clone();
                nk.sym = k.sym.raised(idx);
                nk.form = form;
                out.insert(nk, c.scale_int(sign as i64));
            }
        }
        out
    }

    /// δ⁻¹: δ* divided by deg_s + deg_a on each bi-homogeneous part, zero on
    /// the scalar part.
    pub fn delta_inv(&self) -> WeylElement {
        let mut out = WeylElement::zero(self.n, self.caps);
        for (d, v) in &self.validity.0 {
            out.validity.set_min(*d + 1, *v);
        }
        for (k, c) in &self.terms {
            let kl = k.deg_s() + k.deg_a();
            if kl == 0 {
                continue;
            }
            for idx in k.form.iter() {
                let (form, sign) = k.form.remove(idx).unwrap();
                let mut nk = k.clone();
                nk.sym = k.sym.raised(idx);
                nk.form = form;
                out.insert(nk, c.scale_ratio(sign as i64, kl as i64));
            }
        }
        out
    }

    /// Projection onto symmetric and antisymmetric degree zero.
    pub fn sigma(&self) -> WeylElement {
        let mut out = WeylElement::zero(self.n, self.caps);
        out.validity = self.validity.clone();
        for (k, c) in &self.terms {
            if k.sym.is_empty() && k.form.degree() == 0 {
                out.insert(k.clone(), c.clone());
            }
        }
        out
    }

    // ------------------------------------------------------------------
    // Substitutions and generator multiplications
    // ------------------------------------------------------------------

    /// i_s(∂_{x^idx}): consume one symmetric generator (with multiplicity).
    pub fn i_s_gen(&self, idx: u16) -> WeylElement {
        let mut out = WeylElement::zero(self.n, self.caps);
        for (d, v) in &self.validity.0 {
            if *d >= 1 {
                out.validity.set_min(*d - 1, *v);
            }
        }
        for (k, c) in &self.terms {
            let e = k.sym.exp(idx);
            if e > 0 {
                let mut nk = k.clone();
                nk.sym = k.sym.lowered(idx).unwrap();
                out.insert(nk, c.scale_int(e as i64));
            }
        }
        out
    }

    /// i_a(∂_{x^idx}): antisymmetric substitution with its sign.
    pub fn i_a_gen(&self, idx: u16) -> WeylElement {
        let mut out = WeylElement::zero(self.n, self.caps);
        out.validity = self.validity.clone();
        for (k, c) in &self.terms {
            if let Some((form, sign)) = k.form.remove(idx) {
                let mut nk = k.clone();
                nk.form = form;
                out.insert(nk, c.scale_int(sign as i64));
            }
        }
        out
    }

    /// Left wedge by η^idx.
    pub fn eta_wedge_left(&self, idx: u16) -> WeylElement {
        let mut out = WeylElement::zero(self.n, self.caps);
        for (d, v) in &self.validity.0 {
            out.validity.set_min(*d, *v);
        }
        for (k, c) in &self.terms {
            if let Some((form, sign)) = k.form.wedge_left(idx) {
                let mut nk = k.clone();
                nk.form = form;
                out.insert(nk, c.scale_int(sign as i64));
            }
        }
        out
    }

    /// Multiply by the symmetric generator y^idx.
    pub fn y_mul(&self, idx: u16) -> WeylElement {
        let mut out = WeylElement::zero(self.n, self.caps);
        for (d, v) in &self.validity.0 {
            out.validity.set_min(*d + 1, *v);
        }
        for (k, c) in &self.terms {
            let mut nk = k.clone();
            nk.sym = k.sym.raised(idx);
            out.insert(nk, c.clone());
        }
        out
    }

    /// Multiply by the momentum monomial p^m.
    pub fn mom_mul(&self, m: &MultiIndex) -> WeylElement {
        let mut out = WeylElement::zero(self.n, self.caps);
        out.validity = self.validity.clone();
        for (k, c) in &self.terms {
            let mut nk = k.clone();
            nk.mom = k.mom.mul(m);
            out.insert(nk, c.clone());
        }
        out
    }

    /// Multiply coefficients by a base jet `poly` of validity `pval`.
    pub fn jet_mul(&self, poly: &Poly, pval: i32) -> WeylElement {
        let mut out = WeylElement::zero(self.n, self.caps);
        if poly.is_zero() {
            // An exactly-zero polynomial kills everything with no knowledge
            // loss only if pval is exact; otherwise the tail is unknown.
            if pval >= JET_EXACT {
                return out;
            }
        }
        let pol_val = if poly.is_zero() {
            pval.saturating_add(1)
        } else {
            poly.terms.keys().map(|m| m.degree() as i32).min().unwrap()
        };
        let valuations = self.valuations();
        for (d, _) in self
            .validity
            .0
            .iter()
            .map(|(d, v)| (*d, *v))
            .chain(valuations.iter().map(|(d, v)| (*d, *v)))
        {
            let va = self.validity.get(d);
            let vala = self.valuation(d);
            let rv = (vala.saturating_add(pval)).min(pol_val.saturating_add(va));
            out.validity.set_min(d, rv);
        }
        for (k, c) in &self.terms {
            for (m, pc) in &poly.terms {
                let mut nk = k.clone();
                nk.jet = k.jet.mul(m);
                out.insert(nk, c * pc);
            }
        }
        out
    }

    /// ∂/∂p_i on the momentum part of the coefficients.
    pub fn partial_mom(&self, i: u16) -> WeylElement {
        let mut out = WeylElement::zero(self.n, self.caps);
        out.validity = self.validity.clone();
        for (k, c) in &self.terms {
            let e = k.mom.exp(i);
            if e > 0 {
                let mut nk = k.clone();
                nk.mom = k.mom.lowered(i).unwrap();
                out.insert(nk, c.scale_int(e as i64));
            }
        }
        out
    }

    /// ∂/∂q^i on the base jets. Consumes one order of jet validity per
    /// nonempty component; errors when a component is already exhausted.
    pub fn partial_jet(&self, i: u16) -> Result<WeylElement> {
        let mut out = WeylElement::zero(self.n, self.caps);
        let mut touched: BTreeMap<u32, ()> = BTreeMap::new();
        for k in self.terms.keys() {
            touched.entry(k.total_deg()).or_insert(());
        }
        for (d, _) in &touched {
            let v = self.validity.get(*d);
            if v <= 0 {
                return Err(CoreError::JetExhausted(format!(
                    "partial_jet on component Deg {d} with validity {v}"
                )));
            }
            out.validity.set_min(*d, v - 1);
        }
        for (d, v) in &self.validity.0 {
            if !touched.contains_key(d) {
                // empty limited component: the derivative is still limited
                out.validity.set_min(*d, *v - 1);
            }
        }
        for (k, c) in &self.terms {
            let e = k.jet.exp(i);
            if e > 0 {
                let mut nk = k.clone();
                nk.jet = k.jet.lowered(i).unwrap();
                out.insert(nk, c.scale_int(e as i64));
            }
        }
        Ok(out)
    }

    /// Complex conjugation of all coefficients (λ, y, η, q, p are real).
    pub fn conj(&self) -> WeylElement {
        let mut out = WeylElement::zero(self.n, self.caps);
        out.validity = self.validity.clone();
        for (k, c) in &self.terms {
            out.terms.insert(k.clone(), c.conj());
        }
        out
    }

    /// λ → −λ parity.
    pub fn lambda_parity(&self) -> WeylElement {
        let mut out = WeylElement::zero(self.n, self.caps);
        out.validity = self.validity.clone();
        for (k, c) in &self.terms {
            let c = if k.lam % 2 == 1 { -c } else { c.clone() };
            out.terms.insert(k.clone(), c);
        }
        out
    }

    /// Pullback along the zero section: kills momenta and p-type generators.
    pub fn i_star(&self) -> WeylElement {
        let n = self.n;
        let mut out = WeylElement::zero(n, self.caps);
        out.validity = self.validity.clone();
        'outer: for (k, c) in &self.terms {
            if !k.mom.is_empty() {
                continue;
            }
            for (v, _) in k.sym.iter() {
                if v as usize >= n {
                    continue 'outer;
                }
            }
            for v in k.form.iter() {
                if v as usize >= n {
                    continue 'outer;
                }
            }
            out.insert(k.clone(), c.clone());
        }
        out
    }

    /// True when only base content is present (no momenta, no p-generators).
    pub fn is_base(&self) -> bool {
        self.terms.keys().all(|k| {
            k.mom.is_empty()
                && k.sym.iter().all(|(v, _)| (v as usize) < self.n)
                && k.form.iter().all(|v| (v as usize) < self.n)
        })
    }

    // ------------------------------------------------------------------
    // Products
    // ------------------------------------------------------------------

    fn product_validity(
        &self,
        other: &WeylElement,
        out: &mut WeylElement,
        extra_other_validity: i32,
    ) {
        let vala = self.valuations();
        let valb = other.valuations();
        let mut degs_a: Vec<u32> = vala
            .keys()
            .copied()
            .chain(self.validity.0.keys().copied())
            .collect();
        degs_a.sort_unstable();
        degs_a.dedup();
        let mut degs_b: Vec<u32> = valb
            .keys()
            .copied()
            .chain(other.validity.0.keys().copied())
            .collect();
        degs_b.sort_unstable();
        degs_b.dedup();
        for &da in &degs_a {
            let va = self.validity.get(da);
            let vla = vala.get(&da).copied().unwrap_or(va.saturating_add(1));
            for &db in &degs_b {
                let vb = other.validity.get(db).min(extra_other_validity);
                let vlb = valb.get(&db).copied().unwrap_or(vb.saturating_add(1));
                let rv = (vla.saturating_add(vb)).min(vlb.saturating_add(va));
                out.validity.set_min(da + db, rv);
            }
        }
    }

    /// The supercommutative pointwise product μ.
    pub fn mul_pointwise(&self, other: &WeylElement) -> Result<WeylElement> {
        if self.n != other.n {
            return Err(CoreError::DimensionMismatch(self.n, other.n));
        }
        let mut out = WeylElement::zero(self.n, self.caps.min(&other.caps));
        self.product_validity(other, &mut out, JET_EXACT);
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                if ka.lam + kb.lam > out.caps.lam_max
                    || ka.total_deg() + kb.total_deg() > out.caps.deg_max
                {
                    continue;
                }
                if let Some((form, sign)) = ka.form.wedge(&kb.form) {
                    let key = TermKey {
                        lam: ka.lam + kb.lam,
                        sym: ka.sym.mul(&kb.sym),
                        form,
                        mom: ka.mom.mul(&kb.mom),
                        jet: ka.jet.mul(&kb.jet),
                    };
                    out.insert(key, (ca * cb).scale_int(sign as i64));
                }
            }
        }
        Ok(out)
    }

    /// The fibrewise Weyl product: exponential pairing of symmetric
    /// generators through the canonical Poisson tensor with weight iλ/2.
    /// The sign convention is fixed by [yq, yp]_W = iλ.
    pub fn weyl_mul(&self, other: &WeylElement) -> Result<WeylElement> {
        if self.n != other.n {
            return Err(CoreError::DimensionMismatch(self.n, other.n));
        }
        let n = self.n as u16;
        let caps = self.caps.min(&other.caps);
        let mut out = WeylElement::zero(self.n, caps);
        self.product_validity(other, &mut out, JET_EXACT);
        let half_i = Scalar::i().scale_ratio(1, 2);
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let target_deg = ka.total_deg() + kb.total_deg();
                if target_deg > caps.deg_max {
                    continue;
                }
                let Some((form, fsign)) = ka.form.wedge(&kb.form) else {
                    continue;
                };
                // Enumerate t-fold contractions recursively; ordered choices
                // are divided by t!.
                let tmax = ka
                    .sym
                    .degree()
                    .min(kb.sym.degree())
                    .min(caps.lam_max.saturating_sub(ka.lam + kb.lam));
                let base_coeff = (ca * cb).scale_int(fsign as i64);
                let mut stack: Vec<(MultiIndex, MultiIndex, Scalar)> =
                    vec![(ka.sym.clone(), kb.sym.clone(), base_coeff)];
                for t in 0..=tmax {
                    if t > 0 {
                        let mut next = Vec::new();
                        for (sa, sb, w) in &stack {
                            for dir in 0..n {
                                // Λ^{q^dir, p_dir} = +1
                                let (ea, eb) = (sa.exp(dir), sb.exp(n + dir));
                                if ea > 0 && eb > 0 {
                                    next.push((
                                        sa.lowered(dir).unwrap(),
                                        sb.lowered(n + dir).unwrap(),
                                        w.scale_int(ea as i64 * eb as i64),
                                    ));
                                }
                                // Λ^{p_dir, q^dir} = −1
                                let (ea, eb) = (sa.exp(n + dir), sb.exp(dir));
                                if ea > 0 && eb > 0 {
                                    next.push((
                                        sa.lowered(n + dir).unwrap(),
                                        sb.lowered(dir).unwrap(),
                                        w.scale_int(-(ea as i64 * eb as i64)),
                                    ));
                                }
                            }
                        }
                        stack = next;
                        if stack.is_empty() {
                            break;
                        }
                    }
                    let scale = &half_i.pow(t) / &factorial(t);
                    for (sa, sb, w) in &stack {
                        let key = TermKey {
                            lam: ka.lam + kb.lam + t,
                            sym: sa.mul(sb),
                            form,
                            mom: ka.mom.mul(&kb.mom),
                            jet: ka.jet.mul(&kb.jet),
                        };
                        out.insert(key, &(w * &scale) * &Scalar::one());
                    }
                }
            }
        }
        Ok(out)
    }

    /// The fibrewise standard-ordered product: exponential of
    /// (λ/i) i_s(∂_{p_k}) ⊗ i_s(∂ʰ_{q^k}) with the horizontal lift taken
    /// from `lift` (pass `None` for a flat chart).
    pub fn std_mul(
        &self,
        other: &WeylElement,
        lift: Option<&crate::geometry::LiftedConnection>,
    ) -> Result<WeylElement> {
        if self.n != other.n {
            return Err(CoreError::DimensionMismatch(self.n, other.n));
        }
        let n = self.n as u16;
        let caps = self.caps.min(&other.caps);
        let mut out = WeylElement::zero(self.n, caps);
        let lift_validity = lift.map_or(JET_EXACT, |l| l.validity);
        self.product_validity(other, &mut out, lift_validity);
        let lam_over_i = -Scalar::i(); // λ/i carries one λ-power tracked separately
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let target_deg = ka.total_deg() + kb.total_deg();
                if target_deg > caps.deg_max {
                    continue;
                }
                let Some((form, fsign)) = ka.form.wedge(&kb.form) else {
                    continue;
                };
                let tmax = ka
                    .sym
                    .degree()
                    .min(kb.sym.degree())
                    .min(caps.lam_max.saturating_sub(ka.lam + kb.lam));
                let base_coeff = (ca * cb).scale_int(fsign as i64);
                // State: remaining a-sym, remaining b-sym, extra momentum,
                // extra jet polynomial (from Christoffel substitutions),
                // accumulated weight.
                type State = (MultiIndex, MultiIndex, MultiIndex, Poly, Scalar);
                let mut stack: Vec<State> = vec![(
                    ka.sym.clone(),
                    kb.sym.clone(),
                    MultiIndex::empty(),
                    Poly::one(),
                    base_coeff,
                )];
                let max_jet = out
                    .validity
                    .get(target_deg)
                    .min(JET_EXACT)
                    .saturating_sub((ka.jet.degree() + kb.jet.degree()) as i32);
                for t in 0..=tmax {
                    if t > 0 {
                        let mut next: Vec<State> = Vec::new();
                        for (sa, sb, mom, pj, w) in &stack {
                            for k_dir in 0..n {
                                let ea = sa.exp(n + k_dir);
                                if ea == 0 {
                                    continue;
                                }
                                let sa2 = sa.lowered(n + k_dir).unwrap();
                                let w2 = w.scale_int(ea as i64);
                                // plain branch: consume y^{q^k} from b
                                let eb = sb.exp(k_dir);
                                if eb > 0 {
                                    next.push((
                                        sa2.clone(),
                                        sb.lowered(k_dir).unwrap(),
                                        mom.clone(),
                                        pj.clone(),
                                        w2.scale_int(eb as i64),
                                    ));
                                }
                                // horizontal branch: consume y^{p_r} from b,
                                // multiply by Γ^l_{k r} p_l
                                if let Some(lift) = lift {
                                    for r in 0..n {
                                        let ebr = sb.exp(n + r);
                                        if ebr == 0 {
                                            continue;
                                        }
                                        for l in 0..n {
                                            let gamma = lift.base_gamma(l, k_dir, r);
                                            if gamma.is_zero() {
                                                continue;
                                            }
                                            let pj2 = pj.mul_capped(
                                                gamma,
                                                Some(max_jet.clamp(0, JET_EXACT) as u32),
                                            );
                                            if pj2.is_zero() {
                                                continue;
                                            }
                                            next.push((
                                                sa2.clone(),
                                                sb.lowered(n + r).unwrap(),
                                                mom.raised(l),
                                                pj2,
                                                w2.scale_int(ebr as i64),
                                            ));
                                        }
                                    }
                                }
                            }
                        }
                        stack = next;
                        if stack.is_empty() {
                            break;
                        }
                    }
                    let scale = &lam_over_i.pow(t) / &factorial(t);
                    for (sa, sb, mom, pj, w) in &stack {
                        let coeff = w * &scale;
                        for (jm, jc) in &pj.terms {
                            let key = TermKey {
                                lam: ka.lam + kb.lam + t,
                                sym: sa.mul(sb),
                                form,
                                mom: ka.mom.mul(&kb.mom).mul(mom),
                                jet: ka.jet.mul(&kb.jet).mul(jm),
                            };
                            out.insert(key, &coeff * jc);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Δ_fib = i_s(∂_{p_k}) i_s(∂ʰ_{q^k}) applied once.
    pub fn delta_fib(&self, lift: Option<&crate::geometry::LiftedConnection>) -> WeylElement {
        let n = self.n as u16;
        let mut out = WeylElement::zero(self.n, self.caps);
        let lift_validity = lift.map_or(JET_EXACT, |l| l.validity);
        for (d, _) in self
            .validity
            .0
            .iter()
            .map(|(d, v)| (*d, *v))
            .chain(self.valuations().iter().map(|(d, v)| (*d, *v)))
        {
            if d >= 2 {
                let v = self.validity.get(d).min(lift_validity);
                out.validity.set_min(d - 2, v);
            }
        }
        for (k, c) in &self.terms {
            for k_dir in 0..n {
                // first i_s(∂^h_{q^k}), then i_s(∂_{p_k}); the two commute.
                let plain = k.sym.exp(k_dir);
                if plain > 0 {
                    let s1 = k.sym.lowered(k_dir).unwrap();
                    let e2 = s1.exp(n + k_dir);
                    if e2 > 0 {
                        let mut nk = k.clone();
                        nk.sym = s1.lowered(n + k_dir).unwrap();
                        out.insert(nk, c.scale_int(plain as i64 * e2 as i64));
                    }
                }
                if let Some(lift) = lift {
                    for r in 0..n {
                        let er = k.sym.exp(n + r);
                        if er == 0 {
                            continue;
                        }
                        let s1 = k.sym.lowered(n + r).unwrap();
                        let e2 = s1.exp(n + k_dir);
                        if e2 == 0 {
                            continue;
                        }
                        let s2 = s1.lowered(n + k_dir).unwrap();
                        for l in 0..n {
                            let gamma = lift.base_gamma(l, k_dir, r);
                            if gamma.is_zero() {
                                continue;
                            }
                            for (jm, jc) in &gamma.terms {
                                let mut nk = k.clone();
                                nk.sym = s2.clone();
                                nk.mom = k.mom.raised(l);
                                nk.jet = k.jet.mul(jm);
                                out.insert(nk, &c.scale_int(er as i64 * e2 as i64) * jc);
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// S = exp((λ/2i) Δ_fib) (forward) or its inverse.
    pub fn s_fib(
        &self,
        forward: bool,
        lift: Option<&crate::geometry::LiftedConnection>,
    ) -> WeylElement {
        let factor = if forward {
            Scalar::imag_ratio(-1, 2) // λ/(2i) = -i/2 · λ
        } else {
            Scalar::imag_ratio(1, 2)
        };
        let mut acc = self.clone();
        let mut cur = self.clone();
        let mut t = 1u32;
        loop {
            cur = cur.delta_fib(lift);
            if cur.is_zero() || t > self.caps.lam_max {
                break;
            }
            let term = cur
                .mul_lambda_pow(t)
                .scale(&(&factor.pow(t) / &factorial(t)));
            // delta_fib was applied t times to the λ-shifted element; track
            // λ explicitly here instead of inside delta_fib.
            acc = acc.add(&term);
            if term.is_zero() {
                break;
            }
            t += 1;
        }
        acc
    }

    /// Graded supercommutator with respect to the given fibrewise product.
    pub fn super_commutator(
        &self,
        other: &WeylElement,
        product: FibProduct,
        lift: Option<&crate::geometry::LiftedConnection>,
    ) -> Result<WeylElement> {
        let ab = product.apply(self, other, lift)?;
        let mut out = ab;
        // subtract (-1)^{|a||b|} b∘a split by form parity
        for (pa, pb) in [(0u32, 0u32), (0, 1), (1, 0), (1, 1)] {
            let a_part = self.form_parity(pa);
            let b_part = other.form_parity(pb);
            if a_part.is_zero() || b_part.is_zero() {
                continue;
            }
            let ba = product.apply(&b_part, &a_part, lift)?;
            let sign = if pa * pb == 1 { 1 } else { -1 };
            out = out.add(&ba.scale(&Scalar::from_int(sign)));
        }
        Ok(out)
    }

    fn form_parity(&self, parity: u32) -> WeylElement {
        let mut out = WeylElement::zero(self.n, self.caps);
        out.validity = self.validity.clone();
        for (k, c) in &self.terms {
            if k.form.degree() % 2 == parity {
                out.insert(k.clone(), c.clone());
            }
        }
        out
    }

    /// The fibrewise Poisson bracket Λ^{kl} i_s(∂_k)a · i_s(∂_l)b.
    pub fn fib_poisson(&self, other: &WeylElement) -> Result<WeylElement> {
        let n = self.n as u16;
        let mut acc = WeylElement::zero(self.n, self.caps.min(&other.caps));
        for i in 0..n {
            let t1 = self.i_s_gen(i).mul_pointwise(&other.i_s_gen(n + i))?;
            let t2 = self.i_s_gen(n + i).mul_pointwise(&other.i_s_gen(i))?;
            acc = acc.add(&t1).add(&t2.neg());
        }
        Ok(acc)
    }

    /// (i/λ)[r, a] for the given product: the commutator must vanish at λ⁰.
    pub fn ad_i_over_lambda(
        &self,
        a: &WeylElement,
        product: FibProduct,
        lift: Option<&crate::geometry::LiftedConnection>,
    ) -> Result<WeylElement> {
        // the division by λ lowers the total degree by 2, so the commutator
        // must be computed with widened caps to avoid losing the top degrees
        let mut r_up = self.clone();
        r_up.caps.lam_max = r_up.caps.lam_max.saturating_add(1);
        r_up.caps.deg_max = r_up.caps.deg_max.saturating_add(2);
        let mut a_up = a.clone();
        a_up.caps = r_up.caps;
        let comm = r_up.super_commutator(&a_up, product, lift)?;
        let shifted = comm.div_lambda()?.scale(&Scalar::i());
        let mut out = WeylElement::zero(self.n, self.caps.min(&a.caps));
        out.validity = shifted.validity.clone();
        for (k, c) in shifted.terms {
            out.insert(k, c);
        }
        Ok(out)
    }

    // ------------------------------------------------------------------
    // Display
    // ------------------------------------------------------------------

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }
}

/// Which fibrewise deformation to use for products, commutators, ad's.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FibProduct {
    Pointwise,
    Weyl,
    Standard,
}

impl FibProduct {
    pub fn apply(
        &self,
        a: &WeylElement,
        b: &WeylElement,
        lift: Option<&crate::geometry::LiftedConnection>,
    ) -> Result<WeylElement> {
        match self {
            FibProduct::Pointwise => a.mul_pointwise(b),
            FibProduct::Weyl => a.weyl_mul(b),
            FibProduct::Standard => a.std_mul(b, lift),
        }
    }
}

impl fmt::Debug for WeylElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let n = self.n;
        let gen_name = |v: u16| {
            if (v as usize) < n {
                format!("q{}", v + 1)
            } else {
                format!("p{}", v as usize - n + 1)
            }
        };
        let mut first = true;
        for (k, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({})", c)?;
            if k.lam > 0 {
                write!(f, "·λ^{}", k.lam)?;
            }
            for (v, e) in k.jet.iter() {
                write!(f, "·q{}^{}", v + 1, e)?;
            }
            for (v, e) in k.mom.iter() {
                write!(f, "·p{}^{}", v + 1, e)?;
            }
            for (v, e) in k.sym.iter() {
                write!(f, "·y[{}]^{}", gen_name(v), e)?;
            }
            if k.form.degree() > 0 {
                write!(f, "·η{{")?;
                for (i, v) in k.form.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}", gen_name(v))?;
                }
                write!(f, "}}")?;
            }
        }
        Ok(())
    }
}

/// A phase-space function: an element of symmetric and antisymmetric degree
/// zero, i.e. a λ-series of momentum polynomials with base-jet coefficients.
#[derive(Clone, PartialEq, Eq)]
pub struct PhaseFunction(pub WeylElement);

impl std::hash::Hash for WeylElement {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.n.hash(state);
        for (k, c) in &self.terms {
            k.hash(state);
            c.hash(state);
        }
    }
}

impl PhaseFunction {
    pub fn try_from_weyl(e: WeylElement) -> Result<Self> {
        if let Some(k) = e
            .terms
            .keys()
            .find(|k| !k.sym.is_empty() || k.form.degree() > 0)
        {
            return Err(CoreError::NotPhaseFunction(format!("{k:?}")));
        }
        Ok(PhaseFunction(e))
    }

    pub fn zero(n: usize, caps: Caps) -> Self {
        PhaseFunction(WeylElement::zero(n, caps))
    }

    pub fn one(n: usize, caps: Caps) -> Self {
        PhaseFunction(WeylElement::one(n, caps))
    }

    pub fn q(n: usize, caps: Caps, i: u16) -> Self {
        PhaseFunction(WeylElement::q_fn(n, caps, i))
    }

    pub fn p(n: usize, caps: Caps, i: u16) -> Self {
        PhaseFunction(WeylElement::p_fn(n, caps, i))
    }

    /// A single monomial c λ^ℓ p^m q^j.
    pub fn monomial(n: usize, caps: Caps, lam: u32, mom: MultiIndex, jet: MultiIndex, c: Scalar) -> Self {
        let mut e = WeylElement::zero(n, caps);
        e.insert(
            TermKey {
                lam,
                sym: MultiIndex::empty(),
                form: FormSet::empty(),
                mom,
                jet,
            },
            c,
        );
        PhaseFunction(e)
    }

    pub fn as_weyl(&self) -> &WeylElement {
        &self.0
    }

    pub fn into_weyl(self) -> WeylElement {
        self.0
    }

    pub fn add(&self, other: &PhaseFunction) -> PhaseFunction {
        PhaseFunction(self.0.add(&other.0))
    }

    pub fn sub(&self, other: &PhaseFunction) -> PhaseFunction {
        PhaseFunction(self.0.sub(&other.0))
    }

    pub fn neg(&self) -> PhaseFunction {
        PhaseFunction(self.0.neg())
    }

    pub fn scale(&self, s: &Scalar) -> PhaseFunction {
        PhaseFunction(self.0.scale(s))
    }

    pub fn mul(&self, other: &PhaseFunction) -> Result<PhaseFunction> {
        Ok(PhaseFunction(self.0.mul_pointwise(&other.0)?))
    }

    pub fn mul_lambda_pow(&self, k: u32) -> PhaseFunction {
        PhaseFunction(self.0.mul_lambda_pow(k))
    }

    pub fn partial_p(&self, i: u16) -> PhaseFunction {
        PhaseFunction(self.0.partial_mom(i))
    }

    pub fn partial_q(&self, i: u16) -> Result<PhaseFunction> {
        Ok(PhaseFunction(self.0.partial_jet(i)?))
    }

    pub fn conj(&self) -> PhaseFunction {
        PhaseFunction(self.0.conj())
    }

    pub fn homogeneity(&self) -> PhaseFunction {
        PhaseFunction(self.0.homogeneity())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Canonical Poisson bracket {f, g} = ∂_q f ∂_p g − ∂_p f ∂_q g.
    pub fn poisson(&self, other: &PhaseFunction) -> Result<PhaseFunction> {
        let n = self.0.n as u16;
        let mut acc = WeylElement::zero(self.0.n, self.0.caps.min(&other.0.caps));
        for i in 0..n {
            let t1 = self
                .0
                .partial_jet(i)?
                .mul_pointwise(&other.0.partial_mom(i))?;
            let t2 = self
                .0
                .partial_mom(i)
                .mul_pointwise(&other.0.partial_jet(i)?)?;
            acc = acc.add(&t1).add(&t2.neg());
        }
        Ok(PhaseFunction(acc))
    }

    /// True if all terms have momentum degree 0 (a pulled-back base function).
    pub fn is_base_function(&self) -> bool {
        self.0.terms.keys().all(|k| k.mom.is_empty())
    }

    /// Maximum momentum degree.
    pub fn momentum_degree(&self) -> u32 {
        self.0
            .terms
            .keys()
            .map(|k| k.mom.degree())
            .max()
            .unwrap_or(0)
    }
}

impl fmt::Debug for PhaseFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn caps() -> Caps {
        Caps::new(6, 12)
    }

    fn el_y(idx: u16) -> WeylElement {
        WeylElement::y(2, caps(), idx)
    }

    // n = 2 chart: generators 0,1 are y^{q1}, y^{q2}; 2,3 are y^{p1}, y^{p2}.

    #[test]
    fn pointwise_product_basics() {
        // (y1 ⊗ η1)(y2 ⊗ η2) = y1y2 ⊗ η1∧η2
        let a = el_y(0).eta_wedge_left(0);
        let b = el_y(1).eta_wedge_left(1);
        let ab = a.mul_pointwise(&b).unwrap();
        assert_eq!(ab.term_count(), 1);
        let (k, c) = ab.terms.iter().next().unwrap();
        assert_eq!(k.sym, MultiIndex::unit(0).mul(&MultiIndex::unit(1)));
        assert_eq!(k.form, FormSet(0b11));
        assert_eq!(*c, Scalar::one());
        // wedge nilpotency
        let e1 = WeylElement::eta(2, caps(), 0);
        assert!(e1.mul_pointwise(&e1).unwrap().is_zero());
        // unit law
        let one = WeylElement::one(2, caps());
        let r = ab.mul_pointwise(&one).unwrap();
        assert_eq!(r, ab);
    }

    #[test]
    fn supercommutativity_of_mu() {
        let a = el_y(0).eta_wedge_left(0); // odd
        let b = el_y(1).eta_wedge_left(1); // odd
        let ab = a.mul_pointwise(&b).unwrap();
        let ba = b.mul_pointwise(&a).unwrap();
        assert_eq!(ab, ba.neg());
    }

    #[test]
    fn delta_leibniz_example() {
        // δ(y^{q1} y^{p1}) = y^{p1}⊗η^{q1} + y^{q1}⊗η^{p1}
        let a = el_y(0).mul_pointwise(&el_y(2)).unwrap();
        let d = a.delta();
        let expect = el_y(2)
            .eta_wedge_left(0)
            .add(&el_y(0).eta_wedge_left(2));
        assert_eq!(d, expect);
    }

    #[test]
    fn delta_inv_examples() {
        // δ⁻¹(y^{p1}⊗η^{q1}) = ½ y^{q1}y^{p1}
        let a = el_y(2).eta_wedge_left(0);
        let inv = a.delta_inv();
        let expect = el_y(0)
            .mul_pointwise(&el_y(2))
            .unwrap()
            .scale(&Scalar::from_ratio(1, 2));
        assert_eq!(inv, expect);
        // δ⁻¹(scalar) = 0
        assert!(WeylElement::one(2, caps()).delta_inv().is_zero());
    }

    #[test]
    fn hodge_identity_on_example() {
        // a = y^{q1} ⊗ η^{q2}
        let a = el_y(0).eta_wedge_left(1);
        let lhs = a
            .delta_inv()
            .delta()
            .add(&a.delta().delta_inv())
            .add(&a.sigma());
        assert_eq!(lhs, a);
    }

    #[test]
    fn sigma_projection() {
        let f = WeylElement::q_fn(2, caps(), 0);
        let g = el_y(0).mul_pointwise(&WeylElement::p_fn(2, caps(), 0)).unwrap();
        let sum = f.add(&g);
        assert_eq!(sum.sigma(), f);
        assert!(WeylElement::eta(2, caps(), 0).sigma().is_zero());
    }

    #[test]
    fn weyl_product_first_order() {
        // y^{q1} ∘W y^{p1} = y^{q1}y^{p1} + iλ/2
        let a = el_y(0);
        let b = el_y(2);
        let ab = a.weyl_mul(&b).unwrap();
        let mut expect = a.mul_pointwise(&b).unwrap();
        expect.insert(
            TermKey {
                lam: 1,
                ..TermKey::scalar_key()
            },
            Scalar::imag_ratio(1, 2),
        );
        assert_eq!(ab, expect);
        // reversed: −iλ/2
        let ba = b.weyl_mul(&a).unwrap();
        let mut expect2 = a.mul_pointwise(&b).unwrap();
        expect2.insert(
            TermKey {
                lam: 1,
                ..TermKey::scalar_key()
            },
            Scalar::imag_ratio(-1, 2),
        );
        assert_eq!(ba, expect2);
        // ad_W(y^{q1}) y^{p1} = iλ
        let comm = a
            .super_commutator(&b, FibProduct::Weyl, None)
            .unwrap();
        let mut expect3 = WeylElement::zero(2, caps());
        expect3.insert(
            TermKey {
                lam: 1,
                ..TermKey::scalar_key()
            },
            Scalar::i(),
        );
        assert_eq!(comm, expect3);
    }

    #[test]
    fn std_product_flat_one_sided() {
        // flat: y^{p1} ∘S y^{q1} = y^{p1}y^{q1} + (λ/i)
        let a = el_y(2);
        let b = el_y(0);
        let ab = a.std_mul(&b, None).unwrap();
        let mut expect = a.mul_pointwise(&b).unwrap();
        expect.insert(
            TermKey {
                lam: 1,
                ..TermKey::scalar_key()
            },
            -Scalar::i(),
        );
        assert_eq!(ab, expect);
        // no correction the other way
        let ba = b.std_mul(&a, None).unwrap();
        assert_eq!(ba, b.mul_pointwise(&a).unwrap());
    }

    #[test]
    fn s_fib_flat_intertwines() {
        // S(y^{q1}y^{p1}) = y^{q1}y^{p1} + λ/(2i)
        let a = el_y(0).mul_pointwise(&el_y(2)).unwrap();
        let s = a.s_fib(true, None);
        let mut expect = a.clone();
        expect.insert(
            TermKey {
                lam: 1,
                ..TermKey::scalar_key()
            },
            Scalar::imag_ratio(-1, 2),
        );
        assert_eq!(s, expect);
        // S(S⁻¹ a) = a
        assert_eq!(s.s_fib(false, None), a);
        // S(a ∘W b) = Sa ∘S Sb on a = y^{q1}, b = y^{p1}
        let x = el_y(0);
        let y = el_y(2);
        let lhs = x.weyl_mul(&y).unwrap().s_fib(true, None);
        let rhs = x
            .s_fib(true, None)
            .std_mul(&y.s_fib(true, None), None)
            .unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn homogeneity_weights() {
        let lam = WeylElement::lambda_pow(2, caps(), 1);
        assert_eq!(lam.homogeneity(), lam);
        let p1 = WeylElement::p_fn(2, caps(), 0);
        assert_eq!(p1.homogeneity(), p1);
        let chi = WeylElement::q_fn(2, caps(), 0);
        assert!(chi.homogeneity().is_zero());
    }

    #[test]
    fn fib_poisson_canonical_pair() {
        let a = el_y(0);
        let b = el_y(2);
        let br = a.fib_poisson(&b).unwrap();
        assert_eq!(br, WeylElement::one(2, caps()));
    }

    #[test]
    fn jet_validity_rules() {
        // exact polynomial times limited jet keeps the refined validity
        let q5 = {
            let mut e = WeylElement::zero(2, caps());
            e.insert(
                TermKey {
                    jet: MultiIndex::single(0, 5),
                    ..TermKey::scalar_key()
                },
                Scalar::one(),
            );
            e
        };
        let jet2 = WeylElement::one(2, caps()).with_validity(2);
        let prod = q5.mul_pointwise(&jet2).unwrap();
        assert_eq!(prod.comp_validity(0), 7);
        assert_eq!(prod.term_count(), 1);
        // differentiation exhausts validity: a constant-term jet of
        // validity 0 has an unknown derivative
        let j0 = WeylElement::one(2, caps()).with_validity(0);
        assert!(j0.partial_jet(0).is_err());
        let j1 = WeylElement::q_fn(2, caps(), 0).with_validity(1);
        let d = j1.partial_jet(0).unwrap();
        assert_eq!(d.comp_validity(0), 0);
        assert_eq!(d, WeylElement::one(2, caps()).with_validity(0));
    }

    #[test]
    fn phase_function_guard() {
        assert!(PhaseFunction::try_from_weyl(el_y(0)).is_err());
        assert!(PhaseFunction::try_from_weyl(WeylElement::p_fn(2, caps(), 0)).is_ok());
    }
}
