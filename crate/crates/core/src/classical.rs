//! The classical (undeformed) Fedosov theory on the base Q: the algebra
//! W⊗Λ(Q) with an optional vector slot (WLX), the derivation
//! D₀ = −δ₀ + ∇₀ + i_s(ϱ₀), its Taylor series τ₀ = e^D, the deformed Hodge
//! inverse D₀⁻¹ and the curvature trace machinery feeding the conjugating
//! element h.

use crate::error::CoreError;
use crate::geometry::{ConnectionData, CurvatureData};
use crate::multi::{FormSet, MultiIndex, Poly};
use crate::scalar::Scalar;
use crate::weyl::{Caps, TermKey, ValidityMap, WeylElement};
use crate::Result;
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ClassicalKey {
    pub sym: MultiIndex,
    pub form: FormSet,
    pub jet: MultiIndex,
    pub vec: Option<u16>,
}

impl ClassicalKey {
    pub fn scalar_key() -> Self {
        ClassicalKey {
            sym: MultiIndex::empty(),
            form: FormSet::empty(),
            jet: MultiIndex::empty(),
            vec: None,
        }
    }
}

/// Element of W⊗Λ(Q) (vector-valued when `vec` slots are set), graded by
/// symmetric degree with per-degree jet validity. Equality compares terms
/// only.
#[derive(Clone)]
pub struct ClassicalElement {
    pub n: usize,
    pub sym_cap: u32,
    pub terms: BTreeMap<ClassicalKey, Scalar>,
    pub validity: ValidityMap,
}

impl PartialEq for ClassicalElement {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.terms == other.terms
    }
}

impl Eq for ClassicalElement {}

impl ClassicalElement {
    pub fn zero(n: usize, sym_cap: u32) -> Self {
        ClassicalElement {
            n,
            sym_cap,
            terms: BTreeMap::new(),
            validity: ValidityMap::default(),
        }
    }

    pub fn insert(&mut self, key: ClassicalKey, c: Scalar) {
        if c.is_zero() || key.sym.degree() > self.sym_cap {
            return;
        }
        if key.jet.degree() as i32 > self.validity.get(key.sym.degree()) {
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

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn has_vector_slot(&self) -> bool {
        self.terms.keys().any(|k| k.vec.is_some())
    }

    pub fn add(&self, other: &ClassicalElement) -> ClassicalElement {
        let mut out = ClassicalElement::zero(self.n, self.sym_cap.min(other.sym_cap));
        for (d, v) in self.validity.0.iter().chain(other.validity.0.iter()) {
            out.validity.set_min(*d, *v);
        }
        for (k, c) in self.terms.iter().chain(other.terms.iter()) {
            out.insert(k.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &ClassicalElement) -> ClassicalElement {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> ClassicalElement {
        self.scale(&-Scalar::one())
    }

    pub fn scale(&self, s: &Scalar) -> ClassicalElement {
        let mut out = ClassicalElement::zero(self.n, self.sym_cap);
        out.validity = self.validity.clone();
        if s.is_zero() {
            return out;
        }
        for (k, c) in &self.terms {
            out.terms.insert(k.clone(), c * s);
        }
        out
    }

    pub fn conj(&self) -> ClassicalElement {
        let mut out = ClassicalElement::zero(self.n, self.sym_cap);
        out.validity = self.validity.clone();
        for (k, c) in &self.terms {
            out.terms.insert(k.clone(), c.conj());
        }
        out
    }

    pub fn is_real(&self) -> bool {
        self.terms.values().all(|c| c.is_real())
    }

    pub fn max_sym(&self) -> u32 {
        self.terms.keys().map(|k| k.sym.degree()).max().unwrap_or(0)
    }

    pub fn sym_component(&self, s: u32) -> ClassicalElement {
        let mut out = ClassicalElement::zero(self.n, self.sym_cap);
        out.validity.set_min(s, self.validity.get(s));
        for (k, c) in &self.terms {
            if k.sym.degree() == s {
                out.insert(k.clone(), c.clone());
            }
        }
        out
    }

    pub fn restrict_sym(&self, max: u32) -> ClassicalElement {
        let mut out = ClassicalElement::zero(self.n, self.sym_cap);
        for (d, v) in &self.validity.0 {
            if *d <= max {
                out.validity.set_min(*d, *v);
            }
        }
        for (k, c) in &self.terms {
            if k.sym.degree() <= max {
                out.insert(k.clone(), c.clone());
            }
        }
        out
    }

    /// σ₀: the part of symmetric and antisymmetric degree 0.
    pub fn sigma0(&self) -> ClassicalElement {
        let mut out = ClassicalElement::zero(self.n, self.sym_cap);
        out.validity = self.validity.clone();
        for (k, c) in &self.terms {
            if k.sym.is_empty() && k.form.degree() == 0 {
                out.insert(k.clone(), c.clone());
            }
        }
        out
    }

    pub fn delta0(&self) -> ClassicalElement {
        let mut out = ClassicalElement::zero(self.n, self.sym_cap);
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

    pub fn delta0_star(&self) -> ClassicalElement {
        let mut out = ClassicalElement::zero(self.n, self.sym_cap);
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

    pub fn delta0_inv(&self) -> ClassicalElement {
        let mut out = ClassicalElement::zero(self.n, self.sym_cap);
        for (d, v) in &self.validity.0 {
            out.validity.set_min(*d + 1, *v);
        }
        for (k, c) in &self.terms {
            let kl = k.sym.degree() + k.form.degree();
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

    /// ∇₀ = (1 ⊗ dqⁱ) ∇_{∂_{qⁱ}}: jets differentiate, symmetric and form
    /// generators rotate with −Γ, the vector slot with +Γ.
    pub fn nabla0(&self, conn: &ConnectionData) -> Result<ClassicalElement> {
        let n = self.n as u16;
        let mut out = ClassicalElement::zero(self.n, self.sym_cap);
        let mut degs: Vec<u32> = self.terms.keys().map(|k| k.sym.degree()).collect();
        degs.extend(self.validity.0.keys().copied());
        degs.sort_unstable();
        degs.dedup();
        for d in &degs {
            let v = self.validity.get(*d);
            let has = self.terms.keys().any(|k| k.sym.degree() == *d);
            if has && v <= 0 {
                return Err(CoreError::JetExhausted(format!(
                    "nabla0 on sym-degree {d} with validity {v}"
                )));
            }
            out.validity.set_min(*d, (v - 1).min(conn.jet_order - 1).min(v));
        }
        for (k, c) in &self.terms {
            for dir in 0..n {
                // jet derivative
                let e = k.jet.exp(dir);
                if e > 0 {
                    if let Some((form, sign)) = k.form.wedge_left(dir) {
                        let mut nk = k.clone();
                        nk.jet = k.jet.lowered(dir).unwrap();
                        nk.form = form;
                        out.insert(nk, c.scale_int(sign as i64 * e as i64));
                    }
                }
                // −Γ on symmetric generators
                for (b, e) in k.sym.iter() {
                    for c2 in 0..n {
                        let g = conn.gamma(b, dir, c2);
                        if g.is_zero() {
                            continue;
                        }
                        if let Some((form, sign)) = k.form.wedge_left(dir) {
                            for (jm, jc) in &g.terms {
                                let mut nk = k.clone();
                                nk.sym = k.sym.lowered(b).unwrap().raised(c2);
                                nk.form = form;
                                nk.jet = k.jet.mul(jm);
                                out.insert(nk, &c.scale_int(-(sign as i64) * e as i64) * jc);
                            }
                        }
                    }
                }
                // −Γ on form generators
                for b in k.form.iter() {
                    let (form1, s1) = k.form.remove(b).unwrap();
                    for c2 in 0..n {
                        let g = conn.gamma(b, dir, c2);
                        if g.is_zero() {
                            continue;
                        }
                        if let Some((form2, s2)) = form1.wedge_left(c2) {
                            if let Some((form3, s3)) = form2.wedge_left(dir) {
                                for (jm, jc) in &g.terms {
                                    let mut nk = k.clone();
                                    nk.form = form3;
                                    nk.jet = k.jet.mul(jm);
                                    out.insert(
                                        nk,
                                        &c.scale_int(-((s1 * s2 * s3) as i64)) * jc,
                                    );
                                }
                            }
                        }
                    }
                }
                // +Γ on the vector slot
                if let Some(l) = k.vec {
                    for m in 0..n {
                        let g = conn.gamma(m, dir, l);
                        if g.is_zero() {
                            continue;
                        }
                        if let Some((form, sign)) = k.form.wedge_left(dir) {
                            for (jm, jc) in &g.terms {
                                let mut nk = k.clone();
                                nk.vec = Some(m);
                                nk.form = form;
                                nk.jet = k.jet.mul(jm);
                                out.insert(nk, &c.scale_int(sign as i64) * jc);
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// D = dqⁱ ∨ ∇_{∂_{qⁱ}}: like ∇₀ but multiplying y-generators instead
    /// of wedging forms.
    pub fn d_symmetric(&self, conn: &ConnectionData) -> Result<ClassicalElement> {
        let n = self.n as u16;
        let mut out = ClassicalElement::zero(self.n, self.sym_cap);
        let mut degs: Vec<u32> = self.terms.keys().map(|k| k.sym.degree()).collect();
        degs.extend(self.validity.0.keys().copied());
        degs.sort_unstable();
        degs.dedup();
        for d in &degs {
            let v = self.validity.get(*d);
            let has = self.terms.keys().any(|k| k.sym.degree() == *d);
            if has && v <= 0 {
                return Err(CoreError::JetExhausted(format!(
                    "d_symmetric on sym-degree {d} with validity {v}"
                )));
            }
            out.validity.set_min(*d + 1, (v - 1).min(conn.jet_order - 1));
        }
        for (k, c) in &self.terms {
            for dir in 0..n {
                let e = k.jet.exp(dir);
                if e > 0 {
                    let mut nk = k.clone();
                    nk.jet = k.jet.lowered(dir).unwrap();
                    nk.sym = k.sym.raised(dir);
                    out.insert(nk, c.scale_int(e as i64));
                }
                for (b, eb) in k.sym.iter() {
                    for c2 in 0..n {
                        let g = conn.gamma(b, dir, c2);
                        if g.is_zero() {
                            continue;
                        }
                        for (jm, jc) in &g.terms {
                            let mut nk = k.clone();
                            nk.sym = k.sym.lowered(b).unwrap().raised(c2).raised(dir);
                            nk.jet = k.jet.mul(jm);
                            out.insert(nk, &c.scale_int(-(eb as i64)) * jc);
                        }
                    }
                }
                for b in k.form.iter() {
                    let (form1, s1) = k.form.remove(b).unwrap();
                    for c2 in 0..n {
                        let g = conn.gamma(b, dir, c2);
                        if g.is_zero() {
                            continue;
                        }
                        if let Some((form2, s2)) = form1.wedge_left(c2) {
                            for (jm, jc) in &g.terms {
                                let mut nk = k.clone();
                                nk.form = form2;
                                nk.sym = k.sym.raised(dir);
                                nk.jet = k.jet.mul(jm);
                                out.insert(nk, &c.scale_int(-((s1 * s2) as i64)) * jc);
                            }
                        }
                    }
                }
                if let Some(l) = k.vec {
                    for m in 0..n {
                        let g = conn.gamma(m, dir, l);
                        if g.is_zero() {
                            continue;
                        }
                        for (jm, jc) in &g.terms {
                            let mut nk = k.clone();
                            nk.vec = Some(m);
                            nk.sym = k.sym.raised(dir);
                            nk.jet = k.jet.mul(jm);
                            out.insert(nk, c * jc);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// i_s(ϱ): insert the vector slot of ϱ into symmetric slots of `self`
    /// and multiply ϱ's form part from the left.
    pub fn i_s_insert(rho: &ClassicalElement, a: &ClassicalElement) -> ClassicalElement {
        let mut out = ClassicalElement::zero(a.n, a.sym_cap);
        // validity: conservative pairwise rule
        for (kr, _) in &rho.terms {
            let dr = kr.sym.degree();
            for (ka, _) in &a.terms {
                let da = ka.sym.degree();
                if da == 0 {
                    continue;
                }
                let v = rho.validity.get(dr).min(a.validity.get(da));
                out.validity.set_min(dr + da - 1, v);
            }
        }
        for (kr, cr) in &rho.terms {
            let Some(l) = kr.vec else {
                continue;
            };
            for (ka, ca) in &a.terms {
                let e = ka.sym.exp(l);
                if e == 0 {
                    continue;
                }
                let Some((form, sign)) = kr.form.wedge(&ka.form) else {
                    continue;
                };
                let mut nk = ka.clone();
                nk.sym = kr.sym.mul(&ka.sym.lowered(l).unwrap());
                nk.form = form;
                nk.jet = kr.jet.mul(&ka.jet);
                out.insert(nk, (cr * ca).scale_int(sign as i64 * e as i64));
            }
        }
        out
    }

    /// tr = i_s(∂_{qᵏ}) i(dqᵏ): contract the vector slot against one
    /// symmetric generator.
    pub fn trace_op(&self) -> Result<ClassicalElement> {
        if !self.is_zero() && !self.has_vector_slot() {
            return Err(CoreError::MissingVectorSlot);
        }
        let mut out = ClassicalElement::zero(self.n, self.sym_cap);
        for (d, v) in &self.validity.0 {
            if *d >= 1 {
                out.validity.set_min(*d - 1, *v);
            }
        }
        for (k, c) in &self.terms {
            let Some(l) = k.vec else { continue };
            let e = k.sym.exp(l);
            if e == 0 {
                continue;
            }
            let mut nk = k.clone();
            nk.vec = None;
            nk.sym = k.sym.lowered(l).unwrap();
            out.insert(nk, c.scale_int(e as i64));
        }
        Ok(out)
    }

    /// Jet coefficient of y^μ at the chart origin (vector- and form-free
    /// part).
    pub fn coefficient_at_origin(&self, mu: &MultiIndex) -> Scalar {
        self.terms
            .get(&ClassicalKey {
                sym: mu.clone(),
                form: FormSet::empty(),
                jet: MultiIndex::empty(),
                vec: None,
            })
            .cloned()
            .unwrap_or_else(Scalar::zero)
    }

    /// Pull back to the Weyl algebra over T*Q (π*): base y's map to q-type
    /// generators, jets ride along. Vector slots must be absent.
    pub fn pi_star(&self, caps: Caps) -> Result<WeylElement> {
        if self.has_vector_slot() {
            return Err(CoreError::BadOperand(
                "pi_star of a vector-valued element".into(),
            ));
        }
        let mut out = WeylElement::zero(self.n, caps);
        for (d, v) in &self.validity.0 {
            out.validity.set_min(*d, *v);
        }
        for (k, c) in &self.terms {
            out.insert(
                TermKey {
                    lam: 0,
                    sym: k.sym.clone(),
                    form: k.form,
                    mom: MultiIndex::empty(),
                    jet: k.jet.clone(),
                },
                c.clone(),
            );
        }
        Ok(out)
    }

    /// Restriction of a base-type Weyl element to the classical algebra.
    pub fn from_weyl_base(e: &WeylElement, sym_cap: u32) -> Result<ClassicalElement> {
        if !e.is_base() {
            return Err(CoreError::BadOperand(
                "element has momentum content, not a base element".into(),
            ));
        }
        if e.terms.keys().any(|k| k.lam > 0) {
            return Err(CoreError::BadOperand(
                "element has lambda content, not classical".into(),
            ));
        }
        let mut out = ClassicalElement::zero(e.n, sym_cap);
        for (d, v) in &e.validity.0 {
            out.validity.set_min(*d, *v);
        }
        for (k, c) in &e.terms {
            out.insert(
                ClassicalKey {
                    sym: k.sym.clone(),
                    form: k.form,
                    jet: k.jet.clone(),
                    vec: None,
                },
                c.clone(),
            );
        }
        Ok(out)
    }
}

impl fmt::Debug for ClassicalElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({})", c)?;
            for (v, e) in k.jet.iter() {
                write!(f, "·q{}^{}", v + 1, e)?;
            }
            for (v, e) in k.sym.iter() {
                write!(f, "·y{}^{}", v + 1, e)?;
            }
            if k.form.degree() > 0 {
                write!(f, "·η{:?}", k.form)?;
            }
            if let Some(l) = k.vec {
                write!(f, "·∂q{}", l + 1)?;
            }
        }
        Ok(())
    }
}

/// R₀ = ½ R^l_{kij} yᵏ ⊗ ηⁱ∧ηʲ ⊗ ∂_l as a vector-valued classical element.
pub fn r0_element(curv: &CurvatureData, sym_cap: u32) -> ClassicalElement {
    let n = curv.n;
    let mut out = ClassicalElement::zero(n, sym_cap);
    out.validity.set_min(1, curv.validity);
    let half = Scalar::from_ratio(1, 2);
    for l in 0..n as u16 {
        for k in 0..n as u16 {
            for i in 0..n as u16 {
                for j in 0..n as u16 {
                    if i == j {
                        continue;
                    }
                    let r = curv.riemann(l, k, i, j);
                    if r.is_zero() {
                        continue;
                    }
                    let Some((form, sign)) =
                        FormSet::single(i).wedge(&FormSet::single(j))
                    else {
                        continue;
                    };
                    for (jm, jc) in &r.terms {
                        out.insert(
                            ClassicalKey {
                                sym: MultiIndex::unit(k),
                                form,
                                jet: jm.clone(),
                                vec: Some(l),
                            },
                            &half.scale_int(sign as i64) * jc,
                        );
                    }
                }
            }
        }
    }
    out
}

/// The classical Fedosov data: ϱ₀ with δ₀⁻¹ϱ₀ = 0 and D₀² = 0.
#[derive(Clone)]
pub struct ClassicalFedosov {
    pub conn: ConnectionData,
    pub curv: CurvatureData,
    pub rho0: ClassicalElement,
    pub sym_cap: u32,
}

impl ClassicalFedosov {
    pub fn new(conn: &ConnectionData, sym_cap: u32) -> Result<Self> {
        let curv = crate::geometry::curvature(conn)?;
        let r0 = r0_element(&curv, sym_cap + 1);
        // fixpoint of ϱ = δ₀⁻¹(∇ϱ + i_s(ϱ)ϱ − R₀); each pass settles one
        // more symmetric degree.
        let mut rho = ClassicalElement::zero(conn.n, sym_cap + 1);
        for _ in 0..=(sym_cap + 1) {
            let mut rhs = r0.neg();
            if !rho.is_zero() {
                rhs = rhs.add(&rho.nabla0(conn)?);
                rhs = rhs.add(&ClassicalElement::i_s_insert(&rho, &rho));
            }
            rho = rhs.delta0_inv();
        }
        Ok(ClassicalFedosov {
            conn: conn.clone(),
            curv,
            rho0: rho,
            sym_cap,
        })
    }

    /// D₀ = −δ₀ + ∇₀ + i_s(ϱ₀).
    pub fn d0(&self, a: &ClassicalElement) -> Result<ClassicalElement> {
        let mut out = a.delta0().neg().add(&a.nabla0(&self.conn)?);
        out = out.add(&ClassicalElement::i_s_insert(&self.rho0, a));
        Ok(out)
    }

    /// D₀⁻¹ = −δ₀⁻¹ (1 − [δ₀⁻¹, ∇₀ + i_s(ϱ₀)])⁻¹ on σ-free elements.
    pub fn d0_inv(&self, a: &ClassicalElement) -> Result<ClassicalElement> {
        if !a.sigma0().is_zero() {
            return Err(CoreError::NonzeroSigma { what: "d0_inv".into() });
        }
        let apply_t = |x: &ClassicalElement| -> Result<ClassicalElement> {
            let nabla_plus = |y: &ClassicalElement| -> Result<ClassicalElement> {
                Ok(y.nabla0(&self.conn)?
                    .add(&ClassicalElement::i_s_insert(&self.rho0, y)))
            };
            // [δ₀⁻¹, ∇₀ + i_s(ϱ₀)] is a super-bracket of two odd operators,
            // i.e. the anticommutator.
            Ok(nabla_plus(x)?.delta0_inv().add(&nabla_plus(&x.delta0_inv())?))
        };
        let mut acc = a.clone();
        let mut cur = a.clone();
        for _ in 0..=self.sym_cap {
            cur = apply_t(&cur)?;
            if cur.is_zero() {
                break;
            }
            acc = acc.add(&cur);
        }
        Ok(acc.delta0_inv().neg())
    }

    /// tr ϱ₀.
    pub fn trace_rho0(&self) -> Result<ClassicalElement> {
        self.rho0.trace_op()
    }

    /// The element 1 ⊗ α of antisymmetric degree one.
    pub fn one_alpha(&self, alpha: &[Poly], alpha_validity: i32) -> ClassicalElement {
        let n = self.conn.n;
        let mut out = ClassicalElement::zero(n, self.sym_cap + 1);
        out.validity.set_min(0, alpha_validity);
        for (i, a) in alpha.iter().enumerate() {
            for (jm, jc) in &a.terms {
                out.insert(
                    ClassicalKey {
                        sym: MultiIndex::empty(),
                        form: FormSet::single(i as u16),
                        jet: jm.clone(),
                        vec: None,
                    },
                    jc.clone(),
                );
            }
        }
        out
    }

    /// h = ½ D₀⁻¹(tr ϱ₀ + 1⊗α) + τ₀(φ), the generator of the fibrewise
    /// automorphism conjugating D′ into D_S.
    pub fn solve_h(
        &self,
        phi: &Poly,
        phi_validity: i32,
        alpha: &[Poly],
        alpha_validity: i32,
    ) -> Result<ClassicalElement> {
        crate::geometry::verify_alpha(&self.curv)?;
        let src = self
            .trace_rho0()?
            .add(&self.one_alpha(alpha, alpha_validity));
        let mut h = self
            .d0_inv(&src)?
            .scale(&Scalar::from_ratio(1, 2));
        if !phi.is_zero() {
            h = h.add(&tau0(phi, phi_validity, &self.conn, self.sym_cap)?);
        }
        // postconditions: D₀h = ½(tr ϱ₀ + 1⊗α), σ(h) = φ
        let lhs = self.d0(&h)?;
        let rhs = src.scale(&Scalar::from_ratio(1, 2));
        if !lhs.sub(&rhs).restrict_sym(self.sym_cap).is_zero() {
            return Err(CoreError::VerificationFailed(
                "D0 h != (tr rho0 + alpha)/2".into(),
            ));
        }
        let sh = h.sigma0();
        let mut phi_el = ClassicalElement::zero(self.conn.n, self.sym_cap);
        phi_el.validity.set_min(0, phi_validity);
        for (m, c) in &phi.terms {
            phi_el.insert(
                ClassicalKey {
                    sym: MultiIndex::empty(),
                    form: FormSet::empty(),
                    jet: m.clone(),
                    vec: None,
                },
                c.clone(),
            );
        }
        if !sh.sub(&phi_el).is_zero() {
            return Err(CoreError::VerificationFailed("sigma(h) != phi".into()));
        }
        Ok(h)
    }
}

/// τ₀(f) = e^D f, the formal Taylor series of a base function with respect
/// to the connection.
pub fn tau0(
    f: &Poly,
    f_validity: i32,
    conn: &ConnectionData,
    sym_cap: u32,
) -> Result<ClassicalElement> {
    let mut cur = ClassicalElement::zero(conn.n, sym_cap);
    cur.validity.set_min(0, f_validity);
    for (m, c) in &f.terms {
        cur.insert(
            ClassicalKey {
                sym: MultiIndex::empty(),
                form: FormSet::empty(),
                jet: m.clone(),
                vec: None,
            },
            c.clone(),
        );
    }
    let mut acc = cur.clone();
    for r in 1..=sym_cap {
        cur = cur
            .d_symmetric(conn)?
            .scale(&Scalar::from_ratio(1, r as i64));
        if cur.is_zero() {
            break;
        }
        acc = acc.add(&cur);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weyl::JET_EXACT;

    #[test]
    fn flat_rho0_vanishes_and_tau0_is_taylor() {
        let conn = ConnectionData::flat(2);
        let cf = ClassicalFedosov::new(&conn, 6).unwrap();
        assert!(cf.rho0.is_zero());
        // τ₀(q1 q2) = q1q2 + y1 q2 + y2 q1 + y1y2
        let f = Poly::var(0).mul(&Poly::var(1));
        let tau = tau0(&f, JET_EXACT, &conn, 6).unwrap();
        assert_eq!(tau.coefficient_at_origin(&MultiIndex::empty()), Scalar::zero());
        assert_eq!(
            tau.coefficient_at_origin(&MultiIndex::unit(0).mul(&MultiIndex::unit(1))),
            Scalar::one()
        );
        let q2y1 = ClassicalKey {
            sym: MultiIndex::unit(0),
            form: FormSet::empty(),
            jet: MultiIndex::unit(1),
            vec: None,
        };
        assert_eq!(tau.terms.get(&q2y1), Some(&Scalar::one()));
        // σ τ₀ = f and D₀ τ₀ = 0
        let sf = tau.sigma0();
        assert_eq!(sf.terms.len(), 1);
        assert!(cf.d0(&tau).unwrap().is_zero());
    }

    #[test]
    fn s2_classical_fedosov() {
        let conn = ConnectionData::s2_stereographic(8);
        let cf = ClassicalFedosov::new(&conn, 6).unwrap();
        // δ₀⁻¹ ϱ₀ = 0, ϱ₀ real, starts at symmetric degree 2
        assert!(cf.rho0.delta0_inv().is_zero());
        assert!(cf.rho0.is_real());
        assert!(cf.rho0.terms.keys().all(|k| k.sym.degree() >= 2));
        // D₀ ϱ₀ = R₀ through the cap
        let lhs = cf.d0(&cf.rho0).unwrap().restrict_sym(cf.sym_cap);
        let r0 = r0_element(&cf.curv, cf.sym_cap + 1).restrict_sym(cf.sym_cap);
        assert_eq!(lhs, r0);
        // D₀² = 0 on a probe
        let mut probe = ClassicalElement::zero(2, 7);
        probe.insert(
            ClassicalKey {
                sym: MultiIndex::unit(0).mul(&MultiIndex::unit(1)),
                form: FormSet::empty(),
                jet: MultiIndex::unit(0),
                vec: None,
            },
            Scalar::one(),
        );
        let dd = cf.d0(&cf.d0(&probe).unwrap()).unwrap();
        assert!(dd.restrict_sym(5).is_zero());
        // σ τ₀ χ = χ and D₀ τ₀ χ = 0
        let chi = Poly::var(0).mul(&Poly::var(0));
        let tau = tau0(&chi, JET_EXACT, &conn, 6).unwrap();
        assert!(cf.d0(&tau).unwrap().restrict_sym(5).is_zero());
    }

    #[test]
    fn s2_deformed_hodge_and_h() {
        let conn = ConnectionData::s2_stereographic(9);
        let cf = ClassicalFedosov::new(&conn, 6).unwrap();
        // deformed Hodge on a σ-free probe
        let mut a = ClassicalElement::zero(2, 7);
        a.insert(
            ClassicalKey {
                sym: MultiIndex::unit(1),
                form: FormSet::single(0),
                jet: MultiIndex::empty(),
                vec: None,
            },
            Scalar::one(),
        );
        a.insert(
            ClassicalKey {
                sym: MultiIndex::unit(0),
                form: FormSet::empty(),
                jet: MultiIndex::unit(0),
                vec: None,
            },
            Scalar::from_int(3),
        );
        let lhs = cf
            .d0(&cf.d0_inv(&a).unwrap())
            .unwrap()
            .add(&cf.d0_inv(&cf.d0(&a).unwrap()).unwrap());
        assert!(lhs.sub(&a).restrict_sym(5).is_zero());
        // flat one-term case: a = 1⊗dq¹ → D₀⁻¹a = −δ₀⁻¹a = −y^{q1}
        let flat = ClassicalFedosov::new(&ConnectionData::flat(2), 6).unwrap();
        let mut one_form = ClassicalElement::zero(2, 7);
        one_form.insert(
            ClassicalKey {
                sym: MultiIndex::empty(),
                form: FormSet::single(0),
                jet: MultiIndex::empty(),
                vec: None,
            },
            Scalar::one(),
        );
        let inv = flat.d0_inv(&one_form).unwrap();
        let mut expect = ClassicalElement::zero(2, 7);
        expect.insert(
            ClassicalKey {
                sym: MultiIndex::unit(0),
                form: FormSet::empty(),
                jet: MultiIndex::empty(),
                vec: None,
            },
            -Scalar::one(),
        );
        assert_eq!(inv, expect);
        // h on S²: real, σ(h) = 0, D₀h = ½ tr ϱ₀ (unimodular, α = 0)
        let h = cf
            .solve_h(&Poly::zero(), JET_EXACT, &cf.curv.alpha.clone(), cf.curv.alpha_validity)
            .unwrap();
        assert!(h.is_real());
        assert!(h.sigma0().is_zero());
        // flat h = 0
        let hflat = flat
            .solve_h(&Poly::zero(), JET_EXACT, &[Poly::zero(), Poly::zero()], JET_EXACT)
            .unwrap();
        assert!(hflat.is_zero());
    }
}
