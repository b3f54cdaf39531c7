//! Symmetric tensor fields on Q as jets: contravariant tensors (the symbols
//! of differential operators) and covariant tensors (symmetrized covariant
//! derivatives of functions).
//!
//! Components are stored against index multisets: `comp[(μ)]` is the value
//! of any component whose index multiset is μ (total symmetry makes this
//! well defined).

use crate::error::CoreError;
use crate::geometry::ConnectionData;
use crate::multi::{MultiIndex, Poly};
use crate::scalar::Scalar;
use crate::weyl::{Caps, PhaseFunction, TermKey};
use crate::Result;
use std::collections::BTreeMap;

/// Contravariant symmetric tensor jets T^{i1..ik}(q), graded by rank.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct SymTensor {
    pub n: usize,
    /// (rank, index multiset) → jet; all multisets of one rank have that rank
    /// as total degree.
    pub comps: BTreeMap<MultiIndex, Poly>,
    pub validity: i32,
}

impl SymTensor {
    pub fn zero(n: usize) -> Self {
        SymTensor {
            n,
            comps: BTreeMap::new(),
            validity: crate::weyl::JET_EXACT,
        }
    }

    pub fn from_components(n: usize, comps: Vec<(MultiIndex, Poly)>, validity: i32) -> Self {
        let mut t = SymTensor {
            n,
            comps: BTreeMap::new(),
            validity,
        };
        for (m, p) in comps {
            t.add_comp(m, p);
        }
        t
    }

    /// A vector field from component jets.
    pub fn vector(n: usize, comps: &[Poly], validity: i32) -> Self {
        let mut t = SymTensor {
            n,
            comps: BTreeMap::new(),
            validity,
        };
        for (i, p) in comps.iter().enumerate() {
            t.add_comp(MultiIndex::unit(i as u16), p.clone());
        }
        t
    }

    pub fn add_comp(&mut self, m: MultiIndex, p: Poly) {
        let p = p.truncate(self.validity.clamp(0, i32::MAX) as u32);
        if p.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.comps.entry(m) {
            Entry::Vacant(e) => {
                e.insert(p);
            }
            Entry::Occupied(mut e) => {
                let s = e.get().add(&p);
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn add(&self, other: &SymTensor) -> SymTensor {
        let mut out = self.clone();
        out.validity = self.validity.min(other.validity);
        for (m, p) in &other.comps {
            out.add_comp(m.clone(), p.clone());
        }
        out
    }

    pub fn scale(&self, s: &Scalar) -> SymTensor {
        let mut out = SymTensor {
            n: self.n,
            comps: BTreeMap::new(),
            validity: self.validity,
        };
        for (m, p) in &self.comps {
            out.add_comp(m.clone(), p.scale(s));
        }
        out
    }

    pub fn max_rank(&self) -> u32 {
        self.comps.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn rank_part(&self, rank: u32) -> SymTensor {
        let mut out = SymTensor {
            n: self.n,
            comps: BTreeMap::new(),
            validity: self.validity,
        };
        for (m, p) in &self.comps {
            if m.degree() == rank {
                out.add_comp(m.clone(), p.clone());
            }
        }
        out
    }

    /// Conjugate the coefficient jets.
    pub fn conj(&self) -> SymTensor {
        let mut out = SymTensor {
            n: self.n,
            comps: BTreeMap::new(),
            validity: self.validity,
        };
        for (m, p) in &self.comps {
            let mut q = Poly::zero();
            for (mm, c) in &p.terms {
                q.add_term(mm.clone(), c.conj());
            }
            out.add_comp(m.clone(), q);
        }
        out
    }

    /// hat: T ↦ T̂ = Σ_μ T^{(μ)} p^μ / ∏μ!, the momentum polynomial of T.
    pub fn hat(&self, caps: Caps) -> PhaseFunction {
        let mut e = crate::weyl::WeylElement::zero(self.n, caps);
        e.validity.set_min(0, self.validity);
        for (m, p) in &self.comps {
            let norm = m.factorial().inv();
            for (jm, c) in &p.terms {
                e.insert(
                    TermKey {
                        lam: 0,
                        sym: MultiIndex::empty(),
                        form: crate::multi::FormSet::empty(),
                        mom: m.clone(),
                        jet: jm.clone(),
                    },
                    &c.clone() * &norm,
                );
            }
        }
        PhaseFunction(e)
    }

    /// Covariant derivative ∇_j T: (∇_j T)^{(μ)} = ∂_j T^{(μ)} +
    /// Σ_l μ_l Σ_m Γ^l_{jm} T^{(μ−e_l+e_m)}.
    pub fn cov_derivative(&self, j: u16, conn: &ConnectionData) -> Result<SymTensor> {
        if self.validity <= 0 && !self.is_zero() {
            return Err(CoreError::JetExhausted("cov_derivative on tensor".into()));
        }
        let mut out = SymTensor {
            n: self.n,
            comps: BTreeMap::new(),
            validity: (self.validity - 1).min(conn.jet_order - 1),
        };
        for (m, p) in &self.comps {
            out.add_comp(m.clone(), p.derivative(j));
            for (l, mult) in m.iter() {
                let lowered = m.lowered(l).unwrap();
                for mm in 0..self.n as u16 {
                    let g = conn.gamma(l, j, mm);
                    if g.is_zero() {
                        continue;
                    }
                    out.add_comp(
                        lowered.raised(mm),
                        p.mul(g).scale(&Scalar::from_int(mult as i64)),
                    );
                }
            }
        }
        Ok(out)
    }

    /// Covariant divergence Div S = i_s(dq^j) ∇_j S (rank k → k−1).
    pub fn divergence(&self, conn: &ConnectionData) -> Result<SymTensor> {
        let mut out = SymTensor {
            n: self.n,
            comps: BTreeMap::new(),
            validity: (self.validity - 1).min(conn.jet_order - 1),
        };
        if self.max_rank() == 0 {
            return Ok(out);
        }
        for j in 0..self.n as u16 {
            let nabla = self.cov_derivative(j, conn)?;
            out.validity = out.validity.min(nabla.validity);
            for (m, p) in &nabla.comps {
                if m.degree() == 0 {
                    continue;
                }
                if m.exp(j) > 0 {
                    out.add_comp(m.lowered(j).unwrap(), p.clone());
                }
            }
        }
        Ok(out)
    }

    /// i_s(α) S: contract one slot with the one-form α.
    pub fn contract_one_form(&self, alpha: &[Poly], alpha_validity: i32) -> SymTensor {
        let mut out = SymTensor {
            n: self.n,
            comps: BTreeMap::new(),
            validity: self.validity.min(alpha_validity),
        };
        for (m, p) in &self.comps {
            if m.degree() == 0 {
                continue;
            }
            for (j, _) in m.iter() {
                out.add_comp(m.lowered(j).unwrap(), p.mul(&alpha[j as usize]));
            }
        }
        out
    }

    /// Div_α S = Div S + i_s(α) S.
    pub fn div_alpha(
        &self,
        conn: &ConnectionData,
        alpha: &[Poly],
        alpha_validity: i32,
    ) -> Result<SymTensor> {
        Ok(self
            .divergence(conn)?
            .add(&self.contract_one_form(alpha, alpha_validity)))
    }
}

/// unhat: extract the symmetric tensor from a λ-free momentum polynomial.
/// Errors if the function carries λ-powers or is not a phase function.
pub fn unhat(f: &PhaseFunction) -> Result<SymTensor> {
    let n = f.as_weyl().n;
    let mut t = SymTensor {
        n,
        comps: BTreeMap::new(),
        validity: f.as_weyl().min_validity(),
    };
    for (k, c) in &f.as_weyl().terms {
        if k.lam != 0 {
            return Err(CoreError::BadOperand(
                "unhat expects a lambda-free momentum polynomial".into(),
            ));
        }
        let norm = k.mom.factorial();
        t.add_comp(k.mom.clone(), Poly::monomial(k.jet.clone(), &c.clone() * &norm));
    }
    Ok(t)
}

/// Covariant symmetric tensors S_{i1..ik}(q), used for symmetrized covariant
/// derivatives of base functions.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct CoTensor {
    pub n: usize,
    pub comps: BTreeMap<MultiIndex, Poly>,
    pub validity: i32,
}

impl CoTensor {
    pub fn scalar(n: usize, p: Poly, validity: i32) -> Self {
        let mut t = CoTensor {
            n,
            comps: BTreeMap::new(),
            validity,
        };
        t.add_comp(MultiIndex::empty(), p);
        t
    }

    pub fn add_comp(&mut self, m: MultiIndex, p: Poly) {
        let p = p.truncate(self.validity.clamp(0, i32::MAX) as u32);
        if p.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.comps.entry(m) {
            Entry::Vacant(e) => {
                e.insert(p);
            }
            Entry::Occupied(mut e) => {
                let s = e.get().add(&p);
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    /// (∇_j S)_{(μ)} = ∂_j S_{(μ)} − Σ_l μ_l Σ_m Γ^m_{jl} S_{(μ−e_l+e_m)}.
    pub fn cov_derivative(&self, j: u16, conn: &ConnectionData) -> Result<CoTensor> {
        if self.validity <= 0 && !self.comps.is_empty() {
            return Err(CoreError::JetExhausted("cov_derivative on cotensor".into()));
        }
        let mut out = CoTensor {
            n: self.n,
            comps: BTreeMap::new(),
            validity: (self.validity - 1).min(conn.jet_order - 1),
        };
        for (m, p) in &self.comps {
            out.add_comp(m.clone(), p.derivative(j));
            for (l, mult) in m.iter() {
                let lowered = m.lowered(l).unwrap();
                for mm in 0..self.n as u16 {
                    let g = conn.gamma(mm, j, l);
                    if g.is_zero() {
                        continue;
                    }
                    out.add_comp(
                        lowered.raised(mm),
                        p.mul(g).scale(&Scalar::from_int(-(mult as i64))),
                    );
                }
            }
        }
        Ok(out)
    }

    /// The symmetrizing derivative D = dq^j ∨ ∇_j: rank k → k+1,
    /// (DS)_{(ν)} = Σ_j ν_j (∇_j S)_{(ν − e_j)}.
    pub fn sym_derivative(&self, conn: &ConnectionData) -> Result<CoTensor> {
        let mut nablas = Vec::new();
        for j in 0..self.n as u16 {
            nablas.push(self.cov_derivative(j, conn)?);
        }
        let mut out = CoTensor {
            n: self.n,
            comps: BTreeMap::new(),
            validity: nablas
                .iter()
                .map(|t| t.validity)
                .min()
                .unwrap_or(self.validity - 1),
        };
        for (j, nabla) in nablas.iter().enumerate() {
            for (m, p) in &nabla.comps {
                let nu = m.raised(j as u16);
                let mult = nu.exp(j as u16);
                out.add_comp(nu, p.scale(&Scalar::from_int(mult as i64)));
            }
        }
        Ok(out)
    }
}

/// D₀^{(r)} ψ = (1/r!) (dq ∨ ∇)^r ψ for a base-function jet ψ.
pub fn symmetrized_cov_derivative(
    psi: &Poly,
    psi_validity: i32,
    r: u32,
    conn: &ConnectionData,
) -> Result<CoTensor> {
    let mut cur = CoTensor::scalar(conn.n, psi.clone(), psi_validity);
    for _ in 0..r {
        cur = cur.sym_derivative(conn)?;
    }
    let norm = crate::scalar::factorial(r).inv();
    let mut out = CoTensor {
        n: conn.n,
        comps: BTreeMap::new(),
        validity: cur.validity,
    };
    for (m, p) in &cur.comps {
        out.add_comp(m.clone(), p.scale(&norm));
    }
    Ok(out)
}

/// Full contraction ⟨T, S⟩ = Σ_sequences T^{i1..ik} S_{i1..ik}
/// = Σ_μ (k!/∏μ!) T^{(μ)} S_{(μ)}.
pub fn contract(t: &SymTensor, s: &CoTensor, rank: u32) -> Poly {
    let mut acc = Poly::zero();
    let kfact = crate::scalar::factorial(rank);
    for (m, tp) in &t.comps {
        if m.degree() != rank {
            continue;
        }
        if let Some(sp) = s.comps.get(m) {
            let mult = &kfact / &m.factorial();
            acc = acc.add(&tp.mul(sp).scale(&mult));
        }
    }
    acc.truncate(t.validity.min(s.validity).clamp(0, i32::MAX) as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn caps() -> Caps {
        Caps::new(4, 8)
    }

    #[test]
    fn hat_examples() {
        // T = ∂1 ∨ ∂2 has components T^{12} = T^{21} = 1 → T̂ = p1 p2
        let n = 2;
        let mut t = SymTensor::zero(n);
        t.add_comp(
            MultiIndex::unit(0).mul(&MultiIndex::unit(1)),
            Poly::one(),
        );
        let f = t.hat(caps());
        let expect = PhaseFunction::p(n, caps(), 0)
            .mul(&PhaseFunction::p(n, caps(), 1))
            .unwrap();
        assert_eq!(f, expect);
        // vector: X̂ = X^i p_i
        let x = SymTensor::vector(n, &[Poly::one(), Poly::zero()], crate::weyl::JET_EXACT);
        assert_eq!(x.hat(caps()), PhaseFunction::p(n, caps(), 0));
        // unhat(hat) = id
        let back = unhat(&f).unwrap();
        assert_eq!(back.comps, t.comps);
    }

    #[test]
    fn flat_divergence() {
        // Div(q1 ∂_{q1}) = 1 on flat space
        let conn = ConnectionData::flat(2);
        let x = SymTensor::vector(
            2,
            &[Poly::var(0), Poly::zero()],
            crate::weyl::JET_EXACT,
        );
        let d = x.divergence(&conn).unwrap();
        assert_eq!(d.comps.get(&MultiIndex::empty()), Some(&Poly::one()));
        // Div of a function is 0
        let f = SymTensor::from_components(
            2,
            vec![(MultiIndex::empty(), Poly::var(0))],
            crate::weyl::JET_EXACT,
        );
        assert!(f.divergence(&conn).unwrap().is_zero());
    }

    #[test]
    fn flat_symmetrized_derivative() {
        // D₀^{(2)} of q1² on flat space: components (∂²ψ)_{(μ)} = 2 for μ = {1,1}
        let conn = ConnectionData::flat(2);
        let psi = Poly::monomial(MultiIndex::single(0, 2), Scalar::one());
        let d2 = symmetrized_cov_derivative(&psi, crate::weyl::JET_EXACT, 2, &conn).unwrap();
        assert_eq!(
            d2.comps.get(&MultiIndex::single(0, 2)),
            Some(&Poly::constant(Scalar::from_int(2)))
        );
    }
}
