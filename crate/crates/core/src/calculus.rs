//! Equivalence transformations between the three Fedosov products, the
//! anti-automorphism C_S, the second Weyl-type product ⋆_W = N⁻¹(N· ⋆_S N·)
//! and the second-order comparison M₂^W vs M₂^F.

use crate::error::CoreError;
use crate::fedosov::{exp_ad_s, FedosovSession, Mode};
use crate::geometry::{covariant_delta, n_operator};
use crate::multi::{MultiIndex, Poly};
use crate::scalar::Scalar;
use crate::tensor::SymTensor;
use crate::weyl::{Caps, PhaseFunction, WeylElement};
use crate::Result;
use std::collections::BTreeMap;

fn expect_mode(s: &FedosovSession, mode: Mode, what: &str) -> Result<()> {
    if s.mode != mode {
        return Err(CoreError::Invalid(format!(
            "{what} needs a {mode:?}-mode session, got {:?}",
            s.mode
        )));
    }
    Ok(())
}

fn expect_compatible(a: &FedosovSession, b: &FedosovSession) -> Result<()> {
    if a.caps != b.caps {
        return Err(CoreError::CapTooSmall(format!(
            "session caps mismatch: {:?} vs {:?}",
            a.caps, b.caps
        )));
    }
    if a.n != b.n {
        return Err(CoreError::DimensionMismatch(a.n, b.n));
    }
    Ok(())
}

/// T: the fibrewise-S equivalence between *′ and ⋆_F.
/// Forward: Tf = σ(S⁻¹τ′(f)) with T(f *′ g) = Tf ⋆_F Tg.
/// Inverse: T⁻¹f = σ(S τ_F(f)).
pub fn t_map(
    prime: &FedosovSession,
    weyl: &FedosovSession,
    f: &PhaseFunction,
    forward: bool,
) -> Result<PhaseFunction> {
    expect_mode(prime, Mode::Prime, "t_map")?;
    expect_mode(weyl, Mode::Weyl, "t_map")?;
    expect_compatible(prime, weyl)?;
    let out = if forward {
        prime.taylor(f)?.s_fib(false, Some(&prime.lift))
    } else {
        weyl.taylor(f)?.s_fib(true, Some(&weyl.lift))
    };
    PhaseFunction::try_from_weyl(out.sigma())
}

/// V: the equivalence between ⋆_S and *′ generated by the element h.
/// Forward: Vf = σ(e^{−ad_S(π*h)}τ_S(f)) with V(f ⋆_S g) = Vf *′ Vg.
pub fn v_map(
    std: &FedosovSession,
    prime: &FedosovSession,
    f: &PhaseFunction,
    forward: bool,
) -> Result<PhaseFunction> {
    expect_mode(std, Mode::Standard, "v_map")?;
    expect_mode(prime, Mode::Prime, "v_map")?;
    expect_compatible(std, prime)?;
    let h_pulled = std.h.pi_star(std.caps)?;
    let out = if forward {
        exp_ad_s(&h_pulled, &std.taylor(f)?, &std.lift, false)?
    } else {
        exp_ad_s(&h_pulled, &prime.taylor(f)?, &std.lift, true)?
    };
    PhaseFunction::try_from_weyl(out.sigma())
}

/// The fibrewise conjugation 𝒞_S = e^{ad_S(π*h)} S C S⁻¹ e^{−ad_S(π*h)}
/// applied to a Weyl element.
pub fn cc_s(std: &FedosovSession, a: &WeylElement) -> Result<WeylElement> {
    let h_pulled = std.h.pi_star(a.caps)?;
    let x = exp_ad_s(&h_pulled, a, &std.lift, false)?;
    let y = x.s_fib(false, Some(&std.lift));
    let z = y.conj();
    let w = z.s_fib(true, Some(&std.lift));
    exp_ad_s(&h_pulled, &w, &std.lift, true)
}

/// C_S f = σ(𝒞_S τ_S(f)): the anti-linear anti-automorphism of ⋆_S.
pub fn cs_map(std: &FedosovSession, f: &PhaseFunction) -> Result<PhaseFunction> {
    expect_mode(std, Mode::Standard, "cs_map")?;
    let tau = std.taylor(f)?;
    PhaseFunction::try_from_weyl(cc_s(std, &tau)?.sigma())
}

/// N f with the session's connection and α.
pub fn n_of(session: &FedosovSession, f: &PhaseFunction, forward: bool) -> Result<PhaseFunction> {
    n_operator(
        f,
        &session.lift.conn,
        &session.alpha,
        session.alpha_validity,
        forward,
    )
}

/// The second Weyl-type product f ⋆_W g = N⁻¹((Nf) ⋆_S (Ng)).
pub fn weyl_star_n(
    std: &FedosovSession,
    f: &PhaseFunction,
    g: &PhaseFunction,
) -> Result<PhaseFunction> {
    expect_mode(std, Mode::Standard, "weyl_star_n")?;
    let nf = n_of(std, f, true)?;
    let ng = n_of(std, g, true)?;
    let prod = std.star(&nf, &ng)?;
    n_of(std, &prod, false)
}

/// Check N²(conj f) = C_S f on one probe (valid for probes at most linear
/// in the momenta).
pub fn n2c_equals_cs(std: &FedosovSession, f: &PhaseFunction) -> Result<bool> {
    if f.momentum_degree() > 1 {
        return Err(CoreError::BadOperand(
            "n2c check expects probes at most linear in the momenta".into(),
        ));
    }
    let lhs = n_of(std, &n_of(std, &f.conj(), true)?, true)?;
    let rhs = cs_map(std, f)?;
    Ok(lhs.sub(&rhs).is_zero())
}

/// Result of the second-order comparison of the two Weyl-type products on
/// functions linear in the momenta.
#[derive(Clone, Debug)]
pub struct M2Comparison {
    /// Closed form M₂^W(X̂, Ŷ) (coefficient of (iλ/2)² in X̂ ⋆_W Ŷ).
    pub m2_weyl: PhaseFunction,
    /// Closed form M₂^F(X̂, Ŷ).
    pub m2_fedosov: PhaseFunction,
    /// m2_weyl − m2_fedosov.
    pub difference: PhaseFunction,
    /// Engine λ²-coefficients match the closed forms.
    pub engine_weyl_matches: bool,
    pub engine_fedosov_matches: bool,
}

/// Covariant derivative of vector jets: X^k_{|l} = ∂_l X^k + Γ^k_{lm} X^m.
fn cov_deriv_vector(
    x: &[Poly],
    conn: &crate::geometry::ConnectionData,
    k: u16,
    l: u16,
    cap: u32,
) -> Poly {
    let mut p = x[k as usize].derivative(l);
    for m in 0..conn.n as u16 {
        p = p.add(&conn.gamma(k, l, m).mul_capped(&x[m as usize], Some(cap)));
    }
    p.truncate(cap)
}

/// Compare M₂^W and M₂^F on X̂, Ŷ: closed forms from the curvature data and
/// the engine λ²-coefficients of ⋆_W and ⋆_F.
pub fn m2_compare(
    weyl: &FedosovSession,
    std: &FedosovSession,
    x: &[Poly],
    y: &[Poly],
) -> Result<M2Comparison> {
    expect_mode(weyl, Mode::Weyl, "m2_compare")?;
    expect_mode(std, Mode::Standard, "m2_compare")?;
    if weyl.caps.lam_max < 2 {
        return Err(CoreError::CapTooSmall(
            "m2_compare needs lambda order >= 2".into(),
        ));
    }
    let n = weyl.n;
    let conn = &weyl.lift.conn;
    let curv = &weyl.lift.curv;
    let caps = weyl.caps;
    let jet_cap = (curv.validity - 1).clamp(0, i32::MAX) as u32;

    // −X^k_{|l} Y^l_{|k}
    let mut trace_term = Poly::zero();
    for k in 0..n as u16 {
        for l in 0..n as u16 {
            trace_term = trace_term.add(
                &cov_deriv_vector(x, conn, k, l, jet_cap)
                    .mul_capped(&cov_deriv_vector(y, conn, l, k, jet_cap), Some(jet_cap)),
            );
        }
    }
    let m2_f_poly = trace_term.neg();

    // −½(Ric(X,Y) + Ric(Y,X) − (∇_X α)(Y) − (∇_Y α)(X))
    let mut sym_part = Poly::zero();
    for a in 0..n as u16 {
        for b in 0..n as u16 {
            let ric = curv.ricci(a, b);
            sym_part = sym_part.add(
                &ric.mul_capped(&x[a as usize], Some(jet_cap))
                    .mul_capped(&y[b as usize], Some(jet_cap)),
            );
            sym_part = sym_part.add(
                &ric.mul_capped(&y[a as usize], Some(jet_cap))
                    .mul_capped(&x[b as usize], Some(jet_cap)),
            );
            // (∇_a α)_b = ∂_a α_b − Γ^m_{ab} α_m
            let mut na = std.alpha[b as usize].derivative(a);
            for m in 0..n as u16 {
                na = na.sub(
                    &conn
                        .gamma(m, a, b)
                        .mul_capped(&std.alpha[m as usize], Some(jet_cap)),
                );
            }
            sym_part = sym_part.sub(
                &na.mul_capped(&x[a as usize], Some(jet_cap))
                    .mul_capped(&y[b as usize], Some(jet_cap)),
            );
            sym_part = sym_part.sub(
                &na.mul_capped(&y[a as usize], Some(jet_cap))
                    .mul_capped(&x[b as usize], Some(jet_cap)),
            );
        }
    }
    let m2_w_poly = m2_f_poly.add(&sym_part.scale(&Scalar::from_ratio(-1, 2)));

    let to_pf = |p: &Poly| -> PhaseFunction {
        let mut e = WeylElement::zero(n, caps);
        e.validity.set_min(0, jet_cap as i32);
        for (m, c) in &p.terms {
            e.insert(
                crate::weyl::TermKey {
                    lam: 0,
                    sym: MultiIndex::empty(),
                    form: crate::multi::FormSet::empty(),
                    mom: MultiIndex::empty(),
                    jet: m.clone(),
                },
                c.clone(),
            );
        }
        PhaseFunction(e)
    };
    let m2_weyl = to_pf(&m2_w_poly);
    let m2_fedosov = to_pf(&m2_f_poly);

    // engine cross-checks: the λ² coefficient of the products equals
    // (i/2)² M₂ = −¼ M₂.
    let x_hat = SymTensor::vector(n, x, crate::weyl::JET_EXACT).hat(caps);
    let y_hat = SymTensor::vector(n, y, crate::weyl::JET_EXACT).hat(caps);
    let quarter = Scalar::from_ratio(-1, 4);
    let engine_w = weyl_star_n(std, &x_hat, &y_hat)?;
    let engine_weyl_matches = engine_w
        .as_weyl()
        .lambda_coefficient(2)
        .sub(m2_weyl.scale(&quarter).as_weyl())
        .is_zero();
    let engine_f = weyl.star(&x_hat, &y_hat)?;
    let engine_fedosov_matches = engine_f
        .as_weyl()
        .lambda_coefficient(2)
        .sub(m2_fedosov.scale(&quarter).as_weyl())
        .is_zero();

    Ok(M2Comparison {
        difference: m2_weyl.sub(&m2_fedosov),
        m2_weyl,
        m2_fedosov,
        engine_weyl_matches,
        engine_fedosov_matches,
    })
}

/// Extracted coefficient table of a λ-series of differential operators on
/// phase functions: keys are (λ-power, ∂_q multi-index, ∂_p multi-index),
/// values the coefficient functions.
pub type OperatorTable = BTreeMap<(u32, MultiIndex, MultiIndex), PhaseFunction>;

/// Recover the coefficients of a linear operator by probing with the
/// monomial basis q^a p^b up to total degree `probe_deg` (triangular solve;
/// exact for operators of differential order ≤ probe_deg).
pub fn extract_operator<F>(apply: F, n: usize, caps: Caps, probe_deg: u32) -> Result<OperatorTable>
where
    F: Fn(&PhaseFunction) -> Result<PhaseFunction>,
{
    let mut table: OperatorTable = BTreeMap::new();
    let monomials: Vec<(MultiIndex, MultiIndex)> = {
        let mut v = Vec::new();
        for d in 0..=probe_deg {
            for full in MultiIndex::enumerate_degree(2 * n, d) {
                let mut qexp = vec![0u32; n];
                let mut pexp = vec![0u32; n];
                for (var, e) in full.iter() {
                    if (var as usize) < n {
                        qexp[var as usize] = e;
                    } else {
                        pexp[var as usize - n] = e;
                    }
                }
                v.push((
                    MultiIndex::from_exponents(&qexp),
                    MultiIndex::from_exponents(&pexp),
                ));
            }
        }
        v
    };
    for (jq, jp) in &monomials {
        let probe = PhaseFunction::monomial(n, caps, 0, jp.clone(), jq.clone(), Scalar::one());
        let mut image = apply(&probe)?;
        // subtract the already-known lower-order actions
        for ((lam, mq, mp), coeff) in &table {
            let (Some(rq), Some(rp)) = (jq.checked_sub(mq), jp.checked_sub(mp)) else {
                continue;
            };
            // ∂_q^mq ∂_p^mp (q^jq p^jp) = jq!/rq! · jp!/rp! · q^rq p^rp
            let factor =
                &(&jq.factorial() / &rq.factorial()) * &(&jp.factorial() / &rp.factorial());
            let rest = PhaseFunction::monomial(n, caps, 0, rp, rq, factor);
            image = image.sub(&coeff.mul(&rest)?.mul_lambda_pow(*lam));
        }
        if image.is_zero() {
            continue;
        }
        // what is left is c_{(jq,jp)} · jq! jp! per λ-power
        let norm = (&jq.factorial() * &jp.factorial()).inv();
        for lam in 0..=image.as_weyl().max_lambda() {
            let coeff = image.as_weyl().lambda_coefficient(lam);
            if coeff.is_zero() {
                continue;
            }
            table.insert(
                (lam, jq.clone(), jp.clone()),
                PhaseFunction::try_from_weyl(coeff.scale(&norm))?,
            );
        }
    }
    Ok(table)
}

/// Measured differential order per λ-power of an extracted table.
pub fn table_orders(table: &OperatorTable) -> BTreeMap<u32, u32> {
    let mut orders: BTreeMap<u32, u32> = BTreeMap::new();
    for (lam, mq, mp) in table.keys() {
        let o = mq.degree() + mp.degree();
        orders
            .entry(*lam)
            .and_modify(|v| *v = (*v).max(o))
            .or_insert(o);
    }
    orders
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fedosov::AlphaPolicy;
    use crate::geometry::ConnectionData;
    use crate::probe::ProbeGen;

    fn sessions(conn: &ConnectionData, k: u32) -> (FedosovSession, FedosovSession, FedosovSession) {
        let w = FedosovSession::new(conn, Mode::Weyl, k, AlphaPolicy::Auto).unwrap();
        let p = FedosovSession::new(conn, Mode::Prime, k, AlphaPolicy::Auto).unwrap();
        let s = FedosovSession::new(conn, Mode::Standard, k, AlphaPolicy::Auto).unwrap();
        (w, p, s)
    }

    #[test]
    fn flat_t_map_example() {
        let conn = ConnectionData::flat(2);
        let (w, p, _) = sessions(&conn, 2);
        let f = PhaseFunction::q(2, w.caps, 0)
            .mul(&PhaseFunction::p(2, w.caps, 0))
            .unwrap();
        let tf = t_map(&p, &w, &f, true).unwrap();
        // T(q¹p₁) = q¹p₁ − λ/(2i)
        let expect = f.add(
            &PhaseFunction::one(2, w.caps)
                .mul_lambda_pow(1)
                .scale(&Scalar::imag_ratio(1, 2)),
        );
        assert!(tf.sub(&expect).is_zero());
        // inverse round-trip
        let back = t_map(&p, &w, &tf, false).unwrap();
        assert!(back.sub(&f).is_zero());
    }

    #[test]
    fn s2_t_intertwines() {
        let conn = ConnectionData::s2_stereographic(8);
        let (w, p, _) = sessions(&conn, 2);
        let mut gen = ProbeGen::new(2, 7);
        for _ in 0..3 {
            let f = gen.phase_function(w.caps, 2, 2, 0, 3);
            let g = gen.phase_function(w.caps, 2, 2, 0, 3);
            let lhs = t_map(&p, &w, &p.star(&f, &g).unwrap(), true).unwrap();
            let rhs = w
                .star(
                    &t_map(&p, &w, &f, true).unwrap(),
                    &t_map(&p, &w, &g, true).unwrap(),
                )
                .unwrap();
            assert!(lhs.sub(&rhs).is_zero());
        }
    }

    #[test]
    fn flat_v_is_identity() {
        let conn = ConnectionData::flat(2);
        let (_, p, s) = sessions(&conn, 2);
        let f = PhaseFunction::p(2, s.caps, 0)
            .mul(&PhaseFunction::q(2, s.caps, 1))
            .unwrap();
        let vf = v_map(&s, &p, &f, true).unwrap();
        assert!(vf.sub(&f).is_zero());
    }

    #[test]
    fn s2_v_intertwines_and_commutes_with_h() {
        let conn = ConnectionData::s2_stereographic(8);
        let (_, p, s) = sessions(&conn, 2);
        let mut gen = ProbeGen::new(2, 11);
        for _ in 0..2 {
            let f = gen.phase_function(s.caps, 2, 2, 0, 3);
            let g = gen.phase_function(s.caps, 2, 2, 0, 2);
            let lhs = v_map(&s, &p, &s.star(&f, &g).unwrap(), true).unwrap();
            let rhs = p
                .star(
                    &v_map(&s, &p, &f, true).unwrap(),
                    &v_map(&s, &p, &g, true).unwrap(),
                )
                .unwrap();
            assert!(lhs.sub(&rhs).is_zero());
            // [H, V] = 0
            let hv = v_map(&s, &p, &f, true).unwrap().homogeneity();
            let vh = v_map(&s, &p, &f.homogeneity(), true).unwrap();
            assert!(hv.sub(&vh).is_zero());
            // inverse
            let back = v_map(&s, &p, &v_map(&s, &p, &f, true).unwrap(), false).unwrap();
            assert!(back.sub(&f).is_zero());
        }
    }

    #[test]
    fn flat_cs_map_example() {
        let conn = ConnectionData::flat(2);
        let (_, _, s) = sessions(&conn, 2);
        let f = PhaseFunction::q(2, s.caps, 0)
            .mul(&PhaseFunction::p(2, s.caps, 0))
            .unwrap();
        // C_S(q¹p₁) = q¹p₁ + λ/i (flat, α = 0)
        let cs = cs_map(&s, &f).unwrap();
        let expect = f.add(
            &PhaseFunction::one(2, s.caps)
                .mul_lambda_pow(1)
                .scale(&-Scalar::i()),
        );
        assert!(cs.sub(&expect).is_zero());
    }

    #[test]
    fn s2_cs_involution_and_antiautomorphism() {
        let conn = ConnectionData::s2_stereographic(9);
        let (_, _, s) = sessions(&conn, 2);
        let mut gen = ProbeGen::new(2, 13);
        for _ in 0..2 {
            let f = gen.phase_function(s.caps, 2, 2, 0, 3);
            let g = gen.phase_function(s.caps, 2, 2, 0, 2);
            // involution
            let cc = cs_map(&s, &cs_map(&s, &f).unwrap()).unwrap();
            assert!(cc.sub(&f).is_zero());
            // anti-automorphism
            let lhs = cs_map(&s, &s.star(&f, &g).unwrap()).unwrap();
            let rhs = s
                .star(&cs_map(&s, &g).unwrap(), &cs_map(&s, &f).unwrap())
                .unwrap();
            assert!(lhs.sub(&rhs).is_zero());
        }
    }

    #[test]
    fn s2_cs_first_order_is_delta() {
        // λ¹ coefficient of C_S∘conj equals (1/i)Δ on a probe basis.
        let conn = ConnectionData::s2_stereographic(9);
        let (_, _, s) = sessions(&conn, 2);
        let caps = s.caps;
        for (mq, mp) in [
            (MultiIndex::empty(), MultiIndex::unit(0)),
            (MultiIndex::unit(0), MultiIndex::unit(0)),
            (MultiIndex::unit(1), MultiIndex::single(0, 2)),
            (MultiIndex::single(0, 2), MultiIndex::unit(1)),
        ] {
            let f = PhaseFunction::monomial(2, caps, 0, mp, mq, Scalar::one());
            let csf = cs_map(&s, &f.conj()).unwrap();
            let first = csf.as_weyl().lambda_coefficient(1);
            let delta = covariant_delta(&f, &s.lift.conn, &s.alpha, s.alpha_validity)
                .unwrap()
                .scale(&-Scalar::i());
            assert!(
                first.sub(delta.as_weyl()).is_zero(),
                "Cs^(1) mismatch on probe"
            );
        }
    }

    #[test]
    fn weyl_star_n_properties() {
        let conn = ConnectionData::s2_stereographic(9);
        let (_, _, s) = sessions(&conn, 2);
        let mut gen = ProbeGen::new(2, 17);
        let f = gen.phase_function(s.caps, 2, 2, 0, 3);
        let g = gen.phase_function(s.caps, 2, 2, 0, 2);
        let h = gen.phase_function(s.caps, 1, 2, 0, 2);
        // unit
        let one = PhaseFunction::one(2, s.caps);
        assert!(weyl_star_n(&s, &f, &one).unwrap().sub(&f).is_zero());
        // associativity
        let fg_h = weyl_star_n(&s, &weyl_star_n(&s, &f, &g).unwrap(), &h).unwrap();
        let f_gh = weyl_star_n(&s, &f, &weyl_star_n(&s, &g, &h).unwrap()).unwrap();
        assert!(fg_h.sub(&f_gh).is_zero());
        // conjugation symmetry: conj(f ⋆_W g) = conj g ⋆_W conj f
        let lhs = weyl_star_n(&s, &f, &g).unwrap().conj();
        let rhs = weyl_star_n(&s, &g.conj(), &f.conj()).unwrap();
        assert!(lhs.sub(&rhs).is_zero());
        // λ → −λ is itself an anti-automorphism (everything depends on λ/i
        // only), which is the Weyl-type property together with the
        // conjugation law above
        let parity = |x: &PhaseFunction| PhaseFunction(x.as_weyl().lambda_parity());
        let lhs2 = parity(&weyl_star_n(&s, &f, &g).unwrap());
        let rhs2 = weyl_star_n(&s, &parity(&g), &parity(&f)).unwrap();
        assert!(lhs2.sub(&rhs2).is_zero());
        // commutator = iλ{f,g} + O(λ³): the λ² part of the commutator
        // vanishes
        let comm = weyl_star_n(&s, &f, &g)
            .unwrap()
            .sub(&weyl_star_n(&s, &g, &f).unwrap());
        assert!(comm
            .as_weyl()
            .lambda_coefficient(1)
            .sub(&f.poisson(&g).unwrap().as_weyl().scale(&Scalar::i()))
            .is_zero());
        assert!(comm.as_weyl().lambda_coefficient(2).is_zero());
    }

    #[test]
    fn n2c_on_probes() {
        let conn = ConnectionData::s2_stereographic(9);
        let (_, _, s) = sessions(&conn, 3);
        // π*χ
        let chi = PhaseFunction::q(2, s.caps, 0);
        assert!(n2c_equals_cs(&s, &chi).unwrap());
        // X̂ linear in momenta with base coefficients
        let xhat = PhaseFunction::monomial(
            2,
            s.caps,
            0,
            MultiIndex::unit(0),
            MultiIndex::unit(1),
            Scalar::from_int(2),
        )
        .add(&PhaseFunction::p(2, s.caps, 1));
        assert!(n2c_equals_cs(&s, &xhat).unwrap());
        // degree-2 probes are rejected
        let p2 = PhaseFunction::p(2, s.caps, 0)
            .mul(&PhaseFunction::p(2, s.caps, 0))
            .unwrap();
        assert!(n2c_equals_cs(&s, &p2).is_err());
    }

    #[test]
    fn m2_flat_and_s2() {
        // flat constant fields: both vanish
        let flat = ConnectionData::flat(2);
        let (wf, _, sf) = sessions(&flat, 2);
        let x = vec![Poly::one(), Poly::zero()];
        let y = vec![Poly::zero(), Poly::one()];
        let cmp = m2_compare(&wf, &sf, &x, &y).unwrap();
        assert!(cmp.m2_weyl.is_zero() && cmp.m2_fedosov.is_zero());
        assert!(cmp.engine_weyl_matches && cmp.engine_fedosov_matches);

        // S²: difference = −½(Ric(X,Y)+Ric(Y,X)), nonzero for X = Y = ∂₁
        let conn = ConnectionData::s2_stereographic(9);
        let (w, _, s) = sessions(&conn, 2);
        let x = vec![Poly::one(), Poly::zero()];
        let cmp = m2_compare(&w, &s, &x, &x).unwrap();
        assert!(cmp.engine_weyl_matches && cmp.engine_fedosov_matches);
        assert!(!cmp.difference.is_zero());
        // at the origin: −Ric(∂₁,∂₁)(0) = −4
        let at0 = cmp
            .difference
            .as_weyl()
            .terms
            .get(&crate::weyl::TermKey::scalar_key())
            .cloned()
            .unwrap();
        assert_eq!(at0, Scalar::from_int(-4));
    }

    #[test]
    fn order_bounds_of_equivalences() {
        let conn = ConnectionData::s2_stereographic(9);
        let (w, p, s) = sessions(&conn, 2);
        let caps = w.caps;
        // T = id + Σ λ^r T_r with T_r of order ≤ 2r
        let t_table = extract_operator(|f| t_map(&p, &w, f, true), 2, caps, 5).unwrap();
        for (lam, order) in table_orders(&t_table) {
            assert!(order <= 2 * lam.max(1), "T_{lam} order {order}");
        }
        // V = id + Σ λ^r V_r with V_r of order ≤ r
        let v_table = extract_operator(|f| v_map(&s, &p, f, true), 2, caps, 3).unwrap();
        for (lam, order) in table_orders(&v_table) {
            if lam == 0 {
                assert_eq!(order, 0);
            } else {
                assert!(order <= lam, "V_{lam} order {order}");
            }
        }
        // C_S∘conj = id + Σ λ^r Cs^(r) with Cs^(r) of order ≤ 2r
        let cs_table = extract_operator(|f| cs_map(&s, &f.conj()), 2, caps, 5).unwrap();
        for (lam, order) in table_orders(&cs_table) {
            assert!(order <= 2 * lam.max(1), "Cs_{lam} order {order}");
        }
    }

    #[test]
    fn composite_equivalence_s_to_f() {
        // V then T maps ⋆_S-products to ⋆_F-products
        let conn = ConnectionData::s2_stereographic(8);
        let (w, p, s) = sessions(&conn, 2);
        let mut gen = ProbeGen::new(2, 23);
        let f = gen.phase_function(s.caps, 2, 1, 0, 2);
        let g = gen.phase_function(s.caps, 1, 2, 0, 2);
        let tv = |x: &PhaseFunction| -> PhaseFunction {
            t_map(&p, &w, &v_map(&s, &p, x, true).unwrap(), true).unwrap()
        };
        let lhs = tv(&s.star(&f, &g).unwrap());
        let rhs = w.star(&tv(&f), &tv(&g)).unwrap();
        assert!(lhs.sub(&rhs).is_zero());
    }
}
