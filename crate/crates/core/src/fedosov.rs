//! The Fedosov recursion machinery: the element r, the square-zero
//! derivations D_F, D′, D_S, Fedosov–Taylor series and the star products
//! ⋆_F, *′, ⋆_S.
//!
//! Truncation contract: a session built for λ-order k retains total degree
//! up to 2k in τ and solves r through total degree 2k+1, which is exactly
//! what the pairing structure of the fibrewise products consumes. Elements
//! beyond the caps are refused rather than silently truncated.

use crate::classical::{ClassicalElement, ClassicalFedosov};
use crate::error::CoreError;
use crate::geometry::{b_operator, lift_connection, nabla_op, r_element, ConnectionData, LiftedConnection};
use crate::multi::Poly;
use crate::scalar::{factorial, Scalar};
use crate::weyl::{Caps, FibProduct, PhaseFunction, WeylElement, JET_EXACT};
use crate::Result;
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

/// Ordering mode of the construction.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Mode {
    /// ⋆_F: the fibrewise Weyl product with D_F = −δ + ∇ + (i/λ)ad_W(r).
    Weyl,
    /// *′: the standard-ordered fibrewise product with D′ = S D_F S⁻¹.
    Prime,
    /// ⋆_S: the standard-ordered product with its own recursion element r_S.
    Standard,
}

impl Mode {
    pub fn product(&self) -> FibProduct {
        match self {
            Mode::Weyl => FibProduct::Weyl,
            Mode::Prime | Mode::Standard => FibProduct::Standard,
        }
    }
}

/// Where the one-form α comes from.
#[derive(Clone, Debug)]
pub enum AlphaPolicy {
    /// The radial-homotopy solution of dα = −tr R₀ (zero when tr R₀ = 0).
    Auto,
    /// Force α = 0; rejected when tr R₀ ≠ 0.
    Zero,
    /// Explicit jets with a validity order.
    Explicit(Vec<Poly>, i32),
}

/// A sealed Fedosov construction over one chart.
pub struct FedosovSession {
    pub n: usize,
    pub mode: Mode,
    pub caps: Caps,
    pub lam_order: u32,
    pub lift: Arc<LiftedConnection>,
    /// r_F, λ-free, solved through Deg ≤ caps.deg_max + 1.
    pub r_weyl: WeylElement,
    /// The element fed to (i/λ)ad(·): r_F, S r_F, or r_S by mode.
    pub ad_element: WeylElement,
    /// r_S solved independently through the general recursion
    /// (standard mode only; kept for the r_S = r_F verification).
    pub r_std: Option<WeylElement>,
    pub alpha: Vec<Poly>,
    pub alpha_validity: i32,
    pub classical: ClassicalFedosov,
    /// Canonical h with σ(h) = 0 for the session's α.
    pub h: ClassicalElement,
    tau_cache: Mutex<BTreeMap<String, WeylElement>>,
}

impl FedosovSession {
    /// Standard caps for star products of λ-order `lam_order`.
    pub fn new(conn: &ConnectionData, mode: Mode, lam_order: u32, alpha: AlphaPolicy) -> Result<Self> {
        Self::with_caps(conn, mode, Caps::new(lam_order, 2 * lam_order), alpha)
    }

    pub fn with_caps(conn: &ConnectionData, mode: Mode, caps: Caps, alpha: AlphaPolicy) -> Result<Self> {
        let lift = Arc::new(lift_connection(conn)?);
        let n = conn.n;
        let r_deg_max = caps.deg_max + 1;
        let r_caps = Caps {
            deg_max: r_deg_max,
            ..caps
        };
        let r_weyl = solve_r_weyl(&lift, r_caps)?;
        let classical = ClassicalFedosov::new(conn, caps.deg_max.max(6))?;
        let (alpha, alpha_validity) = match alpha {
            AlphaPolicy::Auto => (
                classical.curv.alpha.clone(),
                classical.curv.alpha_validity,
            ),
            AlphaPolicy::Zero => {
                if !classical.curv.is_unimodular() {
                    return Err(CoreError::Invalid(
                        "alpha = 0 requested but tr R0 != 0 (connection not unimodular)".into(),
                    ));
                }
                (vec![Poly::zero(); n], JET_EXACT)
            }
            AlphaPolicy::Explicit(a, v) => {
                if a.len() != n {
                    return Err(CoreError::DimensionMismatch(a.len(), n));
                }
                (a, v)
            }
        };
        let h = classical.solve_h(&Poly::zero(), JET_EXACT, &alpha, alpha_validity)?;
        let (ad_element, r_std) = match mode {
            Mode::Weyl => (r_weyl.clone(), None),
            Mode::Prime => (r_weyl.s_fib(true, Some(&lift)), None),
            Mode::Standard => {
                let r_std = solve_r_standard(&lift, r_caps)?;
                (r_weyl.clone(), Some(r_std))
            }
        };
        Ok(FedosovSession {
            n,
            mode,
            caps,
            lam_order: caps.lam_max,
            lift,
            r_weyl,
            ad_element,
            r_std,
            alpha,
            alpha_validity,
            classical,
            h,
            tau_cache: Mutex::new(BTreeMap::new()),
        })
    }

    /// h with a chosen σ-part φ (the session's stored h uses φ = 0).
    pub fn solve_h(&self, phi: &Poly, phi_validity: i32) -> Result<ClassicalElement> {
        self.classical
            .solve_h(phi, phi_validity, &self.alpha, self.alpha_validity)
    }

    /// The mode's Fedosov derivation applied to `a`.
    pub fn apply_derivation(&self, a: &WeylElement) -> Result<WeylElement> {
        self.apply_derivation_bounded(a, u32::MAX)
    }

    /// Like [`apply_derivation`](Self::apply_derivation) but skips the
    /// degree-preserving parts on components above `cmax` (used to check
    /// nilpotency on exactly the retained degrees without consuming jets of
    /// out-of-range components).
    pub fn apply_derivation_bounded(&self, a: &WeylElement, cmax: u32) -> Result<WeylElement> {
        let low = if cmax == u32::MAX {
            a.clone()
        } else {
            a.restrict_deg(cmax)
        };
        let mut out = a.delta().neg();
        out = out.add(&nabla_op(&low, &self.lift)?);
        match self.mode {
            Mode::Weyl => {
                out = out.add(&self.r_weyl.ad_i_over_lambda(&low, FibProduct::Weyl, Some(&self.lift))?);
            }
            Mode::Prime | Mode::Standard => {
                out = out.add(&b_operator(&low, &self.lift)?);
                let el = if self.mode == Mode::Prime {
                    &self.ad_element
                } else {
                    self.r_std.as_ref().unwrap()
                };
                out = out.add(&el.ad_i_over_lambda(&low, FibProduct::Standard, Some(&self.lift))?);
            }
        }
        Ok(out)
    }

    fn t_zero(&self, a: &WeylElement) -> Result<WeylElement> {
        let mut out = nabla_op(a, &self.lift)?;
        if self.mode != Mode::Weyl {
            out = out.add(&b_operator(a, &self.lift)?);
        }
        Ok(out)
    }

    fn ad_product(&self) -> FibProduct {
        self.mode.product()
    }

    /// The Fedosov–Taylor series τ(f): the unique D-flat element with
    /// σ(τ(f)) = f, computed by the degree recursion and cached.
    pub fn taylor(&self, f: &PhaseFunction) -> Result<WeylElement> {
        let key = format!("{:?}|{:?}|{:?}", self.mode, f.as_weyl().validity.0, f);
        if let Some(hit) = self.tau_cache.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        // C[[λ]]-linearity: split by λ-power and shift results back. The
        // λ^k piece only contributes components of Deg ≤ deg_max − 2k after
        // the shift, so the recursion depth shrinks accordingly.
        let mut total = WeylElement::zero(self.n, self.caps);
        for lam in 0..=f.as_weyl().max_lambda().min(self.caps.lam_max) {
            let piece = f.as_weyl().lambda_coefficient(lam);
            if piece.is_zero() {
                continue;
            }
            let depth = self.caps.deg_max.saturating_sub(2 * lam);
            let tau = self.taylor_lambda_free(&piece, depth)?;
            total = total.add(&tau.mul_lambda_pow(lam));
        }
        self.tau_cache.lock().unwrap().insert(key, total.clone());
        Ok(total)
    }

    fn taylor_lambda_free(&self, f: &WeylElement, depth: u32) -> Result<WeylElement> {
        let mut f = f.clone();
        f.caps = self.caps;
        let ad_el = match self.mode {
            Mode::Weyl => &self.r_weyl,
            Mode::Prime => &self.ad_element,
            Mode::Standard => self.r_std.as_ref().unwrap(),
        };
        let product = self.ad_product();
        let lift = Some(&*self.lift);
        let mut comps: Vec<WeylElement> = vec![f.clone()];
        for k in 0..depth {
            let mut rhs = self.t_zero(&comps[k as usize])?;
            for l in 1..=k {
                let el = ad_el.component(l + 2);
                if el.is_zero() {
                    continue;
                }
                let target = &comps[(k - l) as usize];
                if target.is_zero() {
                    continue;
                }
                rhs = rhs.add(&el.ad_i_over_lambda(target, product, lift)?);
            }
            comps.push(rhs.delta_inv());
        }
        let mut out = WeylElement::zero(self.n, self.caps);
        for c in comps {
            out = out.add(&c);
        }
        Ok(out)
    }

    /// f ⋆ g = σ(τ(f) ∘ τ(g)) in the mode's fibrewise product.
    pub fn star(&self, f: &PhaseFunction, g: &PhaseFunction) -> Result<PhaseFunction> {
        let tf = self.taylor(f)?;
        let tg = self.taylor(g)?;
        let prod = self.ad_product().apply(&tf, &tg, Some(&self.lift))?;
        PhaseFunction::try_from_weyl(prod.sigma())
    }
}

/// Solve the homogeneous recursion r⁽³⁾ = δ⁻¹R,
/// r⁽ᵏ⁺³⁾ = δ⁻¹(∇r⁽ᵏ⁺²⁾ − ½ Σ {r, r}_fib).
pub fn solve_r_weyl(lift: &LiftedConnection, caps: Caps) -> Result<WeylElement> {
    let n = lift.n;
    let r_el = r_element(lift, caps);
    let mut comps: BTreeMap<u32, WeylElement> = BTreeMap::new();
    comps.insert(3, r_el.delta_inv());
    for k in 1..=caps.deg_max.saturating_sub(3) {
        let mut rhs = nabla_op(&comps[&(k + 2)], lift)?;
        for l in 1..=k.saturating_sub(1) {
            let (a, b) = (&comps[&(l + 2)], &comps[&(k - l + 2)]);
            if a.is_zero() || b.is_zero() {
                continue;
            }
            rhs = rhs.add(&a.fib_poisson(b)?.scale(&Scalar::from_ratio(-1, 2)));
        }
        comps.insert(k + 3, rhs.delta_inv());
    }
    let mut r = WeylElement::zero(n, caps);
    for (_, c) in comps {
        r = r.add(&c);
    }
    Ok(r)
}

/// Solve the general recursion for the standard-ordered product:
/// r_S⁽ᵏ⁺³⁾ = δ⁻¹((∇+B) r_S⁽ᵏ⁺²⁾ + (i/λ) Σ r_S⁽ˡ⁺²⁾ ∘_S r_S⁽ᵏ⁻ˡ⁺²⁾).
pub fn solve_r_standard(lift: &LiftedConnection, caps: Caps) -> Result<WeylElement> {
    let n = lift.n;
    let r_el = r_element(lift, caps);
    let mut comps: BTreeMap<u32, WeylElement> = BTreeMap::new();
    comps.insert(3, r_el.delta_inv());
    for k in 1..=caps.deg_max.saturating_sub(3) {
        let mut rhs = nabla_op(&comps[&(k + 2)], lift)?;
        rhs = rhs.add(&b_operator(&comps[&(k + 2)], lift)?);
        let widened = Caps {
            lam_max: caps.lam_max + 1,
            deg_max: caps.deg_max + 2,
            ..caps
        };
        let mut prod_sum = WeylElement::zero(n, widened);
        for l in 1..=k.saturating_sub(1) {
            let (a, b) = (&comps[&(l + 2)], &comps[&(k - l + 2)]);
            if a.is_zero() || b.is_zero() {
                continue;
            }
            let mut a_up = a.clone();
            a_up.caps = widened;
            let mut b_up = b.clone();
            b_up.caps = widened;
            prod_sum = prod_sum.add(&a_up.std_mul(&b_up, Some(lift))?);
        }
        if !prod_sum.is_zero() {
            let shifted = prod_sum.div_lambda()?.scale(&Scalar::i());
            let mut recapped = WeylElement::zero(n, caps);
            recapped.validity = shifted.validity.clone();
            for (key, c) in shifted.terms {
                recapped.insert(key, c);
            }
            rhs = rhs.add(&recapped);
        }
        comps.insert(k + 3, rhs.delta_inv());
    }
    let mut r = WeylElement::zero(n, caps);
    for (_, c) in comps {
        r = r.add(&c);
    }
    Ok(r)
}

/// e^{±ad_S(π*h)} a, truncated by the λ cap (each ad application raises the
/// λ-power by at least one).
pub fn exp_ad_s(
    h_pulled: &WeylElement,
    a: &WeylElement,
    lift: &LiftedConnection,
    forward: bool,
) -> Result<WeylElement> {
    let sign = if forward { Scalar::one() } else { -Scalar::one() };
    let mut acc = a.clone();
    let mut cur = a.clone();
    for t in 1..=a.caps.lam_max {
        cur = h_pulled.super_commutator(&cur, FibProduct::Standard, Some(lift))?;
        if cur.is_zero() {
            break;
        }
        acc = acc.add(&cur.scale(&(&sign.pow(t) / &factorial(t))));
    }
    Ok(acc)
}

/// Verification helpers for the engine invariants.
pub mod checks {
    use super::*;

    /// δr = R + ∇r + (i/λ) r∘r through the retained degrees.
    pub fn r_equation(session: &FedosovSession) -> Result<bool> {
        let lift = &session.lift;
        let r = match session.mode {
            Mode::Standard => session.r_std.as_ref().unwrap(),
            _ => &session.r_weyl,
        };
        let product = session.mode.product();
        let r_caps = r.caps;
        let mut rhs = r_element(lift, r_caps);
        rhs = rhs.add(&nabla_op(r, lift)?);
        if session.mode != Mode::Weyl {
            rhs = rhs.add(&b_operator(r, lift)?);
        }
        let mut r_up = r.clone();
        r_up.caps.lam_max += 1;
        r_up.caps.deg_max += 2;
        let prod = r_up.clone().super_commutator(&r_up, product, Some(lift))?;
        // (i/λ) r∘r = (i/λ)·½[r,r] for the odd element r
        let half = prod.div_lambda()?.scale(&Scalar::imag_ratio(1, 2));
        let mut recapped = WeylElement::zero(session.n, r_caps);
        recapped.validity = half.validity.clone();
        for (k, c) in half.terms {
            recapped.insert(k, c);
        }
        rhs = rhs.add(&recapped);
        let lhs = r.delta();
        // components d of δr need r^{(d+1)}: complete through deg_max
        let max_check = r_caps.deg_max - 1;
        Ok(lhs
            .restrict_deg(max_check)
            .sub(&rhs.restrict_deg(max_check))
            .is_zero())
    }

    /// The structural conditions on r: δ⁻¹r = 0, Hr = r, λ-freeness, no
    /// vertical form content.
    pub fn r_structure(session: &FedosovSession) -> bool {
        let n = session.n as u16;
        let rs: Vec<&WeylElement> = match &session.r_std {
            Some(rs) => vec![&session.r_weyl, rs],
            None => vec![&session.r_weyl],
        };
        rs.into_iter().all(|r| {
            r.delta_inv().is_zero()
                && r.homogeneity().sub(r).is_zero()
                && r.max_lambda() == 0
                && r.terms.keys().all(|k| k.deg_a() == 1 && k.total_deg() >= 3)
                && (0..n).all(|i| r.i_a_gen(n + i).is_zero())
        })
    }

    /// D² a = 0 on the components ≤ `through_deg`.
    pub fn d_squared_vanishes(
        session: &FedosovSession,
        a: &WeylElement,
        through_deg: u32,
    ) -> Result<bool> {
        let da = session.apply_derivation_bounded(a, through_deg + 1)?;
        let dda = session.apply_derivation_bounded(&da, through_deg)?;
        Ok(dda.restrict_deg(through_deg).is_zero())
    }

    /// D τ(f) = 0 through the retained degrees.
    pub fn tau_flat(session: &FedosovSession, f: &PhaseFunction) -> Result<bool> {
        let tau = session.taylor(f)?;
        let dtau = session.apply_derivation_bounded(&tau, session.caps.deg_max)?;
        Ok(dtau.restrict_deg(session.caps.deg_max - 1).is_zero())
    }

    /// σ(τ(f)) = f.
    pub fn tau_sigma(session: &FedosovSession, f: &PhaseFunction) -> Result<bool> {
        let tau = session.taylor(f)?;
        Ok(tau.sigma().sub(f.as_weyl()).is_zero())
    }

    /// H τ(f) = τ(H f).
    pub fn tau_homogeneous(session: &FedosovSession, f: &PhaseFunction) -> Result<bool> {
        let lhs = session.taylor(f)?.homogeneity();
        let rhs = session.taylor(&f.homogeneity())?;
        Ok(lhs.sub(&rhs).is_zero())
    }

    /// H(f⋆g) = Hf⋆g + f⋆Hg.
    pub fn star_homogeneous(
        session: &FedosovSession,
        f: &PhaseFunction,
        g: &PhaseFunction,
    ) -> Result<bool> {
        let lhs = session.star(f, g)?.homogeneity();
        let rhs = session
            .star(&f.homogeneity(), g)?
            .add(&session.star(f, &g.homogeneity())?);
        Ok(lhs.sub(&rhs).is_zero())
    }

    /// Associativity on one triple.
    pub fn star_associative(
        session: &FedosovSession,
        f: &PhaseFunction,
        g: &PhaseFunction,
        h: &PhaseFunction,
    ) -> Result<bool> {
        let fg_h = session.star(&session.star(f, g)?, h)?;
        let f_gh = session.star(f, &session.star(g, h)?)?;
        Ok(fg_h.sub(&f_gh).is_zero())
    }

    /// λ⁰ term is fg and the λ¹ commutator term is iλ{f,g}.
    pub fn star_semiclassical(
        session: &FedosovSession,
        f: &PhaseFunction,
        g: &PhaseFunction,
    ) -> Result<bool> {
        let fg = session.star(f, g)?;
        let zeroth = fg.as_weyl().lambda_coefficient(0);
        let classical = f.mul(g)?;
        if !zeroth.sub(classical.as_weyl()).is_zero() {
            return Ok(false);
        }
        let gf = session.star(g, f)?;
        let comm = fg.sub(&gf);
        let bracket = f.poisson(g)?;
        let first = comm.as_weyl().lambda_coefficient(1);
        Ok(first.sub(&bracket.as_weyl().scale(&Scalar::i())).is_zero())
    }

    /// Standard-ordered type: π*χ ⋆ f = π*χ·f and ((π*χ)f) ⋆ g = π*χ(f⋆g).
    pub fn standard_ordered_laws(
        session: &FedosovSession,
        chi: &PhaseFunction,
        f: &PhaseFunction,
        g: &PhaseFunction,
    ) -> Result<bool> {
        if !chi.is_base_function() {
            return Err(CoreError::BadOperand("chi must be a base function".into()));
        }
        let lhs1 = session.star(chi, f)?;
        if !lhs1.sub(&chi.mul(f)?).is_zero() {
            return Ok(false);
        }
        let lhs2 = session.star(&chi.mul(f)?, g)?;
        let rhs2 = chi.mul(&session.star(f, g)?)?;
        Ok(lhs2.sub(&rhs2).is_zero())
    }

    /// Weyl-mode parity: τ(f) of a weight-k momentum polynomial has only
    /// even λ-powers up to order k.
    pub fn tau_weyl_parity(session: &FedosovSession, f: &PhaseFunction) -> Result<bool> {
        let k = f.momentum_degree();
        let tau = session.taylor(f)?;
        for lam in (1..=k.min(session.caps.lam_max)).step_by(2) {
            if !tau.lambda_coefficient(lam).is_zero() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// e^{ad_S(π*h)} D′ e^{−ad_S(π*h)} a = D_S a for the session's h.
    pub fn h_conjugation_identity(
        std_session: &FedosovSession,
        prime_session: &FedosovSession,
        a: &WeylElement,
        through_deg: u32,
    ) -> Result<bool> {
        let lift = &std_session.lift;
        let h_pulled = std_session.h.pi_star(a.caps)?;
        let inner = exp_ad_s(&h_pulled, a, lift, false)?;
        let dprime = prime_session.apply_derivation_bounded(&inner, through_deg + 1)?;
        let lhs = exp_ad_s(&h_pulled, &dprime, lift, true)?;
        let rhs = std_session.apply_derivation_bounded(a, through_deg + 1)?;
        Ok(lhs
            .restrict_deg(through_deg)
            .sub(&rhs.restrict_deg(through_deg))
            .is_zero())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multi::MultiIndex;

    fn flat_session(mode: Mode, k: u32) -> FedosovSession {
        FedosovSession::new(&ConnectionData::flat(2), mode, k, AlphaPolicy::Zero).unwrap()
    }

    #[test]
    fn flat_r_vanishes_and_tau_is_taylor() {
        let s = flat_session(Mode::Weyl, 2);
        assert!(s.r_weyl.is_zero());
        // τ(f) = full y-Taylor expansion of f with no λ-corrections
        let f = PhaseFunction::q(2, s.caps, 0).mul(&PhaseFunction::p(2, s.caps, 0)).unwrap();
        let tau = s.taylor(&f).unwrap();
        assert_eq!(tau.max_lambda(), 0);
        // expansion: q¹p₁ + y^{q1}p₁ + q¹y^{p1} + y^{q1}y^{p1}
        assert_eq!(tau.term_count(), 4);
        assert!(checks::tau_sigma(&s, &f).unwrap());
        assert!(checks::tau_flat(&s, &f).unwrap());
    }

    #[test]
    fn flat_weyl_star_is_moyal_on_example() {
        let s = flat_session(Mode::Weyl, 4);
        let caps = s.caps;
        // f = q¹p₁², g = q¹²p₁
        let q1 = PhaseFunction::q(2, caps, 0);
        let p1 = PhaseFunction::p(2, caps, 0);
        let f = q1.mul(&p1).unwrap().mul(&p1).unwrap();
        let g = q1.mul(&q1).unwrap().mul(&p1).unwrap();
        let engine = s.star(&f, &g).unwrap();
        let moyal = crate::verify::oracle::moyal_flat(&f, &g).unwrap();
        assert!(engine.sub(&moyal).is_zero());
    }

    #[test]
    fn flat_standard_star_closed_form() {
        let s = flat_session(Mode::Standard, 3);
        let caps = s.caps;
        // p₁² ⋆_S q¹² = p₁²q¹² + 4(λ/i)p₁q¹ + 2(λ/i)²
        let p1 = PhaseFunction::p(2, caps, 0);
        let q1 = PhaseFunction::q(2, caps, 0);
        let f = p1.mul(&p1).unwrap();
        let g = q1.mul(&q1).unwrap();
        let got = s.star(&f, &g).unwrap();
        let li = -Scalar::i(); // λ/i per λ-power
        let expect = f
            .mul(&g)
            .unwrap()
            .add(
                &p1.mul(&q1)
                    .unwrap()
                    .mul_lambda_pow(1)
                    .scale(&li.scale_int(4)),
            )
            .add(&PhaseFunction::one(2, caps).mul_lambda_pow(2).scale(&(&li * &li).scale_int(2)));
        assert!(got.sub(&expect).is_zero());
        // oracle route
        let oracle = crate::verify::oracle::standard_flat(&f, &g).unwrap();
        assert!(got.sub(&oracle).is_zero());
        // f ⋆ 1 = 1 ⋆ f = f
        let one = PhaseFunction::one(2, caps);
        assert!(s.star(&f, &one).unwrap().sub(&f).is_zero());
        assert!(s.star(&one, &f).unwrap().sub(&f).is_zero());
    }

    #[test]
    fn s2_r_and_derivations() {
        let conn = ConnectionData::s2_stereographic(9);
        let s = FedosovSession::with_caps(&conn, Mode::Weyl, Caps::new(3, 7), AlphaPolicy::Auto).unwrap();
        assert!(checks::r_structure(&s));
        assert!(checks::r_equation(&s).unwrap());
        // r^{(3)} = δ⁻¹R
        let r3 = s.r_weyl.component(3);
        let expect = r_element(&s.lift, s.r_weyl.caps).delta_inv();
        assert!(r3.sub(&expect).is_zero());
        // D² on a probe
        let caps = s.caps;
        let a = WeylElement::y(2, caps, 0)
            .mom_mul(&MultiIndex::unit(1))
            .add(&WeylElement::y(2, caps, 3).eta_wedge_left(0));
        assert!(checks::d_squared_vanishes(&s, &a, 5).unwrap());
    }

    #[test]
    fn s2_standard_r_matches_weyl_r() {
        let conn = ConnectionData::s2_stereographic(9);
        let s = FedosovSession::with_caps(&conn, Mode::Standard, Caps::new(2, 6), AlphaPolicy::Auto).unwrap();
        let r_std = s.r_std.as_ref().unwrap();
        assert!(r_std.sub(&s.r_weyl).is_zero());
        assert!(checks::r_equation(&s).unwrap());
    }

    #[test]
    fn tau_of_pullback_is_pullback_of_tau0() {
        let conn = ConnectionData::s2_stereographic(8);
        for mode in [Mode::Weyl, Mode::Prime, Mode::Standard] {
            let s = FedosovSession::with_caps(&conn, mode, Caps::new(2, 5), AlphaPolicy::Auto).unwrap();
            let chi = Poly::var(0).mul(&Poly::var(1));
            let chi_pf = PhaseFunction::monomial(
                2,
                s.caps,
                0,
                MultiIndex::empty(),
                MultiIndex::unit(0).mul(&MultiIndex::unit(1)),
                Scalar::one(),
            );
            let tau = s.taylor(&chi_pf).unwrap();
            let tau0 = crate::classical::tau0(&chi, JET_EXACT, &conn, s.caps.deg_max).unwrap();
            let pulled = tau0.pi_star(s.caps).unwrap();
            assert!(tau.sub(&pulled).is_zero(), "mode {mode:?}");
        }
    }

    #[test]
    fn homogeneity_of_star() {
        let conn = ConnectionData::s2_stereographic(8);
        let s = FedosovSession::with_caps(&conn, Mode::Weyl, Caps::new(2, 4), AlphaPolicy::Auto).unwrap();
        let f = PhaseFunction::p(2, s.caps, 0).mul(&PhaseFunction::q(2, s.caps, 1)).unwrap();
        let g = PhaseFunction::p(2, s.caps, 1);
        assert!(checks::star_homogeneous(&s, &f, &g).unwrap());
        assert!(checks::star_semiclassical(&s, &f, &g).unwrap());
    }

    #[test]
    fn standard_ordered_type_laws() {
        let conn = ConnectionData::s2_stereographic(8);
        let s = FedosovSession::with_caps(&conn, Mode::Standard, Caps::new(2, 4), AlphaPolicy::Auto).unwrap();
        let chi = PhaseFunction::q(2, s.caps, 0);
        let f = PhaseFunction::p(2, s.caps, 0);
        let g = PhaseFunction::p(2, s.caps, 1).mul(&PhaseFunction::q(2, s.caps, 1)).unwrap();
        assert!(checks::standard_ordered_laws(&s, &chi, &f, &g).unwrap());
    }

    #[test]
    fn weyl_parity_corollary() {
        let conn = ConnectionData::s2_stereographic(8);
        let s = FedosovSession::with_caps(&conn, Mode::Weyl, Caps::new(3, 6), AlphaPolicy::Auto).unwrap();
        let f = PhaseFunction::p(2, s.caps, 0).mul(&PhaseFunction::p(2, s.caps, 1)).unwrap();
        assert!(checks::tau_weyl_parity(&s, &f).unwrap());
    }

    #[test]
    fn classical_limit_compatibility() {
        // τ_cl({f,g}) = {τ_cl f, τ_cl g}_fib on S² jets
        let conn = ConnectionData::s2_stereographic(8);
        let s = FedosovSession::with_caps(&conn, Mode::Weyl, Caps::new(2, 4), AlphaPolicy::Auto).unwrap();
        let f = PhaseFunction::p(2, s.caps, 0).mul(&PhaseFunction::q(2, s.caps, 1)).unwrap();
        let g = PhaseFunction::p(2, s.caps, 1);
        let br = f.poisson(&g).unwrap();
        let lhs = s.taylor(&br).unwrap().restrict_lambda(0);
        let tf = s.taylor(&f).unwrap().restrict_lambda(0);
        let tg = s.taylor(&g).unwrap().restrict_lambda(0);
        let rhs = tf.fib_poisson(&tg).unwrap();
        // the bracket lowers the polynomial degree; compare through the
        // degrees where both sides are complete
        let max = s.caps.deg_max - 1;
        assert!(lhs.restrict_deg(max).sub(&rhs.restrict_deg(max)).is_zero());
    }

    #[test]
    fn h_conjugation() {
        let conn = ConnectionData::s2_stereographic(9);
        let caps = Caps::new(2, 5);
        let std = FedosovSession::with_caps(&conn, Mode::Standard, caps, AlphaPolicy::Auto).unwrap();
        let prime = FedosovSession::with_caps(&conn, Mode::Prime, caps, AlphaPolicy::Auto).unwrap();
        let a = WeylElement::y(2, caps, 2).mom_mul(&MultiIndex::unit(0));
        assert!(checks::h_conjugation_identity(&std, &prime, &a, 3).unwrap());
    }
}
