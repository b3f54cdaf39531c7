//! Verification harness: independent closed-form oracles and the named
//! check suites run by the command-line selftest.

use crate::weyl::PhaseFunction;
use crate::Result;

/// Closed-form oracles, implemented directly as bidifferential series on
/// phase functions with no use of the Fedosov machinery.
pub mod oracle {
    use super::*;
    use crate::multi::MultiIndex;
    use crate::scalar::{factorial, Scalar};

    /// The flat Moyal–Weyl product
    /// e^{(iλ/2)(∂_q∂_{p'} − ∂_{q'}∂_p)} f(q,p) g(q',p')|_{q=q',p=p'}.
    pub fn moyal_flat(f: &PhaseFunction, g: &PhaseFunction) -> Result<PhaseFunction> {
        let n = f.as_weyl().n;
        let caps = f.as_weyl().caps.min(&g.as_weyl().caps);
        let mut acc = PhaseFunction::zero(n, caps);
        let mut pairs: Vec<(PhaseFunction, PhaseFunction, Scalar)> =
            vec![(f.clone(), g.clone(), Scalar::one())];
        let half_i = Scalar::i().scale_ratio(1, 2);
        for t in 0..=caps.lam_max {
            if t > 0 {
                let mut next = Vec::new();
                for (a, b, s) in &pairs {
                    for i in 0..n as u16 {
                        let aq = a.partial_q(i)?;
                        let bp = b.partial_p(i);
                        if !aq.is_zero() && !bp.is_zero() {
                            next.push((aq, bp, s.clone()));
                        }
                        let ap = a.partial_p(i);
                        let bq = b.partial_q(i)?;
                        if !ap.is_zero() && !bq.is_zero() {
                            next.push((ap, bq, -s));
                        }
                    }
                }
                pairs = next;
                if pairs.is_empty() {
                    break;
                }
            }
            let scale = &half_i.pow(t) / &factorial(t);
            for (a, b, s) in &pairs {
                acc = acc.add(&a.mul(b)?.mul_lambda_pow(t).scale(&(&scale * s)));
            }
        }
        Ok(acc)
    }

    /// The flat standard-ordered product
    /// Σ_r (1/r!)(λ/i)^r ∂_p^r f ∂_q^r g = Σ_μ (1/μ!)(λ/i)^{|μ|} ∂_p^μ f ∂_q^μ g.
    pub fn standard_flat(f: &PhaseFunction, g: &PhaseFunction) -> Result<PhaseFunction> {
        let n = f.as_weyl().n;
        let caps = f.as_weyl().caps.min(&g.as_weyl().caps);
        let mut acc = PhaseFunction::zero(n, caps);
        let lam_over_i = -Scalar::i();
        let max_deg = f.momentum_degree().min(caps.lam_max);
        for mu in MultiIndex::enumerate_up_to(n, max_deg) {
            let mut fp = f.clone();
            let mut gq = g.clone();
            for (v, e) in mu.iter() {
                for _ in 0..e {
                    fp = fp.partial_p(v);
                    gq = gq.partial_q(v)?;
                }
            }
            if fp.is_zero() || gq.is_zero() {
                continue;
            }
            let scale = &lam_over_i.pow(mu.degree()) / &mu.factorial();
            acc = acc.add(&fp.mul(&gq)?.mul_lambda_pow(mu.degree()).scale(&scale));
        }
        Ok(acc)
    }
}

/// Outcome of one named verification.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Aggregated module suites (used by the CLI selftest).
pub mod suites {
    pub use super::CheckResult;
}
