//! Deterministic pseudo-random probe generators for the verification
//! suites. Seeded ChaCha so identical runs see identical probes.

use crate::multi::MultiIndex;
use crate::scalar::Scalar;
use crate::multi::FormSet;
use crate::weyl::{Caps, PhaseFunction, TermKey, WeylElement};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use crate::multi::FormSet as Forms;

pub struct ProbeGen {
    pub n: usize,
    rng: ChaCha8Rng,
}

impl ProbeGen {
    pub fn new(n: usize, seed: u64) -> Self {
        ProbeGen {
            n,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn scalar(&mut self) -> Scalar {
        let num = self.rng.gen_range(-4i64..=4);
        let den = self.rng.gen_range(1i64..=3);
        let inum = self.rng.gen_range(-2i64..=2);
        &Scalar::from_ratio(num, den) + &Scalar::imag_ratio(inum, 2)
    }

    pub fn real_scalar(&mut self) -> Scalar {
        let num = self.rng.gen_range(-4i64..=4);
        let den = self.rng.gen_range(1i64..=3);
        Scalar::from_ratio(num.max(1), den)
    }

    fn multi(&mut self, nvars: usize, max_deg: u32) -> MultiIndex {
        let deg = self.rng.gen_range(0..=max_deg);
        let mut exps = vec![0u32; nvars];
        for _ in 0..deg {
            let v = self.rng.gen_range(0..nvars);
            exps[v] += 1;
        }
        MultiIndex::from_exponents(&exps)
    }

    /// A random momentum-polynomial phase function with exact polynomial
    /// base coefficients.
    pub fn phase_function(
        &mut self,
        caps: Caps,
        max_mom: u32,
        max_jet: u32,
        max_lam: u32,
        terms: usize,
    ) -> PhaseFunction {
        let mut e = WeylElement::zero(self.n, caps);
        for _ in 0..terms {
            let lam = self.rng.gen_range(0..=max_lam);
            let key = TermKey {
                lam,
                sym: MultiIndex::empty(),
                form: FormSet::empty(),
                mom: self.multi(self.n, max_mom),
                jet: self.multi(self.n, max_jet),
            };
            e.insert(key, self.scalar());
        }
        PhaseFunction(e)
    }

    /// A random Weyl element within the caps.
    pub fn weyl_element(
        &mut self,
        caps: Caps,
        max_sym: u32,
        max_form: u32,
        max_mom: u32,
        max_jet: u32,
        max_lam: u32,
        terms: usize,
    ) -> WeylElement {
        let mut e = WeylElement::zero(self.n, caps);
        for _ in 0..terms {
            let sym = self.multi(2 * self.n, max_sym);
            let mut form = FormSet::empty();
            let fdeg = self.rng.gen_range(0..=max_form);
            for _ in 0..fdeg {
                let v = self.rng.gen_range(0..2 * self.n) as u16;
                if let Some((f, _)) = form.wedge_left(v) {
                    form = f;
                }
            }
            let key = TermKey {
                lam: self.rng.gen_range(0..=max_lam),
                sym,
                form,
                mom: self.multi(self.n, max_mom),
                jet: self.multi(self.n, max_jet),
            };
            e.insert(key, self.scalar());
        }
        e
    }

    /// Random vector-field jets on Q (polynomial components).
    pub fn vector_jets(&mut self, max_jet: u32, terms: usize) -> Vec<crate::multi::Poly> {
        (0..self.n)
            .map(|_| {
                let mut p = crate::multi::Poly::zero();
                for _ in 0..terms {
                    p.add_term(self.multi(self.n, max_jet), self.real_scalar());
                }
                p
            })
            .collect()
    }
}
