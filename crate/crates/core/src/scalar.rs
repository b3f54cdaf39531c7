//! Exact Gaussian-rational scalars.
//!
//! The coefficient field of the whole engine: numbers of the form
//! `re + im·i` with arbitrary-precision rational parts, stored canonically
//! reduced. No floating point appears anywhere downstream, so every
//! identity check in the crate is an equality of [`Scalar`]s.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scalar {
    pub re: BigRational,
    pub im: BigRational,
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar {
            re: BigRational::zero(),
            im: BigRational::zero(),
        }
    }

    pub fn one() -> Self {
        Scalar {
            re: BigRational::one(),
            im: BigRational::zero(),
        }
    }

    /// The imaginary unit.
    pub fn i() -> Self {
        Scalar {
            re: BigRational::zero(),
            im: BigRational::one(),
        }
    }

    pub fn from_int(n: i64) -> Self {
        Scalar {
            re: BigRational::from_integer(BigInt::from(n)),
            im: BigRational::zero(),
        }
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Scalar {
            re: BigRational::new(BigInt::from(num), BigInt::from(den)),
            im: BigRational::zero(),
        }
    }

    pub fn from_parts(re: BigRational, im: BigRational) -> Self {
        Scalar { re, im }
    }

    /// `num/den * i`.
    pub fn imag_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Scalar {
            re: BigRational::zero(),
            im: BigRational::new(BigInt::from(num), BigInt::from(den)),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Scalar {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }

    pub fn inv(&self) -> Self {
        assert!(!self.is_zero(), "division by zero scalar");
        let norm = &self.re * &self.re + &self.im * &self.im;
        Scalar {
            re: &self.re / &norm,
            im: -(&self.im / &norm),
        }
    }

    pub fn pow(&self, mut e: u32) -> Self {
        let mut acc = Scalar::one();
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        acc
    }

    /// Multiply by an integer without allocating a full scalar.
    pub fn scale_int(&self, n: i64) -> Self {
        let f = BigRational::from_integer(BigInt::from(n));
        Scalar {
            re: &self.re * &f,
            im: &self.im * &f,
        }
    }

    pub fn scale_ratio(&self, num: i64, den: i64) -> Self {
        let f = BigRational::new(BigInt::from(num), BigInt::from(den));
        Scalar {
            re: &self.re * &f,
            im: &self.im * &f,
        }
    }

    /// `i^e` for integer exponent (negative allowed).
    pub fn i_pow(e: i64) -> Self {
        match e.rem_euclid(4) {
            0 => Scalar::one(),
            1 => Scalar::i(),
            2 => -Scalar::one(),
            _ => -Scalar::i(),
        }
    }
}

fn fmt_rat(r: &BigRational, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if r.denom().is_one() {
        write!(f, "{}", r.numer())
    } else {
        write!(f, "{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            return fmt_rat(&self.re, f);
        }
        if self.re.is_zero() {
            fmt_rat(&self.im, f)?;
            return write!(f, "*i");
        }
        fmt_rat(&self.re, f)?;
        if self.im.is_negative() {
            write!(f, "-")?;
            fmt_rat(&(-self.im.clone()), f)?;
        } else {
            write!(f, "+")?;
            fmt_rat(&self.im, f)?;
        }
        write!(f, "*i")
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

fn parse_rat(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).ok()?;
        let d = BigInt::from_str(d.trim()).ok()?;
        if d.is_zero() {
            return None;
        }
        Some(BigRational::new(n, d))
    } else {
        let n = BigInt::from_str(s).ok()?;
        Some(BigRational::from_integer(n))
    }
}

impl FromStr for Scalar {
    type Err = String;

    /// Parses the canonical rendering `a/b`, `c/d*i` or `a/b±c/d*i`
    /// (denominators optional).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || format!("malformed scalar `{s}`");
        if let Some(body) = s.strip_suffix("*i") {
            // Split re and im on the last +/- that is not a leading sign
            // and not inside the numerator/denominator of im.
            let mut split = None;
            for (idx, ch) in body.char_indices().skip(1) {
                if (ch == '+' || ch == '-') && !body[..idx].ends_with('/') {
                    split = Some(idx);
                }
            }
            match split {
                Some(idx) => {
                    let re = parse_rat(&body[..idx]).ok_or_else(bad)?;
                    let sign = if body[idx..].starts_with('-') { -1 } else { 1 };
                    let im = parse_rat(&body[idx + 1..]).ok_or_else(bad)?;
                    let im = if sign < 0 { -im } else { im };
                    Ok(Scalar::from_parts(re, im))
                }
                None => {
                    let im = parse_rat(body).ok_or_else(bad)?;
                    Ok(Scalar::from_parts(BigRational::zero(), im))
                }
            }
        } else {
            let re = parse_rat(s).ok_or_else(bad)?;
            Ok(Scalar::from_parts(re, BigRational::zero()))
        }
    }
}

impl Add for &Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        Scalar {
            re: &self.re + &rhs.re,
            im: &self.im + &rhs.im,
        }
    }
}

impl Sub for &Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        Scalar {
            re: &self.re - &rhs.re,
            im: &self.im - &rhs.im,
        }
    }
}

impl Mul for &Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        Scalar {
            re: &self.re * &rhs.re - &self.im * &rhs.im,
            im: &self.re * &rhs.im + &self.im * &rhs.re,
        }
    }
}

impl Div for &Scalar {
    type Output = Scalar;
    fn div(self, rhs: &Scalar) -> Scalar {
        self * &rhs.inv()
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar {
            re: -self.re,
            im: -self.im,
        }
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar {
            re: -self.re.clone(),
            im: -self.im.clone(),
        }
    }
}

macro_rules! forward_owned {
    ($trait:ident, $method:ident) => {
        impl $trait for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                (&self).$method(rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl AddAssign<&Scalar> for Scalar {
    fn add_assign(&mut self, rhs: &Scalar) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl SubAssign<&Scalar> for Scalar {
    fn sub_assign(&mut self, rhs: &Scalar) {
        self.re -= &rhs.re;
        self.im -= &rhs.im;
    }
}

impl MulAssign<&Scalar> for Scalar {
    fn mul_assign(&mut self, rhs: &Scalar) {
        let v = &*self * rhs;
        *self = v;
    }
}

/// n! as a scalar.
pub fn factorial(n: u32) -> Scalar {
    let mut acc = BigInt::one();
    for k in 2..=n as u64 {
        acc *= BigInt::from(k);
    }
    Scalar::from_parts(BigRational::from_integer(acc), BigRational::zero())
}

/// Binomial coefficient as a scalar.
pub fn binomial(n: u32, k: u32) -> Scalar {
    if k > n {
        return Scalar::zero();
    }
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for j in 0..k as u64 {
        num *= BigInt::from(n as u64 - j);
        den *= BigInt::from(j + 1);
    }
    Scalar::from_parts(BigRational::new(num, den), BigRational::zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_axioms_spotcheck() {
        let a = Scalar::from_ratio(3, 2);
        let b = &a + &Scalar::imag_ratio(1, 3);
        let c = &b * &b.inv();
        assert_eq!(c, Scalar::one());
        assert_eq!(&b * &b.conj(), {
            let n = &b.re * &b.re + &b.im * &b.im;
            Scalar::from_parts(n, BigRational::zero())
        });
    }

    #[test]
    fn i_powers() {
        assert_eq!(Scalar::i_pow(2), -Scalar::one());
        assert_eq!(Scalar::i_pow(-1), -Scalar::i());
        assert_eq!(&Scalar::i() * &Scalar::i_pow(-1), Scalar::one());
    }

    #[test]
    fn display_roundtrip() {
        for s in [
            Scalar::from_ratio(-7, 3),
            Scalar::imag_ratio(1, 2),
            &Scalar::from_int(4) + &Scalar::imag_ratio(-5, 6),
            Scalar::zero(),
        ] {
            let text = s.to_string();
            let back: Scalar = text.parse().unwrap();
            assert_eq!(back, s, "roundtrip of `{text}`");
        }
    }

    #[test]
    fn factorial_binomial() {
        assert_eq!(factorial(5), Scalar::from_int(120));
        assert_eq!(binomial(7, 3), Scalar::from_int(35));
        assert_eq!(binomial(3, 5), Scalar::zero());
    }
}
