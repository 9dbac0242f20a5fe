//! Scalar carriers: double precision floats and the exact quadratic field
//! `Q(√t)` for a fixed rational `t`.
//!
//! Every matrix entry of the operators in this crate lies in the ring generated
//! by `{0, 1, √t}`, so exact mode represents numbers as `a + b√t` with rational
//! `a`, `b`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
pub use num_traits::{One, Zero};
use num_traits::{Signed, ToPrimitive};

use crate::error::{Error, Result};

/// Field of scalars used by vectors, operators, polynomials and series.
pub trait Scalar:
    Clone
    + fmt::Debug
    + fmt::Display
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Zero
    + One
{
    /// `true` when arithmetic is exact.
    const EXACT: bool;

    fn from_ratio(r: &BigRational) -> Self;

    fn from_i64(v: i64) -> Self {
        Self::from_ratio(&BigRational::from_integer(BigInt::from(v)))
    }

    fn to_f64(&self) -> f64;

    /// Multiplicative inverse, `None` for zero.
    fn inv(&self) -> Option<Self>;

    /// Square root when it is representable in the carrier.
    fn sqrt(&self) -> Option<Self>;

    /// Equality up to `tol` (relative for large values); exact equality in exact mode.
    fn near(&self, other: &Self, tol: f64) -> bool;

    /// Strict positivity; exact in exact mode.
    fn is_positive(&self) -> bool;

    fn div(&self, other: &Self) -> Option<Self> {
        other.inv().map(|i| self.clone() * i)
    }

    fn pow(&self, k: usize) -> Self {
        let mut acc = Self::one();
        for _ in 0..k {
            acc = acc * self.clone();
        }
        acc
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_ratio(r: &BigRational) -> Self {
        r.to_f64().unwrap_or(f64::NAN)
    }

    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn inv(&self) -> Option<Self> {
        if *self == 0.0 {
            None
        } else {
            Some(1.0 / self)
        }
    }

    fn sqrt(&self) -> Option<Self> {
        if *self >= 0.0 {
            Some(f64::sqrt(*self))
        } else {
            None
        }
    }

    fn near(&self, other: &Self, tol: f64) -> bool {
        let scale = 1.0_f64.max(self.abs()).max(other.abs());
        (self - other).abs() <= tol * scale
    }

    fn is_positive(&self) -> bool {
        *self > 0.0
    }

    fn pow(&self, k: usize) -> Self {
        self.powi(k as i32)
    }
}

/// The symbol `√t` of an exact field, with its rational square root when `t`
/// happens to be a perfect square.
#[derive(Debug)]
pub struct Radicand {
    t: BigRational,
    root: Option<BigRational>,
    sqrt_f64: f64,
}

impl Radicand {
    pub fn new(t: BigRational) -> Result<Arc<Self>> {
        if !t.is_positive() {
            return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
        }
        let root = rational_sqrt(&t);
        let sqrt_f64 = t.to_f64().unwrap_or(f64::NAN).sqrt();
        Ok(Arc::new(Radicand { t, root, sqrt_f64 }))
    }

    pub fn t(&self) -> &BigRational {
        &self.t
    }

    /// `true` when `√t` is itself rational.
    pub fn is_perfect_square(&self) -> bool {
        self.root.is_some()
    }
}

impl PartialEq for Radicand {
    fn eq(&self, other: &Self) -> bool {
        self.t == other.t
    }
}

/// Exact element `a + b√t` of `Q(√t)`.
///
/// Pure rationals may omit the radicand; any element with `b ≠ 0` carries it.
/// When `t` is a perfect square the irrational part is folded into `a`, so
/// equality is structural.
#[derive(Clone, Debug)]
pub struct Surd {
    rational: BigRational,
    irrational: BigRational,
    radicand: Option<Arc<Radicand>>,
}

impl Surd {
    pub fn rational(r: BigRational) -> Self {
        Surd { rational: r, irrational: BigRational::zero(), radicand: None }
    }

    pub fn new(a: BigRational, b: BigRational, radicand: &Arc<Radicand>) -> Self {
        let mut s = Surd { rational: a, irrational: b, radicand: Some(radicand.clone()) };
        s.normalize();
        s
    }

    /// The element `√t`.
    pub fn sqrt_t(radicand: &Arc<Radicand>) -> Self {
        Surd::new(BigRational::zero(), BigRational::one(), radicand)
    }

    pub fn rational_part(&self) -> &BigRational {
        &self.rational
    }

    pub fn irrational_part(&self) -> &BigRational {
        &self.irrational
    }

    pub fn radicand(&self) -> Option<&Arc<Radicand>> {
        self.radicand.as_ref()
    }

    /// The value as a rational, if its `√t` component vanishes.
    pub fn as_rational(&self) -> Option<&BigRational> {
        self.irrational.is_zero().then_some(&self.rational)
    }

    fn normalize(&mut self) {
        if let Some(rad) = &self.radicand {
            if let Some(root) = &rad.root {
                if !self.irrational.is_zero() {
                    let folded = std::mem::replace(&mut self.irrational, BigRational::zero());
                    self.rational += folded * root;
                }
            }
        }
    }

    fn merged(a: &Option<Arc<Radicand>>, b: &Option<Arc<Radicand>>) -> Option<Arc<Radicand>> {
        match (a, b) {
            (Some(x), Some(y)) => {
                assert!(
                    Arc::ptr_eq(x, y) || x.t == y.t,
                    "mixing exact scalars over different fields Q(√{}) and Q(√{})",
                    x.t,
                    y.t
                );
                Some(x.clone())
            }
            (Some(x), None) | (None, Some(x)) => Some(x.clone()),
            (None, None) => None,
        }
    }
}

impl PartialEq for Surd {
    fn eq(&self, other: &Self) -> bool {
        self.rational == other.rational && self.irrational == other.irrational
    }
}

impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.irrational.is_zero() {
            write!(f, "{}", self.rational)
        } else if self.rational.is_zero() {
            write!(f, "{}*sqrt(t)", self.irrational)
        } else {
            write!(f, "{}+{}*sqrt(t)", self.rational, self.irrational)
        }
    }
}

impl Add for Surd {
    type Output = Surd;
    fn add(self, rhs: Surd) -> Surd {
        Surd {
            radicand: Surd::merged(&self.radicand, &rhs.radicand),
            rational: self.rational + rhs.rational,
            irrational: self.irrational + rhs.irrational,
        }
    }
}

impl Sub for Surd {
    type Output = Surd;
    fn sub(self, rhs: Surd) -> Surd {
        Surd {
            radicand: Surd::merged(&self.radicand, &rhs.radicand),
            rational: self.rational - rhs.rational,
            irrational: self.irrational - rhs.irrational,
        }
    }
}

impl Mul for Surd {
    type Output = Surd;
    fn mul(self, rhs: Surd) -> Surd {
        let radicand = Surd::merged(&self.radicand, &rhs.radicand);
        let cross = &self.irrational * &rhs.irrational;
        let mut rational = &self.rational * &rhs.rational;
        if !cross.is_zero() {
            let rad = radicand.as_ref().expect("irrational part without radicand");
            rational += cross * &rad.t;
        }
        let irrational = &self.rational * &rhs.irrational + &self.irrational * &rhs.rational;
        Surd { rational, irrational, radicand }
    }
}

impl Neg for Surd {
    type Output = Surd;
    fn neg(self) -> Surd {
        Surd { rational: -self.rational, irrational: -self.irrational, radicand: self.radicand }
    }
}

impl Zero for Surd {
    fn zero() -> Self {
        Surd::rational(BigRational::zero())
    }
    fn is_zero(&self) -> bool {
        self.rational.is_zero() && self.irrational.is_zero()
    }
}

impl One for Surd {
    fn one() -> Self {
        Surd::rational(BigRational::one())
    }
}

impl Scalar for Surd {
    const EXACT: bool = true;

    fn from_ratio(r: &BigRational) -> Self {
        Surd::rational(r.clone())
    }

    fn to_f64(&self) -> f64 {
        let a = self.rational.to_f64().unwrap_or(f64::NAN);
        if self.irrational.is_zero() {
            return a;
        }
        let rad = self.radicand.as_ref().expect("irrational part without radicand");
        a + self.irrational.to_f64().unwrap_or(f64::NAN) * rad.sqrt_f64
    }

    fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        if self.irrational.is_zero() {
            return Some(Surd {
                rational: self.rational.recip(),
                irrational: BigRational::zero(),
                radicand: self.radicand.clone(),
            });
        }
        let rad = self.radicand.as_ref().expect("irrational part without radicand");
        let norm = &self.rational * &self.rational - &self.irrational * &self.irrational * &rad.t;
        Some(Surd {
            rational: &self.rational / &norm,
            irrational: -(&self.irrational / &norm),
            radicand: self.radicand.clone(),
        })
    }

    fn sqrt(&self) -> Option<Self> {
        if !self.irrational.is_zero() || self.rational.is_negative() {
            return None;
        }
        if self.rational.is_zero() {
            return Some(self.clone());
        }
        if let Some(root) = rational_sqrt(&self.rational) {
            return Some(Surd { rational: root, irrational: BigRational::zero(), radicand: self.radicand.clone() });
        }
        let rad = self.radicand.as_ref()?;
        let q = rational_sqrt(&(&self.rational / &rad.t))?;
        Some(Surd::new(BigRational::zero(), q, rad))
    }

    fn near(&self, other: &Self, _tol: f64) -> bool {
        self == other
    }

    fn is_positive(&self) -> bool {
        let a = &self.rational;
        let b = &self.irrational;
        match (a.is_positive(), a.is_zero(), b.is_positive(), b.is_zero()) {
            (_, _, _, true) => a.is_positive(),
            (_, true, _, _) => b.is_positive(),
            (true, _, true, _) => true,
            (false, _, false, _) => false,
            _ => {
                let t = &self.radicand.as_ref().expect("irrational part without radicand").t;
                let a2 = a * a;
                let b2t = b * b * t;
                if a.is_positive() {
                    a2 > b2t
                } else {
                    b2t > a2
                }
            }
        }
    }
}

/// Exact square root of a non-negative rational, if it is a perfect square.
pub fn rational_sqrt(r: &BigRational) -> Option<BigRational> {
    if r.is_negative() {
        return None;
    }
    let num = r.numer();
    let den = r.denom();
    let sn = num.sqrt();
    let sd = den.sqrt();
    (&sn * &sn == *num && &sd * &sd == *den).then(|| BigRational::new(sn, sd))
}

/// Shorthand for the rational `num/den`.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses `"p/q"`, an integer, or a finite decimal such as `"0.4"` or `"2.5e-1"`
/// into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || Error::InvalidParameter(format!("cannot parse {s:?} as a rational"));
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p = BigInt::from_str(p.trim()).map_err(|_| bad())?;
        let q = BigInt::from_str(q.trim()).map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(p, q));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if frac_part.chars().any(|c| !c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer = BigInt::from_str(&digits).map_err(|_| bad())?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let value = if scale >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(t: BigRational) -> Arc<Radicand> {
        Radicand::new(t).unwrap()
    }

    #[test]
    fn sqrt_t_squares_to_t() {
        let rad = field(ratio(2, 3));
        let s = Surd::sqrt_t(&rad);
        assert_eq!(s.clone() * s, Surd::rational(ratio(2, 3)));
    }

    #[test]
    fn perfect_square_folds() {
        let rad = field(ratio(1, 4));
        let s = Surd::sqrt_t(&rad);
        assert_eq!(s.as_rational(), Some(&ratio(1, 2)));
    }

    #[test]
    fn inverse_and_sign() {
        let rad = field(ratio(1, 2));
        let x = Surd::new(ratio(1, 1), ratio(-3, 1), &rad);
        assert!(!x.is_positive());
        let y = Surd::new(ratio(3, 1), ratio(-2, 1), &rad);
        assert!(y.is_positive());
        assert_eq!(x.clone() * x.inv().unwrap(), Surd::one());
    }

    #[test]
    fn sqrt_of_powers_of_t() {
        let rad = field(ratio(2, 3));
        let t = Surd::new(ratio(2, 3), ratio(0, 1), &rad);
        let r = t.pow(3).sqrt().unwrap();
        assert_eq!(r.clone() * r, t.pow(3));
        assert!(Surd::rational(ratio(2, 1)).sqrt().is_none());
    }

    #[test]
    fn parses_rationals() {
        assert_eq!(parse_rational("0.4").unwrap(), ratio(2, 5));
        assert_eq!(parse_rational("2/3").unwrap(), ratio(2, 3));
        assert_eq!(parse_rational("-3").unwrap(), ratio(-3, 1));
        assert_eq!(parse_rational("2.5e-1").unwrap(), ratio(1, 4));
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1/0").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn conjugate_product_is_rational(a in -50i64..50, b in -50i64..50, c in 1i64..30, d in 1i64..30, tn in 1i64..9, td in 1i64..9) {
                let rad = Radicand::new(ratio(tn, td)).unwrap();
                let x = Surd::new(ratio(a, c), ratio(b, d), &rad);
                let xbar = Surd::new(ratio(a, c), ratio(-b, d), &rad);
                prop_assert!((x * xbar).irrational_part().is_zero());
            }

            #[test]
            fn exact_matches_float(a in -20i64..20, b in -20i64..20, tn in 1i64..9) {
                let rad = Radicand::new(ratio(tn, 3)).unwrap();
                let x = Surd::new(ratio(a, 7), ratio(b, 5), &rad);
                let y = Surd::new(ratio(b, 3), ratio(a, 2), &rad);
                let tf = (tn as f64 / 3.0).sqrt();
                let xf = a as f64 / 7.0 + b as f64 / 5.0 * tf;
                let yf = b as f64 / 3.0 + a as f64 / 2.0 * tf;
                prop_assert!(((x * y).to_f64() - xf * yf).abs() < 1e-9 * (1.0 + (xf * yf).abs()));
            }
        }
    }
}
