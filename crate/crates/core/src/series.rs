//! Truncated formal power series, moment (Cauchy) series and R-transforms.
//!
//! Every series carries its order, the number of known coefficients, and
//! binary operations refuse operands of different orders instead of silently
//! truncating the longer one.
//!
//! Moment series are handled through `h(w) = G(1/w) = Σ m_k w^{k+1}`, which
//! turns every transform identity into composition and reversion of ordinary
//! power series.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `Σ_{k < order} c_k w^k`, the tail being unknown.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerSeries<S: Scalar> {
    coeffs: Vec<S>,
}

impl<S: Scalar> PowerSeries<S> {
    pub fn new(coeffs: Vec<S>) -> Self {
        PowerSeries { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        PowerSeries { coeffs: vec![S::zero(); order] }
    }

    pub fn one(order: usize) -> Self {
        let mut s = Self::zero(order);
        if order > 0 {
            s.coeffs[0] = S::one();
        }
        s
    }

    /// The series `w`.
    pub fn identity(order: usize) -> Self {
        let mut s = Self::zero(order);
        if order > 1 {
            s.coeffs[1] = S::one();
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> &S {
        &self.coeffs[k]
    }

    pub fn into_coeffs(self) -> Vec<S> {
        self.coeffs
    }

    /// Keeps the first `order` coefficients; refuses to extend.
    pub fn truncate(&self, order: usize) -> Result<Self> {
        if order > self.order() {
            return Err(Error::InsufficientOrder { needed: order, available: self.order() });
        }
        Ok(PowerSeries { coeffs: self.coeffs[..order].to_vec() })
    }

    fn same_order(&self, other: &Self) -> Result<()> {
        if self.order() == other.order() {
            Ok(())
        } else {
            Err(Error::OrderMismatch { left: self.order(), right: other.order() })
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_order(other)?;
        Ok(PowerSeries { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.clone() + b.clone()).collect() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_order(other)?;
        Ok(PowerSeries { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.clone() - b.clone()).collect() })
    }

    pub fn scale(&self, c: &S) -> Self {
        PowerSeries { coeffs: self.coeffs.iter().map(|a| a.clone() * c.clone()).collect() }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_order(other)?;
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &Self) -> Self {
        let order = self.order().min(other.order());
        let mut out = vec![S::zero(); order];
        for (i, a) in self.coeffs.iter().enumerate().take(order) {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate().take(order - i) {
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        PowerSeries { coeffs: out }
    }

    /// Multiplicative inverse; needs an invertible constant term.
    pub fn inv(&self) -> Result<Self> {
        let order = self.order();
        if order == 0 {
            return Ok(self.clone());
        }
        let c0_inv = self.coeffs[0]
            .inv()
            .ok_or_else(|| Error::Domain("series with zero constant term is not invertible".into()))?;
        let mut out: Vec<S> = Vec::with_capacity(order);
        out.push(c0_inv.clone());
        for k in 1..order {
            let mut acc = S::zero();
            for j in 1..=k {
                acc = acc + self.coeffs[j].clone() * out[k - j].clone();
            }
            out.push(-(acc * c0_inv.clone()));
        }
        Ok(PowerSeries { coeffs: out })
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        self.same_order(other)?;
        Ok(self.mul_unchecked(&other.inv()?))
    }

    /// `self / w`, for a series with zero constant term; the order drops by one.
    pub fn shift_down(&self) -> Result<Self> {
        match self.coeffs.first() {
            None => Ok(self.clone()),
            Some(c) if c.is_zero() => Ok(PowerSeries { coeffs: self.coeffs[1..].to_vec() }),
            Some(_) => Err(Error::Domain("cannot divide by w: nonzero constant term".into())),
        }
    }

    /// `w · self`; the order grows by one.
    pub fn shift_up(&self) -> Self {
        let mut coeffs = Vec::with_capacity(self.order() + 1);
        coeffs.push(S::zero());
        coeffs.extend(self.coeffs.iter().cloned());
        PowerSeries { coeffs }
    }

    /// `self(g(w))` for `g` with zero constant term, same order.
    pub fn compose(&self, g: &Self) -> Result<Self> {
        self.same_order(g)?;
        if g.coeffs.first().is_some_and(|c| !c.is_zero()) {
            return Err(Error::Domain("inner series of a composition must vanish at 0".into()));
        }
        let order = self.order();
        let mut acc = PowerSeries::zero(order);
        for c in self.coeffs.iter().rev() {
            acc = acc.mul_unchecked(g);
            if order > 0 {
                acc.coeffs[0] = acc.coeffs[0].clone() + c.clone();
            }
        }
        Ok(acc)
    }

    /// Compositional inverse of a series `f_1 w + f_2 w² + …` with `f_1` invertible.
    pub fn reversion(&self) -> Result<Self> {
        let order = self.order();
        if order < 2 {
            return Ok(self.clone());
        }
        if !self.coeffs[0].is_zero() {
            return Err(Error::Domain("reversion needs a zero constant term".into()));
        }
        let f1_inv = self.coeffs[1].inv().ok_or_else(|| Error::Domain("reversion needs f_1 != 0".into()))?;
        let mut g = PowerSeries::zero(order);
        g.coeffs[1] = f1_inv.clone();
        for k in 2..order {
            // With g_k = 0, the coefficient of w^k in f(g) is what g_k must cancel.
            let fg = self.compose(&g)?;
            g.coeffs[k] = -(fg.coeffs[k].clone() * f1_inv.clone());
        }
        Ok(g)
    }

    pub fn eval_complex(&self, w: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * w + c.to_f64())
    }

    pub fn near(&self, other: &Self, tol: f64) -> bool {
        self.order() == other.order() && self.coeffs.iter().zip(&other.coeffs).all(|(a, b)| a.near(b, tol))
    }

    pub fn to_f64(&self) -> PowerSeries<f64> {
        PowerSeries { coeffs: self.coeffs.iter().map(S::to_f64).collect() }
    }
}

/// Moment data `m_0 = 1, m_1, …, m_K` of the expansion `G(z) = Σ m_k z^{-k-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CauchySeries<S: Scalar> {
    moments: Vec<S>,
}

impl<S: Scalar> CauchySeries<S> {
    /// Requires `m_0 = 1` (exactly in exact mode, within `1e-12` otherwise).
    pub fn new(moments: Vec<S>) -> Result<Self> {
        match moments.first() {
            Some(m0) if m0.near(&S::one(), 1e-12) => Ok(CauchySeries { moments }),
            Some(m0) => Err(Error::NotAMeasure(format!("m_0 = {m0}, expected 1"))),
            None => Err(Error::NotAMeasure("empty moment sequence".into())),
        }
    }

    /// Point mass at 0.
    pub fn dirac(order: usize) -> Self {
        let mut moments = vec![S::zero(); order + 1];
        moments[0] = S::one();
        CauchySeries { moments }
    }

    /// Truncation order `K` (index of the last known moment).
    pub fn order(&self) -> usize {
        self.moments.len() - 1
    }

    pub fn moments(&self) -> &[S] {
        &self.moments
    }

    pub fn moment(&self, k: usize) -> &S {
        &self.moments[k]
    }

    pub fn truncate(&self, order: usize) -> Result<Self> {
        if order > self.order() {
            return Err(Error::InsufficientOrder { needed: order, available: self.order() });
        }
        Ok(CauchySeries { moments: self.moments[..=order].to_vec() })
    }

    /// `M(w) = Σ_{k ≤ K} m_k w^k`, order `K + 1`.
    pub fn moment_series(&self) -> PowerSeries<S> {
        PowerSeries::new(self.moments.clone())
    }

    /// `h(w) = G(1/w) = w M(w)`, order `K + 2`.
    pub fn h_series(&self) -> PowerSeries<S> {
        self.moment_series().shift_up()
    }

    /// Law of `c·X`: `m_k ↦ c^k m_k`.
    pub fn dilate(&self, c: &S) -> Self {
        let mut factor = S::one();
        let moments = self
            .moments
            .iter()
            .map(|m| {
                let v = m.clone() * factor.clone();
                factor = factor.clone() * c.clone();
                v
            })
            .collect();
        CauchySeries { moments }
    }

    /// Partial sum `Σ_{k ≤ K} m_k z^{-k-1}`.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let w = 1.0 / z;
        w * self.moment_series().eval_complex(w)
    }

    /// Bound on the omitted tail for a law supported in `[-radius, radius]`,
    /// valid when `|z| > radius`.
    pub fn tail_bound(&self, z: Complex64, radius: f64) -> f64 {
        let q = radius / z.norm();
        if q >= 1.0 {
            return f64::INFINITY;
        }
        q.powi(self.order() as i32 + 1) / (z.norm() * (1.0 - q))
    }

    pub fn near(&self, other: &Self, tol: f64) -> bool {
        self.moments.len() == other.moments.len() && self.moments.iter().zip(&other.moments).all(|(a, b)| a.near(b, tol))
    }

    pub fn to_f64(&self) -> CauchySeries<f64> {
        CauchySeries { moments: self.moments.iter().map(S::to_f64).collect() }
    }

    fn same_order(&self, other: &Self) -> Result<()> {
        if self.order() == other.order() {
            Ok(())
        } else {
            Err(Error::OrderMismatch { left: self.order(), right: other.order() })
        }
    }
}

/// Truncated R-transform `R(z) = Σ_{k=1}^K r_k z^{k-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct RSeries<S: Scalar> {
    coeffs: Vec<S>,
}

impl<S: Scalar> RSeries<S> {
    /// Coefficients `r_1, …, r_K`.
    pub fn new(coeffs: Vec<S>) -> Self {
        RSeries { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    /// `r_k` for `1 ≤ k ≤ K`.
    pub fn r(&self, k: usize) -> &S {
        &self.coeffs[k - 1]
    }

    pub fn as_power_series(&self) -> PowerSeries<S> {
        PowerSeries::new(self.coeffs.clone())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Ok(RSeries { coeffs: self.as_power_series().add(&other.as_power_series())?.into_coeffs() })
    }

    pub fn scale(&self, c: &S) -> Self {
        RSeries { coeffs: self.coeffs.iter().map(|a| a.clone() * c.clone()).collect() }
    }

    pub fn near(&self, other: &Self, tol: f64) -> bool {
        self.as_power_series().near(&other.as_power_series(), tol)
    }
}

/// Free cumulants of a moment sequence: `R(g) = 1/h⁻¹(g) - 1/g`.
pub fn r_transform<S: Scalar>(g: &CauchySeries<S>) -> Result<RSeries<S>> {
    let k = g.order();
    // h⁻¹(g) = g·q(g), so R = (1/q - 1)/g.
    let hinv = g.h_series().reversion()?;
    let q = hinv.shift_down()?;
    let one = PowerSeries::one(q.order());
    let r = q.inv()?.sub(&one)?.shift_down()?;
    debug_assert_eq!(r.order(), k);
    Ok(RSeries { coeffs: r.into_coeffs() })
}

/// Moments from free cumulants: `h⁻¹(g) = g / (1 + g R(g))`.
pub fn from_r_transform<S: Scalar>(r: &RSeries<S>) -> Result<CauchySeries<S>> {
    let k = r.order();
    let g_r = r.as_power_series().shift_up();
    let denom = PowerSeries::one(k + 1).add(&g_r)?;
    let hinv = denom.inv()?.shift_up();
    let h = hinv.reversion()?;
    CauchySeries::new(h.shift_down()?.into_coeffs())
}

/// c-free R-transform `R^c` of a pair `(μ, ν)`, defined by
/// `G_μ(z) = 1 / (z - R^c(G_ν(z)))`.
pub fn cfree_r_transform<S: Scalar>(mu: &CauchySeries<S>, nu: &CauchySeries<S>) -> Result<RSeries<S>> {
    mu.same_order(nu)?;
    let k = mu.order();
    // R^c(h_ν(w)) = (1 - 1/M_μ(w)) / w =: H(w)
    let m = mu.moment_series();
    let h_big = PowerSeries::one(k + 1).sub(&m.inv()?)?.shift_down()?;
    let h_nu = nu.h_series().truncate(k)?;
    let rc = h_big.compose(&h_nu.reversion()?)?;
    Ok(RSeries { coeffs: rc.into_coeffs() })
}

/// Inverse of [`cfree_r_transform`]: `M_μ(w) = 1 / (1 - w R^c(h_ν(w)))`.
pub fn from_cfree_r_transform<S: Scalar>(rc: &RSeries<S>, nu: &CauchySeries<S>) -> Result<CauchySeries<S>> {
    let k = rc.order();
    if nu.order() != k {
        return Err(Error::OrderMismatch { left: k, right: nu.order() });
    }
    let h_nu = nu.h_series().truncate(k)?;
    let composed = rc.as_power_series().compose(&h_nu)?.shift_up();
    let m = PowerSeries::one(k + 1).sub(&composed)?.inv()?;
    CauchySeries::new(m.into_coeffs())
}
