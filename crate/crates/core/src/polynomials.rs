//! Chebyshev polynomials of the second kind, the orthonormal families `u_k`
//! (scaled semicircle) and `v_k` (t-gaussian), the relations between them,
//! and the identity turning run-encoded words into canonical basis vectors.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::fock::{DeformParams, FockVector, Word};
use crate::operators::{GaussianFamily, SparseOperator};
use crate::scalar::{ratio, Scalar};

/// Polynomial with coefficients in ascending degree; trailing zeros are trimmed.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial<S: Scalar> {
    coeffs: Vec<S>,
}

impl<S: Scalar> Polynomial<S> {
    pub fn new(mut coeffs: Vec<S>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: S) -> Self {
        Self::new(vec![c])
    }

    pub fn one() -> Self {
        Self::constant(S::one())
    }

    /// The monomial `X`.
    pub fn x() -> Self {
        Self::monomial(1, S::one())
    }

    pub fn monomial(degree: usize, c: S) -> Self {
        let mut coeffs = vec![S::zero(); degree + 1];
        coeffs[degree] = c;
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    /// Coefficient of `X^k` (zero beyond the degree).
    pub fn coeff(&self, k: usize) -> S {
        self.coeffs.get(k).cloned().unwrap_or_else(S::zero)
    }

    /// Degree, with `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn scale(&self, c: &S) -> Self {
        Self::new(self.coeffs.iter().map(|a| a.clone() * c.clone()).collect())
    }

    pub fn eval(&self, x: &S) -> S {
        self.coeffs.iter().rev().fold(S::zero(), |acc, c| acc * x.clone() + c.clone())
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c.to_f64())
    }

    /// `∫ P dμ` from the moment sequence `m_k` of `μ`.
    pub fn integrate(&self, moments: &[S]) -> Result<S> {
        if self.coeffs.len() > moments.len() {
            return Err(Error::InsufficientOrder { needed: self.coeffs.len() - 1, available: moments.len().saturating_sub(1) });
        }
        Ok(self.coeffs.iter().zip(moments).fold(S::zero(), |acc, (c, m)| acc + c.clone() * m.clone()))
    }

    /// Largest coefficient discrepancy, as a float.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let len = self.coeffs.len().max(other.coeffs.len());
        (0..len).map(|k| (self.coeff(k) - other.coeff(k)).to_f64().abs()).fold(0.0, f64::max)
    }

    pub fn near(&self, other: &Self, tol: f64) -> bool {
        let len = self.coeffs.len().max(other.coeffs.len());
        (0..len).all(|k| self.coeff(k).near(&other.coeff(k), tol))
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Polynomial<T> {
        Polynomial::new(self.coeffs.iter().map(f).collect())
    }

    /// `P(A) v` by Horner's rule over exact (reach-checked) sparse application.
    pub fn apply(&self, op: &SparseOperator<S>, v: &FockVector<S>) -> Result<FockVector<S>> {
        let Some(d) = self.degree() else {
            return Ok(v.scale(&S::zero()));
        };
        let mut acc = v.scale(&self.coeffs[d]);
        for k in (0..d).rev() {
            acc = op.apply(&acc)?;
            acc.axpy(&self.coeffs[k], v)?;
        }
        Ok(acc)
    }
}

impl<S: Scalar> Add for Polynomial<S> {
    type Output = Polynomial<S>;
    fn add(self, rhs: Self) -> Self {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..len).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl<S: Scalar> Sub for Polynomial<S> {
    type Output = Polynomial<S>;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<S: Scalar> Neg for Polynomial<S> {
    type Output = Polynomial<S>;
    fn neg(self) -> Self {
        Polynomial::new(self.coeffs.into_iter().map(|c| -c).collect())
    }
}

impl<S: Scalar> Mul for Polynomial<S> {
    type Output = Polynomial<S>;
    fn mul(self, rhs: Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![S::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        Polynomial::new(out)
    }
}

impl<S: Scalar> fmt::Display for Polynomial<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "({c})")?,
                1 => write!(f, "({c})X")?,
                _ => write!(f, "({c})X^{k}")?,
            }
        }
        Ok(())
    }
}

/// Chebyshev polynomial of the second kind `U_k(y)`.
pub fn chebyshev_u<S: Scalar>(k: usize) -> Polynomial<S> {
    let two_y = Polynomial::monomial(1, S::from_i64(2));
    let mut prev = Polynomial::one();
    if k == 0 {
        return prev;
    }
    let mut cur = two_y.clone();
    for _ in 1..k {
        let next = two_y.clone() * cur.clone() - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `u_k(X) = U_k(X / (2√t))`, orthonormal for the semicircle of variance `t`.
pub fn u_poly<S: Scalar>(k: usize, params: &DeformParams<S>) -> Polynomial<S> {
    let scale = params.inv_sqrt_t().clone() * S::from_ratio(&ratio(1, 2));
    let mut factor = S::one();
    let coeffs = chebyshev_u::<S>(k)
        .coeffs()
        .iter()
        .map(|c| {
            let v = c.clone() * factor.clone();
            factor = factor.clone() * scale.clone();
            v
        })
        .collect();
    Polynomial::new(coeffs)
}

/// Monic orthogonal polynomials of the t-gaussian law:
/// `P_0 = 1`, `P_1 = X`, `P_2 = X P_1 - P_0`, `P_{k+1} = X P_k - t P_{k-1}`.
pub fn monic_p<S: Scalar>(k: usize, params: &DeformParams<S>) -> Polynomial<S> {
    let x = Polynomial::x();
    let mut prev = Polynomial::one();
    if k == 0 {
        return prev;
    }
    let mut cur = x.clone();
    for j in 1..k {
        let b = if j == 1 { S::one() } else { params.t().clone() };
        let next = x.clone() * cur.clone() - prev.scale(&b);
        prev = cur;
        cur = next;
    }
    cur
}

/// Orthonormal polynomials `v_k` of the t-gaussian law, from the three-term
/// recursion: `v_k = P_k / √t^{k-1}` for `k ≥ 1`.
pub fn v_poly<S: Scalar>(k: usize, params: &DeformParams<S>) -> Polynomial<S> {
    let p = monic_p(k, params);
    if k <= 1 {
        return p;
    }
    p.scale(&params.inv_sqrt_t().pow(k - 1))
}

/// `v_k` through `v_k = √t (u_k - α u_{k-2})`.
pub fn v_poly_via_relations<S: Scalar>(k: usize, params: &DeformParams<S>) -> Polynomial<S> {
    match k {
        0 => Polynomial::one(),
        1 => Polynomial::x(),
        _ => (u_poly(k, params) - u_poly(k - 2, params).scale(params.alpha())).scale(params.sqrt_t()),
    }
}

/// Outcome of checking the relations between the `u` and `v` families.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationsReport {
    pub up_to: usize,
    pub identities_checked: usize,
    /// Largest coefficient discrepancy over all identities.
    pub max_discrepancy: f64,
    /// Identities that failed (exactly in exact mode, within `tol` in float mode).
    pub failures: Vec<String>,
}

impl RelationsReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks, for all degrees `≤ up_to`:
/// `v_k = √t (u_k - α u_{k-2})`,
/// `u_{2m} = α^m v_0 + (1/√t) Σ_{k=1}^m α^{m-k} v_{2k}`,
/// `u_{2m+1} = (1/√t) Σ_{k=0}^m α^{m-k} v_{2k+1}`,
/// with `v_k` taken from the recursion.
pub fn relations_r_check<S: Scalar>(params: &DeformParams<S>, up_to: usize, tol: f64) -> Result<RelationsReport> {
    if up_to < 2 {
        return Err(Error::InvalidParameter("relations need up_to >= 2".into()));
    }
    let v: Vec<Polynomial<S>> = (0..=up_to).map(|k| v_poly(k, params)).collect();
    let u: Vec<Polynomial<S>> = (0..=up_to).map(|k| u_poly(k, params)).collect();
    let alpha = params.alpha();
    let inv = params.inv_sqrt_t();
    let mut report = RelationsReport { up_to, identities_checked: 0, max_discrepancy: 0.0, failures: Vec::new() };
    let mut record = |name: String, lhs: &Polynomial<S>, rhs: &Polynomial<S>| {
        let d = lhs.max_abs_diff(rhs);
        report.identities_checked += 1;
        report.max_discrepancy = report.max_discrepancy.max(d);
        if !lhs.near(rhs, tol) {
            report.failures.push(name);
        }
    };
    for k in 2..=up_to {
        let rhs = (u[k].clone() - u[k - 2].scale(alpha)).scale(params.sqrt_t());
        record(format!("v_{k} = sqrt(t)(u_{k} - alpha u_{})", k - 2), &v[k], &rhs);
    }
    for k in 0..=up_to {
        let m = k / 2;
        let mut rhs = Polynomial::zero();
        if k % 2 == 0 {
            rhs = rhs + v[0].scale(&alpha.pow(m));
            for j in 1..=m {
                rhs = rhs + v[2 * j].scale(&(alpha.pow(m - j) * inv.clone()));
            }
        } else {
            for j in 0..=m {
                rhs = rhs + v[2 * j + 1].scale(&(alpha.pow(m - j) * inv.clone()));
            }
        }
        record(format!("u_{k} expanded in v"), &u[k], &rhs);
    }
    Ok(report)
}

/// Builds `u_{a_1}(s_{i_1}) ⋯ u_{a_{l-1}}(s_{i_{l-1}}) v_{a_l}(s_{i_l}) Ω` for
/// the run encoding `i_1^{a_1} ⋯ i_l^{a_l}` of `word`, and checks that it is `e_word`.
pub fn ident_vector<S: Scalar>(word: &Word, family: &GaussianFamily<S>) -> Result<FockVector<S>> {
    let space = family.space();
    let target = FockVector::basis(space, word)?;
    let out = word_polynomial_vector(&word.runs(), family)?;
    if !out.near(&target, 1e-12) {
        return Err(Error::IdentityFailed(format!("u/v word product does not reproduce e_{word}")));
    }
    Ok(out)
}

/// `u_{a_1}(s_{i_1}) ⋯ u_{a_{l-1}}(s_{i_{l-1}}) v_{a_l}(s_{i_l}) Ω` for the given runs.
pub fn word_polynomial_vector<S: Scalar>(runs: &[(usize, usize)], family: &GaussianFamily<S>) -> Result<FockVector<S>> {
    let params = family.params();
    let mut out = family.vacuum();
    for (pos, &(letter, a)) in runs.iter().enumerate().rev() {
        let p = if pos + 1 == runs.len() { v_poly(a, params) } else { u_poly(a, params) };
        out = p.apply(family.s(letter)?, &out)?;
    }
    Ok(out)
}

/// Gram matrix `⟨v_j(s) Ω, v_k(s) Ω⟩` for `j, k ≤ k_max`, single generator `s_1`.
pub fn v_gram<S: Scalar>(family: &GaussianFamily<S>, k_max: usize) -> Result<Vec<Vec<S>>> {
    let params = family.params();
    let s = family.s(1)?;
    let omega = family.vacuum();
    let vecs: Vec<FockVector<S>> = (0..=k_max).map(|k| v_poly(k, params).apply(s, &omega)).collect::<Result<_>>()?;
    vecs.iter().map(|a| vecs.iter().map(|b| a.inner(b)).collect()).collect()
}

/// Rational coefficients of a polynomial with no `√t` parts.
pub fn rational_coeffs(p: &Polynomial<crate::scalar::Surd>) -> Option<Vec<BigRational>> {
    p.coeffs().iter().map(|c| c.as_rational().cloned()).collect()
}
