//! Structural witnesses of the two regimes: the regime classifier, the atom
//! eigenvectors `ξ_i` and `ζ`, the kernel recursion behind the uniqueness of
//! `ζ`, the conjugation `S`, the Khinchine operator `T_k` and the large-`n`
//! limit of `(1/k) Σ (s_i)²`.

use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{DeformParams, FockSpace, FockVector, Word};
use crate::operators::{c_operator, operator_norm_estimate, GaussianFamily, SparseOperator};
use crate::polynomials::{u_poly, Polynomial};
use crate::scalar::Scalar;
use crate::spectra::{c_interval, BOUNDARY_SLACK};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    /// `Γ_{t,n}` is the free group factor.
    FreeFactor,
    /// `Γ_{t,n} = B(ℓ₂) ⊕ Γ_{1,n}`.
    DirectSum,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::FreeFactor => "FREE_FACTOR",
            Regime::DirectSum => "DIRECT_SUM",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeVerdict {
    pub regime: Regime,
    /// Distance to the nearest endpoint; positive inside the interval, negative outside.
    pub boundary_distance: f64,
    pub interval: (f64, f64),
}

fn check_regime_input(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(
            "regime classification needs n >= 2; for n = 1 the law of c^t has an atom iff t < 1/2".into(),
        ));
    }
    Ok(())
}

fn signed_distance(t: f64, (lo, hi): (f64, f64)) -> f64 {
    let d = (t - lo).abs().min((hi - t).abs());
    if t < lo || t > hi {
        -d
    } else {
        d
    }
}

/// Classifies by the sign of `nα² - 1` (the interval is where `nα² ≤ 1`).
pub fn classify_regime(t: f64, n: usize) -> Result<RegimeVerdict> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    check_regime_input(n)?;
    let alpha = 1.0 / t - 1.0;
    let nf = n as f64;
    let regime = if nf * alpha * alpha > 1.0 + 10.0 * BOUNDARY_SLACK { Regime::DirectSum } else { Regime::FreeFactor };
    let interval = c_interval(n);
    let mut boundary_distance = signed_distance(t, interval);
    if regime == Regime::FreeFactor && boundary_distance < 0.0 {
        boundary_distance = 0.0;
    }
    Ok(RegimeVerdict { regime, boundary_distance, interval })
}

/// Exact classification for rational `t`; endpoints are hit exactly when `nα² = 1`.
pub fn classify_regime_exact(t: &BigRational, n: usize) -> Result<RegimeVerdict> {
    if !t.is_positive() {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    check_regime_input(n)?;
    let alpha = t.recip() - BigRational::one();
    let key = BigRational::from_integer(n.into()) * &alpha * &alpha - BigRational::one();
    let interval = c_interval(n);
    let regime = if key.is_positive() { Regime::DirectSum } else { Regime::FreeFactor };
    let boundary_distance = if key.is_zero() { 0.0 } else { signed_distance(t.to_f64().unwrap_or(f64::NAN), interval) };
    Ok(RegimeVerdict { regime, boundary_distance, interval })
}

fn vector_from_terms<S: Scalar>(space: &Arc<FockSpace<S>>, terms: &[(Word, S)]) -> Result<FockVector<S>> {
    let mut coeffs = vec![S::zero(); space.dim()];
    for (w, c) in terms {
        let idx = space.index_of(w)?;
        coeffs[idx] = coeffs[idx].clone() + c.clone();
    }
    FockVector::from_coeffs(space, coeffs)
}

fn relative_norm(res: f64, base: f64) -> f64 {
    if base > 0.0 {
        res / base
    } else {
        res
    }
}

/// The eigenvector `ξ_i = Ω + (1/√(1-t)) Σ_{k≥1} α^{(1-k)/2} e_{i^k}` of `s_i`,
/// truncated at the space's top level (unnormalized).
pub fn xi_vector<S: Scalar>(params: &DeformParams<S>, i: usize) -> Result<FockVector<S>> {
    let t = params.t_f64();
    if t >= 0.5 {
        return Err(Error::NoAtom(format!("s^t has no atom for t = {t} >= 1/2")));
    }
    if i == 0 || i > params.n() {
        return Err(Error::LetterOutOfRange { letter: i, n: params.n() });
    }
    let space = FockSpace::new(params.clone())?;
    let one_minus_t = S::one() - params.t().clone();
    let beta = one_minus_t.sqrt().and_then(|r| r.inv()).ok_or_else(|| Error::NotRepresentable("1/sqrt(1-t)".into()))?;
    let inv_root_alpha = params
        .alpha()
        .sqrt()
        .and_then(|r| r.inv())
        .ok_or_else(|| Error::NotRepresentable("1/sqrt(alpha)".into()))?;
    let mut terms = vec![(Word::empty(), S::one())];
    let mut c = beta;
    for k in 1..=params.max_len() {
        terms.push((Word::new(vec![i; k]), c.clone()));
        c = c * inv_root_alpha.clone();
    }
    vector_from_terms(&space, &terms)
}

/// `‖(s_i - 1/√(1-t)) ξ_L‖ / ‖ξ_L‖` for the truncation `ξ_L`, measured in a
/// space one level deeper so that nothing is cut.
pub fn xi_residual<S: Scalar>(params: &DeformParams<S>, i: usize) -> Result<f64> {
    let deeper = params.with_max_len(params.max_len() + 1);
    let xi = xi_vector(params, i)?;
    let space = FockSpace::new(deeper)?;
    let mut coeffs = xi.coeffs().to_vec();
    coeffs.resize(space.dim(), S::zero());
    let v = FockVector::from_coeffs(&space, coeffs)?;
    let s = crate::operators::gaussian(i, &space)?;
    let lambda = (S::one() - params.t().clone()).sqrt().and_then(|r| r.inv()).expect("checked in xi_vector");
    let res = s.apply(&v)?.sub(&v.scale(&lambda))?;
    Ok(relative_norm(res.norm_f64(), v.norm_f64()))
}

/// Pair-pattern words `ī` of length `2k` with `i_{2j+1} = i_{2j+2}` (there are `n^k`).
pub fn pair_words(n: usize, k: usize) -> Vec<Word> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|w: Vec<usize>| {
                (1..=n).map(move |i| {
                    let mut v = w.clone();
                    v.extend([i, i]);
                    v
                })
            })
            .collect();
    }
    out.into_iter().map(Word::new).collect()
}

/// `F_k = Σ_{pair words of length 2k} e_ī`.
pub fn pair_vector<S: Scalar>(space: &Arc<FockSpace<S>>, k: usize) -> Result<FockVector<S>> {
    let terms: Vec<_> = pair_words(space.n(), k).into_iter().map(|w| (w, S::one())).collect();
    vector_from_terms(space, &terms)
}

/// `f_k = Σ_{pair words of length 2k} e_{ī 1}`.
pub fn f_vector<S: Scalar>(space: &Arc<FockSpace<S>>, k: usize) -> Result<FockVector<S>> {
    let terms: Vec<_> = pair_words(space.n(), k)
        .into_iter()
        .map(|w| {
            let mut letters = w.0;
            letters.push(1);
            (Word::new(letters), S::one())
        })
        .collect();
    vector_from_terms(space, &terms)
}

fn check_atom_regime<S: Scalar>(params: &DeformParams<S>) -> Result<()> {
    let n = params.n() as f64;
    let a = params.alpha_f64();
    if n * a * a <= 1.0 + 10.0 * BOUNDARY_SLACK {
        return Err(Error::Divergent(format!(
            "zeta needs n*alpha^2 > 1, got {} at t = {}, n = {}",
            n * a * a,
            params.t_f64(),
            params.n()
        )));
    }
    Ok(())
}

/// `n + 1/α`, the atom location of `c^t`.
pub fn zeta_eigenvalue<S: Scalar>(params: &DeformParams<S>) -> Result<S> {
    let inv_alpha = params.alpha().inv().ok_or_else(|| Error::Domain("alpha = 0 at t = 1".into()))?;
    Ok(S::from_i64(params.n() as i64) + inv_alpha)
}

/// `ζ = √t Ω + Σ_{k≥1} (nα)^{-k} F_k`, truncated at pair depth `⌊L/2⌋`.
pub fn zeta_vector<S: Scalar>(params: &DeformParams<S>) -> Result<FockVector<S>> {
    check_atom_regime(params)?;
    let space = FockSpace::new(params.clone())?;
    let ratio = (S::from_i64(params.n() as i64) * params.alpha().clone()).inv().expect("alpha != 0 here");
    let mut v = FockVector::vacuum(&space).scale(params.sqrt_t());
    let mut x = S::one();
    for k in 1..=params.max_len() / 2 {
        x = x * ratio.clone();
        v.axpy(&x, &pair_vector(&space, k)?)?;
    }
    Ok(v)
}

/// Relative residual `‖(c^t - (n + 1/α)) ζ_K‖ / ‖ζ_K‖` of the depth-`K`
/// truncation, `K = ⌊L/2⌋`, by sparse application in a space two levels deeper.
pub fn zeta_residual_sparse<S: Scalar>(params: &DeformParams<S>) -> Result<f64> {
    let depth = params.max_len() / 2;
    let base = params.with_max_len(2 * depth);
    let zeta = zeta_vector(&base)?;
    let space = FockSpace::new(base.with_max_len(2 * depth + 2))?;
    let mut coeffs = zeta.coeffs().to_vec();
    coeffs.resize(space.dim(), S::zero());
    let v = FockVector::from_coeffs(&space, coeffs)?;
    let lambda = zeta_eigenvalue(params)?;
    let res = c_operator(&space)?.apply(&v)?.sub(&v.scale(&lambda))?;
    Ok(relative_norm(res.norm_f64(), v.norm_f64()))
}

/// Same residual at pair depth `depth`, computed on the invariant span of
/// `Ω, F_1, F_2, …` where `c^t` acts tridiagonally:
/// `cΩ = nΩ + √t F_1`, `cF_1 = tF_2 + (n+1)tF_1 + n√t Ω`,
/// `cF_k = tF_{k+1} + (n+1)tF_k + ntF_{k-1}`, with `‖F_k‖² = n^k`.
pub fn zeta_residual(t: f64, n: usize, depth: usize) -> Result<f64> {
    let params = DeformParams::float(t, n, 0)?;
    check_atom_regime(&params)?;
    let nf = n as f64;
    let alpha = params.alpha_f64();
    let lambda = nf + 1.0 / alpha;
    let root = t.sqrt();
    // coefficients on Ω, F_1, …, F_depth
    let mut z = vec![root];
    for k in 1..=depth {
        z.push((nf * alpha).powi(-(k as i32)));
    }
    let mut out = vec![0.0; depth + 2];
    out[0] += nf * z[0];
    if depth >= 1 {
        out[1] += root * z[0];
        out[0] += nf * root * z[1];
    }
    for k in 1..=depth {
        out[k + 1] += t * z[k];
        out[k] += (nf + 1.0) * t * z[k];
        if k >= 2 {
            out[k - 1] += nf * t * z[k];
        }
    }
    let weight = |k: usize| nf.powi(k as i32);
    let mut res2 = 0.0;
    let mut norm2 = 0.0;
    for k in 0..depth + 2 {
        let zk = z.get(k).copied().unwrap_or(0.0);
        res2 += (out[k] - lambda * zk).powi(2) * weight(k);
        norm2 += zk * zk * weight(k);
    }
    Ok((res2 / norm2).sqrt())
}

/// Max discrepancy of `c f_0 = (nt+1) f_0 + t f_1` and
/// `c f_k = nt f_{k-1} + (n+1)t f_k + t f_{k+1}` over all `k` the truncation
/// can hold (`2k + 3 ≤ L`). Returns `(checked k's, max discrepancy)`.
pub fn f_recursion_check<S: Scalar>(params: &DeformParams<S>) -> Result<(usize, f64)> {
    let space = FockSpace::new(params.clone())?;
    if params.max_len() < 3 {
        return Err(Error::TruncationUnsound { needed: 3, max_len: params.max_len() });
    }
    let c = c_operator(&space)?;
    let n = S::from_i64(params.n() as i64);
    let t = params.t().clone();
    let top = (params.max_len() - 3) / 2;
    let f: Vec<FockVector<S>> = (0..=top + 1).map(|k| f_vector(&space, k)).collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for k in 0..=top {
        let lhs = c.apply(&f[k])?;
        let mut rhs = f[k + 1].scale(&t);
        if k == 0 {
            rhs.axpy(&(n.clone() * t.clone() + S::one()), &f[0])?;
        } else {
            rhs.axpy(&((n.clone() + S::one()) * t.clone()), &f[k])?;
            rhs.axpy(&(n.clone() * t.clone()), &f[k - 1])?;
        }
        let diff = lhs.sub(&rhs)?;
        if S::EXACT && diff.coeffs().iter().any(|x| !x.is_zero()) {
            return Err(Error::IdentityFailed(format!("f_k recursion at k = {k}")));
        }
        worst = worst.max(diff.norm_f64());
    }
    Ok((top + 1, worst))
}

/// Solution of the kernel recursion and its decomposition on the characteristic roots.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelReport<S: Scalar> {
    /// `x_0, x_1, …`.
    pub x: Vec<S>,
    /// Coefficient of `(nα)^{-k}`.
    pub a: S,
    /// Coefficient of `α^k`.
    pub b: S,
    /// Whether `Σ x_k² n^k < ∞`.
    pub summable: bool,
    /// Max `|x_k - a (nα)^{-k} - b α^k|` over the computed range.
    pub closed_form_defect: f64,
}

/// Solves `(n + 1/α) x_k = nt x_{k+1} + (n+1)t x_k + t x_{k-1}` with the
/// boundary row `(n + 1/α) x_0 = (nt+1) x_0 + nt x_1`, `x_0 = 1`, up to `k_max`.
pub fn kernel_recursion<S: Scalar>(params: &DeformParams<S>, k_max: usize) -> Result<KernelReport<S>> {
    let n_usize = params.n();
    if params.alpha().is_zero() {
        return Err(Error::InvalidParameter("kernel recursion needs t != 1".into()));
    }
    let n = S::from_i64(n_usize as i64);
    let t = params.t().clone();
    let alpha = params.alpha().clone();
    let lambda = zeta_eigenvalue(params)?;
    let nt = n.clone() * t.clone();
    let inv_nt = nt.inv().expect("t > 0");
    let r1 = (n.clone() * alpha.clone()).inv().expect("alpha != 0");
    let r2 = alpha.clone();
    if (S::EXACT && r1 == r2) || (!S::EXACT && r1.near(&r2, 1e-12)) {
        return Err(Error::DegenerateRoots(format!("n*alpha^2 = 1 at t = {}, n = {n_usize}", params.t())));
    }
    let mut x = vec![S::one()];
    x.push((lambda.clone() - nt.clone() - S::one()) * inv_nt.clone());
    let diag = lambda - (n.clone() + S::one()) * t.clone();
    while x.len() <= k_max {
        let k = x.len() - 1;
        let next = (diag.clone() * x[k].clone() - t.clone() * x[k - 1].clone()) * inv_nt.clone();
        x.push(next);
    }
    x.truncate(k_max + 1);
    let b = (x[1].clone() - r1.clone()).div(&(r2.clone() - r1.clone())).expect("roots differ");
    let a = S::one() - b.clone();
    let mut defect = 0.0f64;
    for (k, xk) in x.iter().enumerate() {
        let fit = a.clone() * r1.pow(k) + b.clone() * r2.pow(k);
        defect = defect.max((xk.to_f64() - fit.to_f64()).abs() / fit.to_f64().abs().max(1.0));
    }
    let b_vanishes = if S::EXACT { b.is_zero() } else { b.to_f64().abs() < 1e-12 };
    let nf = n_usize as f64;
    let dominant = if b_vanishes { r1.to_f64() } else { r2.to_f64() };
    let summable = dominant * dominant * nf < 1.0;
    Ok(KernelReport { x, a, b, summable, closed_form_defect: defect })
}

/// Exact residual of the recursion rows for the computed `x_k` (zero in exact mode).
pub fn kernel_recursion_residual<S: Scalar>(params: &DeformParams<S>, report: &KernelReport<S>) -> Result<S> {
    let n = S::from_i64(params.n() as i64);
    let t = params.t().clone();
    let lambda = zeta_eigenvalue(params)?;
    let x = &report.x;
    let mut worst = S::zero();
    let mut push = |v: S| {
        if v.to_f64().abs() > worst.to_f64().abs() || (worst.is_zero() && !v.is_zero()) {
            worst = v;
        }
    };
    push(lambda.clone() * x[0].clone() - (n.clone() * t.clone() + S::one()) * x[0].clone() - n.clone() * t.clone() * x[1].clone());
    for k in 1..x.len() - 1 {
        push(
            lambda.clone() * x[k].clone()
                - n.clone() * t.clone() * x[k + 1].clone()
                - (n.clone() + S::one()) * t.clone() * x[k].clone()
                - t.clone() * x[k - 1].clone(),
        );
    }
    Ok(worst)
}

/// Run encoding `i_1^{a_1} ⋯ i_l^{a_l}` of every word of length `≤ max_len`,
/// in basis order.
fn block_words(n: usize, max_len: usize) -> Vec<Vec<(usize, usize)>> {
    crate::cfree::run_words(n, max_len)
}

/// Matrices of `S`, `A`, `B` on the block of words of length `≤ L/2`.
#[derive(Clone, Debug)]
pub struct Conjugation<S: Scalar> {
    pub block_len: usize,
    pub words: Vec<Word>,
    /// Column `j` holds the coefficients of `S e_{w_j}`.
    pub s: Vec<Vec<S>>,
    pub a: Vec<Vec<S>>,
    pub b: Vec<Vec<S>>,
}

/// Outcome of the `S` analysis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConjugationReport {
    /// `max |S² - I|` entrywise on the block.
    pub s_squared_defect: f64,
    pub s_squared_exact: bool,
    /// Whether `S = √t (A - αB)` holds entrywise.
    pub decomposition_defect: f64,
    pub norm_s: f64,
    pub norm_a: f64,
    pub norm_b: f64,
    /// `(1/√t) Σ_k (√n|α|)^k`.
    pub bound_a: f64,
    /// `(1/√t)(1 + |α|) Σ_k (√n|α|)^k`.
    pub bound_s: f64,
}

fn poly_word_vector<S: Scalar>(
    family: &GaussianFamily<S>,
    factors: &[(usize, Polynomial<S>)],
) -> Result<FockVector<S>> {
    // factors are listed left to right; the rightmost acts first
    let mut v = family.vacuum();
    for (i, p) in factors.iter().rev() {
        v = p.apply(family.s(*i)?, &v)?;
    }
    Ok(v)
}

fn open_interval_check<S: Scalar>(params: &DeformParams<S>) -> Result<f64> {
    let growth = (params.n() as f64).sqrt() * params.alpha_f64().abs();
    if growth >= 1.0 {
        return Err(Error::Regime(format!(
            "S is only bounded for sqrt(n)|alpha| < 1, got {growth} at t = {}, n = {}",
            params.t_f64(),
            params.n()
        )));
    }
    Ok(growth)
}

/// Builds `S(e_ī) = v_{a_l}(s_{i_l}) u_{a_{l-1}}(s_{i_{l-1}}) ⋯ u_{a_1}(s_{i_1}) Ω`
/// together with `A` (all `u`'s) and `B` (outermost index lowered by 2) on the
/// words of length `≤ L/2`. `S` is antilinear; over real scalars it is a real-linear map.
/// On `Ω` the convention is `AΩ = Ω/√t`, `BΩ = 0`, so that `S = √t(A - αB)` throughout.
pub fn s_conjugation<S: Scalar>(params: &DeformParams<S>) -> Result<Conjugation<S>> {
    open_interval_check(params)?;
    let block_len = params.max_len() / 2;
    let family = GaussianFamily::new(params.with_max_len(block_len))?;
    let dim = family.space().dim();
    let n = params.n();
    let max_deg = block_len;
    let u: Vec<Polynomial<S>> = (0..=max_deg).map(|k| u_poly(k, params)).collect();
    let v: Vec<Polynomial<S>> = (0..=max_deg).map(|k| crate::polynomials::v_poly(k, params)).collect();
    let mut s_cols = Vec::with_capacity(dim);
    let mut a_cols = Vec::with_capacity(dim);
    let mut b_cols = Vec::with_capacity(dim);
    let inv_root = params.inv_sqrt_t().clone();
    for runs in block_words(n, block_len) {
        if runs.is_empty() {
            let mut omega = vec![S::zero(); dim];
            omega[0] = S::one();
            s_cols.push(omega.clone());
            a_cols.push(omega.iter().map(|x| x.clone() * inv_root.clone()).collect());
            b_cols.push(vec![S::zero(); dim]);
            continue;
        }
        let (last_i, last_a) = *runs.last().expect("nonempty");
        let inner: Vec<(usize, Polynomial<S>)> = runs[..runs.len() - 1].iter().rev().map(|&(i, a)| (i, u[a].clone())).collect();
        let mut s_factors = vec![(last_i, v[last_a].clone())];
        s_factors.extend(inner.iter().cloned());
        let mut a_factors = vec![(last_i, u[last_a].clone())];
        a_factors.extend(inner.iter().cloned());
        s_cols.push(poly_word_vector(&family, &s_factors)?.into_coeffs());
        a_cols.push(poly_word_vector(&family, &a_factors)?.into_coeffs());
        if last_a >= 2 {
            let mut b_factors = vec![(last_i, u[last_a - 2].clone())];
            b_factors.extend(inner);
            b_cols.push(poly_word_vector(&family, &b_factors)?.into_coeffs());
        } else {
            b_cols.push(vec![S::zero(); dim]);
        }
    }
    let words = family.space().words().collect();
    Ok(Conjugation { block_len, words, s: s_cols, a: a_cols, b: b_cols })
}

fn columns_to_operator<S: Scalar>(space: &Arc<FockSpace<S>>, cols: &[Vec<S>], down: usize) -> SparseOperator<S> {
    let dim = cols.len();
    let mut rows = vec![Vec::new(); dim];
    for (j, col) in cols.iter().enumerate() {
        for (i, x) in col.iter().enumerate() {
            if !x.is_zero() {
                rows[i].push((j, x.clone()));
            }
        }
    }
    SparseOperator::from_rows(space, rows, 0, down, false)
}

fn mat_mul_cols<S: Scalar>(left: &[Vec<S>], right: &[Vec<S>]) -> Vec<Vec<S>> {
    let dim = left.len();
    right
        .iter()
        .map(|col| {
            let mut out = vec![S::zero(); dim];
            for (k, x) in col.iter().enumerate() {
                if x.is_zero() {
                    continue;
                }
                for (i, y) in left[k].iter().enumerate() {
                    if !y.is_zero() {
                        out[i] = out[i].clone() + y.clone() * x.clone();
                    }
                }
            }
            out
        })
        .collect()
}

impl<S: Scalar> Conjugation<S> {
    pub fn dim(&self) -> usize {
        self.s.len()
    }

    /// `S(e_w)` as a map from words to coefficients (nonzero entries only).
    pub fn image(&self, word: &Word) -> Option<Vec<(Word, S)>> {
        let j = self.words.iter().position(|w| w == word)?;
        Some(
            self.s[j]
                .iter()
                .enumerate()
                .filter(|(_, x)| !x.is_zero())
                .map(|(i, x)| (self.words[i].clone(), x.clone()))
                .collect(),
        )
    }

    pub fn report(&self, params: &DeformParams<S>, seed: u64) -> Result<ConjugationReport> {
        let growth = open_interval_check(params)?;
        let dim = self.dim();
        let sq = mat_mul_cols(&self.s, &self.s);
        let mut defect = 0.0f64;
        let mut exact = true;
        for (j, col) in sq.iter().enumerate() {
            for (i, x) in col.iter().enumerate() {
                let target = if i == j { S::one() } else { S::zero() };
                if *x != target {
                    exact = false;
                }
                defect = defect.max((x.to_f64() - target.to_f64()).abs());
            }
        }
        let root = params.sqrt_t().clone();
        let alpha = params.alpha().clone();
        let mut decomposition_defect = 0.0f64;
        for j in 0..dim {
            for i in 0..dim {
                let rebuilt = root.clone() * (self.a[j][i].clone() - alpha.clone() * self.b[j][i].clone());
                decomposition_defect = decomposition_defect.max((rebuilt.to_f64() - self.s[j][i].to_f64()).abs());
            }
        }
        let space = FockSpace::new(params.with_max_len(self.block_len))?;
        let norm = |cols: &[Vec<S>]| operator_norm_estimate(&columns_to_operator(&space, cols, self.block_len), 2000, seed).value;
        let series = 1.0 / (1.0 - growth);
        let inv_root = 1.0 / params.t_f64().sqrt();
        Ok(ConjugationReport {
            s_squared_defect: defect,
            s_squared_exact: exact && S::EXACT,
            decomposition_defect,
            norm_s: norm(&self.s),
            norm_a: norm(&self.a),
            norm_b: norm(&self.b),
            bound_a: inv_root * series,
            bound_s: inv_root * (1.0 + params.alpha_f64().abs()) * series,
        })
    }
}

/// Truncated commutator `max ‖[S_b x S_b, s_j] w‖` over `x ∈ {s_1, v_2(s_2)}`
/// and all `j`, where `S_b` is `S` compressed to words of length `≤ 2 + margin`
/// and `w` is the normalized geometric probe `Σ_k 2^{-k} g_k` (`g_k` the
/// normalized all-ones vector of level `k`) on the same block.
///
/// On probe levels below `margin` the truncated identity is exact, so the value
/// is carried by the probe's top levels and decays as `margin` grows.
pub fn commutator_defect(t: f64, n: usize, margin: usize) -> Result<f64> {
    let block_len = margin + 2;
    let params = DeformParams::float(t, n, 2 * block_len)?;
    let conj = s_conjugation(&params)?;
    let big = FockSpace::new(params.with_max_len(block_len + 3))?;
    let family = GaussianFamily::on(&big)?;
    let block_dim = conj.dim();
    let apply_s = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; big.dim()];
        for (j, col) in conj.s.iter().enumerate() {
            let x = v[j];
            if x != 0.0 {
                for (i, y) in col.iter().enumerate() {
                    out[i] += y * x;
                }
            }
        }
        out
    };
    let vec_of = |coeffs: Vec<f64>| FockVector::from_coeffs(&big, coeffs);
    let v2 = crate::polynomials::v_poly(2, &params);
    let x_ops: Vec<Box<dyn Fn(&FockVector<f64>) -> Result<FockVector<f64>>>> = vec![
        Box::new(|v| family.s(1)?.apply(v)),
        Box::new(|v| v2.apply(family.s(2.min(n))?, v)),
    ];
    let mut probe = vec![0.0; big.dim()];
    for level in 0..=block_len {
        let range = big.level_range(level);
        let w = 0.5f64.powi(level as i32) / (range.len() as f64).sqrt();
        probe[range].iter_mut().for_each(|x| *x = w);
    }
    let norm = probe.iter().map(|x| x * x).sum::<f64>().sqrt();
    probe.iter_mut().for_each(|x| *x /= norm);
    // S_b x S_b, with everything outside the block dropped before S_b acts
    let sxs = |x: &dyn Fn(&FockVector<f64>) -> Result<FockVector<f64>>, w: &[f64]| -> Result<Vec<f64>> {
        let inner = apply_s(&w[..block_dim]);
        let moved = x(&vec_of(inner)?)?;
        Ok(apply_s(&moved.coeffs()[..block_dim]))
    };
    let mut worst = 0.0f64;
    for x in &x_ops {
        for j in 1..=n {
            let sj = family.s(j)?;
            let lhs = sxs(x.as_ref(), sj.apply_compressed(&vec_of(probe.clone())?)?.coeffs())?;
            let rhs = sj.apply_compressed(&vec_of(sxs(x.as_ref(), &probe)?)?)?;
            let diff: f64 = lhs.iter().zip(rhs.coeffs()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(diff);
        }
    }
    Ok(worst)
}

/// Khinchine witness for `T_k = Σ u_{k_1}(s_{i_1}) ⋯ u_{k_p}(s_{i_p})`, the sum
/// over even compositions `k_1 + … + k_p = 2k` and alternating indices.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KhinchineReport {
    pub k: usize,
    /// `φ(T_k)`, from the Fock model.
    pub phi_value: f64,
    /// `φ(T_k)` exactly, when the scalars are exact (rendered as a string).
    pub phi_exact: Option<String>,
    /// `‖T_k Ω‖` in the free (`t = 1`) model.
    pub free_norm: f64,
    /// `(2k + 1) ‖T_k Ω‖`.
    pub bound: f64,
    pub violated: bool,
}

/// `T_k Ω` by dynamic programming over the outermost factor:
/// `V(m, i) = Σ_{a even} u_a(s_i) W(m - a, i)`, `W(r, i) = Σ_{j ≠ i} V(r, j)`, `W(0, i) = Ω`.
fn t_k_vector<S: Scalar>(family: &GaussianFamily<S>, params: &DeformParams<S>, k: usize) -> Result<FockVector<S>> {
    let n = params.n();
    let u: Vec<Polynomial<S>> = (0..=2 * k).map(|d| u_poly(d, params)).collect();
    let omega = family.vacuum();
    let mut table: Vec<Vec<FockVector<S>>> = vec![vec![FockVector::zeros(family.space()); n]];
    for m in 1..=2 * k {
        let mut row = Vec::with_capacity(n);
        for i in 1..=n {
            let mut acc = FockVector::zeros(family.space());
            if m % 2 == 0 {
                for a in (2..=m).step_by(2) {
                    let rest = m - a;
                    let w = if rest == 0 {
                        omega.clone()
                    } else {
                        let mut w = FockVector::zeros(family.space());
                        for j in (1..=n).filter(|&j| j != i) {
                            w = w.add(&table[rest][j - 1])?;
                        }
                        w
                    };
                    acc = acc.add(&u[a].apply(family.s(i)?, &w)?)?;
                }
            }
            row.push(acc);
        }
        table.push(row);
    }
    let mut out = FockVector::zeros(family.space());
    for v in &table[2 * k] {
        out = out.add(v)?;
    }
    Ok(out)
}

/// Builds `T_k Ω` in the model of `params` (needs `2k ≤ L`) and in the free model,
/// and compares `|φ(T_k)|` with the Khinchine bound `(2k+1) ‖ρ(T_k) Ω‖`.
pub fn khinchine_witness<S: Scalar>(params: &DeformParams<S>, k: usize) -> Result<KhinchineReport> {
    if 2 * k > params.max_len() {
        return Err(Error::TruncationUnsound { needed: 2 * k, max_len: params.max_len() });
    }
    let model = params.with_max_len(2 * k);
    let family = GaussianFamily::new(model.clone())?;
    let phi = t_k_vector(&family, &model, k)?.coeffs()[0].clone();
    let free = DeformParams::float(1.0, params.n(), 2 * k)?;
    let free_family = GaussianFamily::new(free.clone())?;
    let free_norm = t_k_vector(&free_family, &free, k)?.norm_f64();
    let bound = (2 * k + 1) as f64 * free_norm;
    let phi_value = phi.to_f64();
    Ok(KhinchineReport {
        k,
        phi_value,
        phi_exact: S::EXACT.then(|| phi.to_string()),
        free_norm,
        bound,
        violated: phi_value.abs() > bound,
    })
}

/// `‖(1/k) Σ_{i≤k} (s_i)² w - ((1-t)P + t) w‖`, `P` the projection on `Ω`.
pub fn infinite_n_limit<S: Scalar>(family: &GaussianFamily<S>, k: usize, probe: &FockVector<S>) -> Result<f64> {
    let params = family.params();
    if k == 0 || k > params.n() {
        return Err(Error::InvalidParameter(format!("need 1 <= k <= n = {}, got {k}", params.n())));
    }
    if probe.reach() + 2 > params.max_len() {
        return Err(Error::TruncationUnsound { needed: probe.reach() + 2, max_len: params.max_len() });
    }
    let mut avg = FockVector::zeros(family.space());
    for i in 1..=k {
        let s = family.s(i)?;
        avg = avg.add(&s.apply(&s.apply(probe)?)?)?;
    }
    let avg = avg.scale(&S::from_i64(k as i64).inv().expect("k >= 1"));
    let t = params.t().clone();
    let mut target = probe.scale(&t);
    let omega_part = probe.coeffs()[0].clone() * (S::one() - t);
    target.axpy(&omega_part, &FockVector::vacuum(family.space()))?;
    Ok(avg.sub(&target)?.norm_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::vacuum_moment;
    use crate::scalar::{ratio, Surd};

    fn exact(t: (i64, i64), n: usize, l: usize) -> DeformParams<Surd> {
        DeformParams::exact(ratio(t.0, t.1), n, l).unwrap()
    }

    #[test]
    fn regime_examples() {
        assert_eq!(classify_regime(1.0, 2).unwrap().regime, Regime::FreeFactor);
        let v = classify_regime(0.4, 2).unwrap();
        assert_eq!(v.regime, Regime::DirectSum);
        assert!((v.interval.0 - 0.585_786_437_6).abs() < 1e-9 && (v.interval.1 - 3.414_213_562_4).abs() < 1e-9);
        let edge = classify_regime_exact(&ratio(2, 3), 4).unwrap();
        assert_eq!(edge.regime, Regime::FreeFactor);
        assert_eq!(edge.boundary_distance, 0.0);
        assert_eq!(classify_regime(2.0 / 3.0, 4).unwrap().regime, Regime::FreeFactor);
        assert_eq!(classify_regime_exact(&ratio(2, 1), 4).unwrap().boundary_distance, 0.0);
        assert!(matches!(classify_regime(0.3, 1), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn regime_matches_atom_existence() {
        for n in 2..=4 {
            for j in 1..=50 {
                let t = 0.1 * j as f64;
                let v = classify_regime(t, n).unwrap();
                assert_eq!(v.regime == Regime::DirectSum, crate::spectra::c_has_atom(t, n), "t={t}, n={n}");
            }
        }
    }

    #[test]
    fn xi_eigenvector() {
        let p = DeformParams::float(0.25, 1, 30).unwrap();
        let xi = xi_vector(&p, 1).unwrap();
        assert_eq!(xi.coeffs()[0], 1.0);
        assert!(xi_residual(&p, 1).unwrap() < 1e-6);
        let p2 = DeformParams::float(0.25, 2, 10).unwrap();
        assert!(xi_residual(&p2, 2).unwrap() < 1e-2);
        assert!(2.0 / 3f64.sqrt() > 1.0);
        assert!(matches!(xi_vector(&DeformParams::float(0.5, 1, 4).unwrap(), 1), Err(Error::NoAtom(_))));
        // the residual is the truncation tail: it shrinks with L
        let r10 = xi_residual(&DeformParams::float(0.25, 1, 10).unwrap(), 1).unwrap();
        let r20 = xi_residual(&DeformParams::float(0.25, 1, 20).unwrap(), 1).unwrap();
        assert!(r20 < r10 * 3f64.powi(-4));
    }

    #[test]
    fn zeta_components() {
        let p = exact((2, 5), 2, 4);
        let z = zeta_vector(&p).unwrap();
        assert_eq!(z.coeffs()[0], p.sqrt_t().clone());
        let level2 = (Surd::from_i64(2) * p.alpha().clone()).inv().unwrap();
        for (w, c) in [([1, 1], level2.clone()), ([2, 2], level2), ([1, 2], Surd::zero())] {
            assert_eq!(z.coeff(&Word::new(w)).unwrap(), c);
        }
        assert!(matches!(zeta_vector(&DeformParams::float(1.0, 2, 4).unwrap()), Err(Error::Divergent(_))));
    }

    #[test]
    fn zeta_routes_agree() {
        for depth in 1..=5 {
            let sparse = zeta_residual_sparse(&DeformParams::float(0.4, 2, 2 * depth).unwrap()).unwrap();
            let reduced = zeta_residual(0.4, 2, depth).unwrap();
            assert!((sparse - reduced).abs() < 1e-12 * reduced.max(1.0), "depth {depth}: {sparse} vs {reduced}");
        }
        let sparse = zeta_residual_sparse(&DeformParams::float(0.25, 3, 6).unwrap()).unwrap();
        assert!((sparse - zeta_residual(0.25, 3, 3).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn zeta_residual_decay() {
        let rho = 2f64.sqrt() / 3.0;
        let r: Vec<f64> = (0..=14).map(|d| zeta_residual(0.4, 2, d).unwrap()).collect();
        assert!(r[12] < 1e-3);
        for l in [6, 8, 10, 12] {
            assert!(r[l] < r[l - 2]);
            assert!(r[l + 2] / r[l] <= rho * rho + 0.1);
        }
    }

    #[test]
    fn f_recursion_exact() {
        let (count, worst) = f_recursion_check(&exact((2, 5), 2, 7)).unwrap();
        assert_eq!(count, 3);
        assert_eq!(worst, 0.0);
        let (_, worst) = f_recursion_check(&exact((3, 2), 3, 5)).unwrap();
        assert_eq!(worst, 0.0);
    }

    #[test]
    fn f0_boundary_against_sparse_c() {
        let p = exact((2, 5), 2, 3);
        let space = FockSpace::new(p.clone()).unwrap();
        let c = c_operator(&space).unwrap();
        let f0 = f_vector(&space, 0).unwrap();
        let lhs = c.apply(&f0).unwrap();
        let mut rhs = f_vector(&space, 1).unwrap().scale(p.t());
        rhs.axpy(&(Surd::from_i64(2) * p.t().clone() + Surd::from_i64(1)), &f0).unwrap();
        assert_eq!(lhs.coeffs(), rhs.coeffs());
    }

    #[test]
    fn kernel_recursion_examples() {
        let p = exact((2, 5), 2, 0);
        let rep = kernel_recursion(&p, 20).unwrap();
        assert!(kernel_recursion_residual(&p, &rep).unwrap().is_zero());
        assert!(!rep.b.is_zero());
        assert!(!rep.summable);
        // x_k = a (nα)^{-k} + b α^k holds exactly
        let r1 = (Surd::from_i64(2) * p.alpha().clone()).inv().unwrap();
        for (k, xk) in rep.x.iter().enumerate() {
            assert_eq!(xk, &(rep.a.clone() * r1.pow(k) + rep.b.clone() * p.alpha().pow(k)));
        }
        let one = kernel_recursion(&exact((1, 5), 1, 0), 10).unwrap();
        assert!(one.b.is_zero());
        assert!(one.summable);
        assert!(matches!(kernel_recursion(&exact((2, 3), 4, 0), 5), Err(Error::DegenerateRoots(_))));
        assert!(kernel_recursion(&exact((1, 1), 2, 0), 5).is_err());
        let float = kernel_recursion(&DeformParams::float(0.4, 2, 0).unwrap(), 20).unwrap();
        assert!(float.closed_form_defect < 1e-9);
    }

    #[test]
    fn s_conjugation_examples() {
        let p = exact((4, 5), 2, 6);
        let conj = s_conjugation(&p).unwrap();
        assert_eq!(conj.image(&Word::empty()).unwrap(), vec![(Word::empty(), Surd::from_i64(1))]);
        assert_eq!(conj.image(&Word::new([1, 2])).unwrap(), vec![(Word::new([2, 1]), Surd::from_i64(1))]);
        let rep = conj.report(&p, 3).unwrap();
        assert!(rep.s_squared_exact);
        assert_eq!(rep.decomposition_defect, 0.0);
        assert!(rep.norm_a <= rep.bound_a && rep.norm_s <= rep.bound_s);
        assert!((rep.bound_a - 1.7296).abs() < 1e-4);
        assert!(matches!(s_conjugation(&exact((2, 5), 2, 4)), Err(Error::Regime(_))));
    }

    #[test]
    fn commutator_decays() {
        let c: Vec<f64> = (1..=4).map(|m| commutator_defect(0.8, 2, m).unwrap()).collect();
        for w in c.windows(2) {
            assert!(w[1] < w[0], "{c:?}");
        }
    }

    #[test]
    fn khinchine_values() {
        for k in 1..=3 {
            let p = exact((3, 10), 2, 2 * k);
            let rep = khinchine_witness(&p, k).unwrap();
            let target = (Surd::from_i64(2) * p.alpha().clone()).pow(k);
            assert_eq!(rep.phi_exact.as_deref(), Some(target.to_string().as_str()));
            assert!((rep.free_norm - 2f64.powf(k as f64 / 2.0)).abs() < 1e-12);
        }
        let t1 = khinchine_witness(&DeformParams::float(1.0, 2, 4).unwrap(), 2).unwrap();
        assert_eq!(t1.phi_value, 0.0);
        assert!(!t1.violated);
        assert!(khinchine_witness(&DeformParams::float(0.3, 2, 2).unwrap(), 1).unwrap().violated);
    }

    #[test]
    fn infinite_n_examples() {
        let family = GaussianFamily::new(DeformParams::float(0.5, 16, 2).unwrap()).unwrap();
        let omega = family.vacuum();
        let r: Vec<f64> = [1, 4, 16].iter().map(|&k| infinite_n_limit(&family, k, &omega).unwrap()).collect();
        for (res, k) in r.iter().zip([1.0f64, 4.0, 16.0]) {
            assert!((res - (0.5 / k).sqrt()).abs() < 1e-12);
        }
        let family = GaussianFamily::new(DeformParams::float(1.0, 4, 2).unwrap()).unwrap();
        let r = infinite_n_limit(&family, 4, &family.vacuum()).unwrap();
        assert!((r - 0.5).abs() < 1e-12);
        assert!(infinite_n_limit(&family, 5, &family.vacuum()).is_err());
    }

    #[test]
    fn c_vacuum_moment_is_n() {
        let p = exact((2, 5), 3, 2);
        let space = FockSpace::new(p).unwrap();
        assert_eq!(vacuum_moment(&c_operator(&space).unwrap(), 1).unwrap(), Surd::from_i64(3));
    }
}
