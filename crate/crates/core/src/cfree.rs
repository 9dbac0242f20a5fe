//! Conditionally free mixed moments, the two ways of computing the free state
//! of the t-gaussian model, free and c-free convolution, the c-free central
//! limit, the functionals `φ_r`, and the orthonormal basis of the conditional
//! free product.

use std::fmt;

use crate::error::{Error, Result};
use crate::fock::{DeformParams, FockVector, Word};
use crate::operators::GaussianFamily;
use crate::polynomials::Polynomial;
use crate::scalar::Scalar;
use crate::series::{cfree_r_transform, from_cfree_r_transform, from_r_transform, r_transform, CauchySeries};
use crate::spectra::{jacobi_until_degenerate, moments_from_jacobi, JacobiCoefficients};

pub use crate::series::RSeries;

/// One algebra of a conditional free product: the moments of `φ_i` and `ψ_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalPair<S: Scalar> {
    pub label: String,
    phi: Vec<S>,
    psi: Vec<S>,
}

impl<S: Scalar> MarginalPair<S> {
    /// Checks `m_0 = w_0 = 1` and Hankel positivity up to the available order
    /// (a vanishing Hankel determinant, i.e. a finitely supported law, is accepted).
    pub fn new(label: impl Into<String>, phi: Vec<S>, psi: Vec<S>) -> Result<Self> {
        for (name, m) in [("phi", &phi), ("psi", &psi)] {
            if m.first().is_none_or(|m0| !m0.near(&S::one(), 1e-12)) {
                return Err(Error::NotAMeasure(format!("{name} moments must start with 1")));
            }
            jacobi_until_degenerate(m)?;
        }
        Ok(MarginalPair { label: label.into(), phi, psi })
    }

    /// `φ_i = ψ_i`, the free case.
    pub fn diagonal(label: impl Into<String>, moments: Vec<S>) -> Result<Self> {
        Self::new(label, moments.clone(), moments)
    }

    pub fn phi_moments(&self) -> &[S] {
        &self.phi
    }

    pub fn psi_moments(&self) -> &[S] {
        &self.psi
    }

    /// Highest degree for which both states are known.
    pub fn order(&self) -> usize {
        self.phi.len().min(self.psi.len()) - 1
    }

    pub fn phi(&self, p: &Polynomial<S>) -> Result<S> {
        p.integrate(&self.phi)
    }

    pub fn psi(&self, p: &Polynomial<S>) -> Result<S> {
        p.integrate(&self.psi)
    }

    /// The pair with `ψ` in both slots.
    pub fn free_part(&self) -> Self {
        MarginalPair { label: format!("{} (free)", self.label), phi: self.psi.clone(), psi: self.psi.clone() }
    }

    pub fn phi_series(&self) -> Result<CauchySeries<S>> {
        CauchySeries::new(self.phi.clone())
    }

    pub fn psi_series(&self) -> Result<CauchySeries<S>> {
        CauchySeries::new(self.psi.clone())
    }

    /// `φ`-orthonormal polynomials `v_0, …, v_count-1`.
    pub fn v_polys(&self, count: usize) -> Result<Vec<Polynomial<S>>> {
        orthonormal_polys(&self.phi, count)
    }

    /// `ψ`-orthonormal polynomials `u_0, …, u_count-1`.
    pub fn u_polys(&self, count: usize) -> Result<Vec<Polynomial<S>>> {
        orthonormal_polys(&self.psi, count)
    }
}

/// Orthonormal polynomials of a moment functional, from its Jacobi data.
///
/// Needs `√β_k` in the scalar field; fails with `NotRepresentable` otherwise
/// and with `InsufficientOrder` past the last available (or nondegenerate) degree.
pub fn orthonormal_polys<S: Scalar>(moments: &[S], count: usize) -> Result<Vec<Polynomial<S>>> {
    let (jac, _) = jacobi_until_degenerate(moments)?;
    let available = jac.beta.len() + 1;
    if count > available {
        return Err(Error::InsufficientOrder { needed: count - 1, available: available - 1 });
    }
    let mut out = Vec::with_capacity(count);
    let mut prev = Polynomial::zero();
    let mut cur = Polynomial::one();
    for k in 0..count {
        out.push(cur.clone());
        if k + 1 == count {
            break;
        }
        // b_{k+1} p_{k+1} = (X - a_{k+1}) p_k - b_k p_{k-1}
        let b_next = jac.beta[k].sqrt().ok_or_else(|| Error::NotRepresentable(format!("sqrt of {}", jac.beta[k])))?;
        let mut next = Polynomial::x() * cur.clone() - cur.scale(&jac.diag[k]);
        if k > 0 {
            let b = jac.beta[k - 1].sqrt().expect("checked at the previous step");
            next = next - prev.scale(&b);
        }
        let inv = b_next.inv().ok_or_else(|| Error::NotAMeasure("zero off-diagonal".into()))?;
        prev = cur;
        cur = next.scale(&inv);
    }
    Ok(out)
}

/// Product `c · P_1(X_{i_1}) ⋯ P_m(X_{i_m})` in normal form: adjacent factors
/// from the same algebra are multiplied together and constant factors are
/// absorbed into the coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct AlternatingWord<S: Scalar> {
    coeff: S,
    factors: Vec<(usize, Polynomial<S>)>,
}

impl<S: Scalar> AlternatingWord<S> {
    pub fn new(factors: Vec<(usize, Polynomial<S>)>) -> Self {
        Self::with_coeff(S::one(), factors)
    }

    pub fn with_coeff(coeff: S, factors: Vec<(usize, Polynomial<S>)>) -> Self {
        let mut word = AlternatingWord { coeff, factors: Vec::with_capacity(factors.len()) };
        for (i, p) in factors {
            word.push(i, p);
        }
        word
    }

    /// Word of monomials `X_{w_1} X_{w_2} ⋯`.
    pub fn from_letters(letters: &[usize]) -> Self {
        Self::new(letters.iter().map(|&i| (i, Polynomial::x())).collect())
    }

    fn push(&mut self, i: usize, p: Polynomial<S>) {
        if self.coeff.is_zero() {
            return;
        }
        match p.degree() {
            None => {
                self.coeff = S::zero();
                self.factors.clear();
            }
            Some(0) => self.coeff = self.coeff.clone() * p.coeff(0),
            Some(_) => match self.factors.last_mut() {
                Some((j, q)) if *j == i => {
                    let merged = q.clone() * p;
                    self.factors.pop();
                    self.push(i, merged);
                }
                _ => self.factors.push((i, p)),
            },
        }
    }

    pub fn coeff(&self) -> &S {
        &self.coeff
    }

    pub fn factors(&self) -> &[(usize, Polynomial<S>)] {
        &self.factors
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn total_degree(&self) -> usize {
        self.factors.iter().map(|(_, p)| p.degree().unwrap_or(0)).sum()
    }

    /// `self · other`, renormalized at the junction.
    pub fn concat(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.coeff = out.coeff.clone() * other.coeff.clone();
        for (i, p) in &other.factors {
            out.push(*i, p.clone());
        }
        out
    }

    /// The adjoint word (factors in reverse order; all scalars are real).
    pub fn reversed(&self) -> Self {
        AlternatingWord { coeff: self.coeff.clone(), factors: self.factors.iter().rev().cloned().collect() }
    }

    fn without(&self, j: usize, scalar: S) -> Self {
        let mut out = AlternatingWord { coeff: self.coeff.clone() * scalar, factors: Vec::new() };
        for (k, (i, p)) in self.factors.iter().enumerate() {
            if k != j {
                out.push(*i, p.clone());
            }
        }
        out
    }

    /// `x Ω` in the t-gaussian Fock model, with `X_i ↦ s_i`.
    pub fn apply_to_vacuum(&self, family: &GaussianFamily<S>) -> Result<FockVector<S>> {
        let mut v = family.vacuum().scale(&self.coeff);
        for (i, p) in self.factors.iter().rev() {
            v = p.apply(family.s(*i)?, &v)?;
        }
        Ok(v)
    }
}

impl<S: Scalar> fmt::Display for AlternatingWord<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.coeff)?;
        for (i, p) in &self.factors {
            write!(f, " [{p}](X_{i})")?;
        }
        Ok(())
    }
}

fn marginal<'a, S: Scalar>(marginals: &'a [MarginalPair<S>], i: usize) -> Result<&'a MarginalPair<S>> {
    marginals.get(i.wrapping_sub(1)).ok_or(Error::LetterOutOfRange { letter: i, n: marginals.len() })
}

/// `φ(c · P_1(X_{i_1}) ⋯ P_m(X_{i_m}))` in the conditionally free product.
///
/// Each factor is split as `(P - ψ(P)) + ψ(P)`. The scalar part removes the
/// factor (merging its neighbors when they come from the same algebra) and
/// recurses; once every factor is `ψ`-centered, the alternating product
/// factorizes as `Π φ_{i_j}(P_j)`. Every step shortens the word or centers
/// one more factor, so the recursion terminates.
pub fn cfree_mixed_moment<S: Scalar>(marginals: &[MarginalPair<S>], word: &AlternatingWord<S>) -> Result<S> {
    if word.coeff.is_zero() {
        return Ok(S::zero());
    }
    match word.factors.len() {
        0 => return Ok(word.coeff.clone()),
        1 => {
            let (i, p) = &word.factors[0];
            return Ok(word.coeff.clone() * marginal(marginals, *i)?.phi(p)?);
        }
        _ => {}
    }
    for (j, (i, p)) in word.factors.iter().enumerate() {
        let m = marginal(marginals, *i)?;
        let c = m.psi(p)?;
        if c.is_zero() {
            continue;
        }
        let mut centered = word.clone();
        centered.factors[j].1 = p.clone() - Polynomial::constant(c.clone());
        let a = cfree_mixed_moment(marginals, &centered)?;
        let b = cfree_mixed_moment(marginals, &word.without(j, c))?;
        return Ok(a + b);
    }
    let mut acc = word.coeff.clone();
    for (i, p) in &word.factors {
        acc = acc * marginal(marginals, *i)?.phi(p)?;
    }
    Ok(acc)
}

/// Mixed moment in the free product of the `ψ_i`.
pub fn free_mixed_moment<S: Scalar>(marginals: &[MarginalPair<S>], word: &AlternatingWord<S>) -> Result<S> {
    let free: Vec<MarginalPair<S>> = marginals.iter().map(MarginalPair::free_part).collect();
    cfree_mixed_moment(&free, word)
}

/// The t-gaussian marginal: `φ` = law of `s^t`, `ψ` = semicircle of variance `t`.
pub fn t_gaussian_marginal<S: Scalar>(params: &DeformParams<S>, order: usize) -> Result<MarginalPair<S>> {
    let len = order / 2 + 1;
    let phi = moments_from_jacobi(&crate::spectra::gaussian_jacobi(params, len), order)?;
    let psi = moments_from_jacobi(&semicircle_jacobi(params.t().clone(), len), order)?;
    MarginalPair::new(format!("t-gaussian t={}", params.t()), phi, psi)
}

fn semicircle_jacobi<S: Scalar>(variance: S, len: usize) -> JacobiCoefficients<S> {
    JacobiCoefficients { diag: vec![S::zero(); len], beta: vec![variance; len] }
}

/// Symmetric Bernoulli law on `±a`, given `a²`.
pub fn bernoulli_moments<S: Scalar>(a_squared: &S, order: usize) -> Vec<S> {
    (0..=order).map(|k| if k % 2 == 1 { S::zero() } else { a_squared.pow(k / 2) }).collect()
}

/// Arcsine law on `[-a, a]`, given `a²`: `m_{2k} = C(2k, k) (a²/4)^k`.
pub fn arcsine_moments<S: Scalar>(a_squared: &S, order: usize) -> Vec<S> {
    let quarter = a_squared.clone() * S::from_ratio(&crate::scalar::ratio(1, 4));
    let mut out = Vec::with_capacity(order + 1);
    let mut binom = S::one();
    for k in 0..=order {
        if k % 2 == 1 {
            out.push(S::zero());
            continue;
        }
        let j = k / 2;
        if j > 0 {
            // C(2j, j) = C(2j-2, j-1) (2j)(2j-1) / j²
            let num = S::from_i64((2 * j * (2 * j - 1)) as i64);
            let den = S::from_i64((j * j) as i64);
            binom = binom * num.div(&den).expect("nonzero");
        }
        out.push(binom.clone() * quarter.pow(j));
    }
    out
}

/// `ψ̃(x) = ⟨x Ω, η⟩` with `η = Ω - √t α Σ_k e_{kk}`, given the vector `x Ω`.
pub fn psi_state<S: Scalar>(x_omega: &FockVector<S>) -> Result<S> {
    let params = x_omega.params();
    let space = x_omega.space();
    if space.max_len() < 2 && space.n() > 0 && x_omega.reach() >= 2 {
        return Err(Error::TruncationUnsound { needed: 2, max_len: space.max_len() });
    }
    let mut acc = x_omega.coeffs()[0].clone();
    if space.max_len() >= 2 {
        let weight = params.sqrt_t().clone() * params.alpha().clone();
        let mut pairs = S::zero();
        for k in 1..=space.n() {
            pairs = pairs + x_omega.coeffs()[space.index_of(&Word::new([k, k]))?].clone();
        }
        acc = acc - weight * pairs;
    }
    Ok(acc)
}

/// `ψ̃` of a polynomial word in the t-gaussians.
pub fn psi_state_of_word<S: Scalar>(family: &GaussianFamily<S>, word: &AlternatingWord<S>) -> Result<S> {
    psi_state(&word.apply_to_vacuum(family)?)
}

/// Vacuum state `φ` of a polynomial word in the t-gaussians, by sparse application.
pub fn vacuum_state_of_word<S: Scalar>(family: &GaussianFamily<S>, word: &AlternatingWord<S>) -> Result<S> {
    Ok(word.apply_to_vacuum(family)?.coeffs()[0].clone())
}

/// Free convolution `ν_1 ⊞ ν_2` by adding R-transforms.
pub fn free_convolution<S: Scalar>(nu1: &CauchySeries<S>, nu2: &CauchySeries<S>) -> Result<CauchySeries<S>> {
    if nu1.order() != nu2.order() {
        return Err(Error::OrderMismatch { left: nu1.order(), right: nu2.order() });
    }
    from_r_transform(&r_transform(nu1)?.add(&r_transform(nu2)?)?)
}

/// A pair `(μ, ν)` of moment series: `μ` the law under `φ`, `ν` under `ψ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesPair<S: Scalar> {
    pub mu: CauchySeries<S>,
    pub nu: CauchySeries<S>,
}

impl<S: Scalar> SeriesPair<S> {
    pub fn new(mu: CauchySeries<S>, nu: CauchySeries<S>) -> Result<Self> {
        if mu.order() != nu.order() {
            return Err(Error::OrderMismatch { left: mu.order(), right: nu.order() });
        }
        Ok(SeriesPair { mu, nu })
    }

    pub fn order(&self) -> usize {
        self.mu.order()
    }

    /// c-free and free R-transforms.
    pub fn transforms(&self) -> Result<(RSeries<S>, RSeries<S>)> {
        Ok((cfree_r_transform(&self.mu, &self.nu)?, r_transform(&self.nu)?))
    }

    fn from_transforms(rc: &RSeries<S>, r: &RSeries<S>) -> Result<Self> {
        let nu = from_r_transform(r)?;
        let mu = from_cfree_r_transform(rc, &nu)?;
        Ok(SeriesPair { mu, nu })
    }
}

/// `(μ_1, ν_1) ⊞_c (μ_2, ν_2) = (μ, ν_1 ⊞ ν_2)`, where the c-free
/// R-transforms add: `R^c = R^c_1 + R^c_2` and `G_μ(z) = 1/(z - R^c(G_ν(z)))`.
pub fn cfree_convolution<S: Scalar>(a: &SeriesPair<S>, b: &SeriesPair<S>) -> Result<SeriesPair<S>> {
    if a.order() != b.order() {
        return Err(Error::OrderMismatch { left: a.order(), right: b.order() });
    }
    let (rc_a, r_a) = a.transforms()?;
    let (rc_b, r_b) = b.transforms()?;
    SeriesPair::from_transforms(&rc_a.add(&rc_b)?, &r_a.add(&r_b)?)
}

/// `N`-fold c-free convolution power.
pub fn cfree_power<S: Scalar>(pair: &SeriesPair<S>, n: usize) -> Result<SeriesPair<S>> {
    let k = S::from_i64(n as i64);
    let (rc, r) = pair.transforms()?;
    SeriesPair::from_transforms(&rc.scale(&k), &r.scale(&k))
}

/// `N`-fold c-free self-convolution followed by the dilation `1/√N`; returns
/// the `μ` component.
pub fn cfree_clt<S: Scalar>(pair: &SeriesPair<S>, n: usize) -> Result<CauchySeries<S>> {
    if pair.order() >= 1 && (!pair.mu.moment(1).is_zero() || !pair.nu.moment(1).is_zero()) {
        return Err(Error::InvalidParameter("central limit needs centered laws (m_1 = w_1 = 0)".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    let root = S::from_i64(n as i64).sqrt().ok_or_else(|| Error::NotRepresentable(format!("sqrt({n})")))?;
    let power = cfree_power(pair, n)?;
    Ok(power.mu.dilate(&root.inv().expect("N >= 1")))
}

/// `φ_r(u_{a_1}(X_{i_1}) ⋯ u_{a_l}(X_{i_l})) = (r² α)^{Σ a_j / 2}` when every
/// `a_j` is even, `0` otherwise.
pub fn phi_r_moments<S: Scalar>(runs: &[(usize, usize)], r: &S, params: &DeformParams<S>) -> Result<S> {
    check_r(r)?;
    if runs.iter().any(|&(i, _)| i == 0 || i > params.n()) {
        return Err(Error::LetterOutOfRange { letter: runs.iter().map(|r| r.0).max().unwrap_or(0), n: params.n() });
    }
    if runs.iter().any(|&(_, a)| a % 2 == 1) {
        return Ok(S::zero());
    }
    let total: usize = runs.iter().map(|&(_, a)| a).sum();
    Ok((r.clone() * r.clone() * params.alpha().clone()).pow(total / 2))
}

fn check_r<S: Scalar>(r: &S) -> Result<()> {
    let v = r.to_f64();
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::InvalidParameter(format!("r must lie in (0, 1], got {r}")));
    }
    Ok(())
}

/// Single-variable marginal of `φ_r`: `φ_r(u_{2p}) = (r² α)^p`, odd `u`'s
/// vanish, with `ψ` the semicircle of variance `t`.
///
/// Moments are obtained by expanding `X^k` in the `u` basis.
pub fn phi_r_marginal<S: Scalar>(r: &S, params: &DeformParams<S>, order: usize) -> Result<MarginalPair<S>> {
    check_r(r)?;
    let u: Vec<Polynomial<S>> = (0..=order).map(|k| crate::polynomials::u_poly(k, params)).collect();
    let value = |k: usize| -> S {
        if k % 2 == 1 {
            S::zero()
        } else {
            (r.clone() * r.clone() * params.alpha().clone()).pow(k / 2)
        }
    };
    let mut phi = Vec::with_capacity(order + 1);
    for k in 0..=order {
        // X^k = Σ_j c_j u_j, peeled from the top degree down
        let mut rest = Polynomial::monomial(k, S::one());
        let mut acc = S::zero();
        for j in (0..=k).rev() {
            let lead_u = u[j].coeff(j);
            let c = rest.coeff(j).div(&lead_u).expect("u_j has degree j");
            if !c.is_zero() {
                rest = rest - u[j].scale(&c);
                acc = acc + c * value(j);
            }
        }
        phi.push(acc);
    }
    let psi = moments_from_jacobi(&semicircle_jacobi(params.t().clone(), order / 2 + 1), order)?;
    MarginalPair::new(format!("phi_r r={r}"), phi, psi)
}

/// Run-encoded words `i_1^{a_1} ⋯ i_l^{a_l}` over `n` letters of length `≤ max_len`,
/// in graded-lex order of the underlying words.
pub fn run_words(n: usize, max_len: usize) -> Vec<Vec<(usize, usize)>> {
    let mut out = vec![Vec::new()];
    let mut level: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &level {
            for i in 1..=n {
                let mut v = w.clone();
                v.push(i);
                next.push(v);
            }
        }
        for w in &next {
            out.push(Word::new(w.clone()).runs());
        }
        level = next;
    }
    out
}

/// Gram matrix `⟨e_ī, e_j̄⟩` of the vectors
/// `e_ī = u^{i_1}_{a_1}(s_{i_1}) ⋯ u^{i_{l-1}}_{a_{l-1}}(s_{i_{l-1}}) v^{i_l}_{a_l}(s_{i_l}) Ω`
/// over all words of length `≤ max_len`, evaluated as mixed moments
/// `φ(e_ī* e_j̄)` in the conditional free product.
pub fn general_basis_gram<S: Scalar>(marginals: &[MarginalPair<S>], max_len: usize) -> Result<Vec<Vec<S>>> {
    let n = marginals.len();
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for m in marginals {
        let order = m.order();
        if 2 * max_len > order {
            return Err(Error::InsufficientOrder { needed: 2 * max_len, available: order });
        }
        u.push(m.u_polys(max_len.min(max_len.saturating_sub(1)) + 1)?);
        v.push(m.v_polys(max_len + 1)?);
    }
    let words = run_words(n, max_len);
    let vectors: Vec<AlternatingWord<S>> = words
        .iter()
        .map(|runs| {
            let factors = runs
                .iter()
                .enumerate()
                .map(|(pos, &(i, a))| {
                    let p = if pos + 1 == runs.len() { v[i - 1][a].clone() } else { u[i - 1][a].clone() };
                    (i, p)
                })
                .collect();
            AlternatingWord::new(factors)
        })
        .collect();
    let mut gram = vec![vec![S::zero(); vectors.len()]; vectors.len()];
    for a in 0..vectors.len() {
        for b in a..vectors.len() {
            let g = cfree_mixed_moment(marginals, &vectors[a].reversed().concat(&vectors[b]))?;
            gram[a][b] = g.clone();
            gram[b][a] = g;
        }
    }
    Ok(gram)
}

/// Returns `(φ(c x), ψ(x))` with `c = 1 + Σ_i f̄_i(X_i)`, where `1 + f̄_i` is the
/// density of `ψ_i` with respect to `φ_i`.
///
/// Each `f̄_i` is validated first: `φ_i(f̄_i) = 0` and
/// `φ_i((1 + f̄_i) X^k) = ψ_i(X^k)` for every degree the moments allow.
pub fn density_vector_check<S: Scalar>(
    marginals: &[MarginalPair<S>],
    fbars: &[Polynomial<S>],
    word: &AlternatingWord<S>,
    tol: f64,
) -> Result<(S, S)> {
    if fbars.len() != marginals.len() {
        return Err(Error::ParamMismatch(format!("{} densities for {} marginals", fbars.len(), marginals.len())));
    }
    for (i, (m, fbar)) in marginals.iter().zip(fbars).enumerate() {
        let f = fbar.clone() + Polynomial::one();
        let mass = m.phi(&f)?;
        if !mass.near(&S::one(), tol) {
            return Err(Error::NotADensity(format!("density {} has mass {mass}", i + 1)));
        }
        let deg = f.degree().unwrap_or(0);
        for k in 0..=m.order().saturating_sub(deg) {
            let lhs = m.phi(&(f.clone() * Polynomial::monomial(k, S::one())))?;
            if !lhs.near(&m.psi_moments()[k], tol) {
                return Err(Error::NotADensity(format!("density {} does not reproduce psi moment {k}", i + 1)));
            }
        }
    }
    let mut phi_cx = cfree_mixed_moment(marginals, word)?;
    for (i, fbar) in fbars.iter().enumerate() {
        if fbar.is_zero() {
            continue;
        }
        let prefixed = AlternatingWord::new(vec![(i + 1, fbar.clone())]).concat(word);
        phi_cx = phi_cx + cfree_mixed_moment(marginals, &prefixed)?;
    }
    Ok((phi_cx, free_mixed_moment(marginals, word)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{c_operator, gaussian, vacuum_moments};
    use crate::polynomials::{u_poly, v_poly};
    use crate::scalar::{ratio, One, Surd, Zero};
    use crate::spectra::{closed_form_series, GKind};
    use crate::fock::FockSpace;

    fn exact(t: (i64, i64), n: usize, l: usize) -> DeformParams<Surd> {
        DeformParams::exact(ratio(t.0, t.1), n, l).unwrap()
    }

    fn q(a: i64, b: i64) -> Surd {
        Surd::from_ratio(&ratio(a, b))
    }

    #[test]
    fn normal_form_merges() {
        let w = AlternatingWord::<Surd>::from_letters(&[1, 1, 2, 2, 2, 1]);
        assert_eq!(w.factors().len(), 3);
        assert_eq!(w.factors()[0].1, Polynomial::monomial(2, Surd::one()));
        let with_const = AlternatingWord::new(vec![
            (1, Polynomial::x()),
            (2, Polynomial::constant(q(3, 1))),
            (1, Polynomial::x()),
        ]);
        assert_eq!(with_const.coeff(), &q(3, 1));
        assert_eq!(with_const.factors().len(), 1);
    }

    #[test]
    fn single_and_centered_factors() {
        let p = exact((1, 3), 2, 1);
        let m = t_gaussian_marginal(&p, 8).unwrap();
        let marginals = vec![m.clone(), m.clone()];
        let x2 = Polynomial::monomial(2, Surd::one());
        let w = AlternatingWord::new(vec![(1, x2.clone())]);
        assert_eq!(cfree_mixed_moment(&marginals, &w).unwrap(), Surd::one());
        // ψ-centered: X² - t
        let c = x2 - Polynomial::constant(p.t().clone());
        let w = AlternatingWord::new(vec![(1, c.clone()), (2, c.clone())]);
        let expected = m.phi(&c).unwrap() * m.phi(&c).unwrap();
        assert_eq!(cfree_mixed_moment(&marginals, &w).unwrap(), expected);
    }

    #[test]
    fn u2_u2_gives_alpha_squared() {
        let p = exact((2, 5), 2, 4);
        let m = t_gaussian_marginal(&p, 8).unwrap();
        let marginals = vec![m.clone(), m];
        let u2 = u_poly(2, &p);
        let w = AlternatingWord::new(vec![(1, u2.clone()), (2, u2)]);
        let alpha = p.alpha().clone();
        assert_eq!(cfree_mixed_moment(&marginals, &w).unwrap(), alpha.clone() * alpha);
        let family = GaussianFamily::new(p).unwrap();
        assert_eq!(vacuum_state_of_word(&family, &w).unwrap(), cfree_mixed_moment(&marginals, &w).unwrap());
    }

    #[test]
    fn free_moments_of_semicircles() {
        let one = Surd::one();
        let semi = MarginalPair::diagonal("semicircle", bernoulli_moments(&one, 0)).unwrap();
        let _ = semi;
        let catalan = vec![1, 0, 1, 0, 2, 0, 5, 0, 14].into_iter().map(Surd::from_i64).collect::<Vec<_>>();
        let semi = MarginalPair::diagonal("semicircle", catalan).unwrap();
        let marginals = vec![semi.clone(), semi];
        let w = AlternatingWord::from_letters(&[1, 2, 1, 2]);
        assert_eq!(free_mixed_moment(&marginals, &w).unwrap(), Surd::zero());
        let w = AlternatingWord::from_letters(&[1, 1, 2, 2]);
        assert_eq!(free_mixed_moment(&marginals, &w).unwrap(), Surd::one());
        // ψ-moments of u_d(√t s¹), d ≥ 1, vanish
        let p = exact((1, 2), 2, 1);
        let m = t_gaussian_marginal(&p, 8).unwrap();
        for d in 1..=8 {
            assert_eq!(m.psi(&u_poly(d, &p)).unwrap(), Surd::zero());
        }
    }

    #[test]
    fn psi_state_values() {
        let p = exact((1, 3), 2, 4);
        let family = GaussianFamily::new(p.clone()).unwrap();
        let id = AlternatingWord::<Surd>::new(vec![]);
        assert_eq!(psi_state_of_word(&family, &id).unwrap(), Surd::one());
        let v2 = AlternatingWord::new(vec![(1, v_poly(2, &p))]);
        assert_eq!(psi_state_of_word(&family, &v2).unwrap(), -(p.sqrt_t().clone() * p.alpha().clone()));
        let u2 = AlternatingWord::new(vec![(2, u_poly(2, &p))]);
        assert_eq!(psi_state_of_word(&family, &u2).unwrap(), Surd::zero());
    }

    #[test]
    fn convolution_identities() {
        let catalan = |v: i64| {
            let c = [1, 0, 1, 0, 2, 0, 5, 0, 14];
            CauchySeries::new(c.iter().enumerate().map(|(k, &x)| Surd::from_i64(x * v.pow(k as u32 / 2))).collect())
                .unwrap()
        };
        assert_eq!(free_convolution(&catalan(1), &catalan(1)).unwrap(), catalan(2));
        let dirac = CauchySeries::dirac(8);
        assert_eq!(free_convolution(&dirac, &catalan(1)).unwrap(), catalan(1));
        let diag = SeriesPair::new(catalan(1), catalan(1)).unwrap();
        let conv = cfree_convolution(&diag, &diag).unwrap();
        assert_eq!(conv.mu, catalan(2));
        assert_eq!(conv.nu, catalan(2));
        let short = SeriesPair::new(catalan(1).truncate(6).unwrap(), catalan(1).truncate(6).unwrap()).unwrap();
        assert!(matches!(cfree_convolution(&diag, &short), Err(Error::OrderMismatch { .. })));
    }

    #[test]
    fn gamma_pair_reproduces_c_law() {
        let order = 8;
        let p = exact((2, 3), 2, order);
        let p1 = p.with_n(1).unwrap();
        let gamma = SeriesPair::new(
            closed_form_series(GKind::Ct, &p1, order).unwrap(),
            closed_form_series(GKind::TC1, &p1, order).unwrap(),
        )
        .unwrap();
        let (rc, _) = gamma.transforms().unwrap();
        // R^c(z) = 1/(1 - tz): coefficients t^{k-1}
        for k in 1..=order {
            assert_eq!(rc.r(k), &p.t().pow(k - 1));
        }
        let pair = cfree_power(&gamma, 2).unwrap();
        let space = FockSpace::new(p.clone()).unwrap();
        let matrix = vacuum_moments(&c_operator(&space).unwrap(), order).unwrap();
        assert_eq!(pair.mu.moments(), matrix.as_slice());
        assert_eq!(pair.mu, closed_form_series(GKind::Ct, &p, order).unwrap());
        assert_eq!(pair.nu, closed_form_series(GKind::TC1, &p, order).unwrap());
    }

    #[test]
    fn clt_trivial_and_semicircle_limit() {
        let one = Surd::one();
        let b = CauchySeries::new(bernoulli_moments(&one, 8)).unwrap();
        let pair = SeriesPair::new(b.clone(), b.clone()).unwrap();
        assert_eq!(cfree_clt(&pair, 1).unwrap(), b);
        let catalan = [1.0, 0.0, 1.0, 0.0, 2.0, 0.0, 5.0, 0.0, 14.0];
        let err = |n: usize| {
            let limit = cfree_clt(&pair, n).unwrap();
            catalan.iter().enumerate().map(|(k, c)| (limit.moment(k).to_f64() - c).abs()).fold(0.0, f64::max)
        };
        // O(1/N) convergence
        let ratio = err(256) / err(1024);
        assert!(err(1024) < 0.05 && (3.8..4.2).contains(&ratio), "ratio {ratio}");
        let shifted = CauchySeries::new(vec![one.clone(), one.clone(), one.clone()]).unwrap();
        let pair = SeriesPair::new(shifted.clone(), shifted).unwrap();
        assert!(cfree_clt(&pair, 4).is_err());
    }

    #[test]
    fn phi_r_values_and_marginal() {
        let p = exact((2, 3), 2, 4);
        let r = q(1, 2);
        let rra = r.clone() * r.clone() * p.alpha().clone();
        assert_eq!(phi_r_moments(&[(1, 2), (2, 2)], &r, &p).unwrap(), rra.clone() * rra);
        assert_eq!(phi_r_moments(&[(1, 2), (2, 1)], &r, &p).unwrap(), Surd::zero());
        let m = phi_r_marginal(&r, &p, 8).unwrap();
        // Jacobi route: β = (t(1 + r²α), t, t, …)
        let t = p.t().clone();
        let b1 = t.clone() * (Surd::one() + r.clone() * r.clone() * p.alpha().clone());
        let jac = JacobiCoefficients { diag: vec![Surd::zero(); 5], beta: vec![b1, t.clone(), t.clone(), t.clone(), t] };
        assert_eq!(m.phi_moments(), moments_from_jacobi(&jac, 8).unwrap().as_slice());
        let marginals = vec![m.clone(), m];
        let runs = [(1usize, 2usize), (2, 2), (1, 4)];
        let w = AlternatingWord::new(runs.iter().map(|&(i, a)| (i, u_poly(a, &p))).collect());
        assert_eq!(cfree_mixed_moment(&marginals, &w).unwrap(), phi_r_moments(&runs, &r, &p).unwrap());
    }

    #[test]
    fn phi_one_is_vacuum_on_u_words() {
        let p = exact((2, 3), 2, 6);
        let family = GaussianFamily::new(p.clone()).unwrap();
        for runs in [vec![(1usize, 2usize), (2, 2)], vec![(1, 2), (2, 1), (1, 3)], vec![(2, 4), (1, 2)]] {
            let w = AlternatingWord::new(runs.iter().map(|&(i, a)| (i, u_poly(a, &p))).collect());
            assert_eq!(vacuum_state_of_word(&family, &w).unwrap(), phi_r_moments(&runs, &Surd::one(), &p).unwrap());
        }
    }

    #[test]
    fn gram_t_gaussian_identity() {
        let p = exact((1, 3), 2, 1);
        let m = t_gaussian_marginal(&p, 6).unwrap();
        let gram = general_basis_gram(&[m.clone(), m], 3).unwrap();
        assert_eq!(gram.len(), 15);
        for (a, row) in gram.iter().enumerate() {
            for (b, g) in row.iter().enumerate() {
                assert_eq!(g, &if a == b { Surd::one() } else { Surd::zero() }, "({a},{b})");
            }
        }
        let m = t_gaussian_marginal(&p, 6).unwrap();
        assert_eq!(general_basis_gram(&[m], 0).unwrap(), vec![vec![Surd::one()]]);
    }

    #[test]
    fn gram_arcsine_bernoulli() {
        let phi = arcsine_moments(&2.0f64, 8);
        let psi = bernoulli_moments(&1.0f64, 8);
        let m = MarginalPair::new("arcsine/bernoulli", phi, psi).unwrap();
        let gram = general_basis_gram(&[m.clone(), m], 2).unwrap();
        for (a, row) in gram.iter().enumerate() {
            for (b, g) in row.iter().enumerate() {
                let target = if a == b { 1.0 } else { 0.0 };
                assert!((g - target).abs() < 1e-10, "({a},{b}) = {g}");
            }
        }
    }

    #[test]
    fn density_vector_examples() {
        let p = exact((1, 3), 2, 6);
        let m = t_gaussian_marginal(&p, 10).unwrap();
        let marginals = vec![m.clone(), m];
        let fbar = v_poly(2, &p).scale(&-(p.sqrt_t().clone() * p.alpha().clone()));
        let fbars = vec![fbar.clone(), fbar];
        let one = AlternatingWord::new(vec![]);
        assert_eq!(density_vector_check(&marginals, &fbars, &one, 0.0).unwrap(), (Surd::one(), Surd::one()));
        let u3 = AlternatingWord::new(vec![(2, u_poly(3, &p))]);
        assert_eq!(density_vector_check(&marginals, &fbars, &u3, 0.0).unwrap(), (Surd::zero(), Surd::zero()));
        let bad = vec![Polynomial::constant(Surd::one()), Polynomial::zero()];
        assert!(matches!(density_vector_check(&marginals, &bad, &one, 0.0), Err(Error::NotADensity(_))));
    }

    #[test]
    fn moments_of_s_gaussian_marginal_match_operator() {
        let p = exact((3, 7), 1, 5);
        let m = t_gaussian_marginal(&p, 10).unwrap();
        let space = FockSpace::new(p).unwrap();
        assert_eq!(m.phi_moments(), vacuum_moments(&gaussian(1, &space).unwrap(), 10).unwrap().as_slice());
    }

    fn random_psi_centered(rng: &mut rand_chacha::ChaCha8Rng, m: &MarginalPair<Surd>, max_deg: usize) -> Polynomial<Surd> {
        use rand::Rng;
        let deg = rng.gen_range(1..=max_deg);
        let coeffs = (0..=deg).map(|_| q(rng.gen_range(-3..=3), rng.gen_range(1..=3))).collect::<Vec<_>>();
        let mut p = Polynomial::new(coeffs);
        if p.degree().unwrap_or(0) == 0 {
            p = Polynomial::monomial(deg, Surd::one());
        }
        let c = m.psi(&p).unwrap();
        p - Polynomial::constant(c)
    }

    fn random_alternating(rng: &mut rand_chacha::ChaCha8Rng, n: usize, len: usize) -> Vec<usize> {
        use rand::Rng;
        let mut letters: Vec<usize> = Vec::with_capacity(len);
        while letters.len() < len {
            let i = rng.gen_range(1..=n);
            if letters.last() != Some(&i) {
                letters.push(i);
            }
        }
        letters
    }

    #[test]
    fn conditional_freeness_in_matrix_model() {
        use rand::{Rng, SeedableRng};
        let p = exact((2, 3), 2, 8);
        let m = t_gaussian_marginal(&p, 16).unwrap();
        let family = GaussianFamily::new(p).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let len = rng.gen_range(1..=4);
            let letters = random_alternating(&mut rng, 2, len);
            let factors: Vec<_> = letters.iter().map(|&i| (i, random_psi_centered(&mut rng, &m, 8 / len))).collect();
            let expected = factors.iter().fold(Surd::one(), |acc, (_, f)| acc * m.phi(f).unwrap());
            let w = AlternatingWord::new(factors);
            assert_eq!(w.factors().len(), len);
            assert_eq!(vacuum_state_of_word(&family, &w).unwrap(), expected, "{w}");
        }
    }

    #[test]
    fn two_routes_to_psi_agree_on_u_words() {
        let p = exact((2, 5), 2, 8);
        let m = t_gaussian_marginal(&p, 16).unwrap();
        let marginals = vec![m.clone(), m];
        let family = GaussianFamily::new(p.clone()).unwrap();
        let mut checked = 0;
        // compositions of every total degree ≤ 8, alternating letters starting with 1 or 2
        let mut stack: Vec<Vec<usize>> = vec![vec![]];
        while let Some(degrees) = stack.pop() {
            let total: usize = degrees.iter().sum();
            for d in 1..=8 - total {
                let mut next = degrees.clone();
                next.push(d);
                stack.push(next);
            }
            if degrees.is_empty() {
                continue;
            }
            for first in 1..=2 {
                let factors = degrees
                    .iter()
                    .enumerate()
                    .map(|(k, &d)| (if k % 2 == 0 { first } else { 3 - first }, u_poly(d, &p)))
                    .collect();
                let w = AlternatingWord::new(factors);
                assert_eq!(psi_state_of_word(&family, &w).unwrap(), free_mixed_moment(&marginals, &w).unwrap(), "{w}");
                checked += 1;
            }
        }
        assert_eq!(checked, 2 * 255);
    }

    #[test]
    fn density_vector_reproduces_psi_state() {
        use rand::{Rng, SeedableRng};
        let p = exact((1, 3), 2, 6);
        let m = t_gaussian_marginal(&p, 12).unwrap();
        let marginals = vec![m.clone(), m.clone()];
        let family = GaussianFamily::new(p.clone()).unwrap();
        let fbar = v_poly(2, &p).scale(&-(p.sqrt_t().clone() * p.alpha().clone()));
        let fbars = vec![fbar.clone(), fbar];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let len = rng.gen_range(1..=3);
            let letters = random_alternating(&mut rng, 2, len);
            let factors = letters
                .iter()
                .map(|&i| {
                    let deg = rng.gen_range(1..=2);
                    (i, Polynomial::new((0..=deg).map(|_| q(rng.gen_range(-2..=2), 1)).collect()))
                })
                .collect();
            let w = AlternatingWord::new(factors);
            let (phi_cx, psi_x) = density_vector_check(&marginals, &fbars, &w, 0.0).unwrap();
            assert_eq!(phi_cx, psi_x);
            assert_eq!(phi_cx, psi_state_of_word(&family, &w).unwrap(), "{w}");
        }
    }

    fn exact_pairs(order: usize) -> Vec<SeriesPair<Surd>> {
        let mut out = Vec::new();
        for t in [(2, 3), (1, 2)] {
            // moments are rational; drop the field tag so different t's can mix
            let m = t_gaussian_marginal(&exact(t, 1, 1), order).unwrap();
            let strip = |v: &[Surd]| v.iter().map(|x| Surd::rational(x.as_rational().unwrap().clone())).collect();
            out.push(
                SeriesPair::new(
                    CauchySeries::new(strip(m.phi_moments())).unwrap(),
                    CauchySeries::new(strip(m.psi_moments())).unwrap(),
                )
                .unwrap(),
            );
        }
        let b = CauchySeries::new(bernoulli_moments(&q(1, 1), order)).unwrap();
        let a = CauchySeries::new(arcsine_moments(&q(2, 1), order)).unwrap();
        out.push(SeriesPair::new(a, b).unwrap());
        out
    }

    #[test]
    fn cfree_convolution_commutative_and_associative() {
        let pairs = exact_pairs(12);
        let (a, b, c) = (&pairs[0], &pairs[1], &pairs[2]);
        assert_eq!(cfree_convolution(a, b).unwrap(), cfree_convolution(b, a).unwrap());
        assert_eq!(cfree_convolution(a, c).unwrap(), cfree_convolution(c, a).unwrap());
        let left = cfree_convolution(&cfree_convolution(a, b).unwrap(), c).unwrap();
        let right = cfree_convolution(a, &cfree_convolution(b, c).unwrap()).unwrap();
        assert_eq!(left, right);
        assert_eq!(cfree_power(c, 3).unwrap(), cfree_convolution(&cfree_convolution(c, c).unwrap(), c).unwrap());
    }

    #[test]
    fn clt_bernoulli_pair_gives_t_gaussian() {
        let t = 0.5;
        let pair = SeriesPair::new(
            CauchySeries::new(bernoulli_moments(&1.0, 8)).unwrap(),
            CauchySeries::new(bernoulli_moments(&t, 8)).unwrap(),
        )
        .unwrap();
        let ns = [4usize, 8, 16, 32, 64, 128, 256];
        let errs: Vec<f64> = ns.iter().map(|&n| (cfree_clt(&pair, n).unwrap().moment(4) - (1.0 + t)).abs()).collect();
        let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
        let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let slope = least_squares_slope(&xs, &ys);
        assert!((slope + 1.0).abs() < 0.1, "slope {slope}");
        // limit moments: error is c_k(t)/N; within 2/N only for small t
        for (t, n, bound) in [(0.25, 256usize, 2.0), (0.5, 256, 6.0), (0.5, 1024, 6.0)] {
            let pair = SeriesPair::new(
                CauchySeries::new(bernoulli_moments(&1.0, 8)).unwrap(),
                CauchySeries::new(bernoulli_moments(&t, 8)).unwrap(),
            )
            .unwrap();
            let limit = cfree_clt(&pair, n).unwrap();
            let mu = crate::spectra::gaussian_measure(t).unwrap();
            for k in 0..=8 {
                let target = crate::spectra::measure_moment(&mu, k);
                let scaled = (limit.moment(k) - target).abs() * n as f64;
                assert!(scaled < bound, "t={t} N={n} k={k}: N*err = {scaled}");
            }
        }
    }

    fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        num / den
    }

    #[test]
    fn squared_semicircle_convolution_matches_tc1_quadrature() {
        let (t, n) = (0.7f64, 3usize);
        let order = 8;
        // (√t s¹)²: moments t^k C_k
        let catalan = [1.0, 1.0, 2.0, 5.0, 14.0];
        let single: Vec<f64> = (0..=order).map(|k| if k <= 4 { t.powi(k as i32) * catalan[k] } else { 0.0 }).collect();
        let single = CauchySeries::new(single[..5].to_vec()).unwrap();
        let mut conv = single.clone();
        for _ in 1..n {
            conv = free_convolution(&conv, &single).unwrap();
        }
        let (a, b) = {
            let r = (n as f64).sqrt();
            (t * (1.0 - r).powi(2), t * (1.0 + r).powi(2))
        };
        let density = |x: f64| {
            let g = crate::spectra::closed_form_g(GKind::TC1, t, n, num_complex::Complex64::new(x, 1e-14)).unwrap();
            -g.im / std::f64::consts::PI
        };
        for k in 0..=4 {
            let m = crate::spectra::integrate_sqrt_edges(|x| x.powi(k as i32) * density(x), a, b, 1e-12);
            assert!((conv.moment(k) - m).abs() < 1e-8 * m.max(1.0), "k={k}: {} vs {m}", conv.moment(k));
        }
    }

    #[test]
    fn gram_is_symmetric_with_unit_diagonal() {
        let m = MarginalPair::new("arcsine/bernoulli", arcsine_moments(&2.0f64, 6), bernoulli_moments(&1.0f64, 6)).unwrap();
        let gram = general_basis_gram(&[m.clone(), m.clone(), m], 2).unwrap();
        for a in 0..gram.len() {
            assert!((gram[a][a] - 1.0).abs() < 1e-10);
            for b in 0..gram.len() {
                assert_eq!(gram[a][b], gram[b][a]);
            }
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn diagonal_cfree_equals_free(num in 1i64..20, den in 1i64..20) {
            let p = exact((num, den), 1, 1);
            let m = t_gaussian_marginal(&p, 8).unwrap();
            let s = m.psi_series().unwrap();
            let pair = SeriesPair::new(s.clone(), s.clone()).unwrap();
            let conv = cfree_convolution(&pair, &pair).unwrap();
            let free = free_convolution(&s, &s).unwrap();
            proptest::prop_assert_eq!(&conv.mu, &free);
            proptest::prop_assert_eq!(&conv.nu, &free);
        }
    }
}
