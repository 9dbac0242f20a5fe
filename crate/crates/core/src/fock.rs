//! Word-indexed truncated t-deformed Fock space.
//!
//! The computational basis is the canonical orthonormal basis `e_w`, indexed by
//! words `w` over the letters `1..=n` of length at most `L`. The `t^{k-1}`
//! weights of the level-`k` inner product are absorbed into the normalization,
//! so every Gram matrix is the identity by construction.
//!
//! Basis order is graded by length, then lexicographic: `ε, 1, 2, …, n, 11, 12, …`.

use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{Radicand, Scalar, Surd};

/// Default cap on the number of basis vectors of a truncated space.
pub const DEFAULT_SIZE_CAP: usize = 2_000_000;

/// Global deformation context: `t`, the generator count `n`, `α = 1/t - 1`
/// and the truncation level `L`.
#[derive(Clone, Debug)]
pub struct DeformParams<S: Scalar> {
    t: S,
    sqrt_t: S,
    inv_sqrt_t: S,
    alpha: S,
    t_f64: f64,
    n: usize,
    max_len: usize,
    size_cap: usize,
}

impl<S: Scalar> DeformParams<S> {
    fn validate(n: usize, t_f64: f64) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if !(t_f64 > 0.0) || !t_f64.is_finite() {
            return Err(Error::InvalidParameter(format!("t must be positive, got {t_f64}")));
        }
        Ok(())
    }

    pub fn t(&self) -> &S {
        &self.t
    }

    pub fn sqrt_t(&self) -> &S {
        &self.sqrt_t
    }

    /// `1/√t`.
    pub fn inv_sqrt_t(&self) -> &S {
        &self.inv_sqrt_t
    }

    /// `α = 1/t - 1`.
    pub fn alpha(&self) -> &S {
        &self.alpha
    }

    pub fn t_f64(&self) -> f64 {
        self.t_f64
    }

    pub fn alpha_f64(&self) -> f64 {
        1.0 / self.t_f64 - 1.0
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Truncation level `L` (maximum word length).
    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn size_cap(&self) -> usize {
        self.size_cap
    }

    pub fn with_max_len(&self, max_len: usize) -> Self {
        DeformParams { max_len, ..self.clone() }
    }

    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::validate(n, self.t_f64)?;
        Ok(DeformParams { n, ..self.clone() })
    }

    pub fn with_size_cap(&self, size_cap: usize) -> Self {
        DeformParams { size_cap, ..self.clone() }
    }

    /// Basis dimension `(n^{L+1} - 1)/(n - 1)` (or `L + 1` for `n = 1`),
    /// refused when it exceeds the size cap.
    pub fn dimension(&self) -> Result<usize> {
        let dim = dimension_u128(self.n, self.max_len);
        match dim {
            Some(d) if d <= self.size_cap as u128 => Ok(d as usize),
            Some(d) => Err(Error::DimensionOverflow { dim: d, cap: self.size_cap }),
            None => Err(Error::DimensionOverflow { dim: u128::MAX, cap: self.size_cap }),
        }
    }

    /// Same deformation, same truncation.
    pub fn same_space(&self, other: &Self) -> bool {
        self.n == other.n && self.max_len == other.max_len && self.t == other.t
    }
}

impl DeformParams<f64> {
    /// Floating point context.
    pub fn float(t: f64, n: usize, max_len: usize) -> Result<Self> {
        Self::validate(n, t)?;
        let sqrt_t = t.sqrt();
        Ok(DeformParams {
            t,
            sqrt_t,
            inv_sqrt_t: 1.0 / sqrt_t,
            alpha: 1.0 / t - 1.0,
            t_f64: t,
            n,
            max_len,
            size_cap: DEFAULT_SIZE_CAP,
        })
    }
}

impl DeformParams<Surd> {
    /// Exact context over `Q(√t)`; requires a rational `t`.
    pub fn exact(t: BigRational, n: usize, max_len: usize) -> Result<Self> {
        let radicand = Radicand::new(t.clone())?;
        let t_f64 = Surd::rational(t.clone()).to_f64();
        Self::validate(n, t_f64)?;
        let t_s = Surd::new(t.clone(), BigRational::zero(), &radicand);
        let sqrt_t = Surd::sqrt_t(&radicand);
        // 1/√t = √t / t
        let inv_sqrt_t = Surd::new(BigRational::zero(), t.recip(), &radicand);
        let alpha = Surd::new(t.recip() - BigRational::one(), BigRational::zero(), &radicand);
        Ok(DeformParams {
            t: t_s,
            sqrt_t,
            inv_sqrt_t,
            alpha,
            t_f64,
            n,
            max_len,
            size_cap: DEFAULT_SIZE_CAP,
        })
    }

    pub fn radicand(&self) -> &Arc<Radicand> {
        self.sqrt_t.radicand().expect("exact params always carry the radicand")
    }
}

fn dimension_u128(n: usize, max_len: usize) -> Option<u128> {
    let n = n as u128;
    let mut total: u128 = 0;
    let mut level: u128 = 1;
    for _ in 0..=max_len {
        total = total.checked_add(level)?;
        level = level.checked_mul(n)?;
    }
    Some(total)
}

/// A word over the letters `1..=n`; the empty word is the vacuum `Ω`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn new(letters: impl Into<Vec<usize>>) -> Self {
        Word(letters.into())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    /// Run-length encoding `i_1^{a_1} … i_l^{a_l}` with `i_j ≠ i_{j+1}`.
    pub fn runs(&self) -> Vec<(usize, usize)> {
        let mut runs: Vec<(usize, usize)> = Vec::new();
        for &letter in &self.0 {
            match runs.last_mut() {
                Some((l, count)) if *l == letter => *count += 1,
                _ => runs.push((letter, 1)),
            }
        }
        runs
    }

    pub fn reversed(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }

    /// `letter · self`.
    pub fn prepend(&self, letter: usize) -> Word {
        let mut letters = Vec::with_capacity(self.len() + 1);
        letters.push(letter);
        letters.extend_from_slice(&self.0);
        Word(letters)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "ε");
        }
        write!(f, "(")?;
        for (k, l) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, ")")
    }
}

/// The truncated space itself: parameters plus the index arithmetic of the
/// graded-lex enumeration.
#[derive(Debug)]
pub struct FockSpace<S: Scalar> {
    params: DeformParams<S>,
    /// `offsets[k]` = number of words of length `< k`; has `L + 2` entries.
    offsets: Vec<usize>,
    /// `powers[k] = n^k` for `k ≤ L`.
    powers: Vec<usize>,
}

impl<S: Scalar> FockSpace<S> {
    pub fn new(params: DeformParams<S>) -> Result<Arc<Self>> {
        params.dimension()?;
        let n = params.n();
        let mut powers = Vec::with_capacity(params.max_len() + 1);
        let mut offsets = Vec::with_capacity(params.max_len() + 2);
        let mut p = 1usize;
        let mut off = 0usize;
        for _ in 0..=params.max_len() {
            powers.push(p);
            offsets.push(off);
            off += p;
            p = p.saturating_mul(n);
        }
        offsets.push(off);
        Ok(Arc::new(FockSpace { params, offsets, powers }))
    }

    pub fn params(&self) -> &DeformParams<S> {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.offsets[self.params.max_len() + 1]
    }

    pub fn n(&self) -> usize {
        self.params.n()
    }

    pub fn max_len(&self) -> usize {
        self.params.max_len()
    }

    /// Index range of the basis vectors of a given level.
    pub fn level_range(&self, level: usize) -> std::ops::Range<usize> {
        self.offsets[level]..self.offsets[level + 1]
    }

    /// Level (word length) of the basis vector at `index`.
    pub fn level_of(&self, index: usize) -> usize {
        match self.offsets.binary_search(&index) {
            Ok(k) => k,
            Err(k) => k - 1,
        }
    }

    pub fn index_of(&self, word: &Word) -> Result<usize> {
        if word.len() > self.max_len() {
            return Err(Error::OutOfTruncation { len: word.len(), max_len: self.max_len() });
        }
        let n = self.n();
        let mut value = 0usize;
        for &letter in word.letters() {
            if letter == 0 || letter > n {
                return Err(Error::LetterOutOfRange { letter, n });
            }
            value = value * n + (letter - 1);
        }
        Ok(self.offsets[word.len()] + value)
    }

    pub fn word_at(&self, index: usize) -> Word {
        let level = self.level_of(index);
        let mut value = index - self.offsets[level];
        let n = self.n();
        let mut letters = vec![0; level];
        for slot in letters.iter_mut().rev() {
            *slot = value % n + 1;
            value /= n;
        }
        Word(letters)
    }

    /// Index of `letter · w` given the index of `w` (which must be below the top level).
    pub(crate) fn prepend_index(&self, letter: usize, index: usize) -> usize {
        let level = self.level_of(index);
        let value = index - self.offsets[level];
        self.offsets[level + 1] + (letter - 1) * self.powers[level] + value
    }

    pub fn words(&self) -> impl Iterator<Item = Word> + '_ {
        (0..self.dim()).map(move |i| self.word_at(i))
    }
}

/// Graded-lex list of every basis word of the truncated space.
pub fn enumerate_basis<S: Scalar>(params: &DeformParams<S>) -> Result<Vec<Word>> {
    let space = FockSpace::new(params.clone())?;
    Ok(space.words().collect())
}

/// Position of `word` in [`enumerate_basis`].
pub fn word_index<S: Scalar>(word: &Word, params: &DeformParams<S>) -> Result<usize> {
    if word.len() > params.max_len() {
        return Err(Error::OutOfTruncation { len: word.len(), max_len: params.max_len() });
    }
    let n = params.n();
    let mut offset = 0usize;
    let mut p = 1usize;
    for _ in 0..word.len() {
        offset += p;
        p *= n;
    }
    let mut value = 0usize;
    for &letter in word.letters() {
        if letter == 0 || letter > n {
            return Err(Error::LetterOutOfRange { letter, n });
        }
        value = value * n + (letter - 1);
    }
    Ok(offset + value)
}

/// Vector of the truncated space in the canonical basis.
///
/// `reach` is an upper bound on the highest level carrying a nonzero
/// coefficient; operator application uses it to refuse results that the
/// truncation would corrupt.
#[derive(Clone, Debug)]
pub struct FockVector<S: Scalar> {
    space: Arc<FockSpace<S>>,
    coeffs: Vec<S>,
    reach: usize,
}

impl<S: Scalar> FockVector<S> {
    pub fn zeros(space: &Arc<FockSpace<S>>) -> Self {
        FockVector { space: space.clone(), coeffs: vec![S::zero(); space.dim()], reach: 0 }
    }

    /// The vacuum `Ω`.
    pub fn vacuum(space: &Arc<FockSpace<S>>) -> Self {
        let mut v = Self::zeros(space);
        v.coeffs[0] = S::one();
        v
    }

    /// Canonical basis vector `e_w`.
    pub fn basis(space: &Arc<FockSpace<S>>, word: &Word) -> Result<Self> {
        let idx = space.index_of(word)?;
        let mut v = Self::zeros(space);
        v.coeffs[idx] = S::one();
        v.reach = word.len();
        Ok(v)
    }

    /// Builds a vector from raw coefficients; the reach is computed from the support.
    pub fn from_coeffs(space: &Arc<FockSpace<S>>, coeffs: Vec<S>) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return Err(Error::ParamMismatch(format!(
                "coefficient length {} vs dimension {}",
                coeffs.len(),
                space.dim()
            )));
        }
        let mut v = FockVector { space: space.clone(), coeffs, reach: 0 };
        v.reach = v.support_level();
        Ok(v)
    }

    pub(crate) fn from_parts(space: Arc<FockSpace<S>>, coeffs: Vec<S>, reach: usize) -> Self {
        FockVector { space, coeffs, reach }
    }

    pub fn space(&self) -> &Arc<FockSpace<S>> {
        &self.space
    }

    pub fn params(&self) -> &DeformParams<S> {
        self.space.params()
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<S> {
        self.coeffs
    }

    pub fn reach(&self) -> usize {
        self.reach
    }

    /// Highest level with a nonzero coefficient (0 for the zero vector).
    pub fn support_level(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|c| !c.is_zero())
            .map(|i| self.space.level_of(i))
            .unwrap_or(0)
    }

    pub fn coeff(&self, word: &Word) -> Result<S> {
        Ok(self.coeffs[self.space.index_of(word)?].clone())
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.space, &other.space) || self.params().same_space(other.params()) {
            Ok(())
        } else {
            Err(Error::ParamMismatch("vectors live in different truncated spaces".into()))
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.clone() + b.clone()).collect();
        Ok(FockVector { space: self.space.clone(), coeffs, reach: self.reach.max(other.reach) })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(&-S::one()))
    }

    pub fn scale(&self, c: &S) -> Self {
        FockVector {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|a| a.clone() * c.clone()).collect(),
            reach: self.reach,
        }
    }

    /// `self += c · other`.
    pub fn axpy(&mut self, c: &S, other: &Self) -> Result<()> {
        self.check_same(other)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            if !b.is_zero() {
                *a = a.clone() + c.clone() * b.clone();
            }
        }
        self.reach = self.reach.max(other.reach);
        Ok(())
    }

    pub fn inner(&self, other: &Self) -> Result<S> {
        inner_product(self, other)
    }

    pub fn norm_f64(&self) -> f64 {
        self.coeffs.iter().map(|c| c.to_f64().powi(2)).sum::<f64>().sqrt()
    }

    /// Exact (or tolerance, in float mode) equality of coefficients.
    pub fn near(&self, other: &Self, tol: f64) -> bool {
        self.coeffs.len() == other.coeffs.len() && self.coeffs.iter().zip(&other.coeffs).all(|(a, b)| a.near(b, tol))
    }

    /// Keeps only the levels `≤ level`.
    pub fn masked_above(&self, level: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        if level < self.space.max_len() {
            let start = self.space.level_range(level + 1).start;
            for c in &mut coeffs[start..] {
                *c = S::zero();
            }
        }
        FockVector { space: self.space.clone(), coeffs, reach: self.reach.min(level) }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coeffs.iter().map(S::to_f64).collect()
    }
}

/// Coordinate inner product; the canonical basis is orthonormal.
pub fn inner_product<S: Scalar>(u: &FockVector<S>, v: &FockVector<S>) -> Result<S> {
    u.check_same(v)?;
    let mut acc = S::zero();
    for (a, b) in u.coeffs.iter().zip(&v.coeffs) {
        if !a.is_zero() && !b.is_zero() {
            acc = acc + a.clone() * b.clone();
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{ratio, One, Zero};

    fn params(n: usize, l: usize) -> DeformParams<f64> {
        DeformParams::float(0.5, n, l).unwrap()
    }

    #[test]
    fn small_enumerations() {
        let w = enumerate_basis(&params(2, 1)).unwrap();
        assert_eq!(w, vec![Word::empty(), Word::new([1]), Word::new([2])]);
        let w = enumerate_basis(&params(2, 2)).unwrap();
        assert_eq!(w.len(), 7);
        assert_eq!(&w[3..], &[Word::new([1, 1]), Word::new([1, 2]), Word::new([2, 1]), Word::new([2, 2])]);
    }

    #[test]
    fn n3_l3_count_matches_direct_count() {
        // direct count: sum over lengths of 3^k
        let direct: usize = (0..=3).map(|k| 3usize.pow(k)).sum();
        assert_eq!(direct, 40);
        assert_eq!(enumerate_basis(&params(3, 3)).unwrap().len(), direct);
    }

    #[test]
    fn indices() {
        let p = params(2, 3);
        assert_eq!(word_index(&Word::empty(), &p).unwrap(), 0);
        assert_eq!(word_index(&Word::new([2]), &p).unwrap(), 2);
        assert_eq!(word_index(&Word::new([1, 2]), &p).unwrap(), 4);
        assert!(matches!(word_index(&Word::new([1, 1, 1, 1]), &p), Err(Error::OutOfTruncation { .. })));
        assert!(matches!(word_index(&Word::new([3]), &p), Err(Error::LetterOutOfRange { .. })));
    }

    #[test]
    fn size_cap_is_enforced() {
        let p = params(2, 30);
        assert!(matches!(enumerate_basis(&p), Err(Error::DimensionOverflow { .. })));
        let p = params(64, 4).with_size_cap(1000);
        assert!(matches!(p.dimension(), Err(Error::DimensionOverflow { .. })));
    }

    #[test]
    fn inner_products() {
        let space = FockSpace::new(DeformParams::exact(ratio(1, 2), 2, 2).unwrap()).unwrap();
        let e11 = FockVector::basis(&space, &Word::new([1, 1])).unwrap();
        let e1 = FockVector::basis(&space, &Word::new([1])).unwrap();
        let e2 = FockVector::basis(&space, &Word::new([2])).unwrap();
        let omega = FockVector::vacuum(&space);
        assert_eq!(inner_product(&e11, &e11).unwrap(), Surd::one());
        assert_eq!(inner_product(&e1, &e2).unwrap(), Surd::zero());
        let mut v = omega.clone();
        v.axpy(&Surd::from_i64(2), &e1).unwrap();
        assert_eq!(inner_product(&v, &omega).unwrap(), Surd::one());
    }

    #[test]
    fn mismatched_spaces_are_rejected() {
        let a = FockSpace::new(params(2, 2)).unwrap();
        let b = FockSpace::new(params(3, 2)).unwrap();
        let u = FockVector::vacuum(&a);
        let v = FockVector::vacuum(&b);
        assert!(matches!(inner_product(&u, &v), Err(Error::ParamMismatch(_))));
    }

    #[test]
    fn prepend_and_split_indices() {
        let space = FockSpace::new(params(3, 3)).unwrap();
        for idx in 0..space.level_range(3).start {
            let w = space.word_at(idx);
            for letter in 1..=3 {
                let j = space.prepend_index(letter, idx);
                assert_eq!(space.word_at(j), w.prepend(letter));
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn dimension_formula(n in 1usize..=4, l in 0usize..=8) {
                let p = params(n, l);
                let expected = if n == 1 { l + 1 } else { (n.pow(l as u32 + 1) - 1) / (n - 1) };
                prop_assert_eq!(p.dimension().unwrap(), expected);
                prop_assert_eq!(enumerate_basis(&p).unwrap().len(), expected);
            }

            #[test]
            fn index_round_trip(n in 1usize..=4, l in 0usize..=5) {
                let p = params(n, l);
                for (i, w) in enumerate_basis(&p).unwrap().iter().enumerate() {
                    prop_assert_eq!(word_index(w, &p).unwrap(), i);
                }
            }
        }
    }
}
