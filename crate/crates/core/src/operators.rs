//! Sparse matrix models of the creation, annihilation and gaussian operators
//! on the truncated Fock space.
//!
//! Every operator is the compression `P_L A P_L` of an operator on the full
//! space. Each operator records how far it can raise (`up`) or lower (`down`)
//! the word length; applying it to a vector whose reach plus `up` stays within
//! `L` gives the exact value, and [`SparseOperator::apply`] refuses anything else.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fock::{DeformParams, FockSpace, FockVector};
use crate::scalar::Scalar;

/// Compressed sparse row matrix over the canonical basis.
#[derive(Clone, Debug)]
pub struct SparseOperator<S: Scalar> {
    space: Arc<FockSpace<S>>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<S>,
    up: usize,
    down: usize,
    symmetric: bool,
}

impl<S: Scalar> SparseOperator<S> {
    /// Builds from per-row `(col, value)` lists; zero values are dropped and
    /// duplicate columns summed.
    pub fn from_rows(
        space: &Arc<FockSpace<S>>,
        rows: Vec<Vec<(usize, S)>>,
        up: usize,
        down: usize,
        symmetric: bool,
    ) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|(c, _)| *c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    let slot = vals.last_mut().expect("duplicate follows an entry");
                    *slot = std::mem::replace(slot, S::zero()) + v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        let mut op = SparseOperator { space: space.clone(), row_ptr, cols, vals, up, down, symmetric };
        op.prune();
        op
    }

    fn prune(&mut self) {
        if !self.vals.iter().any(|v| v.is_zero()) {
            return;
        }
        let mut row_ptr = Vec::with_capacity(self.row_ptr.len());
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        row_ptr.push(0);
        for r in 0..self.dim() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if !self.vals[k].is_zero() {
                    cols.push(self.cols[k]);
                    vals.push(self.vals[k].clone());
                }
            }
            row_ptr.push(cols.len());
        }
        self.row_ptr = row_ptr;
        self.cols = cols;
        self.vals = vals;
    }

    pub fn identity(space: &Arc<FockSpace<S>>) -> Self {
        let rows = (0..space.dim()).map(|i| vec![(i, S::one())]).collect();
        Self::from_rows(space, rows, 0, 0, true)
    }

    pub fn zero(space: &Arc<FockSpace<S>>) -> Self {
        Self::from_rows(space, vec![Vec::new(); space.dim()], 0, 0, true)
    }

    pub fn space(&self) -> &Arc<FockSpace<S>> {
        &self.space
    }

    pub fn params(&self) -> &DeformParams<S> {
        self.space.params()
    }

    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Maximal increase of word length.
    pub fn up(&self) -> usize {
        self.up
    }

    /// Maximal decrease of word length.
    pub fn down(&self) -> usize {
        self.down
    }

    /// Largest level change in either direction.
    pub fn shift(&self) -> usize {
        self.up.max(self.down)
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, &S)> {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.cols[k], &self.vals[k]))
    }

    /// Entry `(r, c)`, zero when absent.
    pub fn get(&self, r: usize, c: usize) -> S {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(k) => self.vals[range.start + k].clone(),
            Err(_) => S::zero(),
        }
    }

    /// All stored entries as `(row, col, value)`.
    pub fn entries(&self) -> Vec<(usize, usize, S)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.dim() {
            for (c, v) in self.row(r) {
                out.push((r, c, v.clone()));
            }
        }
        out
    }

    fn check_space(&self, other: &Arc<FockSpace<S>>) -> Result<()> {
        if Arc::ptr_eq(&self.space, other) || self.params().same_space(other.params()) {
            Ok(())
        } else {
            Err(Error::ParamMismatch("operator and operand live in different truncated spaces".into()))
        }
    }

    /// Matrix-vector product of the compressed matrix, with no soundness check.
    pub fn apply_compressed(&self, v: &FockVector<S>) -> Result<FockVector<S>> {
        self.check_space(v.space())?;
        let x = v.coeffs();
        let mut out = vec![S::zero(); self.dim()];
        for (r, slot) in out.iter_mut().enumerate() {
            let mut acc = S::zero();
            let mut touched = false;
            for (c, a) in self.row(r) {
                let xc = &x[c];
                if !xc.is_zero() {
                    acc = acc + a.clone() * xc.clone();
                    touched = true;
                }
            }
            if touched {
                *slot = acc;
            }
        }
        let reach = (v.reach() + self.up).min(self.space.max_len());
        Ok(FockVector::from_parts(self.space.clone(), out, reach))
    }

    /// Exact application: refuses vectors whose image would leave the truncation.
    pub fn apply(&self, v: &FockVector<S>) -> Result<FockVector<S>> {
        let needed = v.reach() + self.up;
        if needed > self.space.max_len() {
            return Err(Error::TruncationUnsound { needed, max_len: self.space.max_len() });
        }
        self.apply_compressed(v)
    }

    /// Applies `self^k`, checking soundness at each step.
    pub fn apply_power(&self, v: &FockVector<S>, k: usize) -> Result<FockVector<S>> {
        let mut w = v.clone();
        for _ in 0..k {
            w = self.apply(&w)?;
        }
        Ok(w)
    }

    pub fn transpose(&self) -> Self {
        if self.symmetric {
            return self.clone();
        }
        let mut rows: Vec<Vec<(usize, S)>> = vec![Vec::new(); self.dim()];
        for r in 0..self.dim() {
            for (c, v) in self.row(r) {
                rows[c].push((r, v.clone()));
            }
        }
        Self::from_rows(&self.space, rows, self.down, self.up, false)
    }

    /// Sparse product `self · other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_space(&other.space)?;
        let dim = self.dim();
        let mut acc: Vec<S> = vec![S::zero(); dim];
        let mut mark = vec![usize::MAX; dim];
        let mut rows = Vec::with_capacity(dim);
        for r in 0..dim {
            let mut touched = Vec::new();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = S::zero();
                        touched.push(c);
                    }
                    acc[c] = std::mem::replace(&mut acc[c], S::zero()) + a.clone() * b.clone();
                }
            }
            rows.push(touched.into_iter().map(|c| (c, acc[c].clone())).collect());
        }
        let symmetric = self.symmetric && other.symmetric && Arc::ptr_eq(&self.space, &other.space) && self.same_matrix(other);
        Ok(Self::from_rows(&self.space, rows, self.up + other.up, self.down + other.down, symmetric))
    }

    fn same_matrix(&self, other: &Self) -> bool {
        self.row_ptr == other.row_ptr && self.cols == other.cols && self.vals == other.vals
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_space(&other.space)?;
        let rows = (0..self.dim())
            .map(|r| self.row(r).chain(other.row(r)).map(|(c, v)| (c, v.clone())).collect())
            .collect();
        Ok(Self::from_rows(
            &self.space,
            rows,
            self.up.max(other.up),
            self.down.max(other.down),
            self.symmetric && other.symmetric,
        ))
    }

    pub fn scale(&self, c: &S) -> Self {
        let mut out = self.clone();
        for v in &mut out.vals {
            *v = v.clone() * c.clone();
        }
        out.prune();
        out
    }

    /// Entrywise check of `value(r, c) = value(c, r)`.
    pub fn is_structurally_symmetric(&self, tol: f64) -> bool {
        (0..self.dim()).all(|r| self.row(r).all(|(c, v)| v.near(&self.get(c, r), tol)))
    }

    pub fn near(&self, other: &Self, tol: f64) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        (0..self.dim()).all(|r| {
            self.row(r).all(|(c, v)| v.near(&other.get(r, c), tol))
                && other.row(r).all(|(c, v)| v.near(&self.get(r, c), tol))
        })
    }

    pub fn to_f64(&self) -> SparseOperator<f64> {
        let params = DeformParams::float(self.params().t_f64(), self.params().n(), self.params().max_len())
            .expect("valid parameters stay valid")
            .with_size_cap(self.params().size_cap());
        let space = FockSpace::new(params).expect("same dimension as the source space");
        SparseOperator {
            space,
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            vals: self.vals.iter().map(S::to_f64).collect(),
            up: self.up,
            down: self.down,
            symmetric: self.symmetric,
        }
    }

    fn mul_f64(&self, x: &[f64], y: &mut [f64]) {
        for (r, slot) in y.iter_mut().enumerate() {
            *slot = self.row(r).map(|(c, v)| v.to_f64() * x[c]).sum();
        }
    }

    fn mul_transpose_f64(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (r, &xr) in x.iter().enumerate() {
            if xr != 0.0 {
                for (c, v) in self.row(r) {
                    y[c] += v.to_f64() * xr;
                }
            }
        }
    }
}

fn check_letter<S: Scalar>(i: usize, params: &DeformParams<S>) -> Result<()> {
    if i == 0 || i > params.n() {
        return Err(Error::LetterOutOfRange { letter: i, n: params.n() });
    }
    Ok(())
}

/// Creation operator `l_i`: `Ω ↦ e_i`, `e_w ↦ √t e_{iw}` for `|w| ≥ 1`;
/// the top level is sent to 0.
pub fn creation<S: Scalar>(i: usize, space: &Arc<FockSpace<S>>) -> Result<SparseOperator<S>> {
    let mut rows: Vec<Vec<(usize, S)>> = vec![Vec::new(); space.dim()];
    for (col, row) in creation_entries(i, space)? {
        rows[row].push((col, creation_weight(space, col)));
    }
    Ok(SparseOperator::from_rows(space, rows, 1, 0, false))
}

/// Annihilation operator `l_i*`, the exact transpose of [`creation`].
pub fn annihilation<S: Scalar>(i: usize, space: &Arc<FockSpace<S>>) -> Result<SparseOperator<S>> {
    let mut rows: Vec<Vec<(usize, S)>> = vec![Vec::new(); space.dim()];
    for (col, row) in creation_entries(i, space)? {
        rows[col].push((row, creation_weight(space, col)));
    }
    Ok(SparseOperator::from_rows(space, rows, 0, 1, false))
}

/// Gaussian `s_i = l_i + l_i*`.
pub fn gaussian<S: Scalar>(i: usize, space: &Arc<FockSpace<S>>) -> Result<SparseOperator<S>> {
    let mut coeffs = vec![S::zero(); space.n()];
    check_letter(i, space.params())?;
    coeffs[i - 1] = S::one();
    linear_gaussian(&coeffs, space)
}

/// `s(e) = Σ c_i s_i` for the direction `e = Σ c_i e_i`.
pub fn linear_gaussian<S: Scalar>(coeffs: &[S], space: &Arc<FockSpace<S>>) -> Result<SparseOperator<S>> {
    if coeffs.len() != space.n() {
        return Err(Error::ParamMismatch(format!("{} coefficients for n = {}", coeffs.len(), space.n())));
    }
    let mut rows: Vec<Vec<(usize, S)>> = vec![Vec::new(); space.dim()];
    for (k, c) in coeffs.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        for (col, row) in creation_entries(k + 1, space)? {
            let w = creation_weight(space, col) * c.clone();
            rows[row].push((col, w.clone()));
            rows[col].push((row, w));
        }
    }
    Ok(SparseOperator::from_rows(space, rows, 1, 1, true))
}

/// `Σ c_i l_i`.
pub fn linear_creation<S: Scalar>(coeffs: &[S], space: &Arc<FockSpace<S>>) -> Result<SparseOperator<S>> {
    if coeffs.len() != space.n() {
        return Err(Error::ParamMismatch(format!("{} coefficients for n = {}", coeffs.len(), space.n())));
    }
    let mut rows: Vec<Vec<(usize, S)>> = vec![Vec::new(); space.dim()];
    for (k, c) in coeffs.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        for (col, row) in creation_entries(k + 1, space)? {
            rows[row].push((col, creation_weight(space, col) * c.clone()));
        }
    }
    Ok(SparseOperator::from_rows(space, rows, 1, 0, false))
}

/// Pairs `(index of w, index of iw)` for every `w` below the top level.
fn creation_entries<S: Scalar>(i: usize, space: &Arc<FockSpace<S>>) -> Result<Vec<(usize, usize)>> {
    check_letter(i, space.params())?;
    let top = space.level_range(space.max_len()).start;
    Ok((0..top).map(|col| (col, space.prepend_index(i, col))).collect())
}

fn creation_weight<S: Scalar>(space: &FockSpace<S>, col: usize) -> S {
    if col == 0 {
        S::one()
    } else {
        space.params().sqrt_t().clone()
    }
}

/// `c^t = Σ_i s_i²`, assembled as an explicit sparse product and sum.
pub fn c_operator<S: Scalar>(space: &Arc<FockSpace<S>>) -> Result<SparseOperator<S>> {
    let mut total = SparseOperator::zero(space);
    for i in 1..=space.n() {
        let s = gaussian(i, space)?;
        total = total.add(&s.compose(&s)?)?;
    }
    total.symmetric = true;
    Ok(total)
}

/// First quantization `Γ(U) = Id_Ω ⊕ U^{⊗k}` for an orthogonal `n × n` matrix.
pub fn first_quantization<S: Scalar>(u: &[Vec<S>], space: &Arc<FockSpace<S>>) -> Result<SparseOperator<S>> {
    let n = space.n();
    if u.len() != n || u.iter().any(|r| r.len() != n) {
        return Err(Error::ParamMismatch(format!("U must be {n}x{n}")));
    }
    let deviation = orthogonality_defect(u);
    if deviation > 1e-12 || (S::EXACT && deviation != 0.0) {
        return Err(Error::NotOrthogonal(deviation));
    }
    if S::EXACT && !exactly_orthogonal(u) {
        return Err(Error::NotOrthogonal(deviation.max(f64::MIN_POSITIVE)));
    }
    let mut rows: Vec<Vec<(usize, S)>> = vec![Vec::new(); space.dim()];
    rows[0].push((0, S::one()));
    for level in 1..=space.max_len() {
        let range = space.level_range(level);
        let words: Vec<Vec<usize>> = range.clone().map(|i| space.word_at(i).0).collect();
        for (ri, rw) in words.iter().enumerate() {
            for (ci, cw) in words.iter().enumerate() {
                let mut v = S::one();
                for (a, b) in rw.iter().zip(cw) {
                    let e = &u[a - 1][b - 1];
                    if e.is_zero() {
                        v = S::zero();
                        break;
                    }
                    v = v * e.clone();
                }
                if !v.is_zero() {
                    rows[range.start + ri].push((range.start + ci, v));
                }
            }
        }
    }
    Ok(SparseOperator::from_rows(space, rows, 0, 0, false))
}

fn orthogonality_defect<S: Scalar>(u: &[Vec<S>]) -> f64 {
    let n = u.len();
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            let dot: f64 = (0..n).map(|k| u[k][a].to_f64() * u[k][b].to_f64()).sum();
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}

fn exactly_orthogonal<S: Scalar>(u: &[Vec<S>]) -> bool {
    let n = u.len();
    (0..n).all(|a| {
        (0..n).all(|b| {
            let dot = (0..n).fold(S::zero(), |acc, k| acc + u[k][a].clone() * u[k][b].clone());
            if a == b {
                dot == S::one()
            } else {
                dot.is_zero()
            }
        })
    })
}

/// Exact vacuum moment `⟨op^k Ω, Ω⟩`.
///
/// Evaluated as `⟨op^{k-h} Ω, (opᵀ)^h Ω⟩` with `h = ⌊k/2⌋`, so the
/// truncation only has to hold half of the word-length excursion.
pub fn vacuum_moment<S: Scalar>(op: &SparseOperator<S>, k: usize) -> Result<S> {
    let h = k / 2;
    let needed = (op.up * (k - h)).max(op.down * h);
    if needed > op.space.max_len() {
        return Err(Error::TruncationUnsound { needed, max_len: op.space.max_len() });
    }
    let omega = FockVector::vacuum(&op.space);
    let left = op.apply_power(&omega, k - h)?;
    let right = op.transpose().apply_power(&omega, h)?;
    left.inner(&right)
}

/// Vacuum moments `k = 0..=k_max`, from a single chain of applications.
pub fn vacuum_moments<S: Scalar>(op: &SparseOperator<S>, k_max: usize) -> Result<Vec<S>> {
    let needed_up = op.up * k_max.div_ceil(2);
    let needed_down = op.down * (k_max / 2);
    let needed = needed_up.max(needed_down);
    if needed > op.space.max_len() {
        return Err(Error::TruncationUnsound { needed, max_len: op.space.max_len() });
    }
    let omega = FockVector::vacuum(&op.space);
    let opt = op.transpose();
    let mut left = vec![omega.clone()];
    let mut right = vec![omega];
    for j in 1..=k_max.div_ceil(2) {
        let next = op.apply(&left[j - 1])?;
        left.push(next);
    }
    for j in 1..=k_max / 2 {
        let next = opt.apply(&right[j - 1])?;
        right.push(next);
    }
    (0..=k_max).map(|k| left[k - k / 2].inner(&right[k / 2])).collect()
}

/// Outcome of a power iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct NormEstimate {
    /// Lower bound on the spectral norm.
    pub value: f64,
    /// `‖AᵀA x - λ x‖ / λ` at the final iterate.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Spectral norm estimate via power iteration on `AᵀA` from a seeded random start.
pub fn operator_norm_estimate<S: Scalar>(op: &SparseOperator<S>, iterations: usize, seed: u64) -> NormEstimate {
    operator_norm_estimate_with_tol(op, iterations, seed, 1e-10)
}

pub fn operator_norm_estimate_with_tol<S: Scalar>(
    op: &SparseOperator<S>,
    iterations: usize,
    seed: u64,
    tol: f64,
) -> NormEstimate {
    let dim = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    normalize(&mut x);
    let mut ax = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    let mut done = 0;
    for it in 1..=iterations {
        done = it;
        op.mul_f64(&x, &mut ax);
        op.mul_transpose_f64(&ax, &mut y);
        lambda = dot(&x, &y);
        if lambda <= 0.0 {
            residual = 0.0;
            lambda = 0.0;
            break;
        }
        residual = x.iter().zip(&y).map(|(a, b)| (b - lambda * a).powi(2)).sum::<f64>().sqrt() / lambda;
        x.copy_from_slice(&y);
        normalize(&mut x);
        if residual < tol {
            break;
        }
    }
    NormEstimate { value: lambda.max(0.0).sqrt(), residual, iterations: done, converged: residual < tol }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) {
    let norm = dot(x, x).sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
}

/// Per-space cache of the generators `s_1, …, s_n`.
#[derive(Clone, Debug)]
pub struct GaussianFamily<S: Scalar> {
    space: Arc<FockSpace<S>>,
    gens: Vec<SparseOperator<S>>,
}

impl<S: Scalar> GaussianFamily<S> {
    pub fn new(params: DeformParams<S>) -> Result<Self> {
        let space = FockSpace::new(params)?;
        Self::on(&space)
    }

    pub fn on(space: &Arc<FockSpace<S>>) -> Result<Self> {
        let gens = (1..=space.n()).map(|i| gaussian(i, space)).collect::<Result<_>>()?;
        Ok(GaussianFamily { space: space.clone(), gens })
    }

    pub fn space(&self) -> &Arc<FockSpace<S>> {
        &self.space
    }

    pub fn params(&self) -> &DeformParams<S> {
        self.space.params()
    }

    /// `s_i` for `1 ≤ i ≤ n`.
    pub fn s(&self, i: usize) -> Result<&SparseOperator<S>> {
        if i == 0 || i > self.gens.len() {
            return Err(Error::LetterOutOfRange { letter: i, n: self.gens.len() });
        }
        Ok(&self.gens[i - 1])
    }

    pub fn vacuum(&self) -> FockVector<S> {
        FockVector::vacuum(&self.space)
    }

    /// Applies the letters of `word` right to left: `s_{w_1} ⋯ s_{w_k} v`.
    pub fn apply_word(&self, word: &[usize], v: &FockVector<S>) -> Result<FockVector<S>> {
        let mut out = v.clone();
        for &i in word.iter().rev() {
            out = self.s(i)?.apply(&out)?;
        }
        Ok(out)
    }
}

/// Random real orthogonal matrix (QR of a gaussian-like matrix by Gram-Schmidt).
pub fn random_orthogonal(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..2 {
            for c in &cols {
                let p = dot(&v, c);
                v.iter_mut().zip(c).for_each(|(a, b)| *a -= p * b);
            }
        }
        if dot(&v, &v).sqrt() > 1e-3 {
            normalize(&mut v);
            cols.push(v);
        }
    }
    (0..n).map(|r| (0..n).map(|c| cols[c][r]).collect()).collect()
}
