//! Closed-form laws of `s^t` and `c^t`, their Cauchy transforms, continued
//! fractions, Stieltjes inversion, quadrature and recovery of Jacobi data
//! from moments.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::DeformParams;
use crate::scalar::{ratio, Scalar};
use crate::series::{CauchySeries, PowerSeries};

pub use crate::series::CauchySeries as Cauchy;

/// Absolutely continuous part of a measure, supported on `[lo, hi]`.
#[derive(Clone)]
pub struct Density {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    lo: f64,
    hi: f64,
}

impl Density {
    pub fn new(lo: f64, hi: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Density { f: Arc::new(f), lo, hi }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Density value; zero outside the support.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.lo || x >= self.hi {
            0.0
        } else {
            (self.f)(x)
        }
    }
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Density[{}, {}]", self.lo, self.hi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

/// Probability measure: an optional density plus finitely many atoms.
#[derive(Clone, Debug)]
pub struct Measure {
    pub label: String,
    pub density: Option<Density>,
    pub atoms: Vec<Atom>,
}

impl Measure {
    pub fn new(label: impl Into<String>, density: Option<Density>, atoms: Vec<Atom>) -> Result<Self> {
        if let Some(a) = atoms.iter().find(|a| !(a.weight >= 0.0)) {
            return Err(Error::NotADensity(format!("negative atom weight {} at {}", a.weight, a.location)));
        }
        Ok(Measure { label: label.into(), density, atoms })
    }

    /// `∫ x^k dμ`.
    pub fn moment(&self, k: usize) -> f64 {
        measure_moment(self, k)
    }

    pub fn total_mass(&self) -> f64 {
        self.moment(0)
    }

    /// `∫ f dμ` by adaptive quadrature on the density plus the atom sum.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut total: f64 = self.atoms.iter().map(|a| a.weight * f(a.location)).sum();
        if let Some(d) = &self.density {
            total += integrate_sqrt_edges(|x| d.eval(x) * f(x), d.lo, d.hi, 1e-13);
        }
        total
    }

    /// Checks non-negativity of the density on `samples` interior points.
    pub fn check_density(&self, samples: usize) -> Result<()> {
        if let Some(d) = &self.density {
            for j in 1..=samples {
                let x = d.lo + (d.hi - d.lo) * j as f64 / (samples + 1) as f64;
                let v = d.eval(x);
                if !(v >= 0.0) {
                    return Err(Error::NotADensity(format!("density {v} at x = {x}")));
                }
            }
        }
        Ok(())
    }

    /// Cauchy transform by quadrature, for `Im z > 0`.
    pub fn cauchy_transform(&self, z: Complex64) -> Complex64 {
        let re = self.integrate(|x| (1.0 / (z - x)).re);
        let im = self.integrate(|x| (1.0 / (z - x)).im);
        Complex64::new(re, im)
    }
}

/// Law of `s^t` under the vacuum state.
///
/// Density `√(4t - x²) / (2π (1 - (1-t) x²))` on `[-2√t, 2√t]`, with atoms at
/// `±1/√(1-t)` of weight `(1-2t)/(2-2t)` when `t < 1/2`.
pub fn gaussian_measure(t: f64) -> Result<Measure> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    let edge = 2.0 * t.sqrt();
    let density = Density::new(-edge, edge, move |x| {
        (4.0 * t - x * x).max(0.0).sqrt() / (2.0 * PI * (1.0 - (1.0 - t) * x * x))
    });
    let mut atoms = Vec::new();
    if t < 0.5 {
        let loc = 1.0 / (1.0 - t).sqrt();
        let weight = gaussian_atom_weight(t);
        atoms.push(Atom { location: -loc, weight });
        atoms.push(Atom { location: loc, weight });
    }
    Measure::new(format!("s^t, t={t}"), Some(density), atoms)
}

/// `(1 - 2t)/(2 - 2t)`, the weight of each atom of the law of `s^t` (meaningful for `t ≤ 1/2`).
pub fn gaussian_atom_weight(t: f64) -> f64 {
    (1.0 - 2.0 * t) / (2.0 - 2.0 * t)
}

/// Endpoints `n/(n+√n)` and `n/(n-√n)` of the no-atom interval of `c^t`
/// (`n ≥ 2`).
pub fn c_interval(n: usize) -> (f64, f64) {
    let nf = n as f64;
    let r = nf.sqrt();
    (nf / (nf + r), nf / (nf - r))
}

/// Weight of the atom of `c^t` at `n + 1/α`, as given by the closed formula
/// `(n-1)(t - n/(n+√n))(t - n/(n-√n)) / (n(1-t)² + t(1-t))` for `n ≥ 2`,
/// and `(1-2t)/(1-t)` for `n = 1`.
pub fn c_atom_weight(t: f64, n: usize) -> f64 {
    if n == 1 {
        return (1.0 - 2.0 * t) / (1.0 - t);
    }
    let (lo, hi) = c_interval(n);
    let nf = n as f64;
    (nf - 1.0) * (t - lo) * (t - hi) / (nf * (1.0 - t).powi(2) + t * (1.0 - t))
}

/// Location `n + 1/α = (n + t(1-n))/(1-t)` of the atom of `c^t`.
pub fn c_atom_location(t: f64, n: usize) -> f64 {
    let nf = n as f64;
    (nf + t * (1.0 - nf)) / (1.0 - t)
}

/// Relative slack used when deciding whether `t` sits on an interval endpoint.
pub const BOUNDARY_SLACK: f64 = 1e-12;

/// Whether the law of `c^t` has an atom.
pub fn c_has_atom(t: f64, n: usize) -> bool {
    if n == 1 {
        return t < 0.5 * (1.0 - BOUNDARY_SLACK);
    }
    let (lo, hi) = c_interval(n);
    t < lo * (1.0 - BOUNDARY_SLACK) || t > hi * (1.0 + BOUNDARY_SLACK)
}

/// Law of `c^t = Σ_i (s_i^t)²` under the vacuum state.
pub fn c_measure(t: f64, n: usize) -> Result<Measure> {
    if !(t > 0.0) || n == 0 {
        return Err(Error::InvalidParameter(format!("need t > 0 and n >= 1, got t={t}, n={n}")));
    }
    let nf = n as f64;
    let r = nf.sqrt();
    let lo = t * (1.0 - r).powi(2);
    let hi = t * (1.0 + r).powi(2);
    let density = Density::new(lo, hi, move |x| {
        let root = ((x - lo) * (hi - x)).max(0.0).sqrt();
        root / (2.0 * PI * x * ((t - 1.0) * x + nf + t * (1.0 - nf)))
    });
    let mut atoms = Vec::new();
    if c_has_atom(t, n) {
        atoms.push(Atom { location: c_atom_location(t, n), weight: c_atom_weight(t, n) });
    }
    Measure::new(format!("c^t, t={t}, n={n}"), Some(density), atoms)
}

/// The three closed-form transforms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GKind {
    /// Law of `s^t`.
    St,
    /// Law of `c^t`.
    Ct,
    /// Law of `t c^1`, the free Poisson law of rate `n` dilated by `t`.
    TC1,
}

/// `√((z - a)(z - b))` with the branch behaving like `z` at infinity and cut on `[a, b]`.
fn sqrt_branch(z: Complex64, a: f64, b: f64) -> Complex64 {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let w = z - c;
    if r == 0.0 {
        return w;
    }
    w * (1.0 - r * r / (w * w)).sqrt()
}

/// Closed-form Cauchy transform, for `Im z > 0`.
pub fn closed_form_g(kind: GKind, t: f64, n: usize, z: Complex64) -> Result<Complex64> {
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("closed-form transforms need Im z > 0, got {z}")));
    }
    let nf = n as f64;
    let value = match kind {
        GKind::St => {
            let e = 2.0 * t.sqrt();
            let root = sqrt_branch(z, -e, e);
            ((0.5 - t) * z + 0.5 * root) / (z * z * (1.0 - t) - 1.0)
        }
        GKind::Ct | GKind::TC1 => {
            let r = nf.sqrt();
            let root = sqrt_branch(z, t * (1.0 - r).powi(2), t * (1.0 + r).powi(2));
            if kind == GKind::Ct {
                ((2.0 * t - 1.0) * z + (1.0 - nf) * t - root) / (2.0 * z * ((t - 1.0) * z + nf + t * (1.0 - nf)))
            } else {
                ((1.0 - nf) * t + z - root) / (2.0 * t * z)
            }
        }
    };
    Ok(value)
}

/// `√P` for a series with constant term 1.
fn series_sqrt<S: Scalar>(p: &PowerSeries<S>) -> Result<PowerSeries<S>> {
    let order = p.order();
    if order == 0 {
        return Ok(p.clone());
    }
    if p.coeff(0) != &S::one() {
        return Err(Error::Domain("series square root needs constant term 1".into()));
    }
    let half = S::from_ratio(&ratio(1, 2));
    let mut s: Vec<S> = vec![S::one()];
    for k in 1..order {
        let mut acc = p.coeff(k).clone();
        for j in 1..k {
            acc = acc - s[j].clone() * s[k - j].clone();
        }
        s.push(acc * half.clone());
    }
    Ok(PowerSeries::new(s))
}

/// `num / den` when both may start with a common power of `w`; the order drops
/// by the number of stripped zeros.
fn div_stripping<S: Scalar>(num: &PowerSeries<S>, den: &PowerSeries<S>) -> Result<PowerSeries<S>> {
    let j = den.coeffs().iter().position(|c| !c.is_zero()).ok_or_else(|| Error::Domain("zero denominator".into()))?;
    if num.coeffs()[..j].iter().any(|c| !c.is_zero()) {
        return Err(Error::Domain("pole at w = 0".into()));
    }
    let n = PowerSeries::new(num.coeffs()[j..].to_vec());
    let d = PowerSeries::new(den.coeffs()[j..].to_vec());
    n.div(&d)
}

/// Exact moment series `m_0, …, m_order` obtained by expanding a closed-form
/// transform at infinity (in the variable `w = 1/z`).
pub fn closed_form_series<S: Scalar>(kind: GKind, params: &DeformParams<S>, order: usize) -> Result<CauchySeries<S>> {
    let t = params.t().clone();
    let n = S::from_i64(params.n() as i64);
    let one = S::one();
    let two = S::from_i64(2);
    let half = S::from_ratio(&ratio(1, 2));
    // two spare orders absorb the stripping of leading zeros
    let len = order + 3;
    let poly = |c: Vec<S>| {
        let mut c = c;
        c.resize(len, S::zero());
        PowerSeries::new(c)
    };
    let moments = match kind {
        GKind::St => {
            // M(w) = ((1/2 - t) + (1/2)√(1 - 4t w²)) / ((1 - t) - w²)
            let root = series_sqrt(&poly(vec![one.clone(), S::zero(), -(S::from_i64(4) * t.clone())]))?;
            let num = poly(vec![half.clone() - t.clone()]).add(&root.scale(&half))?;
            let den = poly(vec![one.clone() - t.clone(), S::zero(), -one.clone()]);
            div_stripping(&num, &den)?
        }
        GKind::Ct | GKind::TC1 => {
            // √Q(1/w) = (1/w)√P(w), P(w) = 1 - 2(n+1)t w + (n-1)² t² w²
            let nm1 = n.clone() - one.clone();
            let p = poly(vec![
                one.clone(),
                -(two.clone() * (n.clone() + one.clone()) * t.clone()),
                nm1.clone() * nm1.clone() * t.clone() * t.clone(),
            ]);
            let root = series_sqrt(&p)?;
            if kind == GKind::Ct {
                // M(w) = ((2t-1) + (1-n)t w - √P) / (2((t-1) + (n + t(1-n)) w))
                let num = poly(vec![two.clone() * t.clone() - one.clone(), -(nm1.clone() * t.clone())]).sub(&root)?;
                let den = poly(vec![
                    two.clone() * (t.clone() - one.clone()),
                    two.clone() * (n.clone() - t.clone() * nm1.clone()),
                ]);
                div_stripping(&num, &den)?
            } else {
                // M(w) = (1 + (1-n)t w - √P) / (2t w)
                let num = poly(vec![one.clone(), -(nm1 * t.clone())]).sub(&root)?;
                let den = poly(vec![S::zero(), two * t]);
                div_stripping(&num, &den)?
            }
        }
    };
    CauchySeries::new(moments.truncate(order + 1)?.into_coeffs())
}

/// Jacobi data: diagonal `a_1, a_2, …` and squared off-diagonal
/// `β_k = b_k²`, with `b_1` the first off-diagonal entry.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobiCoefficients<S: Scalar> {
    pub diag: Vec<S>,
    pub beta: Vec<S>,
}

impl<S: Scalar> JacobiCoefficients<S> {
    /// Off-diagonal entries `b_k = √β_k` as floats.
    pub fn b_f64(&self) -> Vec<f64> {
        self.beta.iter().map(|b| b.to_f64().sqrt()).collect()
    }

    pub fn a_f64(&self) -> Vec<f64> {
        self.diag.iter().map(S::to_f64).collect()
    }
}

/// Jacobi data of the law of `s^t`: `a ≡ 0`, `β = (1, t, t, …)`.
pub fn gaussian_jacobi<S: Scalar>(params: &DeformParams<S>, len: usize) -> JacobiCoefficients<S> {
    let beta = (0..len).map(|k| if k == 0 { S::one() } else { params.t().clone() }).collect();
    JacobiCoefficients { diag: vec![S::zero(); len], beta }
}

/// Moments `m_0, …, m_order` of the law with the given Jacobi data, as
/// weighted Motzkin path counts: an up step weighs 1, a level step at height
/// `h` weighs `a_{h+1}` and a down step from height `h` weighs `β_h`.
pub fn moments_from_jacobi<S: Scalar>(jac: &JacobiCoefficients<S>, order: usize) -> Result<Vec<S>> {
    // paths that climb above order/2 cannot return to the ground in time
    let height = order / 2;
    if jac.diag.len() < order.div_ceil(2) || jac.beta.len() < order / 2 {
        return Err(Error::InsufficientOrder { needed: order, available: (2 * jac.beta.len()).min(2 * jac.diag.len()) });
    }
    let a = |h: usize| jac.diag.get(h).cloned().unwrap_or_else(S::zero);
    let mut paths = vec![S::zero(); height + 1];
    paths[0] = S::one();
    let mut out = vec![S::one()];
    for _ in 1..=order {
        let mut next = vec![S::zero(); height + 1];
        for h in 0..=height {
            if paths[h].is_zero() {
                continue;
            }
            if h < height {
                next[h + 1] = next[h + 1].clone() + paths[h].clone();
            }
            next[h] = next[h].clone() + paths[h].clone() * a(h);
            if h >= 1 {
                next[h - 1] = next[h - 1].clone() + paths[h].clone() * jac.beta[h - 1].clone();
            }
        }
        paths = next;
        out.push(paths[0].clone());
    }
    Ok(out)
}

/// `1/(z - a_1 - β_1/(z - a_2 - β_2/(…/(z - a_depth))))`, evaluated bottom-up.
pub fn g_continued_fraction<S: Scalar>(jac: &JacobiCoefficients<S>, z: Complex64, depth: usize) -> Result<Complex64> {
    if depth == 0 {
        return Err(Error::InvalidParameter("continued fraction depth must be at least 1".into()));
    }
    if depth > jac.diag.len() || depth > jac.beta.len() + 1 {
        return Err(Error::InsufficientOrder { needed: depth, available: jac.diag.len().min(jac.beta.len() + 1) });
    }
    let mut tail = Complex64::new(0.0, 0.0);
    for k in (0..depth).rev() {
        let denom = z - jac.diag[k].to_f64() - tail;
        let num = if k == 0 { 1.0 } else { jac.beta[k - 1].to_f64() };
        tail = num / denom;
    }
    Ok(tail)
}

/// Stieltjes inversion `-Im G(x + iε)/π` on a grid.
pub fn stieltjes_invert(g: impl Fn(Complex64) -> Complex64, grid: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(grid.iter().map(|&x| -g(Complex64::new(x, epsilon)).im / PI).collect())
}

/// Point-mass estimate at a candidate location.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtomEstimate {
    pub location: f64,
    /// `-ε Im G(x₀ + iε)`.
    pub weight: f64,
    /// The same at `ε/10`.
    pub weight_fine: f64,
    pub is_atom: bool,
}

/// Detects a point mass at `x0` from `-ε Im G(x₀ + iε)`.
///
/// An atom of weight `w` gives `w` at every scale while a bounded density `d`
/// gives `π ε d`, so the estimate is compared at `ε` and `ε/10`: a point mass
/// is reported when the estimate exceeds `threshold` and survives the finer
/// scale.
pub fn detect_atom(g: impl Fn(Complex64) -> Complex64, x0: f64, epsilon: f64, threshold: f64) -> AtomEstimate {
    let est = |eps: f64| -eps * g(Complex64::new(x0, eps)).im;
    let weight = est(epsilon);
    let weight_fine = est(epsilon / 10.0);
    let is_atom = weight > threshold && weight_fine > 0.5 * weight;
    AtomEstimate { location: x0, weight, weight_fine, is_atom }
}

/// Recovers Jacobi data from moments with the Stieltjes procedure over the
/// moment functional.
///
/// From `m_0, …, m_K` this yields `a_1 … a_{⌊(K+1)/2⌋}` and `β_1 … β_{⌊K/2⌋}`.
/// Any non-positive `β` (a Hankel determinant `≤ 0`) is an error.
pub fn moments_to_jacobi<S: Scalar>(moments: &CauchySeries<S>) -> Result<JacobiCoefficients<S>> {
    let (jac, stop) = jacobi_until_degenerate(moments.moments())?;
    match stop {
        None => Ok(jac),
        Some(k) => Err(Error::NotAMeasure(format!("Hankel determinant of order {k} is zero"))),
    }
}

/// Like [`moments_to_jacobi`] but stops at the first vanishing `β` (a finitely
/// supported law) and reports its index. Negative `β` is still an error.
pub fn jacobi_until_degenerate<S: Scalar>(m: &[S]) -> Result<(JacobiCoefficients<S>, Option<usize>)> {
    if m.is_empty() || !m[0].is_positive() {
        return Err(Error::NotAMeasure("m_0 must be positive".into()));
    }
    let k_max = m.len() - 1;
    let functional = |p: &[S]| -> S { p.iter().zip(m).fold(S::zero(), |acc, (c, mk)| acc + c.clone() * mk.clone()) };
    let mul = |p: &[S], q: &[S]| -> Vec<S> {
        let mut out = vec![S::zero(); p.len() + q.len() - 1];
        for (i, a) in p.iter().enumerate() {
            for (j, b) in q.iter().enumerate() {
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        out
    };
    let mut diag = Vec::new();
    let mut beta = Vec::new();
    let mut prev: Vec<S> = Vec::new();
    let mut cur: Vec<S> = vec![S::one()];
    let mut norm_prev = S::zero();
    let mut norm_cur = m[0].clone();
    let mut k = 0;
    loop {
        // a_{k+1} = L(X p_k²) / L(p_k²), needs degree 2k+1
        if 2 * k + 1 > k_max {
            break;
        }
        let sq = mul(&cur, &cur);
        let mut xsq = vec![S::zero()];
        xsq.extend(sq.iter().cloned());
        let a = functional(&xsq).div(&norm_cur).expect("norm is nonzero");
        diag.push(a.clone());
        // p_{k+1} = (X - a) p_k - β_k p_{k-1}
        let mut next = vec![S::zero(); cur.len() + 1];
        for (j, c) in cur.iter().enumerate() {
            next[j + 1] = next[j + 1].clone() + c.clone();
            next[j] = next[j].clone() - a.clone() * c.clone();
        }
        if k > 0 {
            let b = norm_cur.div(&norm_prev).expect("norm is nonzero");
            for (j, c) in prev.iter().enumerate() {
                next[j] = next[j].clone() - b.clone() * c.clone();
            }
        }
        if 2 * (k + 1) > k_max {
            break;
        }
        let norm_next = functional(&mul(&next, &next));
        if norm_next.is_zero() || norm_next.near(&S::zero(), 1e-13 * norm_cur.to_f64().abs().max(1.0)) && !S::EXACT {
            return Ok((JacobiCoefficients { diag, beta }, Some(k + 1)));
        }
        if !norm_next.is_positive() {
            return Err(Error::NotAMeasure(format!("Hankel determinant of order {} is negative", k + 1)));
        }
        beta.push(norm_next.div(&norm_cur).expect("norm is nonzero"));
        prev = cur;
        cur = next;
        norm_prev = norm_cur;
        norm_cur = norm_next;
        k += 1;
    }
    Ok((JacobiCoefficients { diag, beta }, None))
}

/// `∫ x^k dμ`: adaptive Gauss-Kronrod on the density with `x = edge ± u²` at
/// both support ends, plus atom contributions.
pub fn measure_moment(m: &Measure, k: usize) -> f64 {
    m.integrate(|x| x.powi(k as i32))
}

/// `∫_lo^hi f` for integrands with square-root behavior at both ends.
pub fn integrate_sqrt_edges(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    if !(hi > lo) {
        return 0.0;
    }
    let mid = 0.5 * (lo + hi);
    let h = (mid - lo).sqrt();
    let left = adaptive_gk(&|u: f64| 2.0 * u * f(lo + u * u), 0.0, h, tol);
    let right = adaptive_gk(&|u: f64| 2.0 * u * f(hi - u * u), 0.0, h, tol);
    left + right
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let pair = f(c - x) + f(c + x);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, (kronrod - gauss).abs() * h)
}

/// Globally adaptive Gauss-Kronrod: repeatedly bisects the subinterval with
/// the largest error estimate until the total estimate meets `tol` or the
/// interval budget runs out.
fn adaptive_gk(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const MAX_INTERVALS: usize = 4000;
    let (v, e) = gk15(f, a, b);
    let mut parts = vec![(a, b, v, e)];
    let mut total_err = e;
    while parts.len() < MAX_INTERVALS {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        if total_err <= tol.max(1e-15 * total.abs()) {
            break;
        }
        let (worst, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("at least one interval");
        let (lo, hi, _, err) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        total_err += e1 + e2 - err;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    parts.iter().map(|p| p.2).sum()
}
