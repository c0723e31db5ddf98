//! Dense real polynomials with ascending coefficients, plus Sturm-sequence
//! root isolation.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;

/// Real polynomial `c0 + c1 x + ... + cd x^d`.
///
/// Trailing zero coefficients are trimmed on construction, so the last stored
/// coefficient is always nonzero. The zero polynomial stores no coefficients.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// The monomial `c x^k`.
    pub fn monomial(c: f64, k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = c;
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `x^k`, zero beyond the degree.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    /// Horner evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// `k`-fold formal derivative.
    pub fn deriv(&self, k: usize) -> Self {
        if k >= self.coeffs.len() {
            return Self::zero();
        }
        let coeffs = (k..self.coeffs.len())
            .map(|i| {
                let falling = ((i - k + 1)..=i).fold(1.0, |acc, j| acc * j as f64);
                self.coeffs[i] * falling
            })
            .collect();
        Self::new(coeffs)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// `x ↦ p(s x)`.
    pub fn scale_arg(&self, s: f64) -> Self {
        let mut f = 1.0;
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| {
                let v = c * f;
                f *= s;
                v
            })
            .collect();
        Self::new(coeffs)
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|k| self.coeff(k) - other.coeff(k)).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// True when every odd coefficient is exactly zero.
    pub fn is_even(&self) -> bool {
        self.coeffs.iter().skip(1).step_by(2).all(|&c| c == 0.0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Cauchy bound: every real root lies in `[-R, R]`.
    pub fn cauchy_bound(&self) -> f64 {
        let lead = self.leading();
        if self.degree() == 0 || lead == 0.0 {
            return 0.0;
        }
        let ratio = self.coeffs[..self.coeffs.len() - 1]
            .iter()
            .fold(0.0_f64, |m, c| m.max((c / lead).abs()));
        1.0 + ratio
    }

    /// Euclidean division, returning `(quotient, remainder)`. Remainder
    /// coefficients below `rel_tol` times the dividend scale are dropped.
    pub fn div_rem(&self, divisor: &Self, rel_tol: f64) -> (Self, Self) {
        assert!(!divisor.is_zero(), "division by the zero polynomial");
        let scale = self.max_abs_coeff().max(divisor.max_abs_coeff());
        let mut rem = self.coeffs.clone();
        let dd = divisor.degree();
        let lead = divisor.leading();
        if rem.len() < divisor.coeffs.len() {
            return (Self::zero(), self.clone());
        }
        let mut quot = vec![0.0; rem.len() - dd];
        for k in (0..quot.len()).rev() {
            let q = rem[k + dd] / lead;
            quot[k] = q;
            for (j, d) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= q * d;
            }
            rem[k + dd] = 0.0;
        }
        rem.truncate(dd);
        for c in rem.iter_mut() {
            if c.abs() <= rel_tol * scale {
                *c = 0.0;
            }
        }
        (Self::new(quot), Self::new(rem))
    }

    /// All distinct real roots in ascending order.
    pub fn real_roots(&self) -> Vec<f64> {
        match self.degree() {
            _ if self.is_zero() => Vec::new(),
            0 => Vec::new(),
            1 => vec![-self.coeffs[0] / self.coeffs[1]],
            _ => {
                let r = self.cauchy_bound() + 1.0;
                let sturm = SturmSequence::new(self);
                let mut roots = Vec::new();
                let count = sturm.count_roots(-r, r);
                sturm.isolate(self, -r, r, count, 0, &mut roots);
                roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
                roots
            }
        }
    }

    /// Distinct real roots inside the closed interval `[lo, hi]`.
    pub fn real_roots_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.real_roots()
            .into_iter()
            .filter(|&x| x >= lo && x <= hi)
            .collect()
    }

    /// Global minimizer and minimum on ℝ, or `None` when unbounded below.
    pub fn global_min(&self) -> Option<(f64, f64)> {
        if self.degree() == 0 {
            return Some((0.0, self.coeff(0)));
        }
        if self.degree() % 2 == 1 || self.leading() < 0.0 {
            return None;
        }
        self.deriv(1)
            .real_roots()
            .into_iter()
            .map(|x| (x, self.eval(x)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
    }

    /// Minimizer and minimum on `[lo, hi]`.
    pub fn min_on(&self, lo: f64, hi: f64) -> (f64, f64) {
        let mut best = (lo, self.eval(lo));
        let cands = self.deriv(1).real_roots_in(lo, hi);
        for x in cands.into_iter().chain(core::iter::once(hi)) {
            let v = self.eval(x);
            if v < best.1 {
                best = (x, v);
            }
        }
        best
    }

    /// Nonnegativity on ℝ up to `tol` times the coefficient scale.
    pub fn is_nonnegative(&self, tol: f64) -> bool {
        if self.is_zero() {
            return true;
        }
        match self.global_min() {
            Some((_, v)) => v >= -tol * self.max_abs_coeff(),
            None => false,
        }
    }

    /// Newton polish of an approximate simple root.
    pub fn newton_polish(&self, mut x: f64, iters: usize) -> f64 {
        let d = self.deriv(1);
        for _ in 0..iters {
            let f = self.eval(x);
            let g = d.eval(x);
            if f == 0.0 || g == 0.0 || !g.is_finite() {
                break;
            }
            let nx = x - f / g;
            if !nx.is_finite() || (nx - x).abs() <= 1e-16 * (1.0 + x.abs()) {
                x = if nx.is_finite() { nx } else { x };
                break;
            }
            x = nx;
        }
        x
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " {} ", if c < 0.0 { '-' } else { '+' })?;
            } else if c < 0.0 {
                write!(f, "-")?;
            }
            first = false;
            let a = c.abs();
            match k {
                0 => write!(f, "{a}")?,
                1 => write!(f, "{a}x")?,
                _ => write!(f, "{a}x^{k}")?,
            }
        }
        Ok(())
    }
}

/// Sturm chain `p0 = p, p1 = p', p_{k+1} = -rem(p_{k-1}, p_k)`.
///
/// The chain ends at the last nonzero remainder, which is the gcd of `p` and
/// `p'`; sign-variation counting then gives the number of *distinct* real
/// roots even when `p` has repeated factors.
#[derive(Clone, Debug)]
pub struct SturmSequence {
    chain: Vec<Polynomial>,
}

const STURM_REL_TOL: f64 = 1e-12;

impl SturmSequence {
    pub fn new(p: &Polynomial) -> Self {
        let mut chain = vec![normalized(p)];
        let d = p.deriv(1);
        if !d.is_zero() {
            chain.push(normalized(&d));
            loop {
                let n = chain.len();
                let (_, rem) = chain[n - 2].div_rem(&chain[n - 1], STURM_REL_TOL);
                if rem.is_zero() {
                    break;
                }
                chain.push(normalized(&rem).scale(-1.0));
            }
        }
        Self { chain }
    }

    pub fn len(&self) -> usize {
        self.chain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chain.is_empty()
    }

    pub fn sign_changes(&self, x: f64) -> usize {
        let mut last = 0i8;
        let mut changes = 0;
        for p in &self.chain {
            let v = p.eval(x);
            let s = if v > 0.0 {
                1
            } else if v < 0.0 {
                -1
            } else {
                0
            };
            if s != 0 {
                if last != 0 && s != last {
                    changes += 1;
                }
                last = s;
            }
        }
        changes
    }

    /// Number of distinct roots in `(lo, hi]`.
    pub fn count_roots(&self, lo: f64, hi: f64) -> usize {
        self.sign_changes(lo).saturating_sub(self.sign_changes(hi))
    }

    fn isolate(
        &self,
        p: &Polynomial,
        lo: f64,
        hi: f64,
        count: usize,
        depth: usize,
        out: &mut Vec<f64>,
    ) {
        if count == 0 {
            return;
        }
        if count == 1 {
            out.push(self.refine(p, lo, hi));
            return;
        }
        if depth > 200 || hi - lo <= 1e-13 * (1.0 + lo.abs().max(hi.abs())) {
            // numerically indistinguishable cluster
            out.push(0.5 * (lo + hi));
            return;
        }
        let mut mid = 0.5 * (lo + hi);
        let mut nudge = (hi - lo) * 1e-3;
        while p.eval(mid) == 0.0 && nudge > 0.0 {
            mid += nudge;
            nudge *= 0.5;
        }
        let left = self.count_roots(lo, mid).min(count);
        self.isolate(p, lo, mid, left, depth + 1, out);
        self.isolate(p, mid, hi, count - left, depth + 1, out);
    }

    /// Locate the single distinct root in `(lo, hi]`.
    fn refine(&self, p: &Polynomial, mut lo: f64, mut hi: f64) -> f64 {
        let mut flo = p.eval(lo);
        let fhi = p.eval(hi);
        if fhi == 0.0 {
            return hi;
        }
        if flo * fhi < 0.0 {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = p.eval(mid);
                if fm == 0.0 {
                    return mid;
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            return 0.5 * (lo + hi);
        }
        // even multiplicity: no sign change, bisect on the Sturm count
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_roots(lo, mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn normalized(p: &Polynomial) -> Polynomial {
    let s = p.max_abs_coeff();
    if s == 0.0 {
        p.clone()
    } else {
        p.scale(1.0 / s)
    }
}

/// Weighted binomial expansion shared by the convolution routines:
/// returns the polynomial `x ↦ Σ_k c_k Σ_j C(k,j) x^j (-1)^{k-j} μ_{k-j}`,
/// i.e. `∫ p(x - y) dμ(y)` for a measure with moments `μ`.
pub(crate) fn expand_against_moments(p: &Polynomial, moments: &[f64]) -> Polynomial {
    let deg = p.degree();
    let mut out = vec![0.0; deg + 1];
    for (k, &c) in p.coeffs().iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        for (j, slot) in out.iter_mut().enumerate().take(k + 1) {
            let r = k - j;
            let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
            *slot += c * math::binomial(k, j) * sign * moments[r];
        }
    }
    Polynomial::new(out)
}
