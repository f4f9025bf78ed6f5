//! Hermite basis orthonormal for the Gaussian of variance `h/2`, Laguerre
//! polynomials, Bargman kernels and multi-indices.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest Hermite degree accepted by the evaluators.
pub const MAX_DEGREE: usize = 512;

/// Largest `k + alpha` for the explicit Laguerre sum.
pub const MAX_LAGUERRE: usize = 200;

/// Semiclassical parameter shared by every computation.
///
/// The one-dimensional reference measure is the centred Gaussian of
/// variance `h/2`, with density `(pi h)^{-1/2} exp(-x^2/h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalcContext {
    h: f64,
}

impl CalcContext {
    pub fn new(h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(invalid("h", format!("must be finite and positive, got {h}")));
        }
        Ok(Self { h })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Variance `h/2` of the one-dimensional reference Gaussian.
    pub fn variance(&self) -> f64 {
        0.5 * self.h
    }

    /// Reference density `(pi h)^{-1/2} exp(-x^2/h)`.
    pub fn density(&self, x: f64) -> f64 {
        (-x * x / self.h).exp() / (std::f64::consts::PI * self.h).sqrt()
    }
}

fn check_degree(j: usize) -> Result<()> {
    if j > MAX_DEGREE {
        return Err(Error::DegreeTooLarge {
            degree: j,
            max: MAX_DEGREE,
        });
    }
    Ok(())
}

/// Fills `out` with `psi_0(x), ..., psi_n(x)`.
pub fn hermite_values(n: usize, x: f64, ctx: &CalcContext, out: &mut Vec<f64>) -> Result<()> {
    check_degree(n)?;
    if !x.is_finite() {
        return Err(invalid("x", "must be finite"));
    }
    out.clear();
    out.reserve(n + 1);
    let c = (2.0 / ctx.h()).sqrt() * x;
    out.push(1.0);
    if n == 0 {
        return Ok(());
    }
    out.push(c);
    for j in 2..=n {
        let jf = j as f64;
        let v = c / jf.sqrt() * out[j - 1] - ((jf - 1.0) / jf).sqrt() * out[j - 2];
        out.push(v);
    }
    Ok(())
}

/// `psi_j(x)`.
pub fn hermite_eval(j: usize, x: f64, ctx: &CalcContext) -> Result<f64> {
    let mut v = Vec::new();
    hermite_values(j, x, ctx, &mut v)?;
    Ok(v[j])
}

/// `d psi_j / dx = sqrt(2j/h) psi_{j-1}`.
pub fn hermite_derivative(j: usize, x: f64, ctx: &CalcContext) -> Result<f64> {
    if j == 0 {
        check_degree(0)?;
        return Ok(0.0);
    }
    let p = hermite_eval(j - 1, x, ctx)?;
    Ok((2.0 * j as f64 / ctx.h()).sqrt() * p)
}

/// `ln n!` from a cached table (exact summation of logs).
pub fn ln_factorial(n: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let t = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(2 * MAX_DEGREE + 2);
        t.push(0.0);
        for k in 1..=(2 * MAX_DEGREE + 1) {
            let prev = t[k - 1];
            t.push(prev + (k as f64).ln());
        }
        t
    });
    if n < t.len() {
        t[n]
    } else {
        statrs::function::gamma::ln_gamma(n as f64 + 1.0)
    }
}

/// Generalized Laguerre polynomial by its explicit finite sum
/// `sum_m (k+alpha)! / ((k-m)! (alpha+m)!) (-x)^m / m!`.
///
/// Coefficients are built multiplicatively; restricted to
/// `k + alpha <= 200` where the cancellation in the sum is still tolerable
/// for moderate `x`. Use [`laguerre_recurrence`] elsewhere.
pub fn laguerre(k: usize, alpha: usize, x: f64) -> Result<f64> {
    if k + alpha > MAX_LAGUERRE {
        return Err(Error::DegreeTooLarge {
            degree: k + alpha,
            max: MAX_LAGUERRE,
        });
    }
    // c_0 = C(k+alpha, k)
    let mut c = 1.0;
    for i in 1..=k {
        c *= (alpha + i) as f64 / i as f64;
    }
    let mut sum = c;
    let mut pw = 1.0;
    for m in 0..k {
        c *= (k - m) as f64 / ((alpha + m + 1) as f64 * (m + 1) as f64);
        pw *= -x;
        sum += c * pw;
    }
    Ok(sum)
}

/// `L_k^{(alpha)}(x)` by the three-term recurrence.
pub fn laguerre_recurrence(k: usize, alpha: f64, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for n in 0..k {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0 + alpha - x) * cur - (nf + alpha) * prev) / (nf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Normalized Laguerre functions
/// `sqrt(n!/(n+alpha)!) rho^{alpha/2} e^{-rho/2} L_n^{(alpha)}(rho)` for
/// `n = 0..=nmax`, written into `out`.
///
/// These stay bounded by one, so they can be evaluated far beyond the
/// range where the polynomial and the exponential separately overflow.
pub fn laguerre_functions(nmax: usize, alpha: usize, rho: f64, out: &mut [f64]) {
    debug_assert!(out.len() > nmax);
    let a = alpha as f64;
    let l0 = if rho <= 0.0 {
        if alpha == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        (0.5 * a * rho.ln() - 0.5 * rho - 0.5 * ln_factorial(alpha)).exp()
    };
    out[0] = l0;
    if nmax == 0 {
        return;
    }
    out[1] = (1.0 + a - rho) * l0 / (1.0 + a).sqrt();
    for n in 1..nmax {
        let nf = n as f64;
        out[n + 1] = ((2.0 * nf + 1.0 + a - rho) * out[n] - (nf * (nf + a)).sqrt() * out[n - 1])
            / ((nf + 1.0) * (nf + 1.0 + a)).sqrt();
    }
}

/// Bargman kernel `K_v(x) = exp(x v sqrt(2/h) - v^2/2)`, the generating
/// function `sum_j psi_j(x) v^j / sqrt(j!)`.
pub fn bargman_kernel(v: C64, x: f64, ctx: &CalcContext) -> C64 {
    (v * x * (2.0 / ctx.h()).sqrt() - v * v * 0.5).exp()
}

/// Partial sum of the Bargman series up to degree `jmax`.
pub fn bargman_partial(v: C64, x: f64, jmax: usize, ctx: &CalcContext) -> Result<C64> {
    let mut psi = Vec::new();
    hermite_values(jmax, x, ctx, &mut psi)?;
    let mut sum = C64::new(0.0, 0.0);
    let mut vp = C64::new(1.0, 0.0);
    for (j, p) in psi.iter().enumerate() {
        if j > 0 {
            vp = vp * v / (j as f64).sqrt();
        }
        sum += vp * *p;
    }
    Ok(sum)
}

/// Unitary map from `L^2` of the Gaussian to Lebesgue `L^2(R^d)`:
/// `(gamma f)(y) = (pi h)^{-d/4} exp(-|y|^2 / 2h) f(y)`.
pub fn gamma_transform<F>(f: F, ctx: CalcContext, d: usize) -> impl Fn(&[f64]) -> C64
where
    F: Fn(&[f64]) -> C64,
{
    move |y: &[f64]| {
        let r2: f64 = y.iter().map(|v| v * v).sum();
        let pre = (std::f64::consts::PI * ctx.h()).powf(-(d as f64) / 4.0);
        f(y) * (pre * (-r2 / (2.0 * ctx.h())).exp())
    }
}

/// Finitely supported multi-index over coordinates `1, 2, ...`.
///
/// Zero entries are never stored, so equality is structural.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(BTreeMap<usize, u32>);

impl MultiIndex {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds from `(coordinate, exponent)` pairs; coordinates are 1-based.
    pub fn from_pairs(pairs: &[(usize, u32)]) -> Result<Self> {
        let mut m = BTreeMap::new();
        for &(j, a) in pairs {
            if j == 0 {
                return Err(invalid("coordinate", "coordinates are 1-based"));
            }
            if a > 0 {
                *m.entry(j).or_insert(0) += a;
            }
        }
        Ok(Self(m))
    }

    /// Builds from a dense vector whose entry `i` is the exponent of
    /// coordinate `i + 1`.
    pub fn from_dense(v: &[u32]) -> Self {
        Self(
            v.iter()
                .enumerate()
                .filter(|(_, &a)| a > 0)
                .map(|(i, &a)| (i + 1, a))
                .collect(),
        )
    }

    pub fn single(j: usize, a: u32) -> Result<Self> {
        Self::from_pairs(&[(j, a)])
    }

    pub fn get(&self, j: usize) -> u32 {
        self.0.get(&j).copied().unwrap_or(0)
    }

    pub fn degree(&self) -> u32 {
        self.0.values().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest coordinate with a non-zero exponent, 0 for the zero index.
    pub fn max_coord(&self) -> usize {
        self.0.keys().next_back().copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.0.iter().map(|(&j, &a)| (j, a))
    }

    pub fn to_dense(&self, d: usize) -> Vec<u32> {
        (1..=d).map(|j| self.get(j)).collect()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.0.iter().map(|(j, a)| format!("{j}:{a}")).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// All multi-indices on coordinates `1..=dims` with total degree at most
/// `max_degree`, in graded order: ascending total degree, then descending
/// exponent of coordinate 1, then of coordinate 2, and so on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationSet {
    dims: usize,
    max_degree: usize,
    indices: Vec<MultiIndex>,
    #[serde(skip)]
    lookup: HashMap<MultiIndex, usize>,
}

impl TruncationSet {
    pub fn total_degree(dims: usize, max_degree: usize) -> Result<Self> {
        if dims == 0 {
            return Err(invalid("d", "need at least one coordinate"));
        }
        check_degree(max_degree)?;
        let mut indices = Vec::new();
        let mut buf = vec![0u32; dims];
        for deg in 0..=max_degree {
            compositions(deg as u32, 0, &mut buf, &mut indices);
        }
        let lookup = indices.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        Ok(Self {
            dims,
            max_degree,
            indices,
            lookup,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn index_of(&self, m: &MultiIndex) -> Option<usize> {
        self.lookup.get(m).copied()
    }
}

// Exponent of the leading coordinate runs downward so that the graded order
// comes out directly.
fn compositions(rest: u32, pos: usize, buf: &mut [u32], out: &mut Vec<MultiIndex>) {
    if pos + 1 == buf.len() {
        buf[pos] = rest;
        out.push(MultiIndex::from_dense(buf));
        return;
    }
    for a in (0..=rest).rev() {
        buf[pos] = a;
        compositions(rest - a, pos + 1, buf, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn low_degree_closed_forms() {
        let ctx = CalcContext::new(0.7).unwrap();
        let x = 0.37;
        let s = (2.0 / 0.7f64).sqrt();
        assert_abs_diff_eq!(hermite_eval(1, x, &ctx).unwrap(), s * x, epsilon = 1e-15);
        let p2 = (s * s * x * x - 1.0) / 2f64.sqrt();
        assert_abs_diff_eq!(hermite_eval(2, x, &ctx).unwrap(), p2, epsilon = 1e-14);
    }

    #[test]
    fn degree_limit() {
        let ctx = CalcContext::new(1.0).unwrap();
        assert!(hermite_eval(512, 0.1, &ctx).is_ok());
        assert!(matches!(
            hermite_eval(513, 0.1, &ctx),
            Err(Error::DegreeTooLarge { .. })
        ));
        assert!(CalcContext::new(0.0).is_err());
        assert!(CalcContext::new(f64::NAN).is_err());
    }

    #[test]
    fn laguerre_sum_matches_recurrence() {
        for k in 0..12 {
            for alpha in 0..6 {
                for &x in &[0.0, 0.3, 1.7, 4.0] {
                    let a = laguerre(k, alpha, x).unwrap();
                    let b = laguerre_recurrence(k, alpha as f64, x);
                    assert_abs_diff_eq!(a, b, epsilon = 1e-10 * (1.0 + b.abs()));
                }
            }
        }
        assert!(laguerre(150, 51, 1.0).is_err());
    }

    #[test]
    fn laguerre_functions_match_direct() {
        let mut out = vec![0.0; 9];
        for alpha in 0..5usize {
            for &rho in &[0.2, 1.5, 6.0] {
                laguerre_functions(8, alpha, rho, &mut out);
                for (n, v) in out.iter().enumerate() {
                    let norm = (ln_factorial(n) - ln_factorial(n + alpha)).exp().sqrt();
                    let direct = norm
                        * rho.powf(alpha as f64 / 2.0)
                        * (-rho / 2.0).exp()
                        * laguerre(n, alpha, rho).unwrap();
                    assert_abs_diff_eq!(*v, direct, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn graded_order() {
        let t = TruncationSet::total_degree(2, 2).unwrap();
        let got: Vec<Vec<u32>> = t.indices().iter().map(|m| m.to_dense(2)).collect();
        assert_eq!(
            got,
            vec![
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
        for (i, m) in t.indices().iter().enumerate() {
            assert_eq!(t.index_of(m), Some(i));
        }
    }

    #[test]
    fn multi_index_display() {
        assert_eq!(MultiIndex::zero().to_string(), "0");
        let m = MultiIndex::from_pairs(&[(3, 1), (1, 2), (2, 0)]).unwrap();
        assert_eq!(m.to_string(), "(1:2,3:1)");
        assert_eq!(m.degree(), 3);
        assert_eq!(m.max_coord(), 3);
    }
}
