//! Gaussian measures, Gauss quadrature rules and seeded sampling.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::basis::laguerre_functions;
use crate::error::{invalid, Error, Result};
use crate::linalg::tridiag_ql;

/// Largest Gauss-Hermite order.
pub const GH_MAX_ORDER: usize = 256;

/// Default cap on tensor quadrature nodes.
pub const DEFAULT_QUAD_BUDGET: u64 = 100_000_000;

/// Node budget for tensor quadrature, read from `GAUSSWEYL_QUAD_MAX`.
pub fn quad_budget() -> u64 {
    std::env::var("GAUSSWEYL_QUAD_MAX")
        .ok()
        .and_then(|v| v.trim().parse::<u64>().ok())
        .filter(|&v| v > 0)
        .unwrap_or(DEFAULT_QUAD_BUDGET)
}

/// Centred Gaussian with covariance `variance * I` on `R^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianMeasure {
    pub variance: f64,
    pub dim: usize,
}

impl GaussianMeasure {
    pub fn new(variance: f64, dim: usize) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(invalid("variance", "must be finite and positive"));
        }
        Ok(Self { variance, dim })
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let norm = (2.0 * std::f64::consts::PI * self.variance).powf(-(self.dim as f64) / 2.0);
        norm * (-r2 / (2.0 * self.variance)).exp()
    }

    /// Tensor expectation `E[f]` with an order-`n` Gauss-Hermite rule per axis.
    pub fn expect<F: FnMut(&[f64]) -> C64>(&self, f: F, n: usize) -> Result<C64> {
        let rule = gh_rule(n, self.variance)?;
        integrate_tensor(f, &rule, self.dim, quad_budget())
    }
}

/// One-dimensional Gauss rule for the centred Gaussian of a given variance.
#[derive(Debug, Clone, Serialize)]
pub struct QuadratureRule {
    pub variance: f64,
    pub nodes: Vec<f64>,
    /// Probability weights (summing to one).
    pub weights: Vec<f64>,
    /// Weights for plain Lebesgue integrals, `w_i / density(x_i)`.
    pub lebesgue: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

struct StdRule {
    t: Vec<f64>,
    // weight for int g(t) e^{-t^2} dt / sqrt(pi)
    w: Vec<f64>,
    // weight for int g(t) dt
    leb: Vec<f64>,
}

fn std_hermite(n: usize) -> Result<Arc<StdRule>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<StdRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().unwrap().get(&n) {
        return Ok(r.clone());
    }
    let mut t = vec![0.0; n];
    let off: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
    let mut z = vec![0.0; n];
    z[0] = 1.0;
    tridiag_ql(&mut t, &off, &mut z)?;
    // Christoffel numbers from Hermite functions keep full relative
    // accuracy in the tails, unlike the squared eigenvector components.
    let mut w = Vec::with_capacity(n);
    let mut leb = Vec::with_capacity(n);
    let pi = std::f64::consts::PI;
    for &ti in &t {
        let mut hm = 0.0;
        let mut h = pi.powf(-0.25) * (-0.5 * ti * ti).exp();
        let mut sum = h * h;
        for k in 0..n - 1 {
            let kf = k as f64;
            let next = (2.0 / (kf + 1.0)).sqrt() * ti * h - (kf / (kf + 1.0)).sqrt() * hm;
            hm = h;
            h = next;
            sum += h * h;
        }
        leb.push(1.0 / sum);
        w.push((-ti * ti).exp() / (sum * pi.sqrt()));
    }
    let rule = Arc::new(StdRule { t, w, leb });
    cache.lock().unwrap().insert(n, rule.clone());
    Ok(rule)
}

/// Order-`n` Gauss-Hermite rule for the centred Gaussian of variance `s`,
/// exact for polynomials of degree `2n - 1`.
pub fn gh_rule(n: usize, s: f64) -> Result<QuadratureRule> {
    if n == 0 || n > GH_MAX_ORDER {
        return Err(invalid("order", format!("must lie in 1..={GH_MAX_ORDER}, got {n}")));
    }
    if !(s.is_finite() && s > 0.0) {
        return Err(invalid("variance", "must be finite and positive"));
    }
    let std = std_hermite(n)?;
    let c = (2.0 * s).sqrt();
    Ok(QuadratureRule {
        variance: s,
        nodes: std.t.iter().map(|t| c * t).collect(),
        weights: std.w.clone(),
        lebesgue: std.leb.iter().map(|l| c * l).collect(),
    })
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<Arc<(Vec<f64>, Vec<f64>)>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    if n == 0 || n > 1024 {
        return Err(invalid("order", format!("must lie in 1..=1024, got {n}")));
    }
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().unwrap().get(&n) {
        return Ok(r.clone());
    }
    let mut x = vec![0.0; n];
    let off: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    let mut z = vec![0.0; n];
    z[0] = 2f64.sqrt();
    tridiag_ql(&mut x, &off, &mut z)?;
    let w = z.iter().map(|v| v * v).collect();
    let r = Arc::new((x, w));
    cache.lock().unwrap().insert(n, r.clone());
    Ok(r)
}

/// Composite Gauss-Legendre rule: `panels` equal panels on `[a, b]`, `n`
/// nodes each.
pub fn gl_panels(a: f64, b: f64, panels: usize, n: usize) -> Result<Vec<(f64, f64)>> {
    if panels == 0 {
        return Err(invalid("panels", "need at least one panel"));
    }
    let rule = gauss_legendre(n)?;
    let width = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * n);
    for p in 0..panels {
        let lo = a + width * p as f64;
        let mid = lo + 0.5 * width;
        for (x, w) in rule.0.iter().zip(&rule.1) {
            out.push((mid + 0.5 * width * x, 0.5 * width * w));
        }
    }
    Ok(out)
}

/// Gauss-Laguerre rule for `int_0^inf g(t) e^{-t} dt`.
pub fn gauss_laguerre(n: usize) -> Result<Arc<(Vec<f64>, Vec<f64>)>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    if n == 0 || n > 256 {
        return Err(invalid("order", format!("must lie in 1..=256, got {n}")));
    }
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().unwrap().get(&n) {
        return Ok(r.clone());
    }
    let mut x: Vec<f64> = (0..n).map(|k| (2 * k + 1) as f64).collect();
    let off: Vec<f64> = (1..n).map(|k| k as f64).collect();
    let mut z = vec![0.0; n];
    z[0] = 1.0;
    tridiag_ql(&mut x, &off, &mut z)?;
    let mut lf = vec![0.0; n];
    let w = x
        .iter()
        .map(|&t| {
            laguerre_functions(n - 1, 0, t, &mut lf);
            let s: f64 = lf.iter().map(|v| v * v).sum();
            (-t).exp() / s
        })
        .collect();
    let r = Arc::new((x, w));
    cache.lock().unwrap().insert(n, r.clone());
    Ok(r)
}

/// Tensor-product expectation over `R^m` with the same rule on every axis.
pub fn integrate_tensor<F>(mut f: F, rule: &QuadratureRule, m: usize, budget: u64) -> Result<C64>
where
    F: FnMut(&[f64]) -> C64,
{
    let n = rule.order();
    let points = (n as u128).pow(m as u32);
    if points > budget as u128 {
        return Err(Error::QuadratureBudget { points, budget });
    }
    let mut idx = vec![0usize; m];
    let mut x = vec![0.0; m];
    let mut sum = C64::new(0.0, 0.0);
    if m == 0 {
        return Ok(f(&x));
    }
    loop {
        let mut w = 1.0;
        for (k, &i) in idx.iter().enumerate() {
            x[k] = rule.nodes[i];
            w *= rule.weights[i];
        }
        sum += f(&x) * w;
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == m {
                return Ok(sum);
            }
        }
    }
}

/// `L^p` norm of the Gaussian random variable `ell_b` under the Wiener
/// measure of variance `s`: `sqrt(2s) pi^{-1/(2p)} Gamma((p+1)/2)^{1/p} |b|`.
pub fn ell_norm(p: f64, s: f64, b_norm: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid("p", format!("must be a finite value >= 1, got {p}")));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid("s", "must be finite and positive"));
    }
    let lg = statrs::function::gamma::ln_gamma((p + 1.0) / 2.0);
    let c = (2.0 * s).sqrt() * std::f64::consts::PI.powf(-1.0 / (2.0 * p)) * (lg / p).exp();
    Ok(c * b_norm.abs())
}

/// Random stream of coordinate `j` for a given seed.
///
/// Every coordinate owns an independent ChaCha8 stream, so extending a
/// sample to more coordinates never changes the earlier ones.
pub fn coordinate_stream(seed: u64, j: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(j);
    rng
}

/// `count` draws of the coordinate `ell_{e_j}` (variance `s`).
pub fn coordinate_draws(seed: u64, j: u64, s: f64, count: usize) -> Vec<f64> {
    let mut rng = coordinate_stream(seed, j);
    let sd = s.sqrt();
    (0..count)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        })
        .collect()
}

/// First `n` coordinates of a Wiener sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WienerSample {
    pub coords: Vec<f64>,
}

/// `count` samples of the first `n` coordinates under variance `s`.
pub fn mc_sample(n: usize, s: f64, seed: u64, count: usize) -> Result<Vec<WienerSample>> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid("s", "must be finite and positive"));
    }
    let cols: Vec<Vec<f64>> = (1..=n as u64)
        .map(|j| coordinate_draws(seed, j, s, count))
        .collect();
    Ok((0..count)
        .map(|i| WienerSample {
            coords: cols.iter().map(|c| c[i]).collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_rule_moments() {
        let r = gh_rule(10, 0.5).unwrap();
        let sum: f64 = r.weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-14);
        let m2 = r.expect(|x| x * x);
        let m4 = r.expect(|x| x.powi(4));
        assert!((m2 - 0.5).abs() < 1e-14);
        assert!((m4 - 3.0 * 0.25).abs() < 1e-14);
        let leb: f64 = r
            .nodes
            .iter()
            .zip(&r.lebesgue)
            .map(|(x, l)| l * (-x * x).exp())
            .sum();
        assert!((leb - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn hermite_tail_weights_are_relative_accurate() {
        let r = gh_rule(200, 0.5).unwrap();
        let sum: f64 = r.weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-13);
        assert!(r.weights[0] > 0.0 && r.weights[0] < 1e-100);
    }

    #[test]
    fn legendre_and_laguerre() {
        let gl = gauss_legendre(7).unwrap();
        let s: f64 = gl.0.iter().zip(&gl.1).map(|(x, w)| w * x.powi(6)).sum();
        assert!((s - 2.0 / 7.0).abs() < 1e-14);
        let lg = gauss_laguerre(12).unwrap();
        let s: f64 = lg.0.iter().zip(&lg.1).map(|(x, w)| w * x.powi(5)).sum();
        assert!((s - 120.0).abs() < 1e-10);
    }

    #[test]
    fn order_range() {
        assert!(gh_rule(0, 1.0).is_err());
        assert!(gh_rule(257, 1.0).is_err());
    }

    #[test]
    fn budget_enforced() {
        let r = gh_rule(10, 1.0).unwrap();
        let e = integrate_tensor(|_| C64::new(1.0, 0.0), &r, 4, 1000);
        assert!(matches!(e, Err(Error::QuadratureBudget { .. })));
    }

    #[test]
    fn ell_norm_p2_is_sqrt_s() {
        let v = ell_norm(2.0, 0.3, 2.0).unwrap();
        assert!((v - 0.3f64.sqrt() * 2.0).abs() < 1e-14);
    }

    #[test]
    fn streams_are_prefix_stable() {
        let a = mc_sample(3, 1.0, 7, 5).unwrap();
        let b = mc_sample(5, 1.0, 7, 5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.coords[..], y.coords[..3]);
        }
    }
}
