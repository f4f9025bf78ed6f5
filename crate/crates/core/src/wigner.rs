//! Wigner functions of the Hermite basis and of general functions.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::basis::{laguerre_functions, laguerre_recurrence, ln_factorial, CalcContext, MultiIndex, MAX_DEGREE};
use crate::error::{invalid, Error, Result};
use crate::gaussian::{gh_rule, gl_panels, integrate_tensor, quad_budget};

fn check(j: usize, k: usize) -> Result<()> {
    let d = j.max(k);
    if d > MAX_DEGREE {
        return Err(Error::DegreeTooLarge {
            degree: d,
            max: MAX_DEGREE,
        });
    }
    Ok(())
}

/// Closed form of `W(psi_j, psi_k)(x, xi)`.
///
/// For `j <= k` this is
/// `sqrt(j!/k!) (x + i xi)^{k-j} (-1)^j (2/h)^{(k-j)/2} L_j^{(k-j)}(2(x^2+xi^2)/h)`
/// and the other case is the complex conjugate with `j`, `k` exchanged.
pub fn wigner_closed(j: usize, k: usize, x: f64, xi: f64, ctx: &CalcContext) -> Result<C64> {
    check(j, k)?;
    let (m, a, z) = if j <= k {
        (j, k - j, C64::new(x, xi))
    } else {
        (k, j - k, C64::new(x, -xi))
    };
    let rho = 2.0 * (x * x + xi * xi) / ctx.h();
    let norm = (0.5 * (ln_factorial(m) - ln_factorial(m + a))).exp();
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    let zp = (z * (2.0 / ctx.h()).sqrt()).powu(a as u32);
    Ok(zp * (sign * norm * laguerre_recurrence(m, a as f64, rho)))
}

/// `exp(-(x^2+xi^2)/h) W(psi_j, psi_k)(x, xi)`, evaluated through
/// normalized Laguerre functions so it never overflows.
pub fn weighted_wigner(j: usize, k: usize, x: f64, xi: f64, ctx: &CalcContext) -> Result<C64> {
    check(j, k)?;
    let m = j.min(k);
    let a = j.abs_diff(k);
    let rho = 2.0 * (x * x + xi * xi) / ctx.h();
    let mut buf = vec![0.0; m + 1];
    laguerre_functions(m, a, rho, &mut buf);
    let theta = xi.atan2(x);
    let phase = if j <= k { a as f64 * theta } else { -(a as f64) * theta };
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    Ok(C64::from_polar(sign * buf[m], phase))
}

/// All weighted Wigner values `exp(-r^2/h) W(psi_j, psi_k)` for
/// `0 <= j, k <= n` at one phase-space point.
#[derive(Debug, Clone)]
pub struct WignerTable {
    n: usize,
    vals: Vec<C64>,
    lag: Vec<f64>,
}

impl WignerTable {
    pub fn new(n: usize) -> Result<Self> {
        check(n, n)?;
        Ok(Self {
            n,
            vals: vec![C64::new(0.0, 0.0); (n + 1) * (n + 1)],
            lag: vec![0.0; n + 1],
        })
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn fill(&mut self, x: f64, xi: f64, ctx: &CalcContext) {
        let rho = 2.0 * (x * x + xi * xi) / ctx.h();
        let theta = xi.atan2(x);
        self.fill_polar(rho, theta);
    }

    /// Fill from `rho = 2 r^2 / h` and the polar angle.
    pub fn fill_polar(&mut self, rho: f64, theta: f64) {
        let n = self.n;
        let stride = n + 1;
        for a in 0..=n {
            let mmax = n - a;
            laguerre_functions(mmax, a, rho, &mut self.lag);
            let ph = C64::from_polar(1.0, a as f64 * theta);
            for m in 0..=mmax {
                let v = if m % 2 == 0 { self.lag[m] } else { -self.lag[m] };
                let w = ph * v;
                self.vals[m * stride + m + a] = w;
                self.vals[(m + a) * stride + m] = w.conj();
            }
        }
    }

    pub fn get(&self, j: usize, k: usize) -> C64 {
        self.vals[j * (self.n + 1) + k]
    }
}

/// `prod_j W(psi_{alpha_j}, psi_{beta_j})(x_j, xi_j)` over the union of the
/// supports. Errors if a supported coordinate exceeds `x.len()`.
pub fn wigner_tensor(
    alpha: &MultiIndex,
    beta: &MultiIndex,
    x: &[f64],
    xi: &[f64],
    ctx: &CalcContext,
) -> Result<C64> {
    if x.len() != xi.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: xi.len(),
        });
    }
    let d = x.len();
    let top = alpha.max_coord().max(beta.max_coord());
    if top > d {
        return Err(Error::SupportExceedsDim { index: top, dim: d });
    }
    let mut prod = C64::new(1.0, 0.0);
    for j in 1..=top {
        let (a, b) = (alpha.get(j) as usize, beta.get(j) as usize);
        if a == 0 && b == 0 {
            continue;
        }
        prod *= wigner_closed(a, b, x[j - 1], xi[j - 1], ctx)?;
    }
    Ok(prod)
}

/// Generating function `sum_{j,k} u^j v^k / sqrt(j! k!) W(psi_j, psi_k)`,
/// equal to `exp(-uv + sqrt(2/h) x (u+v) + i sqrt(2/h) xi (v-u))`.
pub fn wigner_bargman(u: C64, v: C64, x: f64, xi: f64, ctx: &CalcContext) -> C64 {
    let s = (2.0 / ctx.h()).sqrt();
    let i = C64::new(0.0, 1.0);
    (-u * v + (u + v) * (s * x) + i * (v - u) * (s * xi)).exp()
}

/// `int W(psi_j, psi_k) d mu_{R^2, h/2}`, which is the Kronecker delta.
pub fn overlap(j: usize, k: usize, ctx: &CalcContext) -> Result<C64> {
    check(j, k)?;
    let n = (j + k) / 2 + 4;
    let rule = gh_rule(n, ctx.variance())?;
    let mut s = C64::new(0.0, 0.0);
    for (x, wx) in rule.nodes.iter().zip(&rule.weights) {
        for (y, wy) in rule.nodes.iter().zip(&rule.weights) {
            s += wigner_closed(j, k, *x, *y, ctx)? * (wx * wy);
        }
    }
    Ok(s)
}

/// Result of an adaptive quadrature.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuadValue {
    pub value: C64,
    /// Order of the accepted rule (per axis).
    pub order: usize,
    /// Difference to the previous order.
    pub delta: f64,
}

const WQ_START: usize = 32;
const WQ_STEP: usize = 16;
const WQ_MAX: usize = 192;

/// Wigner function of arbitrary `f, g` in `L^2(mu_{R^d, h/2})` by direct
/// quadrature of
/// `exp(|zeta|^2/h) int exp(-2i zeta.t/h) f(z+t) conj(g(z-t)) dmu_{h/2}(t)`.
///
/// Orders grow by 16 from 32 until successive values agree to `1e-9`.
pub fn wigner_quadrature<F, G>(f: F, g: G, z: &[f64], zeta: &[f64], ctx: &CalcContext) -> Result<QuadValue>
where
    F: Fn(&[f64]) -> C64,
    G: Fn(&[f64]) -> C64,
{
    let d = z.len();
    if zeta.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: zeta.len(),
        });
    }
    if d == 0 {
        return Err(invalid("z", "need at least one coordinate"));
    }
    let h = ctx.h();
    let zz: f64 = zeta.iter().map(|v| v * v).sum();
    let eval = |n: usize| -> Result<C64> {
        let rule = gh_rule(n, ctx.variance())?;
        let mut p = vec![0.0; d];
        let mut q = vec![0.0; d];
        let v = integrate_tensor(
            |t| {
                let mut ph = 0.0;
                for i in 0..d {
                    p[i] = z[i] + t[i];
                    q[i] = z[i] - t[i];
                    ph += zeta[i] * t[i];
                }
                C64::from_polar(1.0, -2.0 * ph / h) * f(&p) * g(&q).conj()
            },
            &rule,
            d,
            quad_budget(),
        )?;
        Ok(v * (zz / h).exp())
    };
    let mut n = WQ_START;
    let mut prev = eval(n)?;
    let mut delta = f64::INFINITY;
    while n + WQ_STEP <= WQ_MAX {
        n += WQ_STEP;
        let cur = eval(n)?;
        delta = (cur - prev).norm();
        if delta <= 1e-9 * (1.0 + cur.norm()) {
            return Ok(QuadValue {
                value: cur,
                order: n,
                delta,
            });
        }
        prev = cur;
    }
    Err(Error::QuadratureNotConverged { delta })
}

/// Classical Wigner function
/// `int exp(-2 i pi z eta) u(x + z/2) conj(v(x - z/2)) dz`, integrated over
/// `|z| <= half_width` with Gauss-Legendre panels.
pub fn classical_wigner<U, V>(u: U, v: V, x: f64, eta: f64, half_width: f64, panels: usize) -> Result<C64>
where
    U: Fn(f64) -> C64,
    V: Fn(f64) -> C64,
{
    Ok(classical_wigner_row(u, v, x, &[eta], half_width, panels)?[0])
}

/// [`classical_wigner`] at one `x` and several `eta`, sharing the function
/// values along `z`.
pub fn classical_wigner_row<U, V>(u: U, v: V, x: f64, etas: &[f64], half_width: f64, panels: usize) -> Result<Vec<C64>>
where
    U: Fn(f64) -> C64,
    V: Fn(f64) -> C64,
{
    let pts = gl_panels(-half_width, half_width, panels, 20)?;
    let prods: Vec<(f64, C64)> = pts
        .iter()
        .map(|&(z, w)| (z, u(x + 0.5 * z) * v(x - 0.5 * z).conj() * w))
        .collect();
    Ok(etas
        .iter()
        .map(|&eta| {
            prods
                .iter()
                .map(|&(z, p)| C64::from_polar(1.0, -2.0 * std::f64::consts::PI * z * eta) * p)
                .sum()
        })
        .collect())
}
