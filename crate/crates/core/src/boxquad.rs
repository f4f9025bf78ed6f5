//! Matrix of the indicator of `[0,A) x [0,B)` in the Hermite basis.
//!
//! In polar coordinates the weighted Wigner function is
//! `(-1)^m e^{+-i alpha theta} L_m^alpha(rho)` (normalized Laguerre
//! function, `rho = 2 r^2 / h`), and at radius `r` the box covers the arc
//! `acos(min(1, A/r)) <= theta <= asin(min(1, B/r))`. The angular integral
//! is therefore exact and only a radial quadrature remains, done with
//! Gauss-Legendre panels in `u = sqrt(rho)` with breakpoints at the radii
//! where the arc changes form.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::basis::{laguerre_functions, CalcContext};
use crate::error::{invalid, Result};
use crate::gaussian::gauss_legendre;
use crate::linalg::CMatrix;

const NODES: usize = 16;
const BASE_WIDTH: f64 = 0.25;
const MAX_REFINE: usize = 6;

#[derive(Debug, Clone, Serialize)]
pub struct BoxQuadInfo {
    pub scheme: String,
    /// Panel width in `u = sqrt(2/h) r`.
    pub panel_width: f64,
    pub nodes_per_panel: usize,
    pub radial_nodes: usize,
    pub u_cut: f64,
    /// Max entry change against the previous panel width.
    pub delta: f64,
}

/// Radius in `u` beyond which every Laguerre function up to degree `n` is
/// negligible (past the turning point `4n+2` by many Airy lengths).
pub fn u_cutoff(n: usize) -> f64 {
    let nu = 4.0 * n as f64 + 2.0;
    (nu + 30.0 * nu.cbrt() + 60.0).sqrt()
}

fn arc(r: f64, a: f64, b: f64) -> Option<(f64, f64)> {
    let lo = if r > a { (a / r).acos() } else { 0.0 };
    let hi = if r > b {
        (b / r).asin()
    } else {
        std::f64::consts::FRAC_PI_2
    };
    if hi > lo {
        Some((lo, hi))
    } else {
        None
    }
}

/// Entries `int_box W(psi_j, psi_k) dmu dmu` for `0 <= j,k <= n` at a
/// fixed panel width.
pub fn box_matrix_fixed(a: f64, b: f64, ctx: &CalcContext, n: usize, width: f64) -> Result<(CMatrix, usize)> {
    if !(a > 0.0 && b > 0.0) {
        return Err(invalid("a", "box sides must be positive"));
    }
    let scale = (2.0 / ctx.h()).sqrt();
    let u_cut = u_cutoff(n);
    // breakpoints in u; a square-root kink sits just after u_a and u_b
    let ua = a * scale;
    let ub = b * scale;
    let uc = (a * a + b * b).sqrt() * scale;
    let mut cuts = vec![0.0, u_cut];
    for v in [ua, ub, uc] {
        if v.is_finite() && v < u_cut {
            cuts.push(v);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let gl = gauss_legendre(NODES)?;
    let stride = n + 1;
    let mut acc = vec![C64::new(0.0, 0.0); stride * stride];
    let mut lag = vec![0.0; n + 1];
    let mut theta = vec![C64::new(0.0, 0.0); n + 1];
    let mut count = 0;
    for seg in cuts.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        if hi <= lo {
            continue;
        }
        let kink = (lo == ua || lo == ub) && lo > 0.0;
        let panels = (((hi - lo) / width).ceil() as usize).max(1) * if kink { 2 } else { 1 };
        for p in 0..panels {
            let s0 = p as f64 / panels as f64;
            let s1 = (p + 1) as f64 / panels as f64;
            for (t, w) in gl.0.iter().zip(&gl.1) {
                let s = s0 + 0.5 * (s1 - s0) * (t + 1.0);
                let ws = 0.5 * (s1 - s0) * w;
                // u = lo + L s^2 smooths the square-root kink at lo
                let (u, du) = if kink {
                    (lo + (hi - lo) * s * s, 2.0 * (hi - lo) * s * ws)
                } else {
                    (lo + (hi - lo) * s, (hi - lo) * ws)
                };
                let r = u / scale;
                let Some((t0, t1)) = arc(r, a, b) else {
                    continue;
                };
                count += 1;
                for (al, th) in theta.iter_mut().enumerate() {
                    *th = if al == 0 {
                        C64::new(t1 - t0, 0.0)
                    } else {
                        let alf = al as f64;
                        (C64::from_polar(1.0, alf * t1) - C64::from_polar(1.0, alf * t0)) / C64::new(0.0, alf)
                    };
                }
                let rho = u * u;
                let wr = 2.0 * u * du;
                for al in 0..=n {
                    let mmax = n - al;
                    laguerre_functions(mmax, al, rho, &mut lag);
                    let f = theta[al] * wr;
                    for m in 0..=mmax {
                        let v = if m % 2 == 0 { lag[m] } else { -lag[m] };
                        acc[m * stride + m + al] += f * v;
                    }
                }
            }
        }
    }
    let c = 1.0 / (4.0 * std::f64::consts::PI);
    let mat = CMatrix::from_fn(stride, |j, k| {
        if j <= k {
            acc[j * stride + k] * c
        } else {
            (acc[k * stride + j] * c).conj()
        }
    });
    Ok((mat, count))
}

/// Box matrix with panel halving until successive entries agree to `1e-9`.
pub fn box_matrix(a: f64, b: f64, ctx: &CalcContext, n: usize) -> Result<(CMatrix, BoxQuadInfo)> {
    let mut width = BASE_WIDTH;
    let (mut prev, _) = box_matrix_fixed(a, b, ctx, n, width)?;
    let mut delta = f64::INFINITY;
    for _ in 0..MAX_REFINE {
        width *= 0.5;
        let (cur, count) = box_matrix_fixed(a, b, ctx, n, width)?;
        delta = cur
            .as_slice()
            .iter()
            .zip(prev.as_slice())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        if delta <= 1e-9 {
            return Ok((
                cur,
                BoxQuadInfo {
                    scheme: "radial-panels/exact-arc".into(),
                    panel_width: width,
                    nodes_per_panel: NODES,
                    radial_nodes: count,
                    u_cut: u_cutoff(n),
                    delta,
                },
            ));
        }
        prev = cur;
    }
    Err(crate::error::Error::QuadratureNotConverged { delta })
}

/// Independent check: tensor Gauss-Legendre panels directly on the box
/// `[0,A) x [0,B)` (sides clipped where the integrand is negligible).
pub fn box_matrix_cartesian(a: f64, b: f64, ctx: &CalcContext, n: usize, panel: f64) -> Result<CMatrix> {
    let rcut = u_cutoff(n) * (ctx.h() / 2.0).sqrt();
    let (a, b) = (a.min(rcut), b.min(rcut));
    let gl = gauss_legendre(NODES)?;
    let axis = |len: f64| -> Vec<(f64, f64)> {
        let panels = ((len / panel).ceil() as usize).max(1);
        let wdt = len / panels as f64;
        let mut out = Vec::new();
        for p in 0..panels {
            for (t, w) in gl.0.iter().zip(&gl.1) {
                out.push((wdt * (p as f64 + 0.5 * (t + 1.0)), 0.5 * wdt * w));
            }
        }
        out
    };
    let xs = axis(a);
    let qs = axis(b);
    let mut table = crate::wigner::WignerTable::new(n)?;
    let stride = n + 1;
    let mut acc = vec![C64::new(0.0, 0.0); stride * stride];
    for &(x, wx) in &xs {
        for &(q, wq) in &qs {
            if x * x + q * q > rcut * rcut {
                continue;
            }
            table.fill(x, q, ctx);
            let w = wx * wq;
            for j in 0..=n {
                for k in j..=n {
                    acc[j * stride + k] += table.get(j, k) * w;
                }
            }
        }
    }
    let c = 1.0 / (std::f64::consts::PI * ctx.h());
    Ok(CMatrix::from_fn(stride, |j, k| {
        if j <= k {
            acc[j * stride + k] * c
        } else {
            (acc[k * stride + j] * c).conj()
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::erf::erf;

    #[test]
    fn quarter_plane_ground_state() {
        let ctx = CalcContext::new(1.0).unwrap();
        let (m, _) = box_matrix(f64::INFINITY, f64::INFINITY, &ctx, 1).unwrap();
        assert!((m.get(0, 0).re - 0.25).abs() < 1e-12);
        assert!((m.get(1, 1).re - 0.25).abs() < 1e-12);
        let c = 1.0 / (2.0 * (2.0 * std::f64::consts::PI).sqrt());
        assert!((m.get(0, 1) - C64::new(c, c)).norm() < 1e-12);
    }

    #[test]
    fn finite_box_ground_state_erf() {
        let h = 0.7;
        let ctx = CalcContext::new(h).unwrap();
        let (a, b) = (0.4, 1.1);
        let (m, _) = box_matrix(a, b, &ctx, 2).unwrap();
        let exact = 0.25 * erf(a / h.sqrt()) * erf(b / h.sqrt());
        assert!((m.get(0, 0).re - exact).abs() < 1e-12);
    }

    #[test]
    fn polar_matches_cartesian() {
        let ctx = CalcContext::new(1.0).unwrap();
        let (a, b) = (1.3, 2.0 * std::f64::consts::PI * 1.3);
        let (p, _) = box_matrix(a, b, &ctx, 8).unwrap();
        let c = box_matrix_cartesian(a, b, &ctx, 8, 0.1).unwrap();
        for j in 0..9 {
            for k in 0..9 {
                assert!((p.get(j, k) - c.get(j, k)).norm() < 1e-10, "{j} {k}");
            }
        }
    }
}
