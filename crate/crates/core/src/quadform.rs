//! Matrix elements `I_{alpha,beta} = int F prod_j W(psi_{alpha_j}, psi_{beta_j})`,
//! truncated operator matrices and quadratic forms on Hermite expansions.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::basis::{hermite_values, CalcContext, MultiIndex, TruncationSet};
use crate::boxquad;
use crate::error::{invalid, Error, Result};
use crate::gaussian::{gh_rule, quad_budget, GH_MAX_ORDER};
pub use crate::linalg::eig_hermitian;
use crate::linalg::CMatrix;
use crate::symbols::{fd_derivative, FnSymbol, PhaseSpaceSymbol, PolySymbol, RotationDerivative};
use crate::wigner::WignerTable;

/// Largest number of rows an assembled matrix may have.
pub const MAX_ROWS: usize = 4096;

/// Finite expansion `sum_alpha c_alpha psi_alpha`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HermiteExpansion {
    coeffs: BTreeMap<MultiIndex, C64>,
}

impl HermiteExpansion {
    pub fn new() -> Self {
        Self {
            coeffs: BTreeMap::new(),
        }
    }

    pub fn single(alpha: MultiIndex, c: C64) -> Self {
        let mut e = Self::new();
        e.add(alpha, c);
        e
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (MultiIndex, C64)>) -> Self {
        let mut e = Self::new();
        for (a, c) in terms {
            e.add(a, c);
        }
        e
    }

    /// `ell_a = |a| sqrt(h/2) psi_1` in the coordinate `e_1 = a/|a|`.
    pub fn ell(a_norm: f64, ctx: &CalcContext) -> Self {
        Self::single(
            MultiIndex::single(1, 1).unwrap(),
            C64::new(a_norm * ctx.variance().sqrt(), 0.0),
        )
    }

    pub fn add(&mut self, alpha: MultiIndex, c: C64) {
        let e = self.coeffs.entry(alpha).or_insert(C64::new(0.0, 0.0));
        *e += c;
    }

    pub fn get(&self, alpha: &MultiIndex) -> C64 {
        self.coeffs.get(alpha).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &C64)> {
        self.coeffs.iter()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Largest coordinate in the support.
    pub fn dims(&self) -> usize {
        self.coeffs.keys().map(|m| m.max_coord()).max().unwrap_or(0)
    }

    /// `sum |c_alpha|^2`, the squared norm by Parseval.
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm_sqr()).sum()
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|(k, v)| (k.clone(), v * s)).collect(),
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, v) in &other.coeffs {
            out.add(k.clone(), *v);
        }
        out
    }

    /// Value at a point of `R^dims`.
    pub fn eval(&self, x: &[f64], ctx: &CalcContext) -> Result<C64> {
        let mut sum = C64::new(0.0, 0.0);
        let mut buf = Vec::new();
        for (alpha, c) in &self.coeffs {
            let mut p = 1.0;
            for (j, a) in alpha.iter() {
                let xj = *x.get(j - 1).ok_or(Error::SupportExceedsDim {
                    index: j,
                    dim: x.len(),
                })?;
                hermite_values(a as usize, xj, ctx, &mut buf)?;
                p *= buf[a as usize];
            }
            sum += c * p;
        }
        Ok(sum)
    }
}

impl Default for HermiteExpansion {
    fn default() -> Self {
        Self::new()
    }
}

/// How matrix entries were integrated.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct QuadMeta {
    pub method: String,
    /// Highest per-axis order used (or radial node count for boxes).
    pub order: usize,
    /// Largest change against the previous refinement.
    pub delta: f64,
}

impl QuadMeta {
    fn merge(&mut self, other: &QuadMeta) {
        if self.method.is_empty() {
            self.method = other.method.clone();
        } else if !other.method.is_empty() && !self.method.contains(&other.method) {
            self.method = format!("{}+{}", self.method, other.method);
        }
        self.order = self.order.max(other.order);
        self.delta = self.delta.max(other.delta);
    }
}

/// Truncated matrix with entry `(alpha, beta) = I_{alpha,beta}`.
///
/// With this layout `Q(f, g) = sum_{alpha,beta} f_alpha conj(g_beta) I_{alpha,beta}`;
/// the operator matrix `<Op psi_beta, psi_alpha>` is its transpose and has
/// the same spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct OperatorMatrix {
    pub truncation: TruncationSet,
    pub matrix: CMatrix,
    pub symbol: String,
    pub h: f64,
    pub quad: QuadMeta,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn entry(&self, alpha: &MultiIndex, beta: &MultiIndex) -> Option<C64> {
        let i = self.truncation.index_of(alpha)?;
        let j = self.truncation.index_of(beta)?;
        Some(self.matrix.get(i, j))
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eig_hermitian(&self.matrix)
    }

    /// `Q(f, f)` for coefficient vector `c` in truncation order.
    pub fn form(&self, c: &[C64]) -> C64 {
        let n = self.dim();
        let mut s = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                s += c[i] * c[j].conj() * self.matrix.get(i, j);
            }
        }
        s
    }
}

fn restrict(m: &MultiIndex, d: usize) -> MultiIndex {
    let pairs: Vec<(usize, u32)> = m.iter().filter(|(j, _)| *j <= d).collect();
    MultiIndex::from_pairs(&pairs).unwrap()
}

fn tail_matches(a: &MultiIndex, b: &MultiIndex, d: usize) -> bool {
    let top = a.max_coord().max(b.max_coord());
    (d + 1..=top).all(|j| a.get(j) == b.get(j))
}

fn accept(prev: C64, cur: C64) -> bool {
    (cur - prev).norm() <= f64::max(1e-10, 1e-9 * cur.norm())
}

/// `int exp(-nu r^2) W(psi_a, psi_a) dmu dmu` by 2-D Gauss-Hermite with
/// the order ladder.
fn pair_gaussian(nu: f64, a: usize, ctx: &CalcContext) -> Result<(f64, QuadMeta)> {
    if nu == 0.0 {
        return Ok((
            1.0,
            QuadMeta {
                method: "structural".into(),
                order: 0,
                delta: 0.0,
            },
        ));
    }
    let eval = |n: usize| -> Result<f64> {
        let rule = gh_rule(n, ctx.variance())?;
        let mut t = WignerTable::new(a)?;
        let norm = 1.0 / (std::f64::consts::PI * ctx.h());
        let mut s = 0.0;
        for (x, lx) in rule.nodes.iter().zip(&rule.lebesgue) {
            for (q, lq) in rule.nodes.iter().zip(&rule.lebesgue) {
                t.fill(*x, *q, ctx);
                s += lx * lq * (-nu * (x * x + q * q)).exp() * t.get(a, a).re;
            }
        }
        Ok(s * norm)
    };
    ladder(a / 2 + 16, |n| eval(n).map(|v| C64::new(v, 0.0)), "gauss-hermite").map(|(v, m)| (v.re, m))
}

fn ladder(start: usize, mut eval: impl FnMut(usize) -> Result<C64>, method: &str) -> Result<(C64, QuadMeta)> {
    let mut n = start.min(GH_MAX_ORDER - 16);
    let mut prev = eval(n)?;
    let mut delta = f64::INFINITY;
    while n + 16 <= GH_MAX_ORDER {
        n += 16;
        let cur = eval(n)?;
        delta = (cur - prev).norm();
        if accept(prev, cur) {
            return Ok((
                cur,
                QuadMeta {
                    method: method.into(),
                    order: n,
                    delta,
                },
            ));
        }
        prev = cur;
    }
    Err(Error::QuadratureNotConverged { delta })
}

/// Entries for all pairs among `indices` (restricted to coordinates
/// `1..=d`) by tensor quadrature over `R^{2d}`, at order `n` per axis.
///
/// The `(x_1, xi_1)` plane is summed first into a table indexed by the
/// first-coordinate degrees, which is then combined with the Wigner
/// factors of the remaining coordinates.
fn generic_block(
    sym: &dyn PhaseSpaceSymbol,
    indices: &[MultiIndex],
    ctx: &CalcContext,
    n: usize,
) -> Result<Vec<C64>> {
    let d = sym.base_dim();
    let k = indices.len();
    let points = (n as u128).pow(2 * d as u32);
    let budget = quad_budget();
    if points > budget as u128 {
        return Err(Error::QuadratureBudget { points, budget });
    }
    let rule = gh_rule(n, ctx.variance())?;
    let maxdeg: Vec<usize> = (1..=d)
        .map(|j| indices.iter().map(|m| m.get(j) as usize).max().unwrap_or(0))
        .collect();
    let m1 = maxdeg[0] + 1;
    let mut inner = WignerTable::new(maxdeg[0])?;
    // first-coordinate tables over the n x n plane, in Lebesgue-weighted form
    let plane: Vec<(f64, f64, f64, Vec<C64>)> = {
        let mut out = Vec::with_capacity(n * n);
        for (x, lx) in rule.nodes.iter().zip(&rule.lebesgue) {
            for (q, lq) in rule.nodes.iter().zip(&rule.lebesgue) {
                inner.fill(*x, *q, ctx);
                let vals = (0..m1 * m1).map(|i| inner.get(i / m1, i % m1)).collect();
                out.push((*x, *q, lx * lq, vals));
            }
        }
        out
    };
    let mut outer: Vec<WignerTable> = maxdeg[1..].iter().map(|&m| WignerTable::new(m)).collect::<Result<_>>()?;
    let dense: Vec<Vec<usize>> = indices
        .iter()
        .map(|m| (1..=d).map(|j| m.get(j) as usize).collect())
        .collect();
    let mut acc = vec![C64::new(0.0, 0.0); k * k];
    let mut part = vec![C64::new(0.0, 0.0); m1 * m1];
    // odometer over the outer coordinates: idx[j-1] is x_{j+1}, idx[d-1+j-1] is xi_{j+1}
    let no = 2 * (d - 1);
    let mut idx = vec![0usize; no];
    let mut x = vec![0.0; d];
    let mut xi = vec![0.0; d];
    let norm = (std::f64::consts::PI * ctx.h()).powi(-(d as i32));
    loop {
        let mut w_out = norm;
        for j in 1..d {
            let (a, b) = (idx[j - 1], idx[d - 1 + j - 1]);
            x[j] = rule.nodes[a];
            xi[j] = rule.nodes[b];
            w_out *= rule.lebesgue[a] * rule.lebesgue[b];
        }
        part.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        let mut any = false;
        for (px, pq, w, vals) in &plane {
            x[0] = *px;
            xi[0] = *pq;
            let f = sym.eval(ctx, &x, &xi) * w;
            if f != 0.0 {
                any = true;
                for (p, v) in part.iter_mut().zip(vals) {
                    *p += v * f;
                }
            }
        }
        if any {
            for (t, j) in outer.iter_mut().zip(1..d) {
                t.fill(x[j], xi[j], ctx);
            }
            for r in 0..k {
                for c in r..k {
                    let mut p = part[dense[r][0] * m1 + dense[c][0]] * w_out;
                    for j in 1..d {
                        p *= outer[j - 1].get(dense[r][j], dense[c][j]);
                    }
                    acc[r * k + c] += p;
                }
            }
        }
        let mut v = 0;
        loop {
            if v == no {
                for r in 0..k {
                    for c in 0..r {
                        acc[r * k + c] = acc[c * k + r].conj();
                    }
                }
                return Ok(acc);
            }
            idx[v] += 1;
            if idx[v] < n {
                break;
            }
            idx[v] = 0;
            v += 1;
        }
    }
}

/// Computes `I_{alpha,beta}` for all pairs of `rows` (row index first).
fn entries(sym: &dyn PhaseSpaceSymbol, rows: &[MultiIndex], ctx: &CalcContext) -> Result<(Vec<C64>, QuadMeta)> {
    let k = rows.len();
    let d = sym.base_dim();
    let mut out = vec![C64::new(0.0, 0.0); k * k];
    let mut meta = QuadMeta::default();
    let live = |r: usize, c: usize| tail_matches(&rows[r], &rows[c], d);

    if let Some(gs) = sym.gauss_sum(ctx) {
        let mut cache: HashMap<(u64, u32), f64> = HashMap::new();
        for r in 0..k {
            if !live(r, r) {
                continue;
            }
            // pair-radial: only alpha = beta on 1..=d survives
            let mut v = 0.0;
            for t in &gs.terms {
                let mut p = t.coef;
                for j in 1..=d {
                    let a = rows[r].get(j);
                    let key = (t.nus[j - 1].to_bits(), a);
                    let g = match cache.get(&key) {
                        Some(g) => *g,
                        None => {
                            let (g, m) = pair_gaussian(t.nus[j - 1], a as usize, ctx)?;
                            meta.merge(&m);
                            cache.insert(key, g);
                            g
                        }
                    };
                    p *= g;
                }
                v += p;
            }
            out[r * k + r] = C64::new(v, 0.0);
        }
        if meta.method.is_empty() {
            meta.method = "structural".into();
        }
        return Ok((out, meta));
    }

    if let Some((a, b)) = sym.indicator_box(ctx) {
        let n = rows.iter().map(|m| m.get(1) as usize).max().unwrap_or(0);
        let (bm, info) = boxquad::box_matrix(a, b, ctx, n)?;
        meta = QuadMeta {
            method: info.scheme,
            order: info.radial_nodes,
            delta: info.delta,
        };
        for r in 0..k {
            for c in 0..k {
                if live(r, c) {
                    out[r * k + c] = bm.get(rows[r].get(1) as usize, rows[c].get(1) as usize);
                }
            }
        }
        return Ok((out, meta));
    }

    // generic smooth or polynomial symbol: quadrature on distinct restricted indices
    let mut uniq: Vec<MultiIndex> = rows.iter().map(|m| restrict(m, d)).collect::<BTreeSet<_>>().into_iter().collect();
    uniq.sort_by_key(|m| (m.degree(), m.clone()));
    let pos: HashMap<MultiIndex, usize> = uniq.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
    let u = uniq.len();
    let maxdeg = uniq.iter().map(|m| m.degree() as usize).max().unwrap_or(0);
    let mut n = (2 * (maxdeg + 1) + 16).min(GH_MAX_ORDER - 16);
    let mut prev = generic_block(sym, &uniq, ctx, n)?;
    let mut delta = f64::INFINITY;
    let block;
    loop {
        if n + 16 > GH_MAX_ORDER {
            return Err(Error::QuadratureNotConverged { delta });
        }
        n += 16;
        let cur = generic_block(sym, &uniq, ctx, n)?;
        let ok = cur.iter().zip(&prev).all(|(c, p)| accept(*p, *c));
        delta = cur.iter().zip(&prev).map(|(c, p)| (c - p).norm()).fold(0.0, f64::max);
        if ok {
            meta = QuadMeta {
                method: "gauss-hermite".into(),
                order: n,
                delta,
            };
            block = cur;
            break;
        }
        prev = cur;
    }
    for r in 0..k {
        for c in 0..k {
            if live(r, c) {
                let i = pos[&restrict(&rows[r], d)];
                let j = pos[&restrict(&rows[c], d)];
                out[r * k + c] = block[i * u + j];
            }
        }
    }
    Ok((out, meta))
}

/// `I_{alpha,beta}(F)`.
///
/// Exactly zero when `alpha_j != beta_j` for a coordinate `j` beyond the
/// symbol's base dimension, and exactly zero off the diagonal for
/// pair-radial (Gaussian-sum) symbols.
pub fn matrix_element(
    sym: &dyn PhaseSpaceSymbol,
    alpha: &MultiIndex,
    beta: &MultiIndex,
    ctx: &CalcContext,
) -> Result<C64> {
    Ok(matrix_element_meta(sym, alpha, beta, ctx)?.0)
}

pub fn matrix_element_meta(
    sym: &dyn PhaseSpaceSymbol,
    alpha: &MultiIndex,
    beta: &MultiIndex,
    ctx: &CalcContext,
) -> Result<(C64, QuadMeta)> {
    let d = sym.base_dim();
    if !tail_matches(alpha, beta, d) {
        return Ok((
            C64::new(0.0, 0.0),
            QuadMeta {
                method: "structural".into(),
                ..QuadMeta::default()
            },
        ));
    }
    if alpha == beta {
        let (e, meta) = entries(sym, std::slice::from_ref(alpha), ctx)?;
        return Ok((e[0], meta));
    }
    let rows = [alpha.clone(), beta.clone()];
    let (e, meta) = entries(sym, &rows, ctx)?;
    Ok((e[1], meta))
}

/// Dense matrix of `I_{alpha,beta}` over a truncation set.
pub fn assemble_matrix(sym: &dyn PhaseSpaceSymbol, truncation: &TruncationSet, ctx: &CalcContext) -> Result<OperatorMatrix> {
    let k = truncation.len();
    if k > MAX_ROWS {
        return Err(invalid(
            "N",
            format!("truncation has {k} rows, limit is {MAX_ROWS}"),
        ));
    }
    let (e, quad) = entries(sym, truncation.indices(), ctx)?;
    let matrix = CMatrix::from_fn(k, |i, j| e[i * k + j]);
    Ok(OperatorMatrix {
        truncation: truncation.clone(),
        matrix,
        symbol: sym.label(),
        h: ctx.h(),
        quad,
    })
}

/// `Q(F)(f, g) = sum c_alpha conj(d_beta) I_{alpha,beta}`: linear in `f`,
/// conjugate-linear in `g`.
pub fn quadratic_form(
    sym: &dyn PhaseSpaceSymbol,
    f: &HermiteExpansion,
    g: &HermiteExpansion,
    ctx: &CalcContext,
) -> Result<C64> {
    let rows: Vec<MultiIndex> = f
        .iter()
        .chain(g.iter())
        .map(|(m, _)| m.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if rows.is_empty() {
        return Ok(C64::new(0.0, 0.0));
    }
    let (e, _) = entries(sym, &rows, ctx)?;
    let k = rows.len();
    let mut s = C64::new(0.0, 0.0);
    for (r, a) in rows.iter().enumerate() {
        let ca = f.get(a);
        if ca == C64::new(0.0, 0.0) {
            continue;
        }
        for (c, b) in rows.iter().enumerate() {
            let cb = g.get(b);
            if cb == C64::new(0.0, 0.0) {
                continue;
            }
            s += ca * cb.conj() * e[r * k + c];
        }
    }
    Ok(s)
}

/// A function on `R^2` for the integration-by-parts check.
pub enum IppFunction {
    /// Polynomial in `(x, xi)`, differentiated symbolically.
    Poly(PolySymbol),
    /// Arbitrary smooth function, differentiated by finite differences.
    Smooth(Box<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IppResult {
    pub lhs: C64,
    pub rhs: C64,
    pub residual: f64,
    pub analytic: bool,
    pub order: usize,
}

const IPP_FD_STEP: f64 = 2e-2;

// 6th-order central differences of L^n F
fn rot_fd(f: &dyn Fn(f64, f64) -> f64, n: u32, x: f64, q: f64) -> f64 {
    if n == 0 {
        return f(x, q);
    }
    const W: [(f64, f64); 3] = [(1.0, 45.0), (2.0, -9.0), (3.0, 1.0)];
    let h = IPP_FD_STEP;
    let g = |a: f64, b: f64| rot_fd(f, n - 1, a, b);
    let mut dq = 0.0;
    let mut dx = 0.0;
    for (k, w) in W {
        dq += w * (g(x, q + k * h) - g(x, q - k * h));
        dx += w * (g(x + k * h, q) - g(x - k * h, q));
    }
    (x * dq - q * dx) / (60.0 * h)
}

/// Both sides of
/// `(-s i eps)^n int F (x + i eps xi)^s P(x^2+xi^2) e^{-(x^2+xi^2)/h}
///  = int (L^n F) (x + i eps xi)^s P(x^2+xi^2) e^{-(x^2+xi^2)/h}`
/// with `L = x d/dxi - xi d/dx`; `p` holds the coefficients of `P`.
pub fn ipp_check(
    f: &IppFunction,
    n: u32,
    s: u32,
    eps: f64,
    p: &[f64],
    ctx: &CalcContext,
) -> Result<IppResult> {
    if n == 0 {
        return Err(invalid("n", "order must be at least 1"));
    }
    if eps != 1.0 && eps != -1.0 {
        return Err(invalid("eps", "must be +1 or -1"));
    }
    let poly_p = |t: f64| p.iter().rev().fold(0.0, |acc, c| acc * t + c);
    let pre = C64::new(0.0, -(s as f64) * eps).powu(n);
    let mass = std::f64::consts::PI * ctx.h();
    let integrate = |order: usize, g: &dyn Fn(f64, f64) -> f64| -> Result<C64> {
        let rule = gh_rule(order, ctx.variance())?;
        let mut acc = C64::new(0.0, 0.0);
        for (x, wx) in rule.nodes.iter().zip(&rule.weights) {
            for (q, wq) in rule.nodes.iter().zip(&rule.weights) {
                let z = C64::new(*x, eps * q).powu(s);
                acc += z * (g(*x, *q) * poly_p(x * x + q * q) * wx * wq);
            }
        }
        Ok(acc * mass)
    };
    match f {
        IppFunction::Poly(poly) => {
            if poly.dim != 1 {
                return Err(Error::DimensionMismatch {
                    expected: 1,
                    got: poly.dim,
                });
            }
            let mut lf = poly.clone();
            for _ in 0..n {
                lf = lf.rotate(1);
            }
            let deg = poly.degree() as usize + s as usize + 2 * p.len().saturating_sub(1);
            let order = deg / 2 + 2;
            let lhs = pre * integrate(order, &|x, q| poly.eval_point(&[x], &[q]))?;
            let rhs = integrate(order, &|x, q| lf.eval_point(&[x], &[q]))?;
            Ok(IppResult {
                lhs,
                rhs,
                residual: (lhs - rhs).norm(),
                analytic: true,
                order,
            })
        }
        IppFunction::Smooth(func) => {
            let fref: &dyn Fn(f64, f64) -> f64 = func.as_ref();
            let (lhs, m1) = ladder(16, |o| Ok(pre * integrate(o, &|x, q| fref(x, q))?), "gauss-hermite")?;
            let (rhs, m2) = ladder(16, |o| integrate(o, &|x, q| rot_fd(fref, n, x, q)), "gauss-hermite")?;
            Ok(IppResult {
                lhs,
                rhs,
                residual: (lhs - rhs).norm(),
                analytic: false,
                order: m1.order.max(m2.order),
            })
        }
    }
}

/// `I_{alpha,beta}` through `i^n / (beta_j - alpha_j)^n I_{alpha,beta}(L_j^n F)`.
///
/// Returns exactly zero when the symbol is invariant under rotations of
/// pair `j`.
pub fn rotation_reduction(
    sym: &dyn PhaseSpaceSymbol,
    alpha: &MultiIndex,
    beta: &MultiIndex,
    j: usize,
    n: u32,
    ctx: &CalcContext,
) -> Result<C64> {
    let (a, b) = (alpha.get(j) as i64, beta.get(j) as i64);
    if a == b {
        return Err(invalid("j", "alpha_j and beta_j must differ"));
    }
    if j == 0 || j > sym.base_dim() {
        return Err(Error::SupportExceedsDim {
            index: j,
            dim: sym.base_dim(),
        });
    }
    if n == 0 {
        return Err(invalid("n", "order must be at least 1"));
    }
    let factor = C64::new(0.0, 1.0).powu(n) / ((b - a) as f64).powi(n as i32);
    match sym.rotation_derivative(ctx, j) {
        RotationDerivative::Zero => Ok(C64::new(0.0, 0.0)),
        RotationDerivative::Symbol(first) => {
            let mut cur = first;
            for _ in 1..n {
                cur = match cur.rotation_derivative(ctx, j) {
                    RotationDerivative::Zero => return Ok(C64::new(0.0, 0.0)),
                    RotationDerivative::Symbol(s) => s,
                    RotationDerivative::Unsupported => {
                        return Err(Error::Unsupported("iterated rotation derivative".into()))
                    }
                };
            }
            Ok(factor * matrix_element(cur.as_ref(), alpha, beta, ctx)?)
        }
        RotationDerivative::Unsupported => {
            let d = sym.base_dim();
            let c = *ctx;
            let fd = FnSymbol {
                dim: d,
                name: format!("L^{n} {}", sym.label()),
                f: move |x: &[f64], xi: &[f64]| rot_fd_nd(sym, &c, j, n, x, xi),
            };
            Ok(factor * matrix_element(&fd, alpha, beta, ctx)?)
        }
    }
}

fn rot_fd_nd(sym: &dyn PhaseSpaceSymbol, ctx: &CalcContext, j: usize, n: u32, x: &[f64], xi: &[f64]) -> f64 {
    if n == 0 {
        return sym.eval(ctx, x, xi);
    }
    let d = x.len();
    let mut ax = vec![0u32; d];
    let mut bq = vec![0u32; d];
    if n == 1 {
        bq[j - 1] = 1;
        let dq = fd_derivative(sym, ctx, &ax, &bq, x, xi);
        bq[j - 1] = 0;
        ax[j - 1] = 1;
        let dx = fd_derivative(sym, ctx, &ax, &bq, x, xi);
        return x[j - 1] * dq - xi[j - 1] * dx;
    }
    let inner = FnSymbol {
        dim: d,
        name: String::new(),
        f: |a: &[f64], b: &[f64]| rot_fd_nd(sym, ctx, j, n - 1, a, b),
    };
    rot_fd_nd(&inner, ctx, j, 1, x, xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::SymbolDescriptor;

    #[test]
    fn gaussian_section() {
        let ctx = CalcContext::new(1.0).unwrap();
        let sym = SymbolDescriptor::gaussian(2.0, 1.0).unwrap();
        let t = TruncationSet::total_degree(1, 1).unwrap();
        let m = assemble_matrix(&sym, &t, &ctx).unwrap();
        assert!((m.matrix.get(0, 0).re - 1.0 / 3.0).abs() < 1e-12);
        assert!((m.matrix.get(1, 1).re + 1.0 / 9.0).abs() < 1e-12);
        assert_eq!(m.matrix.get(0, 1), C64::new(0.0, 0.0));
    }

    #[test]
    fn structural_zero_beyond_base_dim() {
        let ctx = CalcContext::new(1.0).unwrap();
        let sym = SymbolDescriptor::gaussian(1.0, 1.0).unwrap();
        let a = MultiIndex::single(2, 1).unwrap();
        let (v, meta) = matrix_element_meta(&sym, &a, &MultiIndex::zero(), &ctx).unwrap();
        assert_eq!(v, C64::new(0.0, 0.0));
        assert_eq!(meta.method, "structural");
    }

    #[test]
    fn ipp_linear_case() {
        let ctx = CalcContext::new(1.0).unwrap();
        let f = IppFunction::Poly(PolySymbol::new(1, vec![(1.0, vec![1, 0])]).unwrap());
        let r = ipp_check(&f, 1, 1, 1.0, &[1.0], &ctx).unwrap();
        assert!((r.lhs - C64::new(0.0, -std::f64::consts::FRAC_PI_2)).norm() < 1e-12);
        assert!(r.residual < 1e-12);
    }
}
