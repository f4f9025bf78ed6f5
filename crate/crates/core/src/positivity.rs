//! Positivity experiments: the Gaussian non-positivity witness, radial
//! lower bounds, the Garding bound and box-localization (Flandrin) spectra.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::basis::{hermite_values, CalcContext, TruncationSet};
use crate::boxquad::{self, BoxQuadInfo};
use crate::error::{invalid, Error, Result};
use crate::gaussian::{gauss_laguerre, gauss_legendre};
use crate::linalg::{eig_hermitian, CMatrix};
use crate::quadform::{assemble_matrix, quadratic_form, HermiteExpansion};
use crate::symbols::{cv_class_params, BoxExtent, EpsilonSeq, PhiSpec, SymbolDescriptor, SymbolFamily};
use crate::wigner::classical_wigner_row;

/// `(h |a|^2 / 2) (1 - h nu |a|^2) / (1 + h nu |a|^2)^2`.
pub fn nonpos_closed(nu: f64, a_norm: f64, h: f64) -> f64 {
    let k = h * nu * a_norm * a_norm;
    0.5 * h * a_norm * a_norm * (1.0 - k) / ((1.0 + k) * (1.0 + k))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NonposWitness {
    pub nu: f64,
    pub a_norm: f64,
    pub h: f64,
    pub closed: f64,
    pub quad: f64,
    pub quad_imag: f64,
    pub diff: f64,
}

/// `<Op(F) ell_a, ell_a>` for `F = exp(-nu((a.x)^2 + (a.xi)^2))`, in closed
/// form and through the quadratic-form pipeline.
pub fn nonpos_witness(nu: f64, a_norm: f64, ctx: &CalcContext) -> Result<NonposWitness> {
    let sym = SymbolDescriptor::gaussian(nu, a_norm)?;
    let f = HermiteExpansion::ell(a_norm, ctx);
    let q = quadratic_form(&sym, &f, &f, ctx)?;
    let closed = nonpos_closed(nu, a_norm, ctx.h());
    Ok(NonposWitness {
        nu,
        a_norm,
        h: ctx.h(),
        closed,
        quad: q.re,
        quad_imag: q.im,
        diff: (q.re - closed).abs(),
    })
}

/// Bisection in `nu` on the sign of the pipeline value; returns the `nu`
/// where it changes sign (expected at `h nu |a|^2 = 1`).
pub fn nonpos_sign_change(a_norm: f64, ctx: &CalcContext, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let val = |nu: f64| nonpos_witness(nu, a_norm, ctx).map(|w| w.quad);
    let (mut flo, fhi) = (val(lo)?, val(hi)?);
    if flo.signum() == fhi.signum() {
        return Err(invalid("nu", "bracket does not contain a sign change"));
    }
    while hi - lo > tol * lo.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        let fm = val(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `(1/h) int_0^inf Phi(t) exp(-t/h) dt` in closed form.
pub fn radial_lower_bound(phi: &PhiSpec, ctx: &CalcContext) -> f64 {
    phi.laplace_mean(ctx.h())
}

/// Same mean for an arbitrary profile by 64-node Gauss-Laguerre in `u = t/h`.
pub fn radial_lower_bound_quad(phi: impl Fn(f64) -> f64, ctx: &CalcContext) -> Result<f64> {
    let rule = gauss_laguerre(64)?;
    let v: f64 = rule.0.iter().zip(&rule.1).map(|(u, w)| w * phi(u * ctx.h())).sum();
    if !v.is_finite() {
        return Err(invalid("phi", "profile is not integrable against exp(-t/h)"));
    }
    Ok(v)
}

#[derive(Debug, Clone, Serialize)]
pub struct RadialCheck {
    pub bound: f64,
    pub min_eig: f64,
    pub ground_state: f64,
    pub max_offdiag: f64,
    /// Every profile satisfies `Phi' >= 0` (the hypothesis of the bound).
    pub nondecreasing: bool,
    pub ok: bool,
    pub eigenvalues: Vec<f64>,
}

fn radial_parts(sym: &SymbolDescriptor) -> Result<Vec<(PhiSpec, usize)>> {
    match &sym.family {
        SymbolFamily::Radial { phi, d } => Ok(vec![(phi.clone(), *d)]),
        SymbolFamily::TensorRadial { parts } => Ok(parts.clone()),
        SymbolFamily::Gaussian { nu, a_norm } => Ok(vec![(
            PhiSpec::Exp {
                nu: nu * a_norm * a_norm,
            },
            1,
        )]),
        SymbolFamily::Constant { c } if *c == 1.0 => Ok(vec![(PhiSpec::One, 1)]),
        _ => Err(invalid("symbol", "expected a radial or tensor-radial symbol")),
    }
}

/// Lower bound `prod_j (1/h) int Phi_j(t) e^{-t/h} dt` against the smallest
/// eigenvalue of the truncated matrix.
pub fn radial_positivity_check(sym: &SymbolDescriptor, truncation: &TruncationSet, ctx: &CalcContext) -> Result<RadialCheck> {
    let parts = radial_parts(sym)?;
    let bound: f64 = parts.iter().map(|(phi, _)| radial_lower_bound(phi, ctx)).product();
    let nondecreasing = parts.iter().all(|(phi, _)| phi.is_nondecreasing());
    let m = assemble_matrix(sym, truncation, ctx)?;
    let n = m.dim();
    let mut max_offdiag: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                max_offdiag = max_offdiag.max(m.matrix.get(i, j).norm());
            }
        }
    }
    if max_offdiag > 1e-10 {
        return Err(Error::Contract(format!(
            "radial matrix has off-diagonal entry {max_offdiag:e}"
        )));
    }
    let eigenvalues = eig_hermitian(&m.matrix)?;
    let min_eig = eigenvalues[0];
    Ok(RadialCheck {
        bound,
        min_eig,
        ground_state: m.matrix.get(0, 0).re,
        max_offdiag,
        nondecreasing,
        ok: min_eig >= bound - 1e-8,
        eigenvalues,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GardingReport {
    pub eps: String,
    pub h: f64,
    pub s_eps: f64,
    /// Leading terms of `lambda_j = 81 pi h S eps_j^2`.
    pub lambda_head: Vec<f64>,
    pub terms_used: usize,
    pub tail_bound: f64,
    pub sum_lambda: f64,
    pub prod_lambda: f64,
    pub class_norm: f64,
    pub class_norm_method: String,
    pub bound: f64,
    pub measured_min_eig: Option<f64>,
    pub margin: Option<f64>,
    pub contract_ok: Option<bool>,
    pub note: String,
}

const TAIL_REL: f64 = 1e-13;

/// `-M sum lambda_j prod (1 + lambda_j)` with
/// `lambda_j = 81 pi h S eps_j^2`, `S = sup max(1, eps_j^2)`.
pub fn garding_bound(eps: &EpsilonSeq, h: f64, class_norm: f64) -> Result<GardingReport> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid("h", "must be finite and positive"));
    }
    if !eps.square_summable() {
        return Err(invalid("eps", "sequence is not square summable"));
    }
    let s_eps = match eps {
        EpsilonSeq::Explicit(v) => v.iter().fold(1.0f64, |s, e| s.max(e * e)),
        EpsilonSeq::Geometric { ratio } => (ratio * ratio).max(1.0),
        _ => 1.0,
    };
    let c = 81.0 * std::f64::consts::PI * h * s_eps;
    // number of terms such that the neglected tail of sum eps_j^2 is below
    // TAIL_REL of its head
    let (terms, tail_eps2) = match eps {
        EpsilonSeq::Zero => (0, 0.0),
        EpsilonSeq::Explicit(v) => (v.len(), 0.0),
        EpsilonSeq::InverseSquare => {
            // tail of sum j^{-4} past J is below 1/(3 J^3); the head exceeds 1
            let j = (1.0 / (3.0 * TAIL_REL)).cbrt().ceil() as usize;
            (j, 1.0 / (3.0 * (j as f64).powi(3)))
        }
        EpsilonSeq::Geometric { ratio } => {
            let r2 = ratio * ratio;
            let head = r2 / (1.0 - r2);
            let mut j = 1usize;
            while r2.powi(j as i32 + 1) / (1.0 - r2) > TAIL_REL * head {
                j += 1;
            }
            (j, r2.powi(j as i32 + 1) / (1.0 - r2))
        }
    };
    let lambda: Vec<f64> = (1..=terms).map(|j| c * eps.value(j).powi(2)).collect();
    // smallest first for accuracy
    let sum_lambda: f64 = lambda.iter().rev().sum();
    let log_prod: f64 = lambda.iter().rev().map(|l| l.ln_1p()).sum();
    let prod_lambda = log_prod.exp();
    let raw = -class_norm * sum_lambda * prod_lambda;
    let bound = if raw == 0.0 { 0.0 } else { raw };
    Ok(GardingReport {
        eps: eps.describe(),
        h,
        s_eps,
        lambda_head: lambda.iter().take(8).copied().collect(),
        terms_used: terms,
        tail_bound: c * tail_eps2,
        sum_lambda,
        prod_lambda,
        class_norm,
        class_norm_method: String::new(),
        bound,
        measured_min_eig: None,
        margin: None,
        contract_ok: None,
        note: "class norm is an upper estimate of the S_2 norm, so the bound can only be looser".into(),
    })
}

/// Smallest eigenvalue of the truncated matrix against the Garding bound
/// with `eps_j = j^{-2}` and the class norm at depth 2.
pub fn garding_verify(sym: &SymbolDescriptor, truncation: &TruncationSet, ctx: &CalcContext) -> Result<GardingReport> {
    let params = cv_class_params(sym, ctx, 2)?;
    let mut rep = garding_bound(&params.eps, ctx.h(), params.class_norm)?;
    rep.class_norm_method = params.method;
    let m = assemble_matrix(sym, truncation, ctx)?;
    let min = eig_hermitian(&m.matrix)?[0];
    let margin = min - rep.bound;
    rep.measured_min_eig = Some(min);
    rep.margin = Some(margin);
    rep.contract_ok = Some(margin >= -1e-9);
    Ok(rep)
}

/// One row of a convergence table over the Hermite cutoff.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub top_eigenvalue: f64,
    pub excess: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlandrinReport {
    pub a: String,
    pub h: f64,
    pub n: usize,
    pub quad: BoxQuadInfo,
    pub top_eigenvalue: f64,
    pub excess: f64,
    pub hermitian_deviation: f64,
    pub convergence: Vec<ConvergenceRow>,
}

/// Entries `int_{[0,a) x [0, 2 pi h a)} W(psi_j, psi_k) dmu dmu`, `j,k <= n`.
pub fn flandrin_matrix(a: BoxExtent, ctx: &CalcContext, n: usize) -> Result<(CMatrix, BoxQuadInfo)> {
    if n > 128 {
        return Err(invalid("N", "Flandrin cutoff is limited to 128"));
    }
    let av = a.value();
    if !(av > 0.0) {
        return Err(invalid("a", "must be positive"));
    }
    boxquad::box_matrix(av, 2.0 * std::f64::consts::PI * ctx.h() * av, ctx, n)
}

/// Same entries by tensor Gauss-Legendre panels on the box itself.
pub fn flandrin_matrix_cartesian(a: BoxExtent, ctx: &CalcContext, n: usize, panel: f64) -> Result<CMatrix> {
    let av = a.value();
    boxquad::box_matrix_cartesian(av, 2.0 * std::f64::consts::PI * ctx.h() * av, ctx, n, panel)
}

/// Largest eigenvalue of the box-localization matrix and its convergence
/// over the leading sections `levels` (each `<= n`).
pub fn flandrin_search(a: BoxExtent, ctx: &CalcContext, n: usize, levels: &[usize]) -> Result<FlandrinReport> {
    let (m, quad) = flandrin_matrix(a, ctx, n)?;
    let mut ns: Vec<usize> = levels.iter().copied().filter(|&k| k <= n).collect();
    ns.push(n);
    ns.sort_unstable();
    ns.dedup();
    let mut convergence = Vec::new();
    for k in ns {
        let top = *eig_hermitian(&m.principal(k + 1))?.last().unwrap();
        convergence.push(ConvergenceRow {
            n: k,
            top_eigenvalue: top,
            excess: top - 1.0,
        });
    }
    let top = convergence.last().unwrap().top_eigenvalue;
    Ok(FlandrinReport {
        a: a.to_string(),
        h: ctx.h(),
        n,
        quad,
        top_eigenvalue: top,
        excess: top - 1.0,
        hermitian_deviation: m.hermitian_deviation(),
        convergence,
    })
}

/// Largest entry difference of the box matrices at two values of `h`.
pub fn flandrin_h_dependence(a: BoxExtent, h1: f64, h2: f64, n: usize) -> Result<f64> {
    let (m1, _) = flandrin_matrix(a, &CalcContext::new(h1)?, n)?;
    let (m2, _) = flandrin_matrix(a, &CalcContext::new(h2)?, n)?;
    Ok(m1
        .as_slice()
        .iter()
        .zip(m2.as_slice())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReductionCheck {
    pub lhs: C64,
    pub rhs: C64,
    pub residual: f64,
    /// Change of the classical integral under panel halving.
    pub rhs_delta: f64,
}

fn classical_box_integral(a: f64, ctx: &CalcContext, f: &HermiteExpansion, width: f64) -> Result<C64> {
    let h = ctx.h();
    let deg = f.iter().map(|(m, _)| m.get(1) as usize).max().unwrap_or(0);
    let reach = ((2 * deg + 1) as f64).sqrt() + 7.0;
    let xmax = a.min(h.sqrt() * reach);
    let emax = a.min(reach / (2.0 * std::f64::consts::PI * h.sqrt()));
    let zmax = 2.0 * h.sqrt() * (reach + 2.0);
    let coeffs: Vec<C64> = (0..=deg)
        .map(|j| f.get(&crate::basis::MultiIndex::single(1, j as u32).unwrap()))
        .collect();
    let pre = (std::f64::consts::PI * h).powf(-0.25);
    let gamma_f = |y: f64| -> C64 {
        let mut psi = Vec::with_capacity(deg + 1);
        hermite_values(deg, y, ctx, &mut psi).unwrap();
        let s: C64 = coeffs.iter().zip(&psi).map(|(c, p)| c * p).sum();
        s * (pre * (-y * y / (2.0 * h)).exp())
    };
    let gl = gauss_legendre(16)?;
    let nodes = |lo: f64, hi: f64, w: f64| -> Vec<(f64, f64)> {
        let p = (((hi - lo) / w).ceil() as usize).max(1);
        let step = (hi - lo) / p as f64;
        let mut out = Vec::with_capacity(p * 16);
        for i in 0..p {
            for (t, wt) in gl.0.iter().zip(&gl.1) {
                out.push((lo + step * (i as f64 + 0.5 * (t + 1.0)), 0.5 * step * wt));
            }
        }
        out
    };
    let xs = nodes(0.0, xmax, width * h.sqrt());
    let es = nodes(0.0, emax, width / (2.0 * std::f64::consts::PI * h.sqrt()));
    let half_panels = ((zmax / (width * h.sqrt())).ceil() as usize).max(1);
    let etas: Vec<f64> = es.iter().map(|e| e.0).collect();
    let mut total = C64::new(0.0, 0.0);
    for &(x, wx) in &xs {
        let row = classical_wigner_row(&gamma_f, &gamma_f, x, &etas, zmax, 2 * half_panels)?;
        let inner: C64 = row.iter().zip(&es).map(|(w, e)| w * e.1).sum();
        total += inner * wx;
    }
    Ok(total)
}

/// `Q(box(a))(f, f)` in Gaussian variables against
/// `int_{[0,a)^2} W_cl(gamma f, gamma f)(x, eta) dx deta`.
pub fn flandrin_reduction_check(a: BoxExtent, ctx: &CalcContext, f: &HermiteExpansion) -> Result<ReductionCheck> {
    if f.dims() > 1 {
        return Err(invalid("f", "expansion must be one-dimensional"));
    }
    let sym = SymbolDescriptor::boxed(a)?;
    let lhs = quadratic_form(&sym, f, f, ctx)?;
    let coarse = classical_box_integral(a.value(), ctx, f, 1.0)?;
    let rhs = classical_box_integral(a.value(), ctx, f, 0.5)?;
    Ok(ReductionCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).norm(),
        rhs_delta: (rhs - coarse).norm(),
    })
}
