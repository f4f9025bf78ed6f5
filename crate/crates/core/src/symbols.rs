//! Cylindrical symbols on `R^{2d}`, their text syntax and class norms.
//!
//! A symbol is stored through its finite-dimensional profile
//! `F(x_1..x_d, xi_1..xi_d)`; evaluating on the Hilbert space or on samples
//! of the Wiener space only means feeding the coordinates of the point.

use std::fmt;

use serde::Serialize;

use crate::basis::CalcContext;
use crate::error::{invalid, Error, Result};

/// Radial profile `Phi` on `[0, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PhiSpec {
    /// `Phi = 1`.
    One,
    /// `Phi(t) = exp(-nu t)`.
    Exp { nu: f64 },
    /// `Phi(t) = sum_k c_k exp(-k t)`.
    PolyExp { coeffs: Vec<f64> },
}

impl PhiSpec {
    /// `(coefficient, rate)` pairs with `Phi(t) = sum c exp(-rate t)`.
    pub fn exp_terms(&self) -> Vec<(f64, f64)> {
        match self {
            PhiSpec::One => vec![(1.0, 0.0)],
            PhiSpec::Exp { nu } => vec![(1.0, *nu)],
            PhiSpec::PolyExp { coeffs } => coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(k, c)| (*c, k as f64))
                .collect(),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.exp_terms().iter().map(|(c, r)| c * (-r * t).exp()).sum()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.exp_terms().iter().map(|(c, r)| -c * r * (-r * t).exp()).sum()
    }

    /// `(1/h) int_0^inf Phi(t) exp(-t/h) dt`.
    pub fn laplace_mean(&self, h: f64) -> f64 {
        self.exp_terms().iter().map(|(c, r)| c / (1.0 + r * h)).sum()
    }

    /// Whether `Phi' >= 0` on `[0, inf)`.
    ///
    /// With `y = exp(-t)` the derivative is `-sum k c_k y^k`, checked on a
    /// fine grid of `(0, 1]`.
    pub fn is_nondecreasing(&self) -> bool {
        match self {
            PhiSpec::One => true,
            PhiSpec::Exp { nu } => *nu <= 0.0,
            PhiSpec::PolyExp { coeffs } => (0..=4000).all(|i| {
                let y = i as f64 / 4000.0;
                let mut s = 0.0;
                let mut yp = 1.0;
                for (k, c) in coeffs.iter().enumerate().skip(1) {
                    yp = if k == 1 { y } else { yp * y };
                    s += k as f64 * c * yp;
                }
                s <= 1e-14
            }),
        }
    }

    /// Whether `Phi >= 0` on `[0, inf)` (grid check for sums).
    pub fn is_nonnegative(&self) -> bool {
        match self {
            PhiSpec::One | PhiSpec::Exp { .. } => true,
            PhiSpec::PolyExp { coeffs } => (0..=4000).all(|i| {
                let y = i as f64 / 4000.0;
                coeffs.iter().rev().fold(0.0, |acc, c| acc * y + c) >= -1e-14
            }),
        }
    }
}

impl fmt::Display for PhiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhiSpec::One => write!(f, "one"),
            PhiSpec::Exp { nu } => write!(f, "exp:nu={nu:?}"),
            PhiSpec::PolyExp { coeffs } => {
                let c: Vec<String> = coeffs.iter().map(|v| format!("{v:?}")).collect();
                write!(f, "polyexp:{}", c.join(","))
            }
        }
    }
}

/// Side length of the Flandrin box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BoxExtent {
    Finite(f64),
    Infinite,
}

impl BoxExtent {
    pub fn value(&self) -> f64 {
        match self {
            BoxExtent::Finite(a) => *a,
            BoxExtent::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for BoxExtent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoxExtent::Finite(a) => write!(f, "{a:?}"),
            BoxExtent::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SymbolFamily {
    Constant { c: f64 },
    /// `exp(-nu |a|^2 (x_1^2 + xi_1^2))`.
    Gaussian { nu: f64, a_norm: f64 },
    /// `Phi(sum_{j<=d} x_j^2 + xi_j^2)`.
    Radial { phi: PhiSpec, d: usize },
    /// Product of radial profiles over consecutive coordinate blocks.
    TensorRadial { parts: Vec<(PhiSpec, usize)> },
    /// `1_[0,a)(x_1) 1_[0, 2 pi h a)(xi_1)`.
    Box { a: BoxExtent },
}

/// A parsed symbol.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolDescriptor {
    pub family: SymbolFamily,
}

impl SymbolDescriptor {
    pub fn new(family: SymbolFamily) -> Result<Self> {
        validate(&family)?;
        Ok(Self { family })
    }

    pub fn constant(c: f64) -> Self {
        Self {
            family: SymbolFamily::Constant { c },
        }
    }

    pub fn gaussian(nu: f64, a_norm: f64) -> Result<Self> {
        Self::new(SymbolFamily::Gaussian { nu, a_norm })
    }

    pub fn radial(phi: PhiSpec, d: usize) -> Result<Self> {
        Self::new(SymbolFamily::Radial { phi, d })
    }

    pub fn tensor_radial(parts: Vec<(PhiSpec, usize)>) -> Result<Self> {
        Self::new(SymbolFamily::TensorRadial { parts })
    }

    pub fn boxed(a: BoxExtent) -> Result<Self> {
        Self::new(SymbolFamily::Box { a })
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_symbol(text)
    }

    pub fn d(&self) -> usize {
        match &self.family {
            SymbolFamily::Constant { .. } | SymbolFamily::Gaussian { .. } | SymbolFamily::Box { .. } => 1,
            SymbolFamily::Radial { d, .. } => *d,
            SymbolFamily::TensorRadial { parts } => parts.iter().map(|p| p.1).sum(),
        }
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self.family, SymbolFamily::Box { .. })
    }

    /// Smooth families all expand into sums of Gaussians.
    pub fn to_gauss_sum(&self) -> Option<GaussSum> {
        let d = self.d();
        match &self.family {
            SymbolFamily::Constant { c } => Some(GaussSum {
                dim: 1,
                terms: vec![GaussTerm {
                    coef: *c,
                    nus: vec![0.0],
                }],
            }),
            SymbolFamily::Gaussian { nu, a_norm } => Some(GaussSum {
                dim: 1,
                terms: vec![GaussTerm {
                    coef: 1.0,
                    nus: vec![nu * a_norm * a_norm],
                }],
            }),
            SymbolFamily::Radial { phi, d } => Some(GaussSum::radial_block(phi, *d)),
            SymbolFamily::TensorRadial { parts } => {
                let mut acc = GaussSum {
                    dim: 0,
                    terms: vec![GaussTerm {
                        coef: 1.0,
                        nus: vec![],
                    }],
                };
                for (phi, dj) in parts {
                    acc = acc.tensor(&GaussSum::radial_block(phi, *dj));
                }
                debug_assert_eq!(acc.dim, d);
                Some(acc)
            }
            SymbolFamily::Box { .. } => None,
        }
    }

    /// Every factor of a Flandrin box symbol is the indicator
    /// `1_[0,a)(x_1) 1_[0,2 pi h a)(xi_1)`.
    pub fn box_sides(&self, ctx: &CalcContext) -> Option<(f64, f64)> {
        match self.family {
            SymbolFamily::Box { a } => {
                let a = a.value();
                Some((a, 2.0 * std::f64::consts::PI * ctx.h() * a))
            }
            _ => None,
        }
    }
}

impl fmt::Display for SymbolDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            SymbolFamily::Constant { c } => write!(f, "const:c={c:?}"),
            SymbolFamily::Gaussian { nu, a_norm } => write!(f, "gaussian:nu={nu:?},anorm={a_norm:?}"),
            SymbolFamily::Radial { phi, d } => write!(f, "radial:phi={phi},d={d}"),
            SymbolFamily::TensorRadial { parts } => {
                let p: Vec<String> = parts.iter().map(|(phi, d)| format!("({phi},{d})")).collect();
                write!(f, "tensorradial:{}", p.join(";"))
            }
            SymbolFamily::Box { a } => write!(f, "box:a={a}"),
        }
    }
}

fn validate(family: &SymbolFamily) -> Result<()> {
    let finite = |name: &'static str, v: f64| {
        if v.is_finite() {
            Ok(())
        } else {
            Err(invalid(name, "must be finite"))
        }
    };
    let phi_ok = |phi: &PhiSpec| -> Result<()> {
        match phi {
            PhiSpec::One => Ok(()),
            PhiSpec::Exp { nu } => {
                finite("nu", *nu)?;
                if *nu <= 0.0 {
                    return Err(invalid("nu", format!("must be positive, got {nu}")));
                }
                Ok(())
            }
            PhiSpec::PolyExp { coeffs } => {
                if coeffs.is_empty() {
                    return Err(invalid("polyexp", "needs at least one coefficient"));
                }
                coeffs.iter().try_for_each(|c| finite("polyexp", *c))
            }
        }
    };
    match family {
        SymbolFamily::Constant { c } => finite("c", *c),
        SymbolFamily::Gaussian { nu, a_norm } => {
            finite("nu", *nu)?;
            finite("anorm", *a_norm)?;
            if *nu <= 0.0 {
                return Err(invalid("nu", format!("must be positive, got {nu}")));
            }
            if *a_norm <= 0.0 {
                return Err(invalid("anorm", format!("must be positive, got {a_norm}")));
            }
            Ok(())
        }
        SymbolFamily::Radial { phi, d } => {
            if *d < 1 {
                return Err(invalid("d", "must be at least 1"));
            }
            phi_ok(phi)
        }
        SymbolFamily::TensorRadial { parts } => {
            if parts.is_empty() {
                return Err(invalid("tensorradial", "needs at least one part"));
            }
            for (phi, d) in parts {
                if *d < 1 {
                    return Err(invalid("d", "must be at least 1"));
                }
                phi_ok(phi)?;
            }
            Ok(())
        }
        SymbolFamily::Box { a } => match a {
            BoxExtent::Infinite => Ok(()),
            BoxExtent::Finite(v) => {
                if !(v.is_finite() && *v > 0.0) {
                    return Err(invalid("a", format!("must be positive, got {v}")));
                }
                Ok(())
            }
        },
    }
}

/// One term `coef * prod_j exp(-nu_j (x_j^2 + xi_j^2))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussTerm {
    pub coef: f64,
    pub nus: Vec<f64>,
}

/// Finite sum of pair-radial Gaussians, closed under the heat semigroup.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussSum {
    pub dim: usize,
    pub terms: Vec<GaussTerm>,
}

impl GaussSum {
    fn radial_block(phi: &PhiSpec, d: usize) -> Self {
        Self {
            dim: d,
            terms: phi
                .exp_terms()
                .into_iter()
                .map(|(c, r)| GaussTerm {
                    coef: c,
                    nus: vec![r; d],
                })
                .collect(),
        }
    }

    fn tensor(&self, other: &GaussSum) -> GaussSum {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let mut nus = a.nus.clone();
                nus.extend_from_slice(&b.nus);
                terms.push(GaussTerm {
                    coef: a.coef * b.coef,
                    nus,
                });
            }
        }
        GaussSum {
            dim: self.dim + other.dim,
            terms,
        }
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let e: f64 = t
                    .nus
                    .iter()
                    .enumerate()
                    .map(|(j, nu)| nu * (x[j] * x[j] + xi[j] * xi[j]))
                    .sum();
                t.coef * (-e).exp()
            })
            .sum()
    }

    /// Heat of variance `t` on pair `j` (1-based): per term
    /// `nu -> nu / (1 + 2 nu t)` and amplitude `1 / (1 + 2 nu t)`.
    pub fn heat(&self, j: usize, t: f64) -> GaussSum {
        let mut out = self.clone();
        if j == 0 || j > self.dim || t == 0.0 {
            return out;
        }
        for term in &mut out.terms {
            let nu = term.nus[j - 1];
            let f = 1.0 + 2.0 * nu * t;
            term.coef /= f;
            term.nus[j - 1] = nu / f;
        }
        out
    }
}

/// Behaviour of `(x_j d/dxi_j - xi_j d/dx_j)` on a symbol.
pub enum RotationDerivative {
    /// The symbol is invariant under rotations of the pair.
    Zero,
    /// Explicit derivative.
    Symbol(Box<dyn PhaseSpaceSymbol>),
    /// No analytic derivative available.
    Unsupported,
}

/// Anything that can be quantized: a real profile on `R^{2d}`.
pub trait PhaseSpaceSymbol: Send + Sync {
    fn base_dim(&self) -> usize;

    /// Profile at `(x, xi)`, both of length `base_dim`.
    fn eval(&self, ctx: &CalcContext, x: &[f64], xi: &[f64]) -> f64;

    fn label(&self) -> String;

    /// Separable Gaussian expansion when available.
    fn gauss_sum(&self, _ctx: &CalcContext) -> Option<GaussSum> {
        None
    }

    /// Sides `(A, B)` when the symbol is `1_[0,A)(x_1) 1_[0,B)(xi_1)`.
    fn indicator_box(&self, _ctx: &CalcContext) -> Option<(f64, f64)> {
        None
    }

    fn is_smooth(&self) -> bool {
        true
    }

    fn rotation_derivative(&self, ctx: &CalcContext, _j: usize) -> RotationDerivative {
        if self.gauss_sum(ctx).is_some() {
            RotationDerivative::Zero
        } else {
            RotationDerivative::Unsupported
        }
    }
}

impl PhaseSpaceSymbol for SymbolDescriptor {
    fn base_dim(&self) -> usize {
        self.d()
    }

    fn eval(&self, ctx: &CalcContext, x: &[f64], xi: &[f64]) -> f64 {
        match &self.family {
            SymbolFamily::Box { .. } => {
                let (a, b) = self.box_sides(ctx).unwrap();
                if (0.0..a).contains(&x[0]) && (0.0..b).contains(&xi[0]) {
                    1.0
                } else {
                    0.0
                }
            }
            SymbolFamily::Radial { phi, d } => {
                let t: f64 = (0..*d).map(|j| x[j] * x[j] + xi[j] * xi[j]).sum();
                phi.eval(t)
            }
            SymbolFamily::TensorRadial { parts } => {
                let mut off = 0;
                let mut prod = 1.0;
                for (phi, dj) in parts {
                    let t: f64 = (off..off + dj).map(|j| x[j] * x[j] + xi[j] * xi[j]).sum();
                    prod *= phi.eval(t);
                    off += dj;
                }
                prod
            }
            _ => self.to_gauss_sum().unwrap().eval(x, xi),
        }
    }

    fn label(&self) -> String {
        self.to_string()
    }

    fn gauss_sum(&self, _ctx: &CalcContext) -> Option<GaussSum> {
        self.to_gauss_sum()
    }

    fn indicator_box(&self, ctx: &CalcContext) -> Option<(f64, f64)> {
        self.box_sides(ctx)
    }

    fn is_smooth(&self) -> bool {
        SymbolDescriptor::is_smooth(self)
    }
}

impl PhaseSpaceSymbol for GaussSum {
    fn base_dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, _ctx: &CalcContext, x: &[f64], xi: &[f64]) -> f64 {
        GaussSum::eval(self, x, xi)
    }

    fn label(&self) -> String {
        format!("gauss-sum({} terms, d={})", self.terms.len(), self.dim)
    }

    fn gauss_sum(&self, _ctx: &CalcContext) -> Option<GaussSum> {
        Some(self.clone())
    }
}

/// Evaluates the profile after checking dimensions.
pub fn eval_ddot(sym: &dyn PhaseSpaceSymbol, ctx: &CalcContext, x: &[f64], xi: &[f64]) -> Result<f64> {
    let d = sym.base_dim();
    for v in [x.len(), xi.len()] {
        if v != d {
            return Err(Error::DimensionMismatch { expected: d, got: v });
        }
    }
    Ok(sym.eval(ctx, x, xi))
}

/// Polynomial in `(x_1..x_d, xi_1..xi_d)`; exponents stored as
/// `[x_1..x_d, xi_1..xi_d]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolySymbol {
    pub dim: usize,
    pub terms: Vec<(f64, Vec<u32>)>,
}

impl PolySymbol {
    pub fn new(dim: usize, terms: Vec<(f64, Vec<u32>)>) -> Result<Self> {
        for (_, e) in &terms {
            if e.len() != 2 * dim {
                return Err(Error::DimensionMismatch {
                    expected: 2 * dim,
                    got: e.len(),
                });
            }
        }
        Ok(Self { dim, terms }.normalized())
    }

    fn normalized(mut self) -> Self {
        self.terms.sort_by(|a, b| a.1.cmp(&b.1));
        let mut out: Vec<(f64, Vec<u32>)> = Vec::new();
        for (c, e) in self.terms {
            match out.last_mut() {
                Some(last) if last.1 == e => last.0 += c,
                _ => out.push((c, e)),
            }
        }
        out.retain(|t| t.0 != 0.0);
        Self {
            dim: self.dim,
            terms: out,
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.1.iter().sum::<u32>()).max().unwrap_or(0)
    }

    /// `(x_j d/dxi_j - xi_j d/dx_j) P` for the 1-based pair `j`.
    pub fn rotate(&self, j: usize) -> PolySymbol {
        let d = self.dim;
        let (ix, iq) = (j - 1, d + j - 1);
        let mut terms = Vec::new();
        for (c, e) in &self.terms {
            if e[iq] > 0 {
                let mut n = e.clone();
                n[iq] -= 1;
                n[ix] += 1;
                terms.push((c * e[iq] as f64, n));
            }
            if e[ix] > 0 {
                let mut n = e.clone();
                n[ix] -= 1;
                n[iq] += 1;
                terms.push((-c * e[ix] as f64, n));
            }
        }
        PolySymbol { dim: d, terms }.normalized()
    }

    pub fn eval_point(&self, x: &[f64], xi: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| {
                let mut v = *c;
                for j in 0..self.dim {
                    v *= x[j].powi(e[j] as i32) * xi[j].powi(e[self.dim + j] as i32);
                }
                v
            })
            .sum()
    }
}

impl PhaseSpaceSymbol for PolySymbol {
    fn base_dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, _ctx: &CalcContext, x: &[f64], xi: &[f64]) -> f64 {
        self.eval_point(x, xi)
    }

    fn label(&self) -> String {
        format!("polynomial(degree {}, d={})", self.degree(), self.dim)
    }

    fn rotation_derivative(&self, _ctx: &CalcContext, j: usize) -> RotationDerivative {
        let r = self.rotate(j);
        if r.terms.is_empty() {
            RotationDerivative::Zero
        } else {
            RotationDerivative::Symbol(Box::new(r))
        }
    }
}

/// Symbol backed by a closure.
pub struct FnSymbol<F> {
    pub dim: usize,
    pub f: F,
    pub name: String,
}

impl<F> PhaseSpaceSymbol for FnSymbol<F>
where
    F: Fn(&[f64], &[f64]) -> f64 + Send + Sync,
{
    fn base_dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, _ctx: &CalcContext, x: &[f64], xi: &[f64]) -> f64 {
        (self.f)(x, xi)
    }

    fn label(&self) -> String {
        self.name.clone()
    }
}

// ---------------------------------------------------------------- parsing

struct Cursor<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err<T>(&self, at: usize, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            column: at + 1,
            message: msg.into(),
        })
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn starts_with(&self, lit: &str) -> bool {
        self.s[self.pos..].starts_with(lit.as_bytes())
    }

    fn expect(&mut self, lit: &str) -> Result<()> {
        if self.starts_with(lit) {
            self.pos += lit.len();
            Ok(())
        } else {
            self.err(self.pos, format!("expected `{lit}`"))
        }
    }

    fn number(&mut self) -> Result<(f64, usize)> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || matches!(c, b'.' | b'+' | b'-' | b'e' | b'E') {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() && !text.is_empty() => Ok((v, start)),
            _ => {
                self.pos = start;
                self.err(start, "expected a number")
            }
        }
    }

    fn unsigned(&mut self) -> Result<(usize, usize)> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
        match text.parse::<usize>() {
            Ok(v) => Ok((v, start)),
            Err(_) => self.err(start, "expected a non-negative integer"),
        }
    }

    fn at_number(&self) -> bool {
        matches!(self.peek(), Some(c) if c.is_ascii_digit() || matches!(c, b'.' | b'+' | b'-'))
    }

    fn phi(&mut self, in_tuple: bool) -> Result<PhiSpec> {
        if self.starts_with("one") {
            self.pos += 3;
            return Ok(PhiSpec::One);
        }
        if self.starts_with("exp:") {
            self.pos += 4;
            self.expect("nu=")?;
            let (nu, at) = self.number()?;
            if nu <= 0.0 {
                return self.err(at, format!("nu must be positive, got {nu}"));
            }
            return Ok(PhiSpec::Exp { nu });
        }
        if self.starts_with("polyexp:") {
            self.pos += 8;
            let mut coeffs = vec![self.number()?.0];
            // Inside a tensor part the final number is the block dimension,
            // so stop before the last comma-separated entry.
            loop {
                if self.peek() != Some(b',') {
                    break;
                }
                let save = self.pos;
                self.pos += 1;
                if !self.at_number() {
                    self.pos = save;
                    break;
                }
                let (v, _) = self.number()?;
                if in_tuple && self.peek() == Some(b')') {
                    self.pos = save;
                    break;
                }
                coeffs.push(v);
            }
            return Ok(PhiSpec::PolyExp { coeffs });
        }
        self.err(self.pos, "expected `one`, `exp:` or `polyexp:`")
    }
}

/// Parses the symbol syntax
/// `const:c=<r>`, `gaussian:nu=<r>,anorm=<r>`, `radial:phi=<phi>,d=<n>`,
/// `tensorradial:(<phi>,<n>);(<phi>,<n>)...` and `box:a=<r>|inf`, where
/// `<phi>` is `one`, `exp:nu=<r>` or `polyexp:c0,c1,...`.
pub fn parse_symbol(text: &str) -> Result<SymbolDescriptor> {
    let mut c = Cursor {
        s: text.as_bytes(),
        pos: 0,
    };
    let family = if c.starts_with("const:") {
        c.pos += 6;
        c.expect("c=")?;
        SymbolFamily::Constant { c: c.number()?.0 }
    } else if c.starts_with("gaussian:") {
        c.pos += 9;
        c.expect("nu=")?;
        let (nu, at_nu) = c.number()?;
        c.expect(",anorm=")?;
        let (a_norm, at_a) = c.number()?;
        if nu <= 0.0 {
            return c.err(at_nu, format!("nu must be positive, got {nu}"));
        }
        if a_norm <= 0.0 {
            return c.err(at_a, format!("anorm must be positive, got {a_norm}"));
        }
        SymbolFamily::Gaussian { nu, a_norm }
    } else if c.starts_with("radial:") {
        c.pos += 7;
        c.expect("phi=")?;
        let phi = c.phi(false)?;
        c.expect(",d=")?;
        let (d, at) = c.unsigned()?;
        if d < 1 {
            return c.err(at, "d must be at least 1");
        }
        SymbolFamily::Radial { phi, d }
    } else if c.starts_with("tensorradial:") {
        c.pos += 13;
        let mut parts = Vec::new();
        loop {
            c.expect("(")?;
            let phi = c.phi(true)?;
            c.expect(",")?;
            let (d, at) = c.unsigned()?;
            if d < 1 {
                return c.err(at, "d must be at least 1");
            }
            c.expect(")")?;
            parts.push((phi, d));
            if c.peek() == Some(b';') {
                c.pos += 1;
            } else {
                break;
            }
        }
        SymbolFamily::TensorRadial { parts }
    } else if c.starts_with("box:") {
        c.pos += 4;
        c.expect("a=")?;
        if c.starts_with("inf") {
            c.pos += 3;
            SymbolFamily::Box { a: BoxExtent::Infinite }
        } else {
            let (a, at) = c.number()?;
            if a <= 0.0 {
                return c.err(at, format!("a must be positive, got {a}"));
            }
            SymbolFamily::Box {
                a: BoxExtent::Finite(a),
            }
        }
    } else {
        return c.err(0, "unknown symbol family");
    };
    if c.pos != text.len() {
        return c.err(c.pos, "unexpected trailing input");
    }
    SymbolDescriptor::new(family)
}

// ------------------------------------------------------------ class norms

/// Weight sequence `j -> eps_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum EpsilonSeq {
    Zero,
    /// `eps_j = j^{-2}`.
    InverseSquare,
    /// `eps_j = ratio^j`.
    Geometric { ratio: f64 },
    /// Finitely supported.
    Explicit(Vec<f64>),
}

impl EpsilonSeq {
    pub fn value(&self, j: usize) -> f64 {
        match self {
            EpsilonSeq::Zero => 0.0,
            EpsilonSeq::InverseSquare => 1.0 / (j as f64 * j as f64),
            EpsilonSeq::Geometric { ratio } => ratio.powi(j as i32),
            EpsilonSeq::Explicit(v) => v.get(j - 1).copied().unwrap_or(0.0),
        }
    }

    pub fn summable(&self) -> bool {
        match self {
            EpsilonSeq::Geometric { ratio } => ratio.abs() < 1.0,
            _ => true,
        }
    }

    pub fn square_summable(&self) -> bool {
        self.summable()
    }

    pub fn describe(&self) -> String {
        match self {
            EpsilonSeq::Zero => "zero".into(),
            EpsilonSeq::InverseSquare => "j^-2".into(),
            EpsilonSeq::Geometric { ratio } => format!("{ratio:?}^j"),
            EpsilonSeq::Explicit(v) => format!("explicit({} entries)", v.len()),
        }
    }
}

/// `eps_j = max(sqrt(Q(e_j, 0)), sqrt(Q(0, e_j)))`.
pub fn epsilon_from_quadratic_form(diag: &[(f64, f64)]) -> Result<EpsilonSeq> {
    let mut out = Vec::with_capacity(diag.len());
    for (j, &(a, b)) in diag.iter().enumerate() {
        if !(a >= 0.0 && b >= 0.0) {
            return Err(invalid(
                "diag",
                format!("entry {} is negative or not a number", j + 1),
            ));
        }
        out.push(a.sqrt().max(b.sqrt()));
    }
    if out.iter().all(|v| *v == 0.0) {
        return Ok(EpsilonSeq::Zero);
    }
    Ok(EpsilonSeq::Explicit(out))
}

/// Sup norm bound of one mixed derivative.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeBound {
    pub alpha: Vec<u32>,
    pub beta: Vec<u32>,
    pub sup: f64,
    pub weighted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolClassParams {
    pub eps: EpsilonSeq,
    pub m: u32,
    pub class_norm: f64,
    pub method: String,
    pub summable: bool,
    pub square_summable: bool,
    pub bounds: Vec<DerivativeBound>,
}

/// `sup_y |H_k(y) exp(-y^2)|` (physicists' Hermite), i.e. the sup of the
/// `k`-th derivative of `exp(-y^2)`.
pub fn gaussian_derivative_sup(k: u32) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let f = |y: f64| {
        let mut hm = 1.0;
        let mut h = 2.0 * y;
        for n in 1..k {
            let next = 2.0 * y * h - 2.0 * n as f64 * hm;
            hm = h;
            h = next;
        }
        (h * (-y * y).exp()).abs()
    };
    let ymax = 2.0 * (k as f64).sqrt() + 6.0;
    let steps = 20_000;
    let dy = ymax / steps as f64;
    let mut best = (0.0, 0.0);
    for i in 0..=steps {
        let y = i as f64 * dy;
        let v = f(y);
        if v > best.1 {
            best = (y, v);
        }
    }
    // golden-section refinement around the grid maximum
    let (mut lo, mut hi) = ((best.0 - dy).max(0.0), best.0 + dy);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if f(a) > f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    f(0.5 * (lo + hi)).max(best.1)
}

fn multi_indices(d: usize, m: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        let mut next = Vec::new();
        for v in &out {
            for a in 0..=m {
                let mut w = v.clone();
                w.push(a);
                next.push(w);
            }
        }
        out = next;
    }
    out
}

/// Class parameters in `S_m` with `eps_j = j^{-2}`:
/// `M = sup_{alpha, beta} prod_j j^{2(alpha_j + beta_j)} sup |d^alpha_x d^beta_xi F|`
/// over depth-`m` multi-indices on the base coordinates.
///
/// Gaussian sums are bounded analytically term by term; other smooth
/// symbols use finite differences on a grid with a 20% margin.
pub fn cv_class_params(sym: &dyn PhaseSpaceSymbol, ctx: &CalcContext, m: u32) -> Result<SymbolClassParams> {
    if !sym.is_smooth() {
        return Err(Error::Unsupported(format!(
            "{} is not in any S_m class (not continuous)",
            sym.label()
        )));
    }
    let d = sym.base_dim();
    if d > 4 {
        return Err(Error::Unsupported("class norm limited to d <= 4".into()));
    }
    let idx = multi_indices(d, m);
    let gs = sym.gauss_sum(ctx);
    let method = if gs.is_some() { "analytic" } else { "finite-difference" };
    let mut bounds = Vec::new();
    let mut class_norm: f64 = 0.0;
    let dsup: Vec<f64> = (0..=m).map(gaussian_derivative_sup).collect();
    for alpha in &idx {
        for beta in &idx {
            let sup = match &gs {
                Some(gs) => {
                    let mut total = 0.0;
                    for t in &gs.terms {
                        let mut p = t.coef.abs();
                        for j in 0..d {
                            let nu = t.nus[j];
                            for k in [alpha[j], beta[j]] {
                                if k == 0 {
                                    continue;
                                }
                                p *= if nu == 0.0 {
                                    0.0
                                } else {
                                    nu.powf(k as f64 / 2.0) * dsup[k as usize]
                                };
                            }
                        }
                        total += p;
                    }
                    total * (1.0 + 1e-9)
                }
                None => 1.2 * fd_sup(sym, ctx, alpha, beta)?,
            };
            let mut w = 1.0;
            for j in 0..d {
                w *= ((j + 1) as f64).powi(2 * (alpha[j] + beta[j]) as i32);
            }
            class_norm = class_norm.max(w * sup);
            bounds.push(DerivativeBound {
                alpha: alpha.clone(),
                beta: beta.clone(),
                sup,
                weighted: w * sup,
            });
        }
    }
    let eps = EpsilonSeq::InverseSquare;
    Ok(SymbolClassParams {
        summable: eps.summable(),
        square_summable: eps.square_summable(),
        eps,
        m,
        class_norm,
        method: method.into(),
        bounds,
    })
}

const FD_STEP: f64 = 1e-2;

/// Mixed partial derivative by tensor central differences.
pub fn fd_derivative(
    sym: &dyn PhaseSpaceSymbol,
    ctx: &CalcContext,
    alpha: &[u32],
    beta: &[u32],
    x: &[f64],
    xi: &[f64],
) -> f64 {
    let d = x.len();
    // stencil per variable: order 0, 1 or 2
    let stencil = |k: u32| -> Vec<(f64, f64)> {
        match k {
            0 => vec![(0.0, 1.0)],
            1 => vec![(-1.0, -0.5 / FD_STEP), (1.0, 0.5 / FD_STEP)],
            _ => vec![
                (-1.0, 1.0 / (FD_STEP * FD_STEP)),
                (0.0, -2.0 / (FD_STEP * FD_STEP)),
                (1.0, 1.0 / (FD_STEP * FD_STEP)),
            ],
        }
    };
    let orders: Vec<u32> = alpha.iter().chain(beta.iter()).copied().collect();
    let stencils: Vec<Vec<(f64, f64)>> = orders.iter().map(|&k| stencil(k)).collect();
    let mut idx = vec![0usize; 2 * d];
    let mut px = x.to_vec();
    let mut pq = xi.to_vec();
    let mut sum = 0.0;
    loop {
        let mut w = 1.0;
        for v in 0..2 * d {
            let (off, c) = stencils[v][idx[v]];
            w *= c;
            if v < d {
                px[v] = x[v] + off * FD_STEP;
            } else {
                pq[v - d] = xi[v - d] + off * FD_STEP;
            }
        }
        sum += w * sym.eval(ctx, &px, &pq);
        let mut v = 0;
        loop {
            if v == 2 * d {
                return sum;
            }
            idx[v] += 1;
            if idx[v] < stencils[v].len() {
                break;
            }
            idx[v] = 0;
            v += 1;
        }
    }
}

fn fd_sup(sym: &dyn PhaseSpaceSymbol, ctx: &CalcContext, alpha: &[u32], beta: &[u32]) -> Result<f64> {
    if alpha.iter().chain(beta).any(|&k| k > 2) {
        return Err(Error::Unsupported(
            "finite-difference class norm limited to depth 2".into(),
        ));
    }
    let d = alpha.len();
    let pts_per_axis: usize = match d {
        1 => 81,
        2 => 15,
        _ => 7,
    };
    let half = 4.0 * ctx.h().sqrt().max(1.0);
    let axis: Vec<f64> = (0..pts_per_axis)
        .map(|i| -half + 2.0 * half * i as f64 / (pts_per_axis - 1) as f64)
        .collect();
    let total = pts_per_axis.pow(2 * d as u32);
    let mut best: f64 = 0.0;
    let mut x = vec![0.0; d];
    let mut xi = vec![0.0; d];
    for mut n in 0..total {
        for v in 0..2 * d {
            let c = axis[n % pts_per_axis];
            n /= pts_per_axis;
            if v < d {
                x[v] = c;
            } else {
                xi[v - d] = c;
            }
        }
        best = best.max(fd_derivative(sym, ctx, alpha, beta, &x, &xi).abs());
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_examples() {
        let s = parse_symbol("gaussian:nu=2.0,anorm=1.0").unwrap();
        assert_eq!(s.d(), 1);
        let r = parse_symbol("radial:phi=exp:nu=1.0,d=2").unwrap();
        assert_eq!(
            r.family,
            SymbolFamily::Radial {
                phi: PhiSpec::Exp { nu: 1.0 },
                d: 2
            }
        );
        match parse_symbol("box:a=oops") {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 7),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn domain_errors_name_parameter() {
        let e = parse_symbol("gaussian:nu=-1,anorm=1").unwrap_err().to_string();
        assert!(e.contains("nu"), "{e}");
        let e = parse_symbol("radial:phi=one,d=0").unwrap_err().to_string();
        assert!(e.contains('d'), "{e}");
        let e = parse_symbol("box:a=0").unwrap_err().to_string();
        assert!(e.contains("a must be positive"), "{e}");
    }

    #[test]
    fn polyexp_inside_tensor() {
        let s = parse_symbol("tensorradial:(polyexp:1,-1,0.5,2);(one,1)").unwrap();
        assert_eq!(
            s.family,
            SymbolFamily::TensorRadial {
                parts: vec![
                    (
                        PhiSpec::PolyExp {
                            coeffs: vec![1.0, -1.0, 0.5]
                        },
                        2
                    ),
                    (PhiSpec::One, 1)
                ]
            }
        );
        assert_eq!(s.d(), 3);
        let p = parse_symbol("radial:phi=polyexp:1,-1,d=1").unwrap();
        assert_eq!(
            p.family,
            SymbolFamily::Radial {
                phi: PhiSpec::PolyExp {
                    coeffs: vec![1.0, -1.0]
                },
                d: 1
            }
        );
    }

    #[test]
    fn derivative_sups() {
        assert!((gaussian_derivative_sup(1) - 2f64.sqrt() * (-0.5f64).exp()).abs() < 1e-12);
        assert!((gaussian_derivative_sup(2) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon_from_quadratic_form(&[(0.0, 0.0); 3]).unwrap(), EpsilonSeq::Zero);
        let e = epsilon_from_quadratic_form(&[(4.0, 9.0)]).unwrap();
        assert_eq!(e.value(1), 3.0);
        let diag: Vec<(f64, f64)> = (1..=5).map(|j| ((j as f64).powi(-4), 0.0)).collect();
        let e = epsilon_from_quadratic_form(&diag).unwrap();
        for j in 1..=5 {
            assert!((e.value(j) - (j as f64).powi(-2)).abs() < 1e-15);
        }
        assert!(epsilon_from_quadratic_form(&[(-1.0, 0.0)]).is_err());
    }

    #[test]
    fn poly_rotation() {
        // L x = -xi, L xi = x, L (x^2 + xi^2) = 0
        let p = PolySymbol::new(1, vec![(1.0, vec![2, 0]), (1.0, vec![0, 2])]).unwrap();
        assert!(p.rotate(1).terms.is_empty());
        let x = PolySymbol::new(1, vec![(1.0, vec![1, 0])]).unwrap();
        assert_eq!(x.rotate(1).terms, vec![(-1.0, vec![0, 1])]);
    }
}
