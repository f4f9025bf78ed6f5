//! Partial heat operators on symbol pairs, the `T_J / S_J` algebra, and
//! anti-Wick and hybrid quadratic forms.

use num_complex::Complex64 as C64;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::basis::CalcContext;
use crate::error::{invalid, Error, Result};
use crate::gaussian::gh_rule;
use crate::quadform::{quadratic_form, HermiteExpansion};
use crate::symbols::{GaussSum, PhaseSpaceSymbol, SymbolDescriptor};

/// Largest `|J|` accepted by [`ts_operators`].
pub const MAX_TS_PAIRS: usize = 16;

/// A symbol with Gaussian smoothing of variance `heat[j-1]` applied
/// jointly to the pair `(x_j, xi_j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatedSymbol {
    pub base: SymbolDescriptor,
    pub heat: Vec<f64>,
}

impl From<SymbolDescriptor> for HeatedSymbol {
    fn from(base: SymbolDescriptor) -> Self {
        let d = base.d();
        Self {
            base,
            heat: vec![0.0; d],
        }
    }
}

fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

// P(0 <= x + sqrt(t) Z < a)
fn heated_interval(x: f64, a: f64, t: f64) -> f64 {
    if t == 0.0 {
        return if (0.0..a).contains(&x) { 1.0 } else { 0.0 };
    }
    let s = t.sqrt();
    let upper = if a.is_finite() { norm_cdf((a - x) / s) } else { 1.0 };
    (upper - norm_cdf(-x / s)).max(0.0)
}

impl HeatedSymbol {
    pub fn heated_pairs(&self) -> Vec<usize> {
        self.heat
            .iter()
            .enumerate()
            .filter(|(_, t)| **t > 0.0)
            .map(|(j, _)| j + 1)
            .collect()
    }

    /// Convolution by tensor Gauss-Hermite quadrature over the heated
    /// pairs, ignoring closed forms. `order` nodes per axis.
    pub fn eval_by_quadrature(&self, ctx: &CalcContext, x: &[f64], xi: &[f64], order: usize) -> Result<f64> {
        let pairs = self.heated_pairs();
        if pairs.len() > 3 {
            return Err(Error::Unsupported("quadrature heat limited to 3 pairs".into()));
        }
        let rules: Vec<_> = pairs
            .iter()
            .map(|&j| gh_rule(order, self.heat[j - 1]))
            .collect::<Result<_>>()?;
        let m = 2 * pairs.len();
        let mut idx = vec![0usize; m];
        let mut px = x.to_vec();
        let mut pq = xi.to_vec();
        let mut sum = 0.0;
        loop {
            let mut w = 1.0;
            for (p, &j) in pairs.iter().enumerate() {
                let r = &rules[p];
                px[j - 1] = x[j - 1] + r.nodes[idx[2 * p]];
                pq[j - 1] = xi[j - 1] + r.nodes[idx[2 * p + 1]];
                w *= r.weights[idx[2 * p]] * r.weights[idx[2 * p + 1]];
            }
            sum += w * self.base.eval(ctx, &px, &pq);
            let mut v = 0;
            loop {
                if v == m {
                    return Ok(sum);
                }
                idx[v] += 1;
                if idx[v] < order {
                    break;
                }
                idx[v] = 0;
                v += 1;
            }
        }
    }
}

impl PhaseSpaceSymbol for HeatedSymbol {
    fn base_dim(&self) -> usize {
        self.base.d()
    }

    fn eval(&self, ctx: &CalcContext, x: &[f64], xi: &[f64]) -> f64 {
        if let Some(gs) = self.gauss_sum(ctx) {
            return gs.eval(x, xi);
        }
        if let Some((a, b)) = self.base.box_sides(ctx) {
            let t = self.heat[0];
            return heated_interval(x[0], a, t) * heated_interval(xi[0], b, t);
        }
        unreachable!("every symbol family has a closed-form heat")
    }

    fn label(&self) -> String {
        if self.heat.iter().all(|t| *t == 0.0) {
            return self.base.to_string();
        }
        let h: Vec<String> = self.heat.iter().map(|t| format!("{t:?}")).collect();
        format!("heat[{}]({})", h.join(","), self.base)
    }

    fn gauss_sum(&self, _ctx: &CalcContext) -> Option<GaussSum> {
        let mut gs = self.base.to_gauss_sum()?;
        for (j, t) in self.heat.iter().enumerate() {
            gs = gs.heat(j + 1, *t);
        }
        Some(gs)
    }

    fn indicator_box(&self, ctx: &CalcContext) -> Option<(f64, f64)> {
        if self.heat.iter().all(|t| *t == 0.0) {
            self.base.box_sides(ctx)
        } else {
            None
        }
    }

    fn is_smooth(&self) -> bool {
        self.base.is_smooth() || self.heat[0] > 0.0
    }
}

fn check_pairs(pairs: &[usize], d: usize) -> Result<()> {
    for &j in pairs {
        if j == 0 || j > d {
            return Err(Error::SupportExceedsDim { index: j, dim: d });
        }
    }
    Ok(())
}

/// Heat of variance `t` on every pair in `pairs`.
pub fn heat_apply(sym: &HeatedSymbol, pairs: &[usize], t: f64) -> Result<HeatedSymbol> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("t", "must be finite and non-negative"));
    }
    check_pairs(pairs, sym.base.d())?;
    let mut out = sym.clone();
    let mut seen = pairs.to_vec();
    seen.sort_unstable();
    seen.dedup();
    for j in seen {
        out.heat[j - 1] += t;
    }
    Ok(out)
}

/// One signed term of an operator expansion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignedTerm {
    pub sign: f64,
    pub symbol: HeatedSymbol,
}

/// `T_J S_{Lambda \ J} F` with `T_J = prod_{j in J} (I - H_j)` and
/// `S = prod H_j` (heat `h/2`), expanded as
/// `sum_{K subset J} (-1)^{|K|} H_{K u (Lambda \ J)} F`.
pub fn ts_operators(sym: &HeatedSymbol, j_set: &[usize], lambda: &[usize], ctx: &CalcContext) -> Result<Vec<SignedTerm>> {
    if j_set.len() > MAX_TS_PAIRS {
        return Err(invalid("J", format!("at most {MAX_TS_PAIRS} pairs")));
    }
    check_pairs(lambda, sym.base.d())?;
    if let Some(j) = j_set.iter().find(|j| !lambda.contains(j)) {
        return Err(invalid("J", format!("pair {j} is not in Lambda")));
    }
    let t = ctx.variance();
    let rest: Vec<usize> = lambda.iter().copied().filter(|j| !j_set.contains(j)).collect();
    let base = heat_apply(sym, &rest, t)?;
    let mut out = Vec::with_capacity(1 << j_set.len());
    for mask in 0u32..(1u32 << j_set.len()) {
        let k: Vec<usize> = j_set
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, j)| *j)
            .collect();
        let sign = if k.len() % 2 == 0 { 1.0 } else { -1.0 };
        out.push(SignedTerm {
            sign,
            symbol: heat_apply(&base, &k, t)?,
        });
    }
    Ok(out)
}

/// `max_grid |F - sum_{J subset Lambda} T_J S_{Lambda \ J} F|`.
pub fn decomposition_residual(
    sym: &HeatedSymbol,
    lambda: &[usize],
    ctx: &CalcContext,
    grid: &[(Vec<f64>, Vec<f64>)],
) -> Result<f64> {
    let mut terms = Vec::new();
    for mask in 0u32..(1u32 << lambda.len()) {
        let j: Vec<usize> = lambda
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, j)| *j)
            .collect();
        terms.extend(ts_operators(sym, &j, lambda, ctx)?);
    }
    let d = sym.base.d();
    let mut worst: f64 = 0.0;
    for (x, xi) in grid {
        if x.len() != d || xi.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x.len().min(xi.len()),
            });
        }
        let total: f64 = terms.iter().map(|t| t.sign * t.symbol.eval(ctx, x, xi)).sum();
        worst = worst.max((sym.eval(ctx, x, xi) - total).abs());
    }
    Ok(worst)
}

/// Value of `T_J S_{Lambda \ J} F` at a point by nested numerical heat,
/// one pair at a time, with `order` Gauss-Hermite nodes per axis.
pub fn ts_numeric(
    sym: &dyn PhaseSpaceSymbol,
    j_set: &[usize],
    lambda: &[usize],
    ctx: &CalcContext,
    x: &[f64],
    xi: &[f64],
    order: usize,
) -> Result<f64> {
    let rule = gh_rule(order, ctx.variance())?;
    let ops: Vec<(usize, bool)> = lambda.iter().map(|j| (*j, j_set.contains(j))).collect();
    fn go(
        sym: &dyn PhaseSpaceSymbol,
        ops: &[(usize, bool)],
        ctx: &CalcContext,
        rule: &crate::gaussian::QuadratureRule,
        x: &mut Vec<f64>,
        xi: &mut Vec<f64>,
    ) -> f64 {
        let Some((&(j, minus), rest)) = ops.split_first() else {
            return sym.eval(ctx, x, xi);
        };
        let (x0, q0) = (x[j - 1], xi[j - 1]);
        let mut heated = 0.0;
        for (a, wa) in rule.nodes.iter().zip(&rule.weights) {
            for (b, wb) in rule.nodes.iter().zip(&rule.weights) {
                x[j - 1] = x0 + a;
                xi[j - 1] = q0 + b;
                heated += wa * wb * go(sym, rest, ctx, rule, x, xi);
            }
        }
        x[j - 1] = x0;
        xi[j - 1] = q0;
        if minus {
            go(sym, rest, ctx, rule, x, xi) - heated
        } else {
            heated
        }
    }
    Ok(go(sym, &ops, ctx, &rule, &mut x.to_vec(), &mut xi.to_vec()))
}

/// Anti-Wick form: the Weyl form of the symbol heated by `h/2` on every
/// pair.
pub fn antiwick_form(sym: &HeatedSymbol, f: &HermiteExpansion, g: &HermiteExpansion, ctx: &CalcContext) -> Result<C64> {
    hybrid_form(sym, &[], f, g, ctx)
}

/// Weyl form in the pairs of `e_pairs`, anti-Wick in the others.
pub fn hybrid_form(
    sym: &HeatedSymbol,
    e_pairs: &[usize],
    f: &HermiteExpansion,
    g: &HermiteExpansion,
    ctx: &CalcContext,
) -> Result<C64> {
    let d = sym.base.d();
    check_pairs(e_pairs, d)?;
    let rest: Vec<usize> = (1..=d).filter(|j| !e_pairs.contains(j)).collect();
    let heated = heat_apply(sym, &rest, ctx.variance())?;
    quadratic_form(&heated, f, g, ctx)
}
