use clap::Args;
use gaussweyl::heat::{antiwick_form, decomposition_residual, ts_numeric, ts_operators, HeatedSymbol};
use gaussweyl::positivity::{
    flandrin_h_dependence, flandrin_reduction_check, flandrin_search, garding_verify, nonpos_witness,
    radial_positivity_check,
};
use gaussweyl::quadform::assemble_matrix;
use gaussweyl::report::{matrix_rows, write_rows_csv, ContractStatus};
use gaussweyl::stochproj::{
    conv_table, cylinder_extension_check, exact_conv_rate, DirectionVector, FrameFamily,
};
use gaussweyl::symbols::{BoxExtent, PhaseSpaceSymbol};
use gaussweyl::wigner::{wigner_closed, wigner_quadrature};
use gaussweyl::{CalcContext, HermiteExpansion, MultiIndex, SymbolDescriptor, TruncationSet, C64};
use serde::Serialize;

use crate::{Common, Failure, Output};

type Res = Result<Output, Failure>;

fn context(c: &Common) -> Result<CalcContext, Failure> {
    Ok(CalcContext::new(c.h)?)
}

fn symbol(c: &Common) -> Result<SymbolDescriptor, Failure> {
    match &c.symbol {
        Some(s) => Ok(SymbolDescriptor::parse(s)?),
        None => Err(Failure::Usage("--symbol is required for this command".into())),
    }
}

fn dims(c: &Common, sym: &SymbolDescriptor) -> Result<usize, Failure> {
    match c.d {
        Some(d) if d < sym.d() => Err(Failure::Usage(format!(
            "--d {d} is smaller than the symbol dimension {}",
            sym.d()
        ))),
        Some(d) => Ok(d),
        None => Ok(sym.d()),
    }
}

fn csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    write_rows_csv(&mut buf, rows)?;
    Ok(buf)
}

fn json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn output<T: Serialize>(reference: &'static str, results: serde_json::Value, rows: &[T]) -> Res {
    Ok(Output {
        reference,
        results,
        csv: csv(rows)?,
        quadrature: Vec::new(),
        contract: ContractStatus::passed(),
    })
}

#[derive(Args, Debug, Clone)]
pub struct WignerArgs {
    #[arg(long, default_value_t = 0)]
    pub j: usize,
    #[arg(long, default_value_t = 0)]
    pub k: usize,
    /// Points per axis
    #[arg(long, default_value_t = 5)]
    pub grid: usize,
    /// Grid covers [-range, range]^2
    #[arg(long, default_value_t = 2.0)]
    pub range: f64,
    /// Also integrate the Wigner function numerically
    #[arg(long)]
    pub check: bool,
}

#[derive(Serialize)]
struct WignerRow {
    x: f64,
    xi: f64,
    re: f64,
    im: f64,
    quad_re: Option<f64>,
    quad_im: Option<f64>,
    quad_order: Option<usize>,
}

pub fn wigner(c: &Common, a: &WignerArgs) -> Res {
    let ctx = context(c)?;
    if a.grid < 1 || !(a.range >= 0.0 && a.range.is_finite()) {
        return Err(Failure::Usage("--grid must be >= 1 and --range finite and >= 0".into()));
    }
    let pts: Vec<f64> = (0..a.grid)
        .map(|i| {
            if a.grid == 1 {
                0.0
            } else {
                -a.range + 2.0 * a.range * i as f64 / (a.grid - 1) as f64
            }
        })
        .collect();
    let sym = c.symbol.as_ref().map(|_| symbol(c)).transpose()?;
    let mut rows = Vec::new();
    let mut contract = ContractStatus::passed();
    let mut worst: f64 = 0.0;
    let mut max_order = 0;
    for &x in &pts {
        for &xi in &pts {
            let mut row = WignerRow {
                x,
                xi,
                re: 0.0,
                im: 0.0,
                quad_re: None,
                quad_im: None,
                quad_order: None,
            };
            if let Some(s) = &sym {
                let d = s.d();
                let mut xs = vec![0.0; d];
                let mut qs = vec![0.0; d];
                xs[0] = x;
                qs[0] = xi;
                row.re = s.eval(&ctx, &xs, &qs);
            } else {
                let w = wigner_closed(a.j, a.k, x, xi, &ctx)?;
                row.re = w.re;
                row.im = w.im;
                if a.check {
                    let f = |t: &[f64]| C64::new(gaussweyl::basis::hermite_eval(a.j, t[0], &ctx).unwrap_or(0.0), 0.0);
                    let g = |t: &[f64]| C64::new(gaussweyl::basis::hermite_eval(a.k, t[0], &ctx).unwrap_or(0.0), 0.0);
                    let q = wigner_quadrature(f, g, &[x], &[xi], &ctx)?;
                    worst = worst.max((q.value - w).norm());
                    max_order = max_order.max(q.order);
                    row.quad_re = Some(q.value.re);
                    row.quad_im = Some(q.value.im);
                    row.quad_order = Some(q.order);
                }
            }
            rows.push(row);
        }
    }
    let mut quadrature = Vec::new();
    if a.check && sym.is_none() {
        contract.check(worst <= 1e-8, format!("closed form vs quadrature differ by {worst:e} (tol 1e-8)"));
        quadrature.push(serde_json::json!({ "method": "gauss-hermite", "order": max_order }));
    }
    let results = serde_json::json!({
        "j": a.j,
        "k": a.k,
        "symbol": sym.as_ref().map(|s| s.to_string()),
        "max_closed_vs_quadrature": if a.check { Some(worst) } else { None },
        "grid": rows,
    });
    Ok(Output {
        reference: "Wigner functions of Hermite functions",
        results,
        csv: csv(&rows)?,
        quadrature,
        contract,
    })
}

fn matrix_for(c: &Common) -> Result<(SymbolDescriptor, gaussweyl::OperatorMatrix), Failure> {
    let ctx = context(c)?;
    let sym = symbol(c)?;
    let trunc = TruncationSet::total_degree(dims(c, &sym)?, c.n)?;
    let m = assemble_matrix(&sym, &trunc, &ctx)?;
    Ok((sym, m))
}

pub fn opmatrix(c: &Common) -> Res {
    let (sym, m) = matrix_for(c)?;
    let rows = matrix_rows(&m);
    let dev = m.matrix.hermitian_deviation();
    let indices: Vec<String> = m.truncation.indices().iter().map(|a| a.to_string()).collect();
    let results = serde_json::json!({
        "symbol": sym.to_string(),
        "dim": m.dim(),
        "indices": indices,
        "hermitian_deviation": dev,
        "entries": rows,
    });
    let mut out = output("Hermite-basis matrix elements", results, &rows)?;
    out.quadrature.push(json(&m.quad));
    out.contract.check(dev <= 1e-10, format!("matrix is not Hermitian: deviation {dev:e}"));
    Ok(out)
}

#[derive(Serialize)]
struct EigRow {
    index: usize,
    eigenvalue: f64,
}

pub fn spectrum(c: &Common) -> Res {
    let (sym, m) = matrix_for(c)?;
    let values = m.eigenvalues()?;
    let rows: Vec<EigRow> = values
        .iter()
        .enumerate()
        .map(|(index, &eigenvalue)| EigRow { index, eigenvalue })
        .collect();
    let results = serde_json::json!({
        "symbol": sym.to_string(),
        "dim": m.dim(),
        "min": values.first(),
        "max": values.last(),
        "eigenvalues": values,
    });
    let mut out = output("spectrum of the truncated operator", results, &rows)?;
    out.quadrature.push(json(&m.quad));
    Ok(out)
}

#[derive(Args, Debug, Clone)]
pub struct NonposArgs {
    #[arg(long, default_value_t = 2.0)]
    pub nu: f64,
    #[arg(long, default_value_t = 1.0)]
    pub anorm: f64,
}

pub fn nonpos(c: &Common, a: &NonposArgs) -> Res {
    let ctx = context(c)?;
    let w = nonpos_witness(a.nu, a.anorm, &ctx)?;
    let mut out = output("Gaussian non-positivity witness", json(&w), &[w])?;
    out.quadrature.push(serde_json::json!({ "method": "gauss-hermite ladder", "tolerance": 1e-10 }));
    out.contract.check(w.diff <= 1e-8, format!("quadrature differs from closed form by {:e}", w.diff));
    Ok(out)
}

pub fn radial(c: &Common) -> Res {
    let ctx = context(c)?;
    let sym = symbol(c)?;
    let trunc = TruncationSet::total_degree(dims(c, &sym)?, c.n)?;
    let r = radial_positivity_check(&sym, &trunc, &ctx)?;
    #[derive(Serialize)]
    struct Row {
        bound: f64,
        min_eig: f64,
        ground_state: f64,
        nondecreasing: bool,
        ok: bool,
    }
    let row = Row {
        bound: r.bound,
        min_eig: r.min_eig,
        ground_state: r.ground_state,
        nondecreasing: r.nondecreasing,
        ok: r.ok,
    };
    let mut results = json(&r);
    results["symbol"] = serde_json::Value::String(sym.to_string());
    results["hypothesis_met"] = serde_json::Value::Bool(r.nondecreasing);
    let mut out = output("lower bound for radial symbols", results, &[row])?;
    // the bound is only claimed for nondecreasing profiles
    if r.nondecreasing {
        out.contract.check(r.ok, format!("min_eig {} below bound {}", r.min_eig, r.bound));
    }
    Ok(out)
}

pub fn garding(c: &Common) -> Res {
    let ctx = context(c)?;
    let sym = symbol(c)?;
    let trunc = TruncationSet::total_degree(dims(c, &sym)?, c.n)?;
    let r = garding_verify(&sym, &trunc, &ctx)?;
    #[derive(Serialize)]
    struct Row {
        sum_lambda: f64,
        prod_lambda: f64,
        class_norm: f64,
        bound: f64,
        measured_min_eig: Option<f64>,
        margin: Option<f64>,
    }
    let row = Row {
        sum_lambda: r.sum_lambda,
        prod_lambda: r.prod_lambda,
        class_norm: r.class_norm,
        bound: r.bound,
        measured_min_eig: r.measured_min_eig,
        margin: r.margin,
    };
    let mut out = output("Garding inequality", json(&r), &[row])?;
    let margin = r.margin.unwrap_or(f64::NEG_INFINITY);
    out.contract.check(margin >= -1e-9, format!("Garding margin {margin:e} < -1e-9"));
    Ok(out)
}

fn parse_extent(s: &str) -> Result<BoxExtent, String> {
    if s == "inf" {
        return Ok(BoxExtent::Infinite);
    }
    match s.parse::<f64>() {
        Ok(a) if a > 0.0 && a.is_finite() => Ok(BoxExtent::Finite(a)),
        _ => Err(format!("expected a positive number or `inf`, got `{s}`")),
    }
}

#[derive(Args, Debug, Clone)]
pub struct FlandrinArgs {
    /// Box side, a positive number or `inf`
    #[arg(long, default_value = "inf", value_parser = parse_extent)]
    pub a: BoxExtent,
    /// Cutoffs reported in the convergence table
    #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
    pub levels: Vec<usize>,
    /// Also check the reduction to the classical box integral for psi_0
    #[arg(long)]
    pub reduction: bool,
}

pub fn flandrin(c: &Common, a: &FlandrinArgs) -> Res {
    let ctx = context(c)?;
    let rep = flandrin_search(a.a, &ctx, c.n, &a.levels)?;
    let mut contract = ContractStatus::passed();
    contract.check(
        rep.hermitian_deviation <= 1e-10,
        format!("box matrix not Hermitian: {:e}", rep.hermitian_deviation),
    );
    let hdep = if a.a == BoxExtent::Infinite {
        let d = flandrin_h_dependence(a.a, 0.5, 2.0, c.n)?;
        contract.check(d <= 1e-8, format!("quarter-plane matrix depends on h: {d:e}"));
        Some(d)
    } else {
        None
    };
    let reduction = if a.reduction {
        let f = HermiteExpansion::single(MultiIndex::zero(), C64::new(1.0, 0.0));
        let r = flandrin_reduction_check(a.a, &ctx, &f)?;
        contract.check(r.residual <= 1e-8, format!("reduction residual {:e}", r.residual));
        Some(r)
    } else {
        None
    };
    let mut results = json(&rep);
    results["h_dependence"] = json(&hdep);
    results["reduction"] = json(&reduction);
    Ok(Output {
        reference: "box localization and the Flandrin bound",
        results,
        csv: csv(&rep.convergence)?,
        quadrature: vec![json(&rep.quad)],
        contract,
    })
}

#[derive(Args, Debug, Clone)]
pub struct StochArgs {
    /// Direction `geometric`, `power` or a comma list `finite:0.5,0.25`
    #[arg(long, default_value = "geometric")]
    pub direction: String,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Variance of the Wiener measure
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,4,8")]
    pub ns: Vec<usize>,
    /// `ell` for ell_a, `cylinder` for cos(x_1) along rotated frames
    #[arg(long, default_value = "ell")]
    pub mode: String,
}

fn parse_direction(s: &str) -> Result<DirectionVector, Failure> {
    match s {
        "geometric" => Ok(DirectionVector::Geometric),
        "power" => Ok(DirectionVector::Power),
        _ => {
            let Some(list) = s.strip_prefix("finite:") else {
                return Err(Failure::Usage(format!("unknown direction `{s}`")));
            };
            let v: Result<Vec<f64>, _> = list.split(',').map(|t| t.trim().parse::<f64>()).collect();
            v.map(DirectionVector::Finite)
                .map_err(|_| Failure::Usage(format!("bad finite direction `{list}`")))
        }
    }
}

pub fn stochext(c: &Common, a: &StochArgs) -> Res {
    let dir = parse_direction(&a.direction)?;
    match a.mode.as_str() {
        "ell" => {
            let rows = conv_table(&dir, &a.ns, a.p, a.s, a.samples, c.seed)?;
            let mut contract = ContractStatus::passed();
            for r in &rows {
                contract.check(
                    (r.mc_estimate - r.exact).abs() <= 3.0 * r.std_error,
                    format!("n={}: estimate {} outside 3 SE of {}", r.n, r.mc_estimate, r.exact),
                );
            }
            let results = serde_json::json!({
                "direction": dir.describe(),
                "p": a.p,
                "s": a.s,
                "samples": a.samples,
                "norm": dir.norm_sq().sqrt(),
                "exact_at_0": exact_conv_rate(&dir, 0, a.p, a.s)?,
                "table": rows,
            });
            Ok(Output {
                reference: "stochastic extension of ell_a",
                results,
                csv: csv(&rows)?,
                quadrature: Vec::new(),
                contract,
            })
        }
        "cylinder" => {
            let phi = |x: &[f64]| x[0].cos();
            let ns: Vec<usize> = a.ns.iter().copied().filter(|&n| n >= 1).collect();
            let rows = cylinder_extension_check(
                &phi,
                1,
                FrameFamily::Givens { theta0: 1.0 },
                &ns,
                a.p,
                a.s,
                a.samples,
                c.seed,
                true,
            )?;
            let mut contract = ContractStatus::passed();
            for r in &rows {
                contract.check(
                    r.max_cov_eigenvalue <= a.s + 1e-10,
                    format!("n={}: covariance eigenvalue {} exceeds s", r.n, r.max_cov_eigenvalue),
                );
            }
            let results = serde_json::json!({
                "function": "cos(x_1)",
                "frames": "Givens rotation by 1/n in the plane (e_1, e_{n+1})",
                "p": a.p,
                "s": a.s,
                "samples": a.samples,
                "table": rows,
            });
            Ok(Output {
                reference: "stochastic extension of a cylindrical function",
                results,
                csv: csv(&rows)?,
                quadrature: Vec::new(),
                contract,
            })
        }
        m => Err(Failure::Usage(format!("unknown mode `{m}`"))),
    }
}

#[derive(Args, Debug, Clone)]
pub struct HeatArgs {
    /// Pairs of the decomposition, e.g. `1,2`
    #[arg(long, value_delimiter = ',')]
    pub lambda: Vec<usize>,
}

#[derive(Serialize)]
struct CheckRow {
    check: String,
    value: f64,
    tolerance: f64,
    ok: bool,
}

pub fn heatcheck(c: &Common, a: &HeatArgs) -> Res {
    let ctx = context(c)?;
    let sym = symbol(c)?;
    let d = sym.d();
    let lambda: Vec<usize> = if a.lambda.is_empty() { (1..=d.min(3)).collect() } else { a.lambda.clone() };
    let heated: HeatedSymbol = sym.clone().into();
    let grid: Vec<(Vec<f64>, Vec<f64>)> = (0..25)
        .map(|i| {
            let t = i as f64 * 0.41;
            let x = (0..d).map(|j| (t + j as f64).sin() * 1.5).collect();
            let q = (0..d).map(|j| (1.3 * t - j as f64).cos()).collect();
            (x, q)
        })
        .collect();
    let mut rows = Vec::new();
    let res = decomposition_residual(&heated, &lambda, &ctx, &grid)?;
    rows.push(CheckRow {
        check: "decomposition residual".into(),
        value: res,
        tolerance: 1e-10,
        ok: res <= 1e-10,
    });
    let order = c.quad_order.unwrap_or(40);
    if lambda.len() <= 2 && heated.base.to_gauss_sum().is_some() {
        let j_set = &lambda[..1];
        let terms = ts_operators(&heated, j_set, &lambda, &ctx)?;
        let mut worst: f64 = 0.0;
        for (x, q) in grid.iter().take(4) {
            let closed: f64 = terms.iter().map(|t| t.sign * t.symbol.eval(&ctx, x, q)).sum();
            let num = ts_numeric(&sym, j_set, &lambda, &ctx, x, q, order)?;
            worst = worst.max((closed - num).abs());
        }
        rows.push(CheckRow {
            check: "closed vs numeric T/S".into(),
            value: worst,
            tolerance: 1e-9,
            ok: worst <= 1e-9,
        });
    }
    let ground = HermiteExpansion::single(MultiIndex::zero(), C64::new(1.0, 0.0));
    let aw = antiwick_form(&heated, &ground, &ground, &ctx)?;
    let min_symbol = grid
        .iter()
        .map(|(x, q)| sym.eval(&ctx, x, q))
        .fold(f64::INFINITY, f64::min);
    rows.push(CheckRow {
        check: "anti-Wick ground state".into(),
        value: aw.re,
        tolerance: 1e-9,
        ok: min_symbol < 0.0 || aw.re >= -1e-9,
    });
    let mut contract = ContractStatus::passed();
    for r in &rows {
        contract.check(r.ok, format!("{}: {:e}", r.check, r.value));
    }
    let results = serde_json::json!({
        "symbol": sym.to_string(),
        "lambda": lambda,
        "checks": rows,
    });
    Ok(Output {
        reference: "heat decomposition and anti-Wick positivity",
        results,
        csv: csv(&rows)?,
        quadrature: vec![serde_json::json!({ "method": "gauss-hermite", "order": order })],
        contract,
    })
}
