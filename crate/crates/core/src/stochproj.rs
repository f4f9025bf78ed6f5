//! Stochastic extensions of cylindrical functions: exact and Monte Carlo
//! `L^p` convergence of `ell_{P_n a}` to `ell_a`, the covariance matrices of
//! projected coordinates and their bound by `s I`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::gaussian::{coordinate_draws, coordinate_stream, ell_norm};
use crate::linalg::{cholesky_solve, eigh, CMatrix};

/// Explicit coordinates sampled past the projection index; the rest of the
/// tail is drawn as one Gaussian of the exact remaining variance.
pub const EXPLICIT_TAIL: usize = 64;

/// Stream used for the tail remainder (coordinate streams start at 1).
const REMAINDER_STREAM: u64 = 0;

/// Square-summable direction `a = (a_j)_{j >= 1}` in the Cameron-Martin space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DirectionVector {
    /// `a_j = 2^{-j/2}`
    Geometric,
    /// `a_j = 1/j`
    Power,
    Finite(Vec<f64>),
}

impl DirectionVector {
    pub fn coord(&self, j: usize) -> f64 {
        if j == 0 {
            return 0.0;
        }
        match self {
            DirectionVector::Geometric => 2f64.powf(-(j as f64) / 2.0),
            DirectionVector::Power => 1.0 / j as f64,
            DirectionVector::Finite(v) => v.get(j - 1).copied().unwrap_or(0.0),
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.tail_sq(0)
    }

    /// `sum_{j > n} a_j^2`.
    pub fn tail_sq(&self, n: usize) -> f64 {
        match self {
            DirectionVector::Geometric => 2f64.powf(-(n as f64)),
            DirectionVector::Power => inverse_square_tail(n),
            DirectionVector::Finite(v) => v.iter().skip(n).rev().map(|x| x * x).sum(),
        }
    }

    pub fn tail_norm(&self, n: usize) -> f64 {
        self.tail_sq(n).max(0.0).sqrt()
    }

    pub fn describe(&self) -> String {
        match self {
            DirectionVector::Geometric => "geometric 2^(-j/2)".into(),
            DirectionVector::Power => "power 1/j".into(),
            DirectionVector::Finite(v) => format!("finite {v:?}"),
        }
    }
}

/// `sum_{j > n} j^{-2}`.
fn inverse_square_tail(n: usize) -> f64 {
    if n < 10 {
        let head: f64 = (1..=n).map(|j| 1.0 / (j * j) as f64).sum();
        return std::f64::consts::PI.powi(2) / 6.0 - head;
    }
    // Euler-Maclaurin from n + 1/2 would also do; this is the expansion at n
    let x = n as f64;
    1.0 / x - 1.0 / (2.0 * x * x) + 1.0 / (6.0 * x.powi(3)) - 1.0 / (30.0 * x.powi(5)) + 1.0 / (42.0 * x.powi(7))
        - 1.0 / (30.0 * x.powi(9))
}

/// `||ell_a - ell_{P_n a}||_{L^p} = C_{p,s} |a - P_n a|`.
pub fn exact_conv_rate(a: &DirectionVector, n: usize, p: f64, s: f64) -> Result<f64> {
    ell_norm(p, s, a.tail_norm(n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub p: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl McEstimate {
    /// `|estimate - exact| <= k * std_error`.
    pub fn brackets(&self, exact: f64, k: f64) -> bool {
        (self.estimate - exact).abs() <= k * self.std_error
    }
}

fn lp_estimate(values: &[f64], p: f64) -> McEstimate {
    let n = values.len();
    let ys: Vec<f64> = values.iter().map(|x| x.abs().powf(p)).collect();
    let mean = ys.iter().sum::<f64>() / n as f64;
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let se_mean = (var / n as f64).sqrt();
    let (estimate, std_error) = if mean > 0.0 {
        let est = mean.powf(1.0 / p);
        (est, est / (p * mean) * se_mean)
    } else {
        (0.0, 0.0)
    };
    McEstimate {
        p,
        estimate,
        std_error,
        samples: n,
    }
}

/// Samples of `ell_a - ell_{P_n a}`.
pub fn projection_error_samples(a: &DirectionVector, n: usize, s: f64, samples: usize, seed: u64) -> Result<Vec<f64>> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid("s", "must be finite and positive"));
    }
    let mut acc = vec![0.0; samples];
    for j in n + 1..=n + EXPLICIT_TAIL {
        let aj = a.coord(j);
        if aj == 0.0 {
            continue;
        }
        for (x, z) in acc.iter_mut().zip(coordinate_draws(seed, j as u64, s, samples)) {
            *x += aj * z;
        }
    }
    let rest = a.tail_sq(n + EXPLICIT_TAIL);
    if rest > 0.0 {
        let mut rng = coordinate_stream(seed, REMAINDER_STREAM);
        let sd = (s * rest).sqrt();
        for x in acc.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *x += sd * z;
        }
    }
    Ok(acc)
}

/// Monte Carlo estimate of `||ell_a - ell_{P_n a}||_{L^p}` with a delta-method
/// standard error.
pub fn mc_conv_rate(a: &DirectionVector, n: usize, p: f64, s: f64, samples: usize, seed: u64) -> Result<McEstimate> {
    Ok(mc_conv_rates(a, n, &[p], s, samples, seed)?[0])
}

/// Several exponents from one sample set.
pub fn mc_conv_rates(a: &DirectionVector, n: usize, ps: &[f64], s: f64, samples: usize, seed: u64) -> Result<Vec<McEstimate>> {
    if samples < 1000 {
        return Err(invalid("samples", "at least 1000 samples are required"));
    }
    for &p in ps {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(invalid("p", format!("must be a finite value >= 1, got {p}")));
        }
    }
    let xs = projection_error_samples(a, n, s, samples, seed)?;
    Ok(ps.iter().map(|&p| lp_estimate(&xs, p)).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvRow {
    pub n: usize,
    pub exact: f64,
    pub mc_estimate: f64,
    pub std_error: f64,
}

pub fn conv_table(a: &DirectionVector, ns: &[usize], p: f64, s: f64, samples: usize, seed: u64) -> Result<Vec<ConvRow>> {
    ns.iter()
        .map(|&n| {
            let mc = mc_conv_rate(a, n, p, s, samples, seed)?;
            Ok(ConvRow {
                n,
                exact: exact_conv_rate(a, n, p, s)?,
                mc_estimate: mc.estimate,
                std_error: mc.std_error,
            })
        })
        .collect()
}

/// Increasing families of finite-dimensional subspaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FrameFamily {
    /// `E_n = span(e_1, ..., e_n)`
    Coordinate,
    /// `E_n = Q_n span(e_1, ..., e_n)`, `Q_n` the rotation by `theta0 / n` in
    /// the plane `(e_1, e_{n+1})`.
    Givens { theta0: f64 },
}

impl FrameFamily {
    /// Orthonormal basis of `E_n` as vectors of length `n + 1`.
    pub fn basis(&self, n: usize) -> Vec<Vec<f64>> {
        let dim = n + 1;
        let mut out: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                let mut v = vec![0.0; dim];
                v[k] = 1.0;
                v
            })
            .collect();
        if let FrameFamily::Givens { theta0 } = self {
            if n > 0 {
                let t = theta0 / n as f64;
                out[0][0] = t.cos();
                out[0][n] = t.sin();
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceMatrix {
    pub k: Vec<Vec<f64>>,
    pub s: f64,
    pub provenance: String,
    pub eigenvalues: Vec<f64>,
    pub det: f64,
    /// Smallest `s <y, K^{-1} y> - |y|^2` over the random probes, when `K` is
    /// invertible.
    pub inverse_margin: Option<f64>,
}

impl CovarianceMatrix {
    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().unwrap_or(&0.0)
    }
}

/// `K = s (P e_i . P e_j)_{i,j <= d}` for the orthonormal `basis` of `E_n`.
pub fn covariance_and_bound(basis: &[Vec<f64>], d: usize, s: f64, provenance: &str) -> Result<CovarianceMatrix> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid("s", "must be finite and positive"));
    }
    let mut dev: f64 = 0.0;
    for (i, u) in basis.iter().enumerate() {
        for (j, v) in basis.iter().enumerate() {
            let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
            dev = dev.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    if dev > 1e-10 {
        return Err(Error::NotOrthonormal { deviation: dev });
    }
    let comp = |f: &Vec<f64>, i: usize| f.get(i).copied().unwrap_or(0.0);
    let mut k = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            k[i][j] = s * basis.iter().map(|f| comp(f, i) * comp(f, j)).sum::<f64>();
        }
    }
    let flat: Vec<f64> = k.iter().flatten().copied().collect();
    let eigenvalues = eigh(&CMatrix::from_real(d, &flat), false)?.values;
    if let Some(&top) = eigenvalues.last() {
        if top > s + 1e-10 || eigenvalues[0] < -1e-10 {
            return Err(Error::Contract(format!(
                "covariance spectrum [{}, {top}] leaves [0, s]",
                eigenvalues[0]
            )));
        }
    }
    let det: f64 = eigenvalues.iter().product();
    let inverse_margin = if d > 0 && eigenvalues[0] > 1e-8 * s {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6b5f);
        let mut worst = f64::INFINITY;
        for _ in 0..16 {
            let y: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let z = cholesky_solve(&flat, d, &y)?;
            let quad: f64 = y.iter().zip(&z).map(|(a, b)| a * b).sum();
            let norm: f64 = y.iter().map(|a| a * a).sum();
            worst = worst.min(s * quad - norm);
        }
        if worst < -1e-9 {
            return Err(Error::Contract(format!("s<y,K^-1 y> - |y|^2 = {worst:e}")));
        }
        Some(worst)
    } else {
        None
    };
    Ok(CovarianceMatrix {
        k,
        s,
        provenance: provenance.to_string(),
        eigenvalues,
        det,
        inverse_margin,
    })
}

/// Random orthonormal `m`-frame in `R^dim` (Gram-Schmidt on Gaussian vectors).
pub fn random_frame(m: usize, dim: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if m > dim {
        return Err(invalid("m", "frame larger than ambient dimension"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(m);
    while out.len() < m {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        // two passes keep the frame orthonormal to rounding
        for _ in 0..2 {
            for u in &out {
                let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(x, a)| *x -= dot * a);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            out.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct CylinderRow {
    pub n: usize,
    pub mc_estimate: f64,
    pub std_error: f64,
    pub max_cov_eigenvalue: f64,
}

/// Monte Carlo `||phi(pi_n x) - phi(x_1..x_d)||_{L^p}` along a frame family,
/// where the coordinates of `pi_n x` are `ell_{P_{E_n} e_i}`.
///
/// `growth_ok` is the caller's assertion that `phi` is `L^p`-integrable with
/// its Gaussian growth; it is not checked numerically.
#[allow(clippy::too_many_arguments)]
pub fn cylinder_extension_check(
    phi: &dyn Fn(&[f64]) -> f64,
    d: usize,
    family: FrameFamily,
    ns: &[usize],
    p: f64,
    s: f64,
    samples: usize,
    seed: u64,
    growth_ok: bool,
) -> Result<Vec<CylinderRow>> {
    if !growth_ok {
        return Err(invalid("phi", "growth condition not asserted"));
    }
    if samples < 1000 {
        return Err(invalid("samples", "at least 1000 samples are required"));
    }
    let nmax = ns.iter().copied().max().unwrap_or(0).max(d);
    let coords: Vec<Vec<f64>> = (1..=nmax as u64 + 1)
        .map(|j| coordinate_draws(seed, j, s, samples))
        .collect();
    let mut rows = Vec::new();
    for &n in ns {
        let basis = family.basis(n);
        let cov = covariance_and_bound(&basis, d, s, &format!("{family:?} n={n}"))?;
        let mut errs = Vec::with_capacity(samples);
        let mut y = vec![0.0; d];
        let mut yn = vec![0.0; d];
        for i in 0..samples {
            for (c, slot) in y.iter_mut().enumerate() {
                *slot = coords[c][i];
            }
            // ell_{f_k} for each frame vector, then P e_c = sum_k f_k[c] f_k
            yn.iter_mut().for_each(|v| *v = 0.0);
            for f in &basis {
                let lf: f64 = f.iter().enumerate().map(|(j, fj)| fj * coords[j][i]).sum();
                for (c, slot) in yn.iter_mut().enumerate() {
                    *slot += f.get(c).copied().unwrap_or(0.0) * lf;
                }
            }
            errs.push(phi(&yn) - phi(&y));
        }
        let est = lp_estimate(&errs, p);
        rows.push(CylinderRow {
            n,
            mc_estimate: est.estimate,
            std_error: est.std_error,
            max_cov_eigenvalue: cov.max_eigenvalue(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_rates() {
        let a = DirectionVector::Geometric;
        assert!((exact_conv_rate(&a, 4, 2.0, 1.0).unwrap() - 0.25).abs() < 1e-15);
        let c1 = (2.0 / std::f64::consts::PI).sqrt() * 0.25;
        assert!((exact_conv_rate(&a, 4, 1.0, 1.0).unwrap() - c1).abs() < 1e-15);
    }

    #[test]
    fn power_tail() {
        for n in [0, 3, 9, 10, 25] {
            let direct: f64 = (n + 1..2_000_000).map(|j| 1.0 / (j as f64).powi(2)).sum::<f64>() + 1.0 / 2_000_000.0;
            assert!((inverse_square_tail(n) - direct).abs() < 1e-11, "n={n}");
        }
    }

    #[test]
    fn exact_projection_gives_zero() {
        let a = DirectionVector::Finite(vec![0.7]);
        let m = mc_conv_rate(&a, 1, 2.0, 1.0, 1000, 3).unwrap();
        assert_eq!(m.estimate, 0.0);
    }

    #[test]
    fn two_by_two_gram() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let c = covariance_and_bound(&[vec![r, r]], 2, 1.0, "diag").unwrap();
        assert!((c.k[0][1] - 0.5).abs() < 1e-15);
        assert!(c.eigenvalues[0].abs() < 1e-14 && (c.eigenvalues[1] - 1.0).abs() < 1e-14);
        assert!(c.inverse_margin.is_none());
    }
}
