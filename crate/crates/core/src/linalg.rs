//! Small dense linear algebra: symmetric tridiagonal eigenproblems for
//! Gauss rules and cyclic Jacobi for Hermitian matrices.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CMatrix {
    n: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn from_real(n: usize, vals: &[f64]) -> Self {
        assert_eq!(vals.len(), n * n);
        Self {
            n,
            data: vals.iter().map(|&v| C64::new(v, 0.0)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    /// Leading principal `k x k` block.
    pub fn principal(&self, k: usize) -> Self {
        assert!(k <= self.n);
        Self::from_fn(k, |i, j| self.get(i, j))
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                dev = dev.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        dev
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `u^* A v`.
    pub fn form(&self, u: &[C64], v: &[C64]) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for i in 0..self.n {
            let mut row = C64::new(0.0, 0.0);
            for j in 0..self.n {
                row += self.get(i, j) * v[j];
            }
            s += u[i].conj() * row;
        }
        s
    }
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Column `k` (entries `vectors[i * n + k]`) is the eigenvector of `values[k]`.
    pub vectors: Vec<C64>,
    pub sweeps: usize,
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eig_hermitian(m: &CMatrix) -> Result<Vec<f64>> {
    Ok(eigh(m, false)?.values)
}

/// Cyclic Jacobi for Hermitian matrices.
///
/// Each rotation first removes the phase of the pivot and then applies a
/// real plane rotation. Iterates until the off-diagonal Frobenius norm is
/// below `1e-12` of the full norm.
pub fn eigh(m: &CMatrix, want_vectors: bool) -> Result<HermitianEigen> {
    let n = m.dim();
    let scale = m.frobenius();
    let dev = m.hermitian_deviation();
    if dev > 1e-10 * scale.max(1e-300) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let mut a = m.data.clone();
    // symmetrize exactly
    for i in 0..n {
        a[i * n + i] = C64::new(a[i * n + i].re, 0.0);
        for j in i + 1..n {
            let v = 0.5 * (a[i * n + j] + a[j * n + i].conj());
            a[i * n + j] = v;
            a[j * n + i] = v.conj();
        }
    }
    let mut v = if want_vectors {
        let mut v = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            v[i * n + i] = C64::new(1.0, 0.0);
        }
        v
    } else {
        Vec::new()
    };
    let tol = 1e-12 * scale;
    let mut sweeps = 0;
    loop {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[i * n + j].norm_sqr();
                }
            }
        }
        if off.sqrt() <= tol || n < 2 {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::EigenNotConverged { sweeps });
        }
        sweeps += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                let b = apq.norm();
                if b <= 1e-300 || b <= 1e-18 * scale {
                    continue;
                }
                let phase = apq / b;
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                let tau = (aqq - app) / (2.0 * b);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // U restricted to (p, q): [[c, s], [-s e^{-i phi}, c e^{-i phi}]]
                let upp = C64::new(c, 0.0);
                let upq = C64::new(s, 0.0);
                let uqp = -phase.conj() * s;
                let uqq = phase.conj() * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * upp + akq * uqp;
                    a[k * n + q] = akp * upq + akq * uqq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = upp.conj() * apk + uqp.conj() * aqk;
                    a[q * n + k] = upq.conj() * apk + uqq.conj() * aqk;
                }
                a[p * n + q] = C64::new(0.0, 0.0);
                a[q * n + p] = C64::new(0.0, 0.0);
                a[p * n + p] = C64::new(a[p * n + p].re, 0.0);
                a[q * n + q] = C64::new(a[q * n + q].re, 0.0);
                if want_vectors {
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = vkp * upp + vkq * uqp;
                        v[k * n + q] = vkp * upq + vkq * uqq;
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].re.total_cmp(&a[j * n + j].re));
    let values = order.iter().map(|&i| a[i * n + i].re).collect();
    let vectors = if want_vectors {
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        for (col, &src) in order.iter().enumerate() {
            for r in 0..n {
                out[r * n + col] = v[r * n + src];
            }
        }
        out
    } else {
        Vec::new()
    };
    Ok(HermitianEigen {
        values,
        vectors,
        sweeps,
    })
}

/// Implicit QL on a symmetric tridiagonal matrix, tracking the first
/// components of the eigenvectors.
///
/// `diag` has length `n`, `off[i]` couples rows `i` and `i+1`. On return
/// `diag` holds ascending eigenvalues and `z` the transformed vector;
/// starting from `z = (sqrt(mu0), 0, ...)` gives `z_k^2` as Gauss weights.
pub fn tridiag_ql(diag: &mut [f64], off: &[f64], z: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if n <= 1 {
        return Ok(());
    }
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&off[..n - 1]);
    let d = diag;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                if e[m].abs() <= f64::EPSILON * (d[m].abs() + d[m + 1].abs()) {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            if iter >= 60 {
                return Err(Error::EigenNotConverged { sweeps: iter });
            }
            iter += 1;
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = (g * g + 1.0).sqrt();
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r } else { -r });
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                if g.abs() <= f.abs() {
                    c = g / f;
                    r = (c * c + 1.0).sqrt();
                    e[i + 1] = f * r;
                    s = 1.0 / r;
                    c *= s;
                } else {
                    s = f / g;
                    r = (s * s + 1.0).sqrt();
                    e[i + 1] = g * r;
                    c = 1.0 / r;
                    s *= c;
                }
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let dd: Vec<f64> = idx.iter().map(|&i| d[i]).collect();
    let zz: Vec<f64> = idx.iter().map(|&i| z[i]).collect();
    d.copy_from_slice(&dd);
    z.copy_from_slice(&zz);
    Ok(())
}

/// Solves `A x = b` for real symmetric positive definite `A` (Cholesky).
pub fn cholesky_solve(a: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::Singular);
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_on_known_hermitian() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3
        let m = CMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 0) | (1, 1) => C64::new(2.0, 0.0),
            (0, 1) => C64::new(0.0, 1.0),
            _ => C64::new(0.0, -1.0),
        });
        let e = eigh(&m, true).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
        // A v = lambda v
        for k in 0..2 {
            for i in 0..2 {
                let mut av = C64::new(0.0, 0.0);
                for j in 0..2 {
                    av += m.get(i, j) * e.vectors[j * 2 + k];
                }
                assert!((av - e.vectors[i * 2 + k] * e.values[k]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_fn(2, |i, j| C64::new((i + 2 * j) as f64, 0.0));
        assert!(matches!(eig_hermitian(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn ql_on_second_difference() {
        let n = 12;
        let mut d = vec![2.0; n];
        let off = vec![-1.0; n - 1];
        let mut z = vec![0.0; n];
        z[0] = 1.0;
        tridiag_ql(&mut d, &off, &mut z).unwrap();
        for (k, v) in d.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-13);
        }
        let zsum: f64 = z.iter().map(|v| v * v).sum();
        assert!((zsum - 1.0).abs() < 1e-13);
    }

    #[test]
    fn cholesky() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let x = cholesky_solve(&a, 2, &[2.0, 1.0]).unwrap();
        assert!((4.0 * x[0] + 2.0 * x[1] - 2.0).abs() < 1e-14);
        assert!((2.0 * x[0] + 3.0 * x[1] - 1.0).abs() < 1e-14);
    }
}
