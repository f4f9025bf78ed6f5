//! Structural invariants over randomized parameters.

use gaussweyl::basis::{hermite_eval, laguerre, laguerre_recurrence};
use gaussweyl::gaussian::ell_norm;
use gaussweyl::heat::{heat_apply, HeatedSymbol};
use gaussweyl::linalg::{eig_hermitian, CMatrix};
use gaussweyl::positivity::{nonpos_closed, nonpos_witness};
use gaussweyl::quadform::{assemble_matrix, quadratic_form};
use gaussweyl::stochproj::{covariance_and_bound, random_frame};
use gaussweyl::symbols::PolySymbol;
use gaussweyl::wigner::{weighted_wigner, wigner_closed};
use gaussweyl::*;
use proptest::prelude::*;

fn ctx(h: f64) -> CalcContext {
    CalcContext::new(h).unwrap()
}

fn binomial(n: usize, k: usize) -> usize {
    (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
}

// physicists' Hermite recurrence, normalized
fn psi_oracle(j: usize, x: f64, h: f64) -> f64 {
    let y = x / h.sqrt();
    let (mut p0, mut p1) = (1.0, 2.0 * y);
    if j == 0 {
        return 1.0;
    }
    for k in 1..j {
        let p2 = 2.0 * y * p1 - 2.0 * k as f64 * p0;
        p0 = p1;
        p1 = p2;
    }
    p1 / (1..=j).map(|k| 2.0 * k as f64).product::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hermite_matches_physicists(j in 0usize..20, x in -3.0f64..3.0, h in 0.2f64..3.0) {
        let v = hermite_eval(j, x, &ctx(h)).unwrap();
        let o = psi_oracle(j, x, h);
        prop_assert!((v - o).abs() <= 1e-9 * (1.0 + o.abs()), "{v} vs {o}");
    }

    #[test]
    fn laguerre_forms_agree(k in 0usize..15, a in 0usize..8, x in 0.0f64..6.0) {
        let explicit = laguerre(k, a, x).unwrap();
        let rec = laguerre_recurrence(k, a as f64, x);
        prop_assert!((explicit - rec).abs() <= 1e-9 * (1.0 + rec.abs()));
    }

    #[test]
    fn wigner_swap_is_conjugate(j in 0usize..10, k in 0usize..10, x in -2.0f64..2.0, xi in -2.0f64..2.0, h in 0.3f64..2.0) {
        let c = ctx(h);
        let a = wigner_closed(j, k, x, xi, &c).unwrap();
        let b = wigner_closed(k, j, x, xi, &c).unwrap();
        prop_assert!((a - b.conj()).norm() <= 1e-10 * (1.0 + a.norm()));
        let w = weighted_wigner(j, k, x, xi, &c).unwrap();
        let scaled = a * (-(x * x + xi * xi) / h).exp();
        prop_assert!((w - scaled).norm() <= 1e-10 * (1.0 + scaled.norm()));
    }

    #[test]
    fn gaussian_matrix_is_diagonal_closed_form(nu in 0.1f64..3.0, h in 0.3f64..2.0, n in 1usize..7) {
        let c = ctx(h);
        let t = TruncationSet::total_degree(1, n).unwrap();
        let m = assemble_matrix(&SymbolDescriptor::gaussian(nu, 1.0).unwrap(), &t, &c).unwrap();
        let q = nu * h;
        for a in t.indices() {
            for b in t.indices() {
                let v = m.entry(a, b).unwrap();
                let want = if a == b {
                    let k = a.get(1) as i32;
                    (1.0 - q).powi(k) / (1.0 + q).powi(k + 1)
                } else {
                    0.0
                };
                prop_assert!((v.re - want).abs() < 1e-10 && v.im.abs() < 1e-12, "{a:?} {b:?}: {v} vs {want}");
            }
        }
    }

    #[test]
    fn polynomial_matrix_is_hermitian(c1 in -2.0f64..2.0, c2 in -2.0f64..2.0, h in 0.3f64..2.0) {
        let sym = PolySymbol::new(2, vec![(c1, vec![1, 0, 1, 0]), (c2, vec![0, 2, 0, 0]), (1.0, vec![0, 0, 0, 1])]).unwrap();
        let t = TruncationSet::total_degree(2, 3).unwrap();
        let m = assemble_matrix(&sym, &t, &ctx(h)).unwrap();
        for a in t.indices() {
            for b in t.indices() {
                let d = m.entry(a, b).unwrap() - m.entry(b, a).unwrap().conj();
                prop_assert!(d.norm() < 1e-9);
            }
        }
    }

    #[test]
    fn quadratic_form_is_sesquilinear(re in -2.0f64..2.0, im in -2.0f64..2.0, nu in 0.2f64..2.0) {
        let c = ctx(1.0);
        let sym = SymbolDescriptor::gaussian(nu, 1.0).unwrap();
        let e = |j| MultiIndex::single(1, j).unwrap();
        let f = HermiteExpansion::from_terms([(MultiIndex::zero(), C64::new(0.3, 0.1)), (e(1), C64::new(1.0, 0.0))]);
        let g = HermiteExpansion::from_terms([(e(1), C64::new(0.5, -0.2)), (e(2), C64::new(0.7, 0.0))]);
        let lam = C64::new(re, im);
        let base = quadratic_form(&sym, &f, &g, &c).unwrap();
        let left = quadratic_form(&sym, &f.scaled(lam), &g, &c).unwrap();
        let right = quadratic_form(&sym, &f, &g.scaled(lam), &c).unwrap();
        prop_assert!((left - lam * base).norm() < 1e-12);
        prop_assert!((right - lam.conj() * base).norm() < 1e-12);
    }

    #[test]
    fn eigenvalues_preserve_trace_and_norm(n in 1usize..9, seed in any::<u64>()) {
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut m = CMatrix::zeros(n);
        for i in 0..n {
            m.set(i, i, C64::new(next(), 0.0));
            for j in i + 1..n {
                let v = C64::new(next(), next());
                m.set(i, j, v);
                m.set(j, i, v.conj());
            }
        }
        let ev = eig_hermitian(&m).unwrap();
        let trace: f64 = (0..n).map(|i| m.get(i, i).re).sum();
        prop_assert!((ev.iter().sum::<f64>() - trace).abs() < 1e-10);
        let fro2 = m.frobenius().powi(2);
        prop_assert!((ev.iter().map(|v| v * v).sum::<f64>() - fro2).abs() < 1e-10);
        prop_assert!(ev.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn witness_matches_closed_form(nu in 0.1f64..3.0, a in 0.5f64..1.5, h in 0.5f64..2.0) {
        let w = nonpos_witness(nu, a, &ctx(h)).unwrap();
        prop_assert!((w.quad - nonpos_closed(nu, a, h)).abs() < 1e-8);
        // sign flips where h nu a^2 crosses 1
        let q = h * nu * a * a;
        if (q - 1.0).abs() > 1e-6 {
            prop_assert_eq!(w.closed < 0.0, q > 1.0);
        }
    }

    #[test]
    fn heat_is_a_semigroup(t1 in 0.0f64..1.0, t2 in 0.0f64..1.0, nu in 0.2f64..3.0, x in -2.0f64..2.0, xi in -2.0f64..2.0) {
        let c = ctx(1.0);
        let base = HeatedSymbol::from(SymbolDescriptor::gaussian(nu, 1.0).unwrap());
        let two = heat_apply(&heat_apply(&base, &[1], t1).unwrap(), &[1], t2).unwrap();
        let one = heat_apply(&base, &[1], t1 + t2).unwrap();
        prop_assert!((two.eval(&c, &[x], &[xi]) - one.eval(&c, &[x], &[xi])).abs() < 1e-13);
    }

    #[test]
    fn truncation_counts(d in 1usize..5, n in 0usize..7) {
        let t = TruncationSet::total_degree(d, n).unwrap();
        prop_assert_eq!(t.len(), binomial(n + d, d));
        for (i, m) in t.indices().iter().enumerate() {
            prop_assert!(m.degree() as usize <= n);
            prop_assert_eq!(t.index_of(m), Some(i));
        }
    }

    #[test]
    fn ell_norm_scaling(p in 1.0f64..6.0, s in 0.1f64..4.0, b in 0.0f64..3.0) {
        let unit = ell_norm(p, 1.0, 1.0).unwrap();
        let v = ell_norm(p, s, b).unwrap();
        prop_assert!((v - unit * s.sqrt() * b).abs() <= 1e-12 * (1.0 + v));
    }

    #[test]
    fn projected_covariance_below_variance(m in 1usize..4, extra in 0usize..4, s in 0.2f64..3.0, seed in any::<u64>()) {
        let dim = m + extra + 1;
        let frame = random_frame(m, dim, seed).unwrap();
        let cov = covariance_and_bound(&frame, dim.min(3), s, "random").unwrap();
        prop_assert!(cov.max_eigenvalue() <= s + 1e-10);
        prop_assert!(cov.eigenvalues.iter().all(|v| *v >= -1e-10));
    }
}
