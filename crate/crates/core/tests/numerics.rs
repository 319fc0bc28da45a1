#![allow(clippy::needless_range_loop)]

use ffcorr_core::numerics::*;
use ffcorr_core::C64;
use proptest::prelude::*;

fn cofactor_det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 1 {
        return m[0][0];
    }
    let mut acc = 0.0;
    for col in 0..n {
        let minor: Vec<Vec<f64>> = m[1..]
            .iter()
            .map(|row| row.iter().enumerate().filter(|(j, _)| *j != col).map(|(_, v)| *v).collect())
            .collect();
        let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * m[0][col] * cofactor_det(&minor);
    }
    acc
}

fn random_matrix(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut g = RandomStream::new(seed, 0).generator();
    (0..n).map(|_| (0..n).map(|_| g.normal()).collect()).collect()
}

#[test]
fn log_det_matches_cofactor_expansion() {
    let r = random_matrix(8, 3);
    // symmetric and diagonally dominant so the determinant is positive
    let m: Vec<Vec<f64>> =
        (0..8).map(|i| (0..8).map(|j| 0.5 * (r[i][j] + r[j][i]) + if i == j { 8.0 } else { 0.0 }).collect()).collect();
    let flat: Vec<f64> = m.iter().flatten().copied().collect();
    let ld = log_det(&DenseMatrix::from_real(8, 8, &flat)).unwrap();
    assert!((ld - cofactor_det(&m).ln()).abs() < 1e-10);
}

#[test]
fn log_det_examples() {
    assert_eq!(log_det(&DenseMatrix::identity(10)).unwrap(), 0.0);
    let d = DenseMatrix::from_real(2, 2, &[2.0, 0.0, 0.0, 2.0]);
    assert!((log_det(&d).unwrap() - 4f64.ln()).abs() < 1e-15);
}

#[test]
fn solve_dense_residual() {
    let r = random_matrix(12, 11);
    let flat: Vec<f64> = r.iter().flatten().copied().collect();
    let a = DenseMatrix::from_real(12, 12, &flat);
    let mut g = RandomStream::new(5, 1).generator();
    let b: Vec<C64> = (0..12).map(|_| C64::new(g.normal(), g.normal())).collect();
    let x = solve_dense(&a, &b).unwrap();
    let ax = a.matvec(&x);
    let res: Vec<C64> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
    assert!(linalg::norm2(&res) <= 1e-10 * linalg::norm2(&b));
    let x = solve_dense(&DenseMatrix::from_real(1, 1, &[2.0]), &[C64::new(4.0, 0.0)]).unwrap();
    assert_eq!(x[0], C64::new(2.0, 0.0));
}

#[test]
fn gauss_legendre_order() {
    // composite 2-point rule is fourth order
    let f = |x: f64| x.sin() * x.exp();
    let exact = 0.5 * (1f64.exp() * (1f64.sin() - 1f64.cos()) + 1.0);
    let err = |p| {
        let rule = QuadratureRule::composite_gauss_legendre(p, 2, 0.0, 1.0).unwrap();
        (integrate_real(f, &rule).unwrap() - exact).abs()
    };
    let ratio = err(8) / err(16);
    assert!((ratio - 16.0).abs() < 1.0, "{ratio}");
}

#[test]
fn covariance_matches_transform() {
    // spectrum of a nearest-neighbour correlated field on an 8x8 torus
    let n = 8;
    let spec: Vec<f64> = (0..n * n)
        .map(|i| {
            let (k1, k2) = ((i / n) as f64, (i % n) as f64);
            let w = 2.0 * std::f64::consts::PI / n as f64;
            1.0 + 0.4 * ((w * k1).cos() + (w * k2).cos())
        })
        .collect();
    let field = SpectralField::new(n, &spec).unwrap();
    let exact = field.exact_covariance((0, 1));
    assert!((exact - 0.2).abs() < 1e-12);
    let (mut work, mut scratch) = (vec![], vec![]);
    let mut prods = vec![];
    for i in 0..5000 {
        let (a, b) = field.sample_pair(RandomStream::new(77, i), &mut work, &mut scratch);
        for f in [a, b] {
            prods.push(f[0] * f[1]);
        }
    }
    let m = prods.iter().sum::<f64>() / prods.len() as f64;
    let v = prods.iter().map(|p| (p - m) * (p - m)).sum::<f64>() / (prods.len() - 1) as f64;
    assert!((m - exact).abs() < 3.0 * (v / prods.len() as f64).sqrt(), "{m} {exact}");
}

#[test]
fn synthesis_is_deterministic() {
    let spec = vec![1.0; 16 * 16];
    let a = spectral_synthesize(16, &spec, RandomStream::new(1, 2)).unwrap();
    let b = spectral_synthesize(16, &spec, RandomStream::new(1, 2)).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn log_det_is_additive(d1 in proptest::collection::vec(0.2f64..5.0, 6), d2 in proptest::collection::vec(0.2f64..5.0, 6), seed in 0u64..1000) {
        // commuting positive definite pair: Q D1 Q^T and Q D2 Q^T
        let r = random_matrix(6, seed);
        let mut q = vec![vec![0.0; 6]; 6];
        for j in 0..6 {
            let mut v: Vec<f64> = (0..6).map(|i| r[i][j]).collect();
            for k in 0..j {
                let p: f64 = (0..6).map(|i| v[i] * q[i][k]).sum();
                for i in 0..6 { v[i] -= p * q[i][k]; }
            }
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for i in 0..6 { q[i][j] = v[i] / nv; }
        }
        let build = |d: &[f64]| DenseMatrix::from_fn(6, 6, |i, j| C64::new((0..6).map(|k| q[i][k] * d[k] * q[j][k]).sum(), 0.0));
        let (a, b) = (build(&d1), build(&d2));
        let lhs = log_det(&a).unwrap() + log_det(&b).unwrap();
        let rhs = log_det(&a.matmul(&b)).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-9);
    }
}
