use std::sync::Arc;

use ffcorr_core::dirac::*;
use ffcorr_core::free_field::{s0_green, BranchConfig};
use ffcorr_core::{Error, C64};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn pair() -> (BranchConfig, [C64; 2]) {
    let x = [c(-0.5, 0.0), c(0.5, 0.0)];
    (BranchConfig::neutral_pair(0.25, x[0], x[1]).unwrap(), x)
}

fn system(n: usize, mu: f64, extra: &[C64]) -> Arc<DiracSystem> {
    let (cfg, x) = pair();
    let mut pts = x.to_vec();
    pts.extend_from_slice(extra);
    let mesh = Arc::new(DiskMesh::new(4.0, n, DEFAULT_REFINE, &pts).unwrap());
    Arc::new(DiracSystem::new(mesh, cfg, mu).unwrap())
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

#[test]
fn mesh_covers_the_disk() {
    for (l, n) in [(4.0, 16), (3.0, 30), (8.0, 24)] {
        let pts = [c(0.3, -0.2), c(-1.1, 0.7)];
        let m = DiskMesh::new(l, n, 4, &pts).unwrap();
        let h = m.cell_size;
        let full = std::f64::consts::PI * l * l;
        assert!((m.total_area() - full).abs() <= 2.0 * h * 2.0 * std::f64::consts::PI * l);
        for cell in m.cells.iter().filter(|cl| cl.size == h) {
            for p in &pts {
                assert!((cell.center - p).norm() >= 0.25 * h);
            }
        }
        assert!(m.cells.iter().all(|cl| cl.size == h || (cl.size - h / 4.0).abs() < 1e-15));
        assert!(m.cells.iter().all(|cl| cl.center.norm() < l + h));
    }
    assert!(DiskMesh::new(-1.0, 16, 4, &[]).is_err());
    assert!(DiskMesh::new(1.0, 2, 4, &[]).is_err());
}

#[test]
fn cauchy_matrix_is_antisymmetric() {
    let m = DiskMesh::new(2.0, 12, 4, &[c(0.1, 0.2)]).unwrap();
    let k = m.cauchy_matrix();
    for i in 0..m.len() {
        for j in 0..m.len() {
            assert_eq!(k[(i, j)], -k[(j, i)]);
        }
    }
    let x: Vec<C64> = (0..m.len()).map(|i| c((i as f64).sin(), (i as f64 * 0.7).cos())).collect();
    let mut y = vec![C64::new(0.0, 0.0); m.len()];
    m.apply_cauchy(&x, false, &mut y);
    let d = k.matvec(&x);
    for (a, b) in y.iter().zip(&d) {
        assert!((a - b).norm() < 1e-10);
    }
}

#[test]
fn massless_solution_is_free() {
    let sys = system(16, 0.0, &[]);
    let (cfg, _) = pair();
    let mut g = ffcorr_core::numerics::RandomStream::new(11, 0).generator();
    for _ in 0..10 {
        let z = c(6.0 * g.uniform() - 3.0, 6.0 * g.uniform() - 3.0);
        let w = c(4.0 * g.uniform() - 2.0, 4.0 * g.uniform() - 2.0);
        let sol = solve_green(&sys, w).unwrap();
        assert!(sol.delta11.iter().chain(&sol.delta21).all(|d| d.norm() == 0.0));
        let s = reconstruct_s(&sol, z).unwrap();
        let s0 = s0_green(&cfg, z, w).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((s[i][j] - s0[i][j]).norm() <= 1e-12 * s0[1][0].norm(), "{i}{j} {} {}", s[i][j], s0[i][j]);
            }
        }
    }
}

#[test]
fn h_vanishes_and_scales_with_mass() {
    let w = c(-1.0, -0.6);
    let zero = build_h(&system(16, 0.0, &[w]), w).unwrap();
    assert!(zero.iter().all(|v| v[0].norm() == 0.0 && v[1].norm() == 0.0));
    let a = build_h(&system(16, 0.3, &[w]), w).unwrap();
    let b = build_h(&system(16, 0.6, &[w]), w).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x[0].norm(), 0.0);
        assert!((y[1] - 4.0 * x[1]).norm() <= 1e-12 * y[1].norm());
    }
}

#[test]
fn h_under_mesh_refinement() {
    // smooth test-function moment of h, on meshes h, h/2, h/4
    let w = c(-1.0, -0.6);
    let z0 = c(0.8, 1.0);
    let moment = |n: usize| {
        let sys = system(n, 0.5, &[w]);
        let h = build_h(&sys, w).unwrap();
        sys.mesh
            .cells
            .iter()
            .zip(&h)
            .map(|(cl, v)| v[1] * cl.area() * (-(cl.center - z0).norm_sqr()).exp())
            .sum::<C64>()
    };
    let (m1, m2, m4) = (moment(12), moment(24), moment(48));
    assert!(rel(m1, m2) <= 0.25, "{m1} {m2}");
    assert!(rel(m2, m4) <= 0.12, "{m2} {m4}");
}

#[test]
fn source_placement_is_checked() {
    let sys = system(16, 0.5, &[]);
    assert!(matches!(solve_green(&sys, c(5.0, 0.0)), Err(Error::Placement(_))));
    assert!(matches!(solve_green(&sys, c(0.5, 0.0)), Err(Error::Placement(_))));
    // unrefined base cell center
    let h = sys.mesh.cell_size;
    let center = c(-4.0 + 2.5 * h, -4.0 + 10.5 * h);
    assert!(matches!(build_h(&sys, center + c(1e-3, 0.0)), Err(Error::Placement(_))));
}

#[test]
fn mass_parity_and_adjoint() {
    let (z, w) = (c(0.3, 1.2), c(-1.0, -0.6));
    let p = system(24, 0.4, &[z, w]);
    let m = system(24, -0.4, &[z, w]);
    let s = reconstruct_s(&solve_green(&p, w).unwrap(), z).unwrap();
    let sm = reconstruct_s(&solve_green(&m, w).unwrap(), z).unwrap();
    let adj = reconstruct_s(&solve_green(&m, z).unwrap(), w).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            let parity = if i == j { -1.0 } else { 1.0 };
            assert!(rel(sm[i][j] * parity, s[i][j]) < 1e-6);
            assert!(rel(-adj[j][i], s[i][j].conj()) < 1e-6, "{i}{j}");
        }
    }
}

#[test]
fn series_error_is_cubic() {
    let (z, w) = (c(0.3, 1.2), c(-1.0, -0.6));
    let err = |mu: f64| {
        let sys = system(24, mu, &[z, w]);
        let s = reconstruct_s(&solve_green(&sys, w).unwrap(), z).unwrap();
        let p = perturbative_column(&sys, z, w).unwrap();
        ((s[0][0] - p[0]).norm_sqr() + (s[1][0] - p[1]).norm_sqr()).sqrt()
    };
    let ratio = err(0.2) / err(0.1);
    assert!((6.0..=10.0).contains(&ratio), "{ratio}");
}

#[test]
fn delta11_is_real_on_the_diagonal() {
    let w = c(0.9, -1.3);
    let sys = system(16, 0.7, &[w]);
    let sol = solve_green(&sys, w).unwrap();
    let (d11, _) = sol.delta_at(w);
    assert!(d11.im.abs() <= 1e-10 * d11.norm(), "{d11}");
}

#[test]
fn delta_depends_only_on_modulus() {
    let w = c(0.9, -1.3);
    let (cfg, x) = pair();
    let mesh = Arc::new(DiskMesh::new(4.0, 16, 4, &[x[0], x[1], w]).unwrap());
    let a = Arc::new(DiracSystem::new(mesh.clone(), cfg.clone(), 0.6).unwrap());
    let b = Arc::new(DiracSystem::new(mesh.clone(), cfg.clone().with_cut_angle(2.0), 0.6).unwrap());
    let swapped = BranchConfig::new(vec![x[1], x[0]], vec![-0.25, 0.25]).unwrap();
    let s = Arc::new(DiracSystem::new(mesh, swapped, 0.6).unwrap());
    let da = solve_green(&a, w).unwrap();
    for other in [b, s] {
        let db = solve_green(&other, w).unwrap();
        for (p, q) in da.delta21.iter().zip(&db.delta21) {
            assert!((p - q).norm() <= 1e-12 * p.norm().max(1e-12));
        }
        let z = c(-0.7, 1.9);
        let (sa, sb) = (reconstruct_s(&da, z).unwrap(), reconstruct_s(&db, z).unwrap());
        // the cut changes phases only
        assert!((sa[1][0].norm() - sb[1][0].norm()).abs() <= 1e-10 * sa[1][0].norm());
    }
}

#[test]
fn exterior_decay() {
    let w = c(0.2, 0.9);
    let sys = system(24, 1.0, &[w]);
    let sol = solve_green(&sys, w).unwrap();
    let l = sys.mesh.radius;
    let h = sys.mesh.cell_size;
    let mut mags: Vec<f64> = sys
        .mesh
        .cells
        .iter()
        .zip(&sol.delta21)
        .filter(|(cl, _)| cl.center.norm() < 0.5 * l)
        .map(|(_, d)| d.norm())
        .collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = mags[mags.len() / 2];
    for k in 0..8 {
        let z = C64::from_polar(l - h, k as f64 * std::f64::consts::PI / 4.0);
        assert!(sol.delta_at(z).1.norm() <= 3.0 * median);
    }
}

#[test]
fn branch_derivative_trivial_cases() {
    let x = [c(-0.5, 0.0), c(0.5, 0.0), c(0.0, 1.0)];
    let cfg = BranchConfig::new(x.to_vec(), vec![0.25, -0.25, 0.0]).unwrap();
    let mesh = Arc::new(DiskMesh::new(4.0, 16, 4, &x).unwrap());
    let sys = DiracSystem::new(mesh.clone(), cfg.clone(), 1.0).unwrap();
    assert_eq!(log_deriv_branch(&sys, 2).unwrap().norm(), 0.0);
    let z0 = sys.with_config(cfg, 0.0).unwrap();
    assert_eq!(log_deriv_branch(&z0, 0).unwrap().norm(), 0.0);
    let far = BranchConfig::neutral_pair(0.25, c(0.0, 0.0), c(3.9, 0.0)).unwrap();
    let bad = DiracSystem::new(Arc::new(DiskMesh::new(4.0, 16, 4, &far.punctures).unwrap()), far, 1.0).unwrap();
    assert!(matches!(log_deriv_branch(&bad, 1), Err(Error::Placement(_))));
    let charged = BranchConfig::new(vec![c(0.0, 0.0)], vec![0.25]).unwrap();
    assert!(log_deriv_branch(&DiracSystem::new(mesh, charged, 1.0).unwrap(), 0).is_err());
}

#[test]
fn branch_derivative_near_fredholm() {
    let fd = fredholm_log_derivative(0.25, 1.0, 1.0, 1e-3).unwrap();
    assert!((fd - 0.10362).abs() < 1e-4, "{fd}");
    let (sd, _) = pair_solver_derivative(0.25, 1.0, 1.0, 4.0, 30, 4).unwrap();
    assert!(((sd - fd) / fd).abs() < 0.05, "{sd} {fd}");
}

#[test]
fn log_z_tilde_symmetries() {
    let sys = system(10, 0.8, &[]);
    assert_eq!(log_z_tilde(&sys.with_config(sys.cfg.clone(), 0.0).unwrap(), 8).unwrap().value, 0.0);
    let a = log_z_tilde(&sys, 6).unwrap();
    let b = log_z_tilde(&sys.with_config(sys.cfg.clone(), -0.8).unwrap(), 6).unwrap();
    assert!((a.value - b.value).abs() <= 1e-6 * a.value.abs());
    assert!(a.imag.abs() <= 1e-6 * a.value.abs());
    assert!(a.value.exp() > 0.0 && a.value.is_finite());
    assert!(matches!(log_z_tilde(&sys, 3), Err(Error::Insufficient { .. })));
}

#[test]
fn factorization_identity() {
    let (z, w) = (c(0.3, 1.2), c(-1.0, -0.6));
    let q = FactorizationQuery { z, w, step: 1e-4 };
    let r0 = factorization_residual(&system(16, 0.0, &[z, w]), 1, q).unwrap();
    assert!(r0 <= 1e-6, "{r0}");
    let coarse = factorization_residual(&system(12, 0.5, &[z, w]), 1, q).unwrap();
    let fine = factorization_residual(&system(24, 0.5, &[z, w]), 1, q).unwrap();
    assert!(coarse <= 0.1 && fine < coarse, "{coarse} {fine}");
    let x = [c(-0.5, 0.0), c(0.5, 0.0), c(0.0, 1.0)];
    let cfg = BranchConfig::new(x.to_vec(), vec![0.25, -0.25, 0.0]).unwrap();
    let mesh = Arc::new(DiskMesh::new(4.0, 12, 4, &[x[0], x[1], x[2], z, w]).unwrap());
    let sys = DiracSystem::new(mesh, cfg, 0.5).unwrap();
    assert_eq!(factorization_residual(&sys, 2, q).unwrap(), 0.0);
    assert!(factorization_residual(&sys, 1, FactorizationQuery { step: 1.0, ..q }).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn square_integral_is_additive(zr in -2.0f64..2.0, zi in -2.0f64..2.0, a in 0.1f64..1.5) {
        let whole = cauchy_square(c(zr, zi), c(0.0, 0.0), a);
        let q = 0.25 * a;
        let parts: C64 = [c(-q, -q), c(q, -q), c(q, q), c(-q, q)]
            .iter()
            .map(|o| cauchy_square(c(zr, zi), *o, 0.5 * a))
            .sum();
        prop_assert!((whole - parts).norm() <= 1e-11 * whole.norm().max(1.0));
    }

    #[test]
    fn square_integral_far_field(r in 3.0f64..20.0, t in 0.0f64..6.3, a in 0.1f64..1.0) {
        // a^2/z plus a^6/(60 z^5): the moments of orders 1 to 3 of a square vanish
        let z = C64::from_polar(r * a, t);
        let e = cauchy_square(z, c(0.0, 0.0), a);
        prop_assert!((e - a * a / z).norm() <= 0.02 * a / r.powi(5) + 1e-12);
    }
}
