//! Independent oracles shared by the module tests and the acceptance suite.
#![allow(dead_code)]

use ffcorr_core::free_field::CumulantQuery;
use ffcorr_core::numerics::quad::gauss_legendre_unit;
use ffcorr_core::numerics::RandomStream;
use ffcorr_core::C64;
use std::f64::consts::PI;

pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// K(a, b) by adaptive Simpson in x with u = x/(1-x).
pub fn kernel_oracle(alpha: f64, t: f64, a: f64, b: f64) -> f64 {
    let c = (PI * alpha).sin().powi(2) / (PI * PI);
    let f = |x: f64| {
        if x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        let u = x / (1.0 - x);
        let jac = 1.0 / ((1.0 - x) * (1.0 - x));
        (-0.5 * t * (u + 1.0 / u)).exp() * u.powf(-2.0 * alpha) / ((a + u) * (b + u)) * jac
    };
    let outer = (-0.25 * t * (a + 1.0 / a + b + 1.0 / b)).exp() * (a * b).powf(alpha);
    -c * outer * adaptive_simpson(&f, 0.0, 1.0, 1e-15)
}

/// Traces of K^1..K^3 on a composite Gauss-Legendre rule in log variables.
pub fn trace_oracle(alpha: f64, t: f64) -> [f64; 3] {
    let c = (PI * alpha).sin().powi(2) / (PI * PI);
    let (x, w) = gauss_legendre_unit(10);
    let half = (80.0 / t).ln() + 2.0;
    let panels = 20;
    let mut pts = vec![];
    for p in 0..panels {
        let lo = -half + 2.0 * half * p as f64 / panels as f64;
        let hw = half / panels as f64;
        for (xi, wi) in x.iter().zip(&w) {
            let s = lo + hw * (1.0 + xi);
            pts.push((s.exp(), wi * hw * s.exp()));
        }
    }
    let n = pts.len();
    let e = |v: f64| (-0.5 * t * (v + 1.0 / v)).exp();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (pts[i].0, pts[j].0);
            let mut acc = 0.0;
            for &(u, wu) in &pts {
                acc += wu * e(u) * u.powf(-2.0 * alpha) / ((a + u) * (b + u));
            }
            k[i * n + j] = -c * (e(a) * e(b)).sqrt() * (a * b).powf(alpha) * acc * pts[j].1;
        }
    }
    let mut p = k.clone();
    let mut out = [0.0; 3];
    for (o, slot) in out.iter_mut().enumerate() {
        if o > 0 {
            let mut q = vec![0.0; n * n];
            for i in 0..n {
                for l in 0..n {
                    let pil = p[i * n + l];
                    for j in 0..n {
                        q[i * n + j] += pil * k[l * n + j];
                    }
                }
            }
            p = q;
        }
        *slot = (0..n).map(|i| p[i * n + i]).sum();
    }
    out
}

/// Monte Carlo estimate of the n = 2 q-integral: half-Cauchy radius, uniform
/// angle with four rotated copies.
pub fn cumulant_mc(p: C64, mu: f64, samples: usize) -> (C64, f64) {
    let q = CumulantQuery::new(vec![p], mu).unwrap();
    let sigma = p.norm().max(mu.abs());
    let mut g = RandomStream::new(99, 5).generator();
    let (mut s, mut s2) = (C64::new(0.0, 0.0), 0.0);
    for _ in 0..samples {
        let rho = sigma * (0.5 * PI * g.uniform()).tan();
        let theta = 2.0 * PI * g.uniform();
        let dens = 2.0 / (PI * sigma * (1.0 + (rho / sigma).powi(2)));
        let avg: C64 =
            (0..4).map(|k| q.integrand(C64::from_polar(rho, theta + 0.5 * PI * k as f64))).sum::<C64>() / 4.0;
        let v = avg * (2.0 * PI * rho / dens);
        s += v;
        s2 += v.norm_sqr();
    }
    let n = samples as f64;
    let mean = s / n;
    let var = (s2 / n - mean.norm_sqr()) / (n - 1.0);
    (mean, var.sqrt())
}
