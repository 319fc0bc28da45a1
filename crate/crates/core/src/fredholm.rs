//! Two-point function as a Fredholm determinant on `L^2(0, inf)`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::numerics::linalg::{DenseMatrix, Lu};
use crate::numerics::quad::QuadratureRule;
use crate::specfun::barnes_g_log;
use crate::C64;

/// Largest admissible boundary value of a truncated integrand.
pub const WINDOW_TOL: f64 = 1e-14;

/// Default node count for both the outer and the inner rule.
pub const DEFAULT_NODES: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPointSpec {
    pub alpha: f64,
    pub mu: f64,
    pub r: f64,
}

impl TwoPointSpec {
    pub fn new(alpha: f64, mu: f64, r: f64) -> Result<Self> {
        if !(alpha.abs() < 0.5) {
            return Err(domain("winding must satisfy |alpha| < 1/2"));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(domain("mass must be positive"));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(domain("separation must be positive"));
        }
        Ok(Self { alpha, mu, r })
    }

    /// The only length scale that enters the kernel.
    pub fn t(&self) -> f64 {
        self.mu * self.r
    }

    /// `sin^2(pi alpha) / pi^2`.
    pub fn coupling(&self) -> f64 {
        let s = libm::sin(PI * self.alpha);
        s * s / (PI * PI)
    }

    /// Half width of the window in `s = log a`. The kernel carries
    /// `exp(-(t/4)(a + 1/a))`, so `a` must reach about `160/t` on both sides.
    pub fn default_half_width(&self) -> f64 {
        (libm::log(160.0 / self.t()) + 1.0).max(3.0)
    }
}

/// Node counts and window of the discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    pub outer: usize,
    pub inner: usize,
    /// Window half width in log variables; `None` picks it from `mu r`.
    pub half_width: Option<f64>,
}

impl Default for Resolution {
    fn default() -> Self {
        Self { outer: DEFAULT_NODES, inner: DEFAULT_NODES, half_width: None }
    }
}

impl Resolution {
    pub fn nodes(outer: usize, inner: usize) -> Self {
        Self { outer, inner, half_width: None }
    }
}

/// Inner weights `e^{-t(u + 1/u)/2} u^{-2 alpha} du` on the log rule.
fn inner_weights(spec: &TwoPointSpec, rule: &QuadratureRule) -> (Vec<f64>, Vec<f64>) {
    let t = spec.t();
    rule.points().map(|(u, w)| (u, w * libm::exp(-0.5 * t * (u + 1.0 / u)) * libm::pow(u, -2.0 * spec.alpha))).unzip()
}

/// Outer factor `e^{-t(a + 1/a)/4} a^alpha`.
fn outer_factor(spec: &TwoPointSpec, a: f64) -> f64 {
    libm::exp(-0.25 * spec.t() * (a + 1.0 / a)) * libm::pow(a, spec.alpha)
}

fn check_window(spec: &TwoPointSpec, half_width: f64) -> Result<()> {
    // the u-integrand is largest at the window ends for a = b = 1
    let edge = |u: f64| {
        libm::exp(-0.5 * spec.t() * (u + 1.0 / u)) * libm::pow(u, 1.0 - 2.0 * spec.alpha) / ((1.0 + u) * (1.0 + u))
    };
    let boundary = edge(libm::exp(half_width)).max(edge(libm::exp(-half_width)));
    if boundary > WINDOW_TOL {
        return Err(Error::Window { boundary });
    }
    Ok(())
}

/// `K(a, b)` with the `u`-integral done on `inner_nodes` log-mapped nodes.
pub fn kernel_value(spec: &TwoPointSpec, a: f64, b: f64, inner_nodes: usize) -> Result<f64> {
    kernel_value_in_window(spec, a, b, inner_nodes, spec.default_half_width())
}

pub fn kernel_value_in_window(spec: &TwoPointSpec, a: f64, b: f64, inner_nodes: usize, half_width: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(domain("kernel arguments must be positive"));
    }
    check_window(spec, half_width)?;
    if spec.alpha == 0.0 {
        return Ok(0.0);
    }
    let rule = QuadratureRule::log_half_line(inner_nodes, half_width)?;
    let (u, w) = inner_weights(spec, &rule);
    let mut acc = 0.0;
    for (ui, wi) in u.iter().zip(&w) {
        acc += wi / ((a + ui) * (b + ui));
    }
    Ok(-spec.coupling() * outer_factor(spec, a) * outer_factor(spec, b) * acc)
}

/// Symmetrized Nystrom matrix `sqrt(w_i) K(a_i, a_j) sqrt(w_j)`.
#[derive(Debug, Clone)]
pub struct DiscretizedKernel {
    pub spec: TwoPointSpec,
    pub rule: QuadratureRule,
    pub inner_rule: QuadratureRule,
    pub matrix: DenseMatrix,
}

impl DiscretizedKernel {
    pub fn new(spec: TwoPointSpec, res: Resolution) -> Result<Self> {
        if res.outer < 16 || res.inner < 16 {
            return Err(Error::Insufficient { got: res.outer.min(res.inner), need: 16 });
        }
        let half_width = res.half_width.unwrap_or_else(|| spec.default_half_width());
        check_window(&spec, half_width)?;
        let rule = QuadratureRule::log_half_line(res.outer, half_width)?;
        let inner_rule = QuadratureRule::log_half_line(res.inner, half_width)?;
        let n = res.outer;
        let (a, wa): (Vec<f64>, Vec<f64>) = rule.points().unzip();
        let (u, wu) = inner_weights(&spec, &inner_rule);
        let c = spec.coupling();
        let scale: Vec<f64> = a.iter().zip(&wa).map(|(&ai, &wi)| libm::sqrt(wi) * outer_factor(&spec, ai)).collect();
        // g_i(u) = 1/(a_i + u), shared by every row pair
        let g: Vec<Vec<f64>> = a.iter().map(|&ai| u.iter().map(|&uk| 1.0 / (ai + uk)).collect()).collect();
        let mut matrix = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for k in 0..u.len() {
                    acc += g[i][k] * wu[k] * g[j][k];
                }
                let v = C64::new(-c * scale[i] * scale[j] * acc, 0.0);
                matrix.data[i * n + j] = v;
                matrix.data[j * n + i] = v;
            }
        }
        Ok(Self { spec, rule, inner_rule, matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows
    }

    /// `(log|det(I - M)|, arg det(I - M))` without the realness check.
    pub fn log_det_polar(&self) -> Result<(f64, f64)> {
        let n = self.dim();
        let mut a = self.matrix.clone();
        for v in a.data.iter_mut() {
            *v = -*v;
        }
        for i in 0..n {
            a.data[i * n + i] += 1.0;
        }
        Ok(Lu::factor(a)?.log_det_polar())
    }

    /// `log det(I - M)`. Since `-M` is positive semidefinite the factorization
    /// is `L L^T = I + P`, `P = -M`, with pivots kept as `1 + d_i` so that
    /// determinants close to one keep full relative accuracy.
    pub fn log_det(&self) -> Result<f64> {
        let n = self.dim();
        let mut l = alloc::vec![0.0f64; n * n];
        let mut acc = 0.0;
        for j in 0..n {
            let mut d = -self.matrix.data[j * n + j].re;
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > -1.0) {
                // not positive definite: report through the general route
                let (lg, arg) = self.log_det_polar()?;
                let m = libm::exp(lg);
                return Err(Error::Conditioning { re: m * libm::cos(arg), im: m * libm::sin(arg) });
            }
            acc += libm::log1p(d);
            let ljj = libm::sqrt(1.0 + d);
            l[j * n + j] = ljj;
            for i in j + 1..n {
                let mut v = -self.matrix.data[i * n + j].re;
                for k in 0..j {
                    v -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = v / ljj;
            }
        }
        Ok(acc)
    }

    /// `Tr M^k` for `k = 1..=order` by repeated multiplication.
    pub fn traces(&self, order: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(order);
        let mut p = self.matrix.clone();
        for k in 0..order {
            if k > 0 {
                p = p.matmul(&self.matrix);
            }
            out.push((0..self.dim()).map(|i| p[(i, i)].re).sum());
        }
        out
    }
}

/// `det(I - K)` with `outer`/`inner` nodes in the default window.
pub fn det_one_minus_k(spec: &TwoPointSpec, outer_nodes: usize, inner_nodes: usize) -> Result<f64> {
    log_det_one_minus_k(spec, Resolution::nodes(outer_nodes, inner_nodes)).map(libm::exp)
}

pub fn log_det_one_minus_k(spec: &TwoPointSpec, res: Resolution) -> Result<f64> {
    if spec.alpha == 0.0 {
        return Ok(0.0);
    }
    DiscretizedKernel::new(*spec, res)?.log_det()
}

/// `log` of the `mu`-independent part of the normalization,
/// `-2 log G(1 + alpha) - 2 log G(1 - alpha)`.
pub fn barnes_normalization_log(alpha: f64) -> Result<f64> {
    Ok(-2.0 * barnes_g_log(alpha)? - 2.0 * barnes_g_log(-alpha)?)
}

/// Normalized two-point function `(mu/2)^{2 alpha^2} G(1+a)^{-2} G(1-a)^{-2} det(1 - K)`,
/// which behaves like `r^{-2 alpha^2}` as `r -> 0`.
pub fn two_point(spec: &TwoPointSpec, res: Resolution) -> Result<f64> {
    log_two_point(spec, res).map(libm::exp)
}

pub fn log_two_point(spec: &TwoPointSpec, res: Resolution) -> Result<f64> {
    if spec.alpha == 0.0 {
        return Ok(0.0);
    }
    let a2 = spec.alpha * spec.alpha;
    Ok(2.0 * a2 * libm::log(0.5 * spec.mu) + barnes_normalization_log(spec.alpha)? + log_det_one_minus_k(spec, res)?)
}

/// `c_2(t, theta) = int int E(v1) E(v2) (v1/v2)^theta / (v1 + v2)^2`,
/// `E(v) = exp(-(t/2)(v + 1/v))`, at `theta = 2 alpha`.
pub fn basor_tracy_c2(alpha: f64, t: f64) -> Result<f64> {
    basor_tracy_c2_with_nodes(alpha, t, 256)
}

pub fn basor_tracy_c2_with_nodes(alpha: f64, t: f64, nodes: usize) -> Result<f64> {
    if !(t > 0.0) {
        return Err(domain("basor_tracy_c2 needs t > 0"));
    }
    let theta = 2.0 * alpha;
    let half_width = (libm::log(80.0 / t) + 1.0).max(3.0);
    let rule = QuadratureRule::log_half_line(nodes, half_width)?;
    let pts: Vec<(f64, f64)> = rule.points().map(|(v, w)| (v, w * libm::exp(-0.5 * t * (v + 1.0 / v)))).collect();
    let mut acc = 0.0;
    for &(v1, w1) in &pts {
        let p1 = libm::pow(v1, theta);
        for &(v2, w2) in &pts {
            let s = v1 + v2;
            acc += w1 * w2 * p1 * libm::pow(v2, -theta) / (s * s);
        }
    }
    Ok(acc)
}
