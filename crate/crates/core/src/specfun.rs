//! Barnes G, K0, the frequency function, the Lukyanov-Zamolodchikov integral
//! and the coupling-to-mass constant.

use core::f64::consts::PI;

use crate::error::{domain, Result};
use crate::numerics::quad::gauss_legendre_unit;

/// Euler-Mascheroni constant.
#[allow(clippy::excessive_precision)]
pub const EULER_GAMMA: f64 = 0.577215664901532860606512090082;

/// Below this `t` the Barnes and LZ integrands are evaluated from their
/// Taylor expansions.
const TAYLOR_CUTOFF: f64 = 1e-3;

/// Parameters of the one-point function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LZParams {
    pub alpha: f64,
    pub mu: f64,
}

impl LZParams {
    pub fn new(alpha: f64, mu: f64) -> Result<Self> {
        if !(alpha.abs() < 0.5) {
            return Err(domain("winding must satisfy |alpha| < 1/2"));
        }
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(domain("mass must be positive"));
        }
        Ok(Self { alpha, mu })
    }
}

/// Coupling `z` and the constant `A = 4 pi e^{-gamma/2}` with `mu = A |z|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingMap {
    pub a: f64,
    pub z: f64,
}

impl CouplingMap {
    pub fn new(z: f64) -> Self {
        Self { a: coupling_constant(), z }
    }
}

pub fn coupling_constant() -> f64 {
    4.0 * PI * libm::exp(-0.5 * EULER_GAMMA)
}

pub fn mass_from_coupling(c: CouplingMap) -> f64 {
    c.a * c.z.abs()
}

/// `mu/2 (a + 1/a)`.
pub fn omega(a: f64, mu: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(domain("omega needs a > 0"));
    }
    Ok(0.5 * mu * (a + 1.0 / a))
}

/// Integrate `f` over `[0, t_max]`: four panels on `[0, 1]`, unit panels after.
fn half_line_panels<F: Fn(f64) -> f64>(f: F, t_max: f64) -> f64 {
    let (x, w) = gauss_legendre_unit(16);
    let mut acc = 0.0;
    let mut panel = |a: f64, b: f64| {
        let h = 0.5 * (b - a);
        let m = 0.5 * (a + b);
        let mut s = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            s += wi * f(m + h * xi);
        }
        acc += h * s;
    };
    for k in 0..4 {
        panel(0.25 * k as f64, 0.25 * (k + 1) as f64);
    }
    let mut a = 1.0;
    while a < t_max {
        panel(a, a + 1.0);
        a += 1.0;
    }
    acc
}

fn barnes_integrand(z: f64, t: f64) -> f64 {
    if t < TAYLOR_CUTOFF {
        let z2 = z * z;
        let z3 = z2 * z;
        let z4 = z2 * z2;
        return (z3 / 3.0 - z2 - z / 6.0)
            + (-z4 / 6.0 + 7.0 * z2 / 6.0) * t
            + (z4 * z / 15.0 - z3 / 9.0 - 2.0 * z2 / 3.0 + z / 30.0) * t * t
            + (-z4 * z2 / 45.0 + z4 / 18.0 + 0.3 * z2) * t * t * t;
    }
    let e2 = libm::exp(-2.0 * t);
    let den = libm::expm1(-2.0 * t);
    // (1 - e^{-2zt}) / (4 sinh^2 t) with e^{-2zt} kept from overflowing
    let num = if t < 1.0 { -libm::expm1(-2.0 * z * t) * e2 } else { e2 - libm::exp(-2.0 * (1.0 + z) * t) };
    (num / (den * den) + 0.5 * z * z * e2 - 0.5 * z / t) / t
}

/// `log G(1 + z)` for real `|z| < 1`.
pub fn barnes_g_log(z: f64) -> Result<f64> {
    if !(z.abs() < 1.0) {
        return Err(domain("barnes_g_log needs |z| < 1"));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    let t_max = libm::ceil(40.0 / (1.0 - z.abs()));
    // beyond t_max only -z/(2t^2) survives
    let tail = -0.5 * z / t_max;
    Ok(0.5 * z * libm::log(2.0 * PI) + half_line_panels(|t| barnes_integrand(z, t), t_max) + tail)
}

/// Integrand of [`lz_integral`], with the removable singularity at `t = 0`
/// handled by its Taylor series.
pub fn lz_integrand(alpha: f64, t: f64) -> f64 {
    let a2 = alpha * alpha;
    if t < TAYLOR_CUTOFF {
        let a4 = a2 * a2;
        return 2.0 * a2
            + (a4 / 3.0 - 7.0 * a2 / 3.0) * t
            + (4.0 * a2 / 3.0) * t * t
            + (2.0 * a4 * a2 / 45.0 - a4 / 9.0 - 0.6 * a2) * t * t * t;
    }
    let a = alpha.abs();
    // sinh(at)/sinh(t) without overflow
    let ratio = libm::exp((a - 1.0) * t) * libm::expm1(-2.0 * a * t) / libm::expm1(-2.0 * t);
    (ratio * ratio - a2 * libm::exp(-2.0 * t)) / t
}

/// `I(alpha) = int_0^inf dt/t [sinh^2(alpha t)/sinh^2 t - alpha^2 e^{-2t}]`.
///
/// Converges for `|alpha| < 1`; the cost grows like `1/(1 - |alpha|)`.
pub fn lz_integral(alpha: f64) -> Result<f64> {
    if !(alpha.abs() < 1.0) {
        return Err(domain("lz_integral needs |alpha| < 1"));
    }
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let t_max = libm::ceil(40.0 / (1.0 - alpha.abs()));
    Ok(half_line_panels(|t| lz_integrand(alpha, t), t_max))
}

/// `(mu/2)^{alpha^2} e^{I(alpha)}`.
pub fn lz_one_point(p: LZParams) -> Result<f64> {
    let i = lz_integral(p.alpha)?;
    Ok(libm::exp(p.alpha * p.alpha * libm::log(0.5 * p.mu) + i))
}

/// Modified Bessel function `K_0(x)` from `int_0^inf ds/(2s) e^{-s - x^2/(4s)}`.
pub fn bessel_k0(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain("bessel_k0 needs x > 0"));
    }
    // s = e^u; the exponent peaks at e^u = x/2 with value -x
    let q = 0.25 * x * x;
    let phi = |u: f64| -libm::exp(u) - q * libm::exp(-u);
    let c = libm::log(0.5 * x);
    let floor = -x - 46.0;
    let mut left = 0.5;
    while phi(c - left) > floor {
        left += 0.5;
    }
    let mut right = 0.5;
    while phi(c + right) > floor {
        right += 0.5;
    }
    let h = 0.125f64.min(0.5 / libm::sqrt(x));
    let n_left = libm::ceil(left / h) as i64;
    let n_right = libm::ceil(right / h) as i64;
    // factor e^{x} out so large arguments keep full relative accuracy
    let mut acc = 0.0;
    for k in -n_left..=n_right {
        acc += libm::exp(phi(c + h * k as f64) + x);
    }
    Ok(0.5 * h * acc * libm::exp(-x))
}
