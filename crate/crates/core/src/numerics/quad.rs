use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::C64;

/// Parameter domain of a rule and the change of variables applied to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// Plain interval `[a, b]`; nodes are the abscissae.
    Finite { a: f64, b: f64 },
    /// Half-line `(0, inf)` through `x = e^s`, `s` in `[-half_width, half_width]`.
    /// Nodes are values of `s`; the Jacobian `e^s` is applied on evaluation.
    LogHalfLine { half_width: f64 },
    /// Half-line through `x = exp(s - e^{-s})`, `s` in `[-half_width, half_width]`.
    /// The extra inner exponential gives double-exponential decay at `x -> 0`
    /// for integrands that are merely bounded there.
    ExpLogHalfLine { half_width: f64 },
    /// Circle of circumference `period`, equispaced nodes starting at 0.
    Circle { period: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub domain: Domain,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Gauss-Legendre rule with `n` points on `[a, b]`.
    pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Insufficient { got: 0, need: 1 });
        }
        if !(b > a) {
            return Err(domain("gauss_legendre needs a < b"));
        }
        let (x, w) = gauss_legendre_unit(n);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        Ok(Self {
            nodes: x.iter().map(|t| mid + half * t).collect(),
            weights: w.iter().map(|v| v * half).collect(),
            domain: Domain::Finite { a, b },
        })
    }

    /// Composite Gauss-Legendre: `panels` equal panels with `per_panel` points each.
    pub fn composite_gauss_legendre(panels: usize, per_panel: usize, a: f64, b: f64) -> Result<Self> {
        if panels == 0 || per_panel == 0 {
            return Err(Error::Insufficient { got: 0, need: 1 });
        }
        if !(b > a) {
            return Err(domain("composite_gauss_legendre needs a < b"));
        }
        let (x, w) = gauss_legendre_unit(per_panel);
        let step = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * per_panel);
        let mut weights = Vec::with_capacity(panels * per_panel);
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * step;
            for (t, v) in x.iter().zip(&w) {
                nodes.push(mid + 0.5 * step * t);
                weights.push(0.5 * step * v);
            }
        }
        Ok(Self { nodes, weights, domain: Domain::Finite { a, b } })
    }

    /// Trapezoid rule in `s` for `x = e^s` over `s` in `[-half_width, half_width]`.
    /// All weights equal the step; the end corrections are dropped because the
    /// integrands this is meant for vanish at both ends of the window.
    pub fn log_half_line(n: usize, half_width: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Insufficient { got: n, need: 2 });
        }
        if !(half_width > 0.0) {
            return Err(domain("log_half_line needs a positive half width"));
        }
        let h = 2.0 * half_width / (n - 1) as f64;
        Ok(Self {
            nodes: (0..n).map(|i| -half_width + h * i as f64).collect(),
            weights: alloc::vec![h; n],
            domain: Domain::LogHalfLine { half_width },
        })
    }

    /// Trapezoid rule in `s` for `x = exp(s - e^{-s})`.
    pub fn exp_log_half_line(n: usize, half_width: f64) -> Result<Self> {
        let mut r = Self::log_half_line(n, half_width)?;
        r.domain = Domain::ExpLogHalfLine { half_width };
        Ok(r)
    }

    /// Equispaced rule on a circle; exact for trigonometric polynomials of
    /// degree below `n`.
    pub fn periodic(n: usize, period: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Insufficient { got: 0, need: 1 });
        }
        if !(period > 0.0) {
            return Err(domain("periodic rule needs a positive period"));
        }
        let h = period / n as f64;
        Ok(Self {
            nodes: (0..n).map(|i| h * i as f64).collect(),
            weights: alloc::vec![h; n],
            domain: Domain::Circle { period },
        })
    }

    /// Tanh-sinh rule on `[a, b]` with step `h` in the transformed variable.
    /// Nodes that round onto an endpoint are dropped.
    pub fn tanh_sinh(h: f64, a: f64, b: f64) -> Result<Self> {
        if !(h > 0.0) || !(b > a) {
            return Err(domain("tanh_sinh needs h > 0 and a < b"));
        }
        let half = 0.5 * (b - a);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let kmax = libm::ceil(4.0 / h) as i64;
        for k in -kmax..=kmax {
            let t = h * k as f64;
            let u = 0.5 * PI * libm::sinh(t);
            let ch = libm::cosh(u);
            // distance of the node from the nearer endpoint, in units of half
            let gap = 1.0 / (libm::exp(u.abs()) * ch);
            let w = h * 0.5 * PI * libm::cosh(t) / (ch * ch) * half;
            if gap * half < f64::EPSILON * (a.abs().max(b.abs()).max(half)) || w == 0.0 {
                continue;
            }
            let x = if u < 0.0 { a + half * gap } else { b - half * gap };
            nodes.push(x);
            weights.push(w);
        }
        Ok(Self { nodes, weights, domain: Domain::Finite { a, b } })
    }

    /// Mapped abscissae and effective weights (Jacobian included).
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let domain = self.domain;
        self.nodes.iter().zip(&self.weights).map(move |(&s, &w)| match domain {
            Domain::LogHalfLine { .. } => {
                let x = libm::exp(s);
                (x, w * x)
            }
            Domain::ExpLogHalfLine { .. } => {
                let e = libm::exp(-s);
                let x = libm::exp(s - e);
                (x, w * x * (1.0 + e))
            }
            _ => (s, w),
        })
    }
}

/// Sum of `w_i f(x_i)` under the rule's change of variables.
pub fn integrate_1d<F: FnMut(f64) -> C64>(mut f: F, rule: &QuadratureRule) -> Result<C64> {
    let mut acc = C64::new(0.0, 0.0);
    for (i, (x, w)) in rule.points().enumerate() {
        let v = f(x);
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::NonFinite { node: i, x });
        }
        acc += v * w;
    }
    Ok(acc)
}

/// Real-valued convenience wrapper around [`integrate_1d`].
pub fn integrate_real<F: FnMut(f64) -> f64>(mut f: F, rule: &QuadratureRule) -> Result<f64> {
    integrate_1d(|x| C64::new(f(x), 0.0), rule).map(|z| z.re)
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// nodes ascending.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = alloc::vec![0.0; n];
    let mut w = alloc::vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[m - 1] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}
