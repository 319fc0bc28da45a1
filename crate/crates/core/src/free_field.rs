//! Closed-form massless objects: the branching function `rho`, fractional GFF
//! correlations, the twisted Green's function `S_0`, bosonization products,
//! and the sine-Gordon cumulant kernels in momentum space.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::numerics::linalg::{DenseMatrix, Lu};
use crate::specfun::EULER_GAMMA;
use crate::C64;

/// Punctures closer than this are treated as coincident.
pub const MIN_SEPARATION: f64 = 1e-10;

/// Punctures `x_j` with windings `alpha_j`; `rho(z) = prod (z - x_j)^{alpha_j}`.
///
/// Phases of `rho` use `arg(z - x_j)` in `[cut_angle, cut_angle + 2 pi)`, so the
/// default cut runs from each puncture along the positive real direction.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchConfig {
    pub punctures: Vec<C64>,
    pub windings: Vec<f64>,
    pub neutral: bool,
    pub cut_angle: f64,
}

impl BranchConfig {
    pub fn new(punctures: Vec<C64>, windings: Vec<f64>) -> Result<Self> {
        if punctures.len() != windings.len() {
            return Err(domain("punctures and windings differ in length"));
        }
        for (j, a) in windings.iter().enumerate() {
            if !(a.abs() < 0.5) {
                return Err(Error::Range { index: j, value: *a });
            }
        }
        for i in 0..punctures.len() {
            for j in 0..i {
                if (punctures[i] - punctures[j]).norm() <= MIN_SEPARATION {
                    return Err(domain("punctures must be distinct"));
                }
            }
        }
        let neutral = windings.iter().sum::<f64>().abs() <= 1e-12;
        Ok(Self { punctures, windings, neutral, cut_angle: 0.0 })
    }

    /// As [`BranchConfig::new`] with an explicit neutrality flag that must agree
    /// with the windings.
    pub fn with_neutral_flag(punctures: Vec<C64>, windings: Vec<f64>, neutral: bool) -> Result<Self> {
        let cfg = Self::new(punctures, windings)?;
        if cfg.neutral != neutral {
            return Err(domain("neutral flag disagrees with the windings"));
        }
        Ok(cfg)
    }

    pub fn empty() -> Self {
        Self { punctures: Vec::new(), windings: Vec::new(), neutral: true, cut_angle: 0.0 }
    }

    pub fn neutral_pair(alpha: f64, x1: C64, x2: C64) -> Result<Self> {
        Self::new(alloc::vec![x1, x2], alloc::vec![alpha, -alpha])
    }

    pub fn with_cut_angle(mut self, angle: f64) -> Self {
        self.cut_angle = angle;
        self
    }

    /// Same punctures with every winding negated (`rho -> 1/rho`).
    pub fn negated(&self) -> Self {
        Self { windings: self.windings.iter().map(|a| -a).collect(), ..self.clone() }
    }

    pub fn len(&self) -> usize {
        self.punctures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.punctures.is_empty()
    }

    pub fn sum_alpha_sq(&self) -> f64 {
        self.windings.iter().map(|a| a * a).sum()
    }

    /// `log |rho(z)|^2`; `-inf`/`+inf` at punctures with positive/negative winding.
    pub fn log_abs_rho_sq(&self, z: C64) -> f64 {
        let mut acc = 0.0;
        for (x, a) in self.punctures.iter().zip(&self.windings) {
            if *a != 0.0 {
                acc += a * libm::log((z - x).norm_sqr());
            }
        }
        acc
    }

    /// `arg(z - x)` in `[cut_angle, cut_angle + 2 pi)`.
    fn branch_arg(&self, d: C64) -> f64 {
        let mut t = libm::atan2(d.im, d.re) - self.cut_angle;
        t -= 2.0 * PI * libm::floor(t / (2.0 * PI));
        if t >= 2.0 * PI {
            t = 0.0;
        }
        t + self.cut_angle
    }

    /// `rho(z)` on the configured branch.
    pub fn rho(&self, z: C64) -> C64 {
        let mut lg = C64::new(0.0, 0.0);
        for (x, a) in self.punctures.iter().zip(&self.windings) {
            let d = z - x;
            lg += *a * C64::new(libm::log(d.norm()), self.branch_arg(d));
        }
        lg.exp()
    }
}

/// `|rho(z)|^2 = prod |z - x_j|^{2 alpha_j}`.
pub fn abs_rho_sq(cfg: &BranchConfig, z: C64) -> Result<f64> {
    for (j, (x, a)) in cfg.punctures.iter().zip(&cfg.windings).enumerate() {
        if z == *x && *a < 0.0 {
            return Err(Error::Range { index: j, value: *a });
        }
    }
    Ok(libm::exp(cfg.log_abs_rho_sq(z)))
}

/// `(2 e^{-gamma/2})^{sum alpha^2} prod_{j<k} |x_j - x_k|^{2 alpha_j alpha_k}`
/// for neutral configurations and `0` otherwise.
pub fn gff_fractional_correlation(cfg: &BranchConfig) -> Result<f64> {
    if !cfg.neutral {
        return Ok(0.0);
    }
    let mut lg = cfg.sum_alpha_sq() * libm::log(2.0 * libm::exp(-0.5 * EULER_GAMMA));
    lg += pair_log_product(cfg);
    Ok(libm::exp(lg))
}

fn pair_log_product(cfg: &BranchConfig) -> f64 {
    let mut lg = 0.0;
    let n = cfg.len();
    for j in 0..n {
        for k in j + 1..n {
            lg += 2.0 * cfg.windings[j] * cfg.windings[k] * libm::log((cfg.punctures[j] - cfg.punctures[k]).norm());
        }
    }
    lg
}

/// `Z_rho(0) = prod_{r<s} |x_r - x_s|^{2 alpha_r alpha_s}` for neutral `rho`.
pub fn z_rho_zero(cfg: &BranchConfig) -> Result<f64> {
    if !cfg.neutral {
        return Err(domain("z_rho_zero needs a neutral configuration"));
    }
    Ok(libm::exp(pair_log_product(cfg)))
}

/// Massless twisted Green's function; only the off-diagonal entries are nonzero.
pub fn s0_green(cfg: &BranchConfig, z: C64, w: C64) -> Result<[[C64; 2]; 2]> {
    if (z - w).norm() == 0.0 {
        return Err(Error::Placement(alloc::string::String::from("s0_green needs z != w")));
    }
    let q = cfg.rho(w) / cfg.rho(z);
    let s21 = q / (2.0 * PI * (z - w));
    let s12 = q.inv().conj() / (2.0 * PI * (z - w).conj());
    // conj(rho(z))/conj(rho(w)) = conj(1/q)
    let zero = C64::new(0.0, 0.0);
    Ok([[zero, s12], [s21, zero]])
}

fn check_points(cfg: &BranchConfig, pts: &[C64]) -> Result<()> {
    for (i, p) in pts.iter().enumerate() {
        for x in &cfg.punctures {
            if (p - x).norm() <= MIN_SEPARATION {
                return Err(Error::Placement(alloc::format!("point {i} sits on a puncture")));
            }
        }
        for q in &pts[..i] {
            if (p - q).norm() <= MIN_SEPARATION {
                return Err(Error::Placement(alloc::format!("point {i} repeats an earlier point")));
            }
        }
    }
    Ok(())
}

fn rho_ratio_log(cfg: &BranchConfig, plus: &[C64], minus: &[C64]) -> f64 {
    plus.iter().map(|w| cfg.log_abs_rho_sq(*w)).sum::<f64>() - minus.iter().map(|w| cfg.log_abs_rho_sq(*w)).sum::<f64>()
}

/// Charge correlation of `GFF_rho` with unit charges at `plus` and opposite
/// charges at `minus`; zero unless the counts balance.
pub fn charge_correlation_rho(cfg: &BranchConfig, plus: &[C64], minus: &[C64]) -> Result<f64> {
    if plus.len() != minus.len() {
        return Ok(0.0);
    }
    let mut all = plus.to_vec();
    all.extend_from_slice(minus);
    check_points(cfg, &all)?;
    let p = plus.len();
    let mut lg = p as f64 * (libm::log(4.0) - EULER_GAMMA) + rho_ratio_log(cfg, plus, minus);
    for r in 0..p {
        for s in r + 1..p {
            lg += libm::log((plus[r] - plus[s]).norm_sqr()) + libm::log((minus[r] - minus[s]).norm_sqr());
        }
        for s in 0..p {
            lg -= libm::log((plus[r] - minus[s]).norm_sqr());
        }
    }
    Ok(libm::exp(lg))
}

/// Fermionic side of the bosonization identity, through an explicit `p x p`
/// Cauchy determinant.
pub fn fermion_bilinear_correlation(cfg: &BranchConfig, plus: &[C64], minus: &[C64]) -> Result<f64> {
    if plus.len() != minus.len() {
        return Ok(0.0);
    }
    let mut all = plus.to_vec();
    all.extend_from_slice(minus);
    check_points(cfg, &all)?;
    let p = plus.len();
    let det = if p == 0 {
        C64::new(1.0, 0.0)
    } else {
        Lu::factor(DenseMatrix::from_fn(p, p, |i, j| (plus[i] - minus[j]).inv()))?.det()
    };
    let lg = -2.0 * p as f64 * libm::log(2.0 * PI) + rho_ratio_log(cfg, plus, minus);
    Ok(libm::exp(lg) * det.norm_sqr())
}

/// Ratio between the fermionic and bosonic sides: `(e^{gamma/2}/(4 pi))^{2p}`.
pub fn bosonization_constant(p: usize) -> f64 {
    libm::pow(libm::exp(0.5 * EULER_GAMMA) / (4.0 * PI), 2.0 * p as f64)
}

/// Order `n` cumulant kernel at momenta `p_1..p_{n-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantQuery {
    pub n: usize,
    pub momenta: Vec<C64>,
    pub mu: f64,
}

impl CumulantQuery {
    pub fn new(momenta: Vec<C64>, mu: f64) -> Result<Self> {
        let n = momenta.len() + 1;
        if n < 2 {
            return Err(Error::Insufficient { got: n, need: 2 });
        }
        if let Some(i) = momenta.iter().position(|p| p.norm() == 0.0) {
            return Err(Error::Range { index: i, value: 0.0 });
        }
        let total: C64 = momenta.iter().sum();
        if total.norm() == 0.0 {
            return Err(domain("momenta must not sum to zero"));
        }
        if !mu.is_finite() {
            return Err(domain("mass must be finite"));
        }
        Ok(Self { n, momenta, mu })
    }

    /// Partial sums `0, p_1, p_1 + p_2, ...` (n of them).
    pub fn shifts(&self) -> Vec<C64> {
        let mut out = alloc::vec![C64::new(0.0, 0.0)];
        let mut acc = C64::new(0.0, 0.0);
        for p in &self.momenta {
            acc += p;
            out.push(acc);
        }
        out
    }

    /// Largest momentum scale, `|mu|` included.
    pub fn scale(&self) -> f64 {
        self.shifts().iter().map(|p| p.norm()).fold(self.mu.abs(), f64::max).max(1e-300)
    }

    /// `prod_k (q + P_k)/(|q + P_k|^2 + mu^2)`.
    pub fn integrand(&self, q: C64) -> C64 {
        let m2 = self.mu * self.mu;
        let mut v = C64::new(1.0, 0.0);
        for s in self.shifts() {
            let z = q + s;
            v *= z / (z.norm_sqr() + m2);
        }
        v
    }

    /// `-(-i sqrt(pi)/(2 pi^2))^n (n-1)! / (p_1 ... p_{n-1} (-p_1 - ... - p_{n-1}))`.
    pub fn prefactor(&self) -> C64 {
        let base = C64::new(0.0, -libm::sqrt(PI) / (2.0 * PI * PI));
        let mut f = -base.powi(self.n as i32);
        for k in 1..self.n {
            f *= k as f64;
        }
        let mut den: C64 = -self.momenta.iter().sum::<C64>();
        for p in &self.momenta {
            den *= p;
        }
        f / den
    }
}

pub const DEFAULT_RADIAL_NODES: usize = 600;
pub const DEFAULT_ANGULAR_NODES: usize = 64;

/// Polar quadrature of the `q`-integral, `int dq prod (q+P_k)/(|q+P_k|^2+mu^2)`.
///
/// Angles first on an equispaced rule, then `rho = e^s` on a trapezoid from
/// `scale e^{-12}` to `1e3 scale`. The remainder beyond the cutoff is estimated
/// from the decay of the angular average between `R/2` and `R`.
pub fn cumulant_q_integral(q: &CumulantQuery, radial_nodes: usize, angular_nodes: usize) -> Result<C64> {
    if radial_nodes < 2 || angular_nodes < 1 {
        return Err(Error::Insufficient { got: radial_nodes.min(angular_nodes), need: 2 });
    }
    let scale = q.scale();
    let angles: Vec<C64> =
        (0..angular_nodes).map(|k| C64::from_polar(1.0, 2.0 * PI * k as f64 / angular_nodes as f64)).collect();
    let average = |rho: f64| angles.iter().map(|e| q.integrand(e * rho)).sum::<C64>() / angular_nodes as f64;
    let (s0, s1) = (libm::log(scale) - 12.0, libm::log(scale) + libm::log(1e3));
    let h = (s1 - s0) / (radial_nodes - 1) as f64;
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..radial_nodes {
        let rho = libm::exp(s0 + h * i as f64);
        let w = if i == 0 || i + 1 == radial_nodes { 0.5 * h } else { h };
        acc += average(rho) * (2.0 * PI * rho * rho * w);
    }
    let r = libm::exp(s1);
    let (a_half, a_full) = (average(0.5 * r).norm(), average(r).norm());
    let tail = if a_full == 0.0 {
        0.0
    } else {
        let k = libm::log2(a_half / a_full);
        if !(k > 2.0) {
            return Err(Error::Window { boundary: a_full * r * r });
        }
        2.0 * PI * r * r * a_full / (k - 2.0)
    };
    if tail > 1e-8 * acc.norm().max(1e-300) && tail > 1e-8 {
        return Err(Error::Window { boundary: tail });
    }
    Ok(acc)
}

pub fn cumulant_kernel(q: &CumulantQuery, radial_nodes: usize, angular_nodes: usize) -> Result<C64> {
    Ok(q.prefactor() * cumulant_q_integral(q, radial_nodes, angular_nodes)?)
}

/// `H_n(mu) = int dq |q|^n/(|q|^2 + mu^2)^n = 2 pi int rho^{n+1}/(rho^2+mu^2)^n drho`,
/// finite for `n >= 3`.
pub fn holder_integral(n: usize, mu: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::Insufficient { got: n, need: 3 });
    }
    if mu == 0.0 {
        return Err(domain("the bound needs mu != 0"));
    }
    let m = mu.abs();
    // rho = m e^s; the integrand in s decays like e^{(n+2)s} and e^{(2-n)s}
    let nf = n as f64;
    let (lo, hi) = (-40.0 / (nf + 2.0), 40.0 / (nf - 2.0));
    let steps = 4000;
    let h = (hi - lo) / steps as f64;
    let mut acc = 0.0;
    for i in 0..=steps {
        let x = libm::exp(lo + h * i as f64);
        let w = if i == 0 || i == steps { 0.5 * h } else { h };
        acc += w * libm::pow(x, nf + 2.0) / libm::pow(x * x + 1.0, nf);
    }
    Ok(2.0 * PI * acc * libm::pow(m, 2.0 - nf))
}

/// `C(mu)` with `C(mu)^n = (sqrt(pi)/(2 pi^2))^n H_n(mu)`, so that
/// `|C^T| <= C(mu)^n n! / (|p_1| ... |p_{n-1}| |p_1 + ... + p_{n-1}|)`.
pub fn holder_constant(n: usize, mu: f64) -> Result<f64> {
    Ok(libm::sqrt(PI) / (2.0 * PI * PI) * libm::pow(holder_integral(n, mu)?, 1.0 / n as f64))
}

pub fn holder_bound(q: &CumulantQuery) -> Result<f64> {
    let c = holder_constant(q.n, q.mu)?;
    let mut fact = 1.0;
    for k in 2..=q.n {
        fact *= k as f64;
    }
    let total: C64 = q.momenta.iter().sum();
    let den = q.momenta.iter().map(|p| p.norm()).product::<f64>() * total.norm();
    Ok(libm::pow(c, q.n as f64) * fact / den)
}
