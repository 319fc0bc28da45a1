//! Recovers the auxiliary function `psi` from `Sigma = log <two-point>` and
//! measures how well the radial ODEs are satisfied.

use alloc::vec::Vec;

use crate::error::{domain, Error, Result};
use crate::fredholm::{log_det_one_minus_k, Resolution, TwoPointSpec};

/// Slack allowed on `(2/mu^2) Laplacian(Sigma)` outside `[0, 2]` before clamping.
pub const CLAMP_SLACK: f64 = 1e-3;

/// `psi` closer than this to `pi/2` makes `tan` unusable.
pub const TAN_GUARD: f64 = 1e-3;

/// Samples of `Sigma` on a log-uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub r_nodes: Vec<f64>,
    pub sigma: Vec<f64>,
    pub alpha: f64,
    pub mu: f64,
}

impl RadialProfile {
    pub fn new(r_nodes: Vec<f64>, sigma: Vec<f64>, alpha: f64, mu: f64) -> Result<Self> {
        let n = r_nodes.len();
        if n < 7 {
            return Err(Error::Insufficient { got: n, need: 7 });
        }
        if sigma.len() != n {
            return Err(domain("r_nodes and sigma differ in length"));
        }
        if !(mu > 0.0) {
            return Err(domain("mass must be positive"));
        }
        if r_nodes[0] <= 0.0 {
            return Err(domain("radii must be positive"));
        }
        let h = libm::log(r_nodes[1] / r_nodes[0]);
        if !(h > 0.0) {
            return Err(domain("radii must increase"));
        }
        for i in 1..n {
            let hi = libm::log(r_nodes[i] / r_nodes[i - 1]);
            if (hi - h).abs() > 1e-9 * h {
                return Err(Error::Consistency { index: i, value: r_nodes[i] });
            }
        }
        if let Some(i) = sigma.iter().position(|s| !s.is_finite()) {
            return Err(Error::Consistency { index: i, value: sigma[i] });
        }
        Ok(Self { r_nodes, sigma, alpha, mu })
    }

    /// Step in `log r`.
    pub fn log_step(&self) -> f64 {
        libm::log(self.r_nodes[1] / self.r_nodes[0])
    }
}

/// `n` log-uniform radii from `r_min` to `r_max`, extended by `pad` nodes on
/// each side.
pub fn log_grid(r_min: f64, r_max: f64, n: usize, pad: usize) -> Result<Vec<f64>> {
    if !(r_min > 0.0 && r_max > r_min) || n < 2 {
        return Err(domain("log grid needs 0 < r_min < r_max and at least two points"));
    }
    let h = libm::log(r_max / r_min) / (n - 1) as f64;
    let x0 = libm::log(r_min);
    Ok((0..n + 2 * pad).map(|i| libm::exp(x0 + h * (i as f64 - pad as f64))).collect())
}

/// `Sigma(r) = log det(1 - K_r)` on `r_nodes`. The normalization of the
/// two-point function only shifts `Sigma` by a constant.
pub fn fredholm_profile(alpha: f64, mu: f64, r_nodes: Vec<f64>, res: Resolution) -> Result<RadialProfile> {
    let sigma = r_nodes
        .iter()
        .map(|&r| log_det_one_minus_k(&TwoPointSpec::new(alpha, mu, r)?, res))
        .collect::<Result<Vec<_>>>()?;
    RadialProfile::new(r_nodes, sigma, alpha, mu)
}

/// `psi` and `d Sigma/dr` on the interior nodes of a profile.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiProfile {
    pub r: Vec<f64>,
    pub psi: Vec<f64>,
    pub sigma_prime: Vec<f64>,
    pub log_step: f64,
}

/// `psi = arccos(1 - (2/mu^2) Laplacian(Sigma)) / 2` on interior nodes.
pub fn extract_psi(p: &RadialProfile) -> Result<PsiProfile> {
    let h = p.log_step();
    let n = p.r_nodes.len();
    let mut out = PsiProfile { r: Vec::new(), psi: Vec::new(), sigma_prime: Vec::new(), log_step: h };
    for i in 1..n - 1 {
        let r = p.r_nodes[i];
        let (sm, s0, sp) = (p.sigma[i - 1], p.sigma[i], p.sigma[i + 1]);
        // radial Laplacian is r^{-2} d^2/dx^2 in x = log r
        let lap = (sp - 2.0 * s0 + sm) / (h * h * r * r);
        let q = 2.0 * lap / (p.mu * p.mu);
        if !(-CLAMP_SLACK..=2.0 + CLAMP_SLACK).contains(&q) {
            return Err(Error::Consistency { index: i, value: lap });
        }
        let arg = (1.0 - q).clamp(-1.0, 1.0);
        out.r.push(r);
        out.psi.push(0.5 * libm::acos(arg));
        out.sigma_prime.push((sp - sm) / (2.0 * h * r));
    }
    Ok(out)
}

fn check_tan(psi: &[f64]) -> Result<()> {
    for (i, &v) in psi.iter().enumerate() {
        let c = libm::cos(v);
        if c.abs() < libm::sin(TAN_GUARD) {
            return Err(Error::Range { index: i, value: v });
        }
    }
    Ok(())
}

/// Pointwise normalized residual of
/// `psi'' + psi'/r = (mu^2/2) sin 2psi + (2 alpha)^2/r^2 tan psi (1 + tan^2 psi)`
/// at nodes `1..n-1` of `psi`, returned with the radii.
pub fn ode_residuals(psi: &PsiProfile, alpha: f64, mu: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = psi.psi.len();
    if n < 5 {
        return Err(Error::Insufficient { got: n, need: 5 });
    }
    check_tan(&psi.psi)?;
    let h = psi.log_step;
    let lam2 = 4.0 * alpha * alpha;
    let mut radii = Vec::with_capacity(n - 2);
    let mut res = Vec::with_capacity(n - 2);
    for i in 1..n - 1 {
        let r = psi.r[i];
        let p = psi.psi[i];
        let lhs = (psi.psi[i + 1] - 2.0 * p + psi.psi[i - 1]) / (h * h * r * r);
        let t = libm::tan(p);
        let rhs = 0.5 * mu * mu * libm::sin(2.0 * p) + lam2 / (r * r) * t * (1.0 + t * t);
        radii.push(r);
        res.push((lhs - rhs).abs() / (lhs.abs() + rhs.abs() + mu * mu));
    }
    Ok((radii, res))
}

/// Largest pointwise residual from [`ode_residuals`].
pub fn ode_residual(psi: &PsiProfile, alpha: f64, mu: f64) -> Result<f64> {
    Ok(ode_residuals(psi, alpha, mu)?.1.into_iter().fold(0.0, f64::max))
}

/// Pointwise residual of
/// `Sigma' + (1/2r)(r^2 psi'^2 - lambda^2 tan^2 psi - mu^2 r^2 sin^2 psi) = 0`,
/// `lambda = 2 alpha`, normalized by `|Sigma'| + |rest| + mu`. Slices are
/// aligned on the same radii; `psi_prime` comes from differencing `psi`.
pub fn palmer_residuals(
    r: &[f64],
    sigma_prime: &[f64],
    psi: &[f64],
    psi_prime: &[f64],
    alpha: f64,
    mu: f64,
) -> Result<Vec<f64>> {
    let n = r.len();
    if sigma_prime.len() != n || psi.len() != n || psi_prime.len() != n {
        return Err(domain("palmer residual inputs differ in length"));
    }
    check_tan(psi)?;
    let lam2 = 4.0 * alpha * alpha;
    Ok((0..n)
        .map(|i| {
            let (ri, p, dp) = (r[i], psi[i], psi_prime[i]);
            let t = libm::tan(p);
            let s = libm::sin(p);
            let rest = (ri * ri * dp * dp - lam2 * t * t - mu * mu * ri * ri * s * s) / (2.0 * ri);
            (sigma_prime[i] + rest).abs() / (sigma_prime[i].abs() + rest.abs() + mu)
        })
        .collect())
}

pub fn palmer_first_order_residual(
    r: &[f64],
    sigma_prime: &[f64],
    psi: &[f64],
    psi_prime: &[f64],
    alpha: f64,
    mu: f64,
) -> Result<f64> {
    Ok(palmer_residuals(r, sigma_prime, psi, psi_prime, alpha, mu)?.into_iter().fold(0.0, f64::max))
}

/// Both residual families on the nodes of `psi` that have two neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualTable {
    pub r: Vec<f64>,
    pub psi: Vec<f64>,
    pub ode: Vec<f64>,
    pub palmer: Vec<f64>,
}

impl ResidualTable {
    /// Maxima of both residuals over `r` in `[lo, hi]`.
    pub fn max_on(&self, lo: f64, hi: f64) -> (f64, f64) {
        let tol = 1e-9 * hi;
        let mut m = (0.0f64, 0.0f64);
        for i in 0..self.r.len() {
            if self.r[i] >= lo - tol && self.r[i] <= hi + tol {
                m.0 = m.0.max(self.ode[i]);
                m.1 = m.1.max(self.palmer[i]);
            }
        }
        m
    }
}

pub fn residual_table(p: &RadialProfile) -> Result<ResidualTable> {
    let psi = extract_psi(p)?;
    let (r, ode) = ode_residuals(&psi, p.alpha, p.mu)?;
    let n = psi.psi.len();
    let h = psi.log_step;
    let inner = 1..n - 1;
    let psi_prime: Vec<f64> = inner.clone().map(|i| (psi.psi[i + 1] - psi.psi[i - 1]) / (2.0 * h * psi.r[i])).collect();
    let palmer =
        palmer_residuals(&r, &psi.sigma_prime[inner.clone()], &psi.psi[inner.clone()], &psi_prime, p.alpha, p.mu)?;
    Ok(ResidualTable { r, psi: psi.psi[inner].to_vec(), ode, palmer })
}
