//! Heat-kernel regularized massive GFF on a periodic box and Monte Carlo
//! estimates of imaginary multiplicative chaos moments.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Range;

use crate::error::{domain, Error, Result};
use crate::numerics::fft::SpectralField;
use crate::numerics::quad::gauss_legendre_unit;
use crate::numerics::rng::RandomStream;
use crate::specfun::EULER_GAMMA;
use crate::C64;

/// Recommended lower bound on `mass * box`.
pub const MASS_BOX_MIN: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TorusWarning {
    /// `eps < box/grid`: the regularization scale is below the lattice spacing,
    /// so the grid, not `eps`, sets the effective cutoff.
    SubGridEps,
    /// `mass * box < 6`: wrap-around of the covariance is not negligible.
    SmallMassBox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusSpec {
    pub box_len: f64,
    pub grid: usize,
    pub eps: f64,
    pub mass: f64,
}

impl TorusSpec {
    /// The grid must be a power of two (radix-2 synthesis).
    pub fn new(box_len: f64, grid: usize, eps: f64, mass: f64) -> Result<Self> {
        if !(box_len > 0.0 && box_len.is_finite()) {
            return Err(domain("box must be positive"));
        }
        if grid < 2 || !grid.is_power_of_two() {
            return Err(domain("grid must be a power of two"));
        }
        if !(eps > 0.0) {
            return Err(domain("eps must be positive"));
        }
        if !(mass >= 0.0) {
            return Err(domain("mass must be nonnegative"));
        }
        Ok(Self { box_len, grid, eps, mass })
    }

    pub fn spacing(&self) -> f64 {
        self.box_len / self.grid as f64
    }

    pub fn warnings(&self) -> Vec<TorusWarning> {
        let mut w = Vec::new();
        if self.eps < self.spacing() {
            w.push(TorusWarning::SubGridEps);
        }
        if self.mass * self.box_len < MASS_BOX_MIN {
            w.push(TorusWarning::SmallMassBox);
        }
        w
    }

    fn require_mass(&self) -> Result<()> {
        if self.mass > 0.0 {
            Ok(())
        } else {
            Err(domain("mass must be positive: the zero mode diverges"))
        }
    }

    /// Torus wavenumber of FFT index `n`.
    fn wavenumber(&self, n: usize) -> f64 {
        let g = self.grid as i64;
        let m = if (n as i64) < g / 2 { n as i64 } else { n as i64 - g };
        2.0 * PI * m as f64 / self.box_len
    }

    /// `e^{-eps^2(k^2+m^2)}/(k^2+m^2)`.
    fn symbol(&self, k2: f64) -> f64 {
        let q = k2 + self.mass * self.mass;
        libm::exp(-self.eps * self.eps * q) / q
    }

    /// Grid spectrum, `symbol / spacing^2`, row-major in FFT order.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        self.require_mass()?;
        let n = self.grid;
        let dx2 = self.spacing() * self.spacing();
        let k: Vec<f64> = (0..n).map(|i| self.wavenumber(i)).collect();
        let mut out = Vec::with_capacity(n * n);
        for k1 in &k {
            for k2 in &k {
                out.push(self.symbol(k1 * k1 + k2 * k2) / dx2);
            }
        }
        Ok(out)
    }

    /// Exact grid covariance between points `shift` cells apart.
    pub fn exact_covariance(&self, shift: (i64, i64)) -> Result<f64> {
        self.require_mass()?;
        let n = self.grid;
        let dx = self.spacing();
        let k: Vec<f64> = (0..n).map(|i| self.wavenumber(i)).collect();
        let (x1, x2) = (shift.0 as f64 * dx, shift.1 as f64 * dx);
        let mut acc = 0.0;
        for k1 in &k {
            for k2 in &k {
                acc += self.symbol(k1 * k1 + k2 * k2) * libm::cos(k1 * x1 + k2 * x2);
            }
        }
        Ok(acc / (self.box_len * self.box_len))
    }

    pub fn exact_variance(&self) -> Result<f64> {
        self.exact_covariance((0, 0))
    }

    /// Pointwise variance from the heat-kernel form
    /// `B^{-2} int_{eps^2}^inf e^{-s m^2} theta(s)^2 ds`, where `theta` sums
    /// `e^{-s k^2}` over `grid` wavenumbers per axis (`None`: all of them).
    pub fn heat_kernel_variance(&self, grid: Option<usize>) -> Result<f64> {
        self.require_mass()?;
        let b = self.box_len;
        let theta = |s: f64| -> f64 {
            let c = 4.0 * PI * PI * s / (b * b);
            let mut acc = 1.0;
            let half = grid.map(|g| g as i64 / 2);
            let mut n = 1i64;
            loop {
                let t = libm::exp(-c * (n * n) as f64);
                if let Some(h) = half {
                    if n > h {
                        break;
                    }
                    // the Nyquist index appears once
                    acc += if n == h { t } else { 2.0 * t };
                } else {
                    acc += 2.0 * t;
                }
                if t < 1e-18 {
                    break;
                }
                n += 1;
            }
            acc
        };
        let m2 = self.mass * self.mass;
        let (u0, u1) = (libm::log(self.eps * self.eps), libm::log(45.0 / m2).max(libm::log(self.eps * self.eps) + 1.0));
        let (x, w) = gauss_legendre_unit(16);
        let panels = 48;
        let step = (u1 - u0) / panels as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            let mid = u0 + (p as f64 + 0.5) * step;
            for (xi, wi) in x.iter().zip(&w) {
                let s = libm::exp(mid + 0.5 * step * xi);
                let th = theta(s);
                acc += 0.5 * step * wi * s * libm::exp(-s * m2) * th * th;
            }
        }
        Ok(acc / (b * b))
    }

    /// Grid variance minus the variance of the unrestricted torus field.
    pub fn grid_bias(&self) -> Result<f64> {
        Ok(self.heat_kernel_variance(Some(self.grid))? - self.heat_kernel_variance(None)?)
    }
}

/// `(1/2pi) log(1/m) - gamma/(4 pi)`: the constant in the small-`eps`
/// variance of the plane field, `(1/2pi) log(1/eps)` + constant.
pub fn heat_kernel_variance_constant(mass: f64) -> f64 {
    libm::log(1.0 / mass) / (2.0 * PI) - EULER_GAMMA / (4.0 * PI)
}

/// One grid sample of the field.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusField {
    pub spec: TorusSpec,
    pub values: Vec<f64>,
}

impl TorusField {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.spec.grid + j]
    }
}

/// Reusable sampler: one spectral transform yields two independent fields.
#[derive(Debug, Clone)]
pub struct TorusSampler {
    pub spec: TorusSpec,
    field: SpectralField,
}

impl TorusSampler {
    pub fn new(spec: TorusSpec) -> Result<Self> {
        let s = spec.spectrum()?;
        Ok(Self { spec, field: SpectralField::new(spec.grid, &s)? })
    }

    pub fn sample_pair(
        &self,
        stream: RandomStream,
        work: &mut Vec<C64>,
        scratch: &mut Vec<C64>,
    ) -> (TorusField, TorusField) {
        let (a, b) = self.field.sample_pair(stream, work, scratch);
        (TorusField { spec: self.spec, values: a }, TorusField { spec: self.spec, values: b })
    }
}

pub fn sample_field(t: &TorusSpec, stream: RandomStream) -> Result<TorusField> {
    let s = TorusSampler::new(*t)?;
    let (mut w, mut sc) = (Vec::new(), Vec::new());
    Ok(s.sample_pair(stream, &mut w, &mut sc).0)
}

/// Grid test function as a sparse list of `((row, col), value)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub cells: Vec<((usize, usize), f64)>,
}

impl TestFunction {
    /// Unit-mass function concentrated on one cell.
    pub fn delta(t: &TorusSpec, cell: (usize, usize)) -> Self {
        let dx = t.spacing();
        Self { cells: alloc::vec![(cell, 1.0 / (dx * dx))] }
    }

    /// From dense row-major grid values; zeros are dropped.
    pub fn from_grid(grid: usize, values: &[f64]) -> Self {
        Self {
            cells: values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| ((i / grid, i % grid), *v))
                .collect(),
        }
    }

    pub fn integral(&self, t: &TorusSpec) -> f64 {
        let dx = t.spacing();
        self.cells.iter().map(|(_, v)| v).sum::<f64>() * dx * dx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Charge {
    pub alpha: f64,
    pub f: TestFunction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentRequest {
    pub charges: Vec<Charge>,
    pub samples: usize,
    pub stream: RandomStream,
}

impl MomentRequest {
    pub fn validate(&self, t: &TorusSpec) -> Result<()> {
        if self.samples < 100 {
            return Err(Error::Insufficient { got: self.samples, need: 100 });
        }
        let n = t.grid;
        let margin = n / 8;
        for (j, c) in self.charges.iter().enumerate() {
            if !(c.alpha.abs() < 1.0) {
                return Err(Error::Range { index: j, value: c.alpha });
            }
            for ((r, col), _) in &c.f.cells {
                if *r >= n || *col >= n {
                    return Err(Error::Placement(alloc::format!("charge {j} has a cell outside the grid")));
                }
                if *r < margin || *r > n - margin || *col < margin || *col > n - margin {
                    return Err(Error::Placement(alloc::format!("charge {j} is within box/8 of the seam")));
                }
            }
        }
        Ok(())
    }
}

const SQRT_4PI: f64 = 3.544_907_701_811_032;

/// `prod_j eps^{-alpha_j^2} sum_x e^{i sqrt(4 pi) alpha_j phi(x)} f_j(x) dx^2`.
pub fn chaos_product(field: &TorusField, charges: &[Charge]) -> C64 {
    let t = &field.spec;
    let dx2 = t.spacing() * t.spacing();
    let mut out = C64::new(1.0, 0.0);
    for c in charges {
        let mut m = C64::new(0.0, 0.0);
        for ((i, j), v) in &c.f.cells {
            m += C64::from_polar(*v, SQRT_4PI * c.alpha * field.at(*i, *j));
        }
        out *= m * dx2 * libm::pow(t.eps, -c.alpha * c.alpha);
    }
    out
}

/// Exact Gaussian value of `E prod eps^{-a^2} e^{i sqrt(4pi) a_j phi(x_j)}` with
/// grid covariances.
pub fn exact_gaussian_moment(t: &TorusSpec, charges: &[(f64, (usize, usize))]) -> Result<C64> {
    for (j, (_, p)) in charges.iter().enumerate() {
        if charges[..j].iter().any(|(_, q)| q == p) {
            return Err(domain("charges must sit on distinct grid points"));
        }
    }
    if charges.iter().all(|(a, _)| *a == 0.0) {
        return Ok(C64::new(1.0, 0.0));
    }
    let var = t.exact_variance()?;
    let mut lg = 0.0;
    for (j, (a, p)) in charges.iter().enumerate() {
        lg += -a * a * libm::log(t.eps) - 2.0 * PI * a * a * var;
        for (b, q) in &charges[..j] {
            let cov = t.exact_covariance((p.0 as i64 - q.0 as i64, p.1 as i64 - q.1 as i64))?;
            lg -= 4.0 * PI * a * b * cov;
        }
    }
    Ok(C64::new(libm::exp(lg), 0.0))
}

/// Number of jackknife blocks used by [`estimate_moment`].
pub const JACKKNIFE_BLOCKS: usize = 50;

/// Sums of an observable over contiguous blocks of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSums {
    pub sums: Vec<C64>,
    pub counts: Vec<usize>,
}

impl BlockSums {
    pub fn concat(mut self, other: BlockSums) -> Self {
        self.sums.extend(other.sums);
        self.counts.extend(other.counts);
        self
    }

    /// Mean and delete-one-block jackknife standard error (modulus).
    pub fn jackknife(&self) -> (C64, f64) {
        let total: C64 = self.sums.iter().sum();
        let n: usize = self.counts.iter().sum();
        let mean = total / n as f64;
        let b = self.sums.len();
        if b < 2 {
            return (mean, f64::NAN);
        }
        let mut acc = 0.0;
        for (s, c) in self.sums.iter().zip(&self.counts) {
            let loo = (total - s) / (n - c) as f64;
            acc += (loo - mean).norm_sqr();
        }
        (mean, libm::sqrt(acc * (b - 1) as f64 / b as f64))
    }
}

/// Pairs of samples are drawn from substream `k` of the request stream; pair
/// `k` provides samples `2k` and `2k+1`. Block `b` covers a fixed pair range,
/// so results do not depend on how blocks are distributed over workers.
pub fn block_layout(samples: usize, blocks: usize) -> Vec<Range<usize>> {
    let pairs = samples.div_ceil(2);
    (0..blocks).map(|b| (b * pairs / blocks)..((b + 1) * pairs / blocks)).collect()
}

/// Evaluate `observable` on every sample of the given blocks.
pub fn run_blocks<F>(
    sampler: &TorusSampler,
    stream: RandomStream,
    samples: usize,
    blocks: &[Range<usize>],
    mut observable: F,
) -> BlockSums
where
    F: FnMut(&TorusField) -> C64,
{
    let (mut work, mut scratch) = (Vec::new(), Vec::new());
    let mut out = BlockSums { sums: Vec::new(), counts: Vec::new() };
    for range in blocks {
        let mut s = C64::new(0.0, 0.0);
        let mut count = 0;
        for k in range.clone() {
            let (a, b) = sampler.sample_pair(stream.substream(k as u64), &mut work, &mut scratch);
            s += observable(&a);
            count += 1;
            if 2 * k + 1 < samples {
                s += observable(&b);
                count += 1;
            }
        }
        out.sums.push(s);
        out.counts.push(count);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub mean: C64,
    pub stderr: f64,
    pub samples: usize,
}

pub fn estimate_moment(t: &TorusSpec, req: &MomentRequest) -> Result<MomentEstimate> {
    req.validate(t)?;
    if req.charges.iter().all(|c| c.alpha == 0.0) {
        let v: f64 = req.charges.iter().map(|c| c.f.integral(t)).product();
        return Ok(MomentEstimate { mean: C64::new(v, 0.0), stderr: 0.0, samples: req.samples });
    }
    let sampler = TorusSampler::new(*t)?;
    let blocks = block_layout(req.samples, JACKKNIFE_BLOCKS);
    let sums = run_blocks(&sampler, req.stream, req.samples, &blocks, |f| chaos_product(f, &req.charges));
    let (mean, stderr) = sums.jackknife();
    Ok(MomentEstimate { mean, stderr, samples: req.samples })
}
