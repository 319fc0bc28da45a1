//! Finite-volume twisted Dirac Green's function with mass supported on a disk.
//!
//! Cells are axis-aligned squares. The Cauchy operator `f -> int f(u)/(z-u) du`
//! is applied matrix-free: the far field `1/(z_i - z_j)` is recomputed on every
//! product and pairs closer than three cell sizes carry the exact square
//! integral instead. The resulting matrix is exactly antisymmetric. Point
//! evaluations and the source term use the `|rho|^{+-2}`-weighted Cauchy
//! integral over nearby cells, computed on a polar fan around the point.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::fredholm::{log_det_one_minus_k, Resolution, TwoPointSpec};
use crate::free_field::BranchConfig;
use crate::numerics::linalg::{gmres, DenseMatrix, Lu};
use crate::numerics::quad::gauss_legendre_unit;
use crate::C64;

pub const DEFAULT_REFINE: usize = 4;
pub const DEFAULT_MASS_NODES: usize = 8;
/// Relative residual of the GMRES solves.
pub const SOLVER_TOL: f64 = 1e-12;
/// Above this many cells `log_z_tilde` (dense, cubic) gets slow.
pub const LARGE_MESH: usize = 10_000;

/// Pairs closer than this many cell sizes use the exact square integral.
const NEAR: f64 = 3.0;
/// Point evaluations use the fan rule within this many cell sizes.
const FAN: f64 = 4.0;
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub center: C64,
    pub size: f64,
}

impl Cell {
    pub fn area(&self) -> f64 {
        self.size * self.size
    }

    fn corners(&self) -> [C64; 4] {
        let h = 0.5 * self.size;
        let c = self.center;
        [c + C64::new(-h, -h), c + C64::new(h, -h), c + C64::new(h, h), c + C64::new(-h, h)]
    }

    fn contains(&self, z: C64) -> bool {
        let d = z - self.center;
        d.re.abs() <= 0.5 * self.size && d.im.abs() <= 0.5 * self.size
    }
}

/// `int_Q dv / (z - v)` over the square with center `c` and side `a`, exact.
pub fn cauchy_square(z: C64, c: C64, a: f64) -> C64 {
    fn f(s: f64, y: f64) -> f64 {
        let mut r = -2.0 * s;
        if s != 0.0 {
            r += s * libm::log(s * s + y * y);
        }
        if y != 0.0 {
            r += 2.0 * y * libm::atan(s / y);
        }
        r
    }
    let p = Cell { center: c, size: a }.corners();
    let mut tot = ZERO;
    for k in 0..4 {
        let d = p[(k + 1) % 4] - p[k];
        let q = (p[k] - z) / d;
        let i = 2.0 * libm::log(d.norm()) + f(q.re + 1.0, q.im) - f(q.re, q.im);
        tot += d.conj() * i;
    }
    C64::new(0.0, -0.5) * tot
}

/// Gauss rules for the polar fan and the cell averages.
#[derive(Debug, Clone)]
struct FanRule {
    tx: Vec<f64>,
    tw: Vec<f64>,
    // s = u^4 on [0, 1]: node, weight for ds, weight for s ds
    su: Vec<f64>,
    sw: Vec<f64>,
    sa: Vec<f64>,
    g4: (Vec<f64>, Vec<f64>),
    g8: (Vec<f64>, Vec<f64>),
}

impl FanRule {
    fn new() -> Self {
        let (tx, tw) = gauss_legendre_unit(20);
        let (x, w) = gauss_legendre_unit(12);
        let mut su = Vec::with_capacity(12);
        let mut sw = Vec::with_capacity(12);
        let mut sa = Vec::with_capacity(12);
        for (xi, wi) in x.iter().zip(&w) {
            let u = 0.5 * (xi + 1.0);
            let s = u * u * u * u;
            let ws = 0.5 * wi * 4.0 * u * u * u;
            su.push(s);
            sw.push(ws);
            sa.push(s * ws);
        }
        Self { tx, tw, su, sw, sa, g4: gauss_legendre_unit(4), g8: gauss_legendre_unit(8) }
    }

    /// Nodes in `t in [0, 1]` along the edge `z + q0 + t d`, sinh-graded toward
    /// the foot of the perpendicular from `z` when `z` is close to the edge.
    fn edge_nodes(&self, q0: C64, d: C64, cross: f64, out: &mut Vec<(f64, f64)>) {
        out.clear();
        let len2 = d.norm_sqr();
        let tstar = -(d.conj() * q0).re / len2;
        let eps = cross.abs() / len2;
        let outside = if tstar < 0.0 {
            -tstar
        } else if tstar > 1.0 {
            tstar - 1.0
        } else {
            0.0
        };
        if eps * eps + outside * outside >= 0.25 {
            for (x, w) in self.tx.iter().zip(&self.tw) {
                out.push((0.5 * (x + 1.0), 0.5 * w));
            }
            return;
        }
        let a = libm::asinh(-tstar / eps);
        let b = libm::asinh((1.0 - tstar) / eps);
        let pieces: [(f64, f64); 2] = if a < 0.0 && b > 0.0 { [(a, 0.0), (0.0, b)] } else { [(a, b), (0.0, 0.0)] };
        for (lo, hi) in pieces {
            if hi <= lo {
                continue;
            }
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            for (x, w) in self.tx.iter().zip(&self.tw) {
                let sg = mid + half * x;
                out.push((tstar + eps * libm::sinh(sg), half * w * eps * libm::cosh(sg)));
            }
        }
    }

    /// `(int f+(v)/(z-v), int f-(v)/(z-v))` over `cell`, fanned out from `z`.
    fn cauchy<F: Fn(C64) -> (f64, f64)>(&self, z: C64, cell: &Cell, f: &F, buf: &mut Vec<(f64, f64)>) -> (C64, C64) {
        let p = cell.corners();
        let (mut tp, mut tm) = (ZERO, ZERO);
        for k in 0..4 {
            let q0 = p[k] - z;
            let d = p[(k + 1) % 4] - p[k];
            let cross = (q0.conj() * d).im;
            // degenerate triangle: z on the edge line
            if cross.abs() <= 1e-13 * d.norm_sqr() {
                continue;
            }
            self.edge_nodes(q0, d, cross, buf);
            for &(t, wt) in buf.iter() {
                let q = q0 + t * d;
                let (mut ip, mut im) = (0.0, 0.0);
                for (s, ws) in self.su.iter().zip(&self.sw) {
                    let (a, b) = f(z + *s * q);
                    ip += ws * a;
                    im += ws * b;
                }
                let k = -cross * wt / q;
                tp += k * ip;
                tm += k * im;
            }
        }
        (tp, tm)
    }

    /// `(int f+, int f-)` over `cell`, fanned out from `z` (singular points of
    /// `f` at `z` are integrable).
    fn area<F: Fn(C64) -> (f64, f64)>(&self, z: C64, cell: &Cell, f: &F, buf: &mut Vec<(f64, f64)>) -> (f64, f64) {
        let p = cell.corners();
        let (mut tp, mut tm) = (0.0, 0.0);
        for k in 0..4 {
            let q0 = p[k] - z;
            let d = p[(k + 1) % 4] - p[k];
            let cross = (q0.conj() * d).im;
            // degenerate triangle: z on the edge line
            if cross.abs() <= 1e-13 * d.norm_sqr() {
                continue;
            }
            self.edge_nodes(q0, d, cross, buf);
            for &(t, wt) in buf.iter() {
                let q = q0 + t * d;
                for (s, ws) in self.su.iter().zip(&self.sa) {
                    let (a, b) = f(z + *s * q);
                    tp += cross * wt * ws * a;
                    tm += cross * wt * ws * b;
                }
            }
        }
        (tp, tm)
    }
}

/// Square cells covering the disk `|z| < radius`.
#[derive(Debug, Clone)]
pub struct DiskMesh {
    pub radius: f64,
    pub cell_size: f64,
    pub refine: usize,
    pub cells: Vec<Cell>,
    /// Points the refinement was built around.
    pub refined_at: Vec<C64>,
    re: Vec<f64>,
    im: Vec<f64>,
    // near-field corrections to 1/(z_i - z_j), CSR
    near_start: Vec<usize>,
    near_col: Vec<u32>,
    near_val: Vec<C64>,
    fan: FanRule,
}

impl DiskMesh {
    /// `cells_across` base cells span the diameter, so `h = 2 radius / cells_across`.
    /// Base cells whose center lies within `3h` of one of `points` are split
    /// into `refine x refine` subcells.
    pub fn new(radius: f64, cells_across: usize, refine: usize, points: &[C64]) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(domain("disk radius must be positive"));
        }
        if cells_across < 4 {
            return Err(Error::Insufficient { got: cells_across, need: 4 });
        }
        if refine == 0 {
            return Err(domain("refinement factor must be at least 1"));
        }
        let h = 2.0 * radius / cells_across as f64;
        let mut cells = Vec::new();
        for i in 0..cells_across {
            for j in 0..cells_across {
                let c = C64::new(-radius + (i as f64 + 0.5) * h, -radius + (j as f64 + 0.5) * h);
                if c.norm() >= radius {
                    continue;
                }
                if points.iter().any(|p| (c - p).norm() < 3.0 * h) {
                    let s = h / refine as f64;
                    for a in 0..refine {
                        for b in 0..refine {
                            let off = C64::new(-0.5 * h + (a as f64 + 0.5) * s, -0.5 * h + (b as f64 + 0.5) * s);
                            cells.push(Cell { center: c + off, size: s });
                        }
                    }
                } else {
                    cells.push(Cell { center: c, size: h });
                }
            }
        }
        let re = cells.iter().map(|c| c.center.re).collect();
        let im = cells.iter().map(|c| c.center.im).collect();
        let mut mesh = Self {
            radius,
            cell_size: h,
            refine,
            cells,
            refined_at: points.to_vec(),
            re,
            im,
            near_start: Vec::new(),
            near_col: Vec::new(),
            near_val: Vec::new(),
            fan: FanRule::new(),
        };
        mesh.build_near_field();
        Ok(mesh)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(Cell::area).sum()
    }

    fn build_near_field(&mut self) {
        let m = self.cells.len();
        let mut rows: Vec<Vec<(u32, C64)>> = vec![Vec::new(); m];
        for i in 0..m {
            let ci = self.cells[i];
            for j in i + 1..m {
                let cj = self.cells[j];
                let d = ci.center - cj.center;
                if d.norm() >= NEAR * ci.size.max(cj.size) {
                    continue;
                }
                // the smaller cell is the evaluation point, the larger is averaged
                let kij = if ci.size <= cj.size {
                    cauchy_square(ci.center, cj.center, cj.size) / cj.area()
                } else {
                    -cauchy_square(cj.center, ci.center, ci.size) / ci.area()
                };
                let delta = kij - d.inv();
                rows[i].push((j as u32, delta));
                rows[j].push((i as u32, -delta));
            }
        }
        self.near_start = Vec::with_capacity(m + 1);
        self.near_start.push(0);
        for r in rows {
            for (j, v) in r {
                self.near_col.push(j);
                self.near_val.push(v);
            }
            self.near_start.push(self.near_col.len());
        }
    }

    /// Matrix entry of the discrete Cauchy operator (zero on the diagonal).
    pub fn cauchy_entry(&self, i: usize, j: usize) -> C64 {
        if i == j {
            return ZERO;
        }
        let mut k = (self.cells[i].center - self.cells[j].center).inv();
        for p in self.near_start[i]..self.near_start[i + 1] {
            if self.near_col[p] as usize == j {
                k += self.near_val[p];
            }
        }
        k
    }

    pub fn cauchy_matrix(&self) -> DenseMatrix {
        let m = self.len();
        let mut k =
            DenseMatrix::from_fn(
                m,
                m,
                |i, j| if i == j { ZERO } else { (self.cells[i].center - self.cells[j].center).inv() },
            );
        for i in 0..m {
            for p in self.near_start[i]..self.near_start[i + 1] {
                k[(i, self.near_col[p] as usize)] += self.near_val[p];
            }
        }
        k
    }

    /// `out = K x` (or `conj(K) x`), with `K` applied matrix-free.
    pub fn apply_cauchy(&self, x: &[C64], conjugate: bool, out: &mut [C64]) {
        let m = self.len();
        let sign = if conjugate { 1.0 } else { -1.0 };
        for i in 0..m {
            let (zr, zi) = (self.re[i], self.im[i]);
            let (mut ar, mut ai) = (0.0, 0.0);
            let mut far = |range: core::ops::Range<usize>| {
                for j in range {
                    let dx = zr - self.re[j];
                    let dy = zi - self.im[j];
                    let r = 1.0 / (dx * dx + dy * dy);
                    let (kr, ki) = (dx * r, sign * dy * r);
                    let x = x[j];
                    ar += kr * x.re - ki * x.im;
                    ai += kr * x.im + ki * x.re;
                }
            };
            far(0..i);
            far(i + 1..m);
            let mut acc = C64::new(ar, ai);
            for p in self.near_start[i]..self.near_start[i + 1] {
                let v = self.near_val[p];
                acc += if conjugate { v.conj() } else { v } * x[self.near_col[p] as usize];
            }
            out[i] = acc;
        }
    }
}

/// Mesh, branch data and mass: everything a solve needs except the source.
#[derive(Debug, Clone)]
pub struct DiracSystem {
    pub mesh: Arc<DiskMesh>,
    pub cfg: BranchConfig,
    pub mu: f64,
    /// Cell averages of `|rho|^2` and `|rho|^{-2}`.
    pub rho_plus: Vec<f64>,
    pub rho_minus: Vec<f64>,
}

/// One column of the Green's function for a fixed source, stored as node values.
#[derive(Debug, Clone)]
struct Column {
    dual: bool,
    phi: Vec<C64>,
    d2: Vec<C64>,
    t1: Vec<C64>,
}

/// Weighted Cauchy functionals of one evaluation point: entry `u` is
/// `int_u |rho(v)|^{+-2} / (z - v) dv`.
#[derive(Debug, Clone)]
struct CauchyRow {
    plus: Vec<C64>,
    minus: Vec<C64>,
}

impl CauchyRow {
    fn weights(&self, dual: bool) -> (&[C64], &[C64]) {
        if dual {
            (&self.minus, &self.plus)
        } else {
            (&self.plus, &self.minus)
        }
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(ZERO, |s, (x, y)| s + x * y)
}

fn dot_conj(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(ZERO, |s, (x, y)| s + x.conj() * y)
}

impl DiracSystem {
    pub fn new(mesh: Arc<DiskMesh>, cfg: BranchConfig, mu: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(domain("mass must be finite"));
        }
        let (rho_plus, rho_minus) = rho_averages(&mesh, &cfg);
        Ok(Self { mesh, cfg, mu, rho_plus, rho_minus })
    }

    /// Same mesh with another configuration or mass.
    pub fn with_config(&self, cfg: BranchConfig, mu: f64) -> Result<Self> {
        Self::new(self.mesh.clone(), cfg, mu)
    }

    fn coupling(&self) -> f64 {
        -self.mu / (2.0 * PI)
    }

    /// `(D+, D-)`: cell area times the averaged `|rho|^{+-2}` of the channel.
    fn diagonals(&self, dual: bool) -> (Vec<f64>, Vec<f64>) {
        let p: Vec<f64> = self.mesh.cells.iter().zip(&self.rho_plus).map(|(c, r)| c.area() * r).collect();
        let m: Vec<f64> = self.mesh.cells.iter().zip(&self.rho_minus).map(|(c, r)| c.area() * r).collect();
        if dual {
            (m, p)
        } else {
            (p, m)
        }
    }

    fn row(&self, z: C64) -> CauchyRow {
        let mesh = &*self.mesh;
        let cfg = &self.cfg;
        let f = |v: C64| {
            let e = libm::exp(cfg.log_abs_rho_sq(v));
            (e, 1.0 / e)
        };
        let mut buf = Vec::with_capacity(64);
        let m = mesh.len();
        let mut plus = Vec::with_capacity(m);
        let mut minus = Vec::with_capacity(m);
        for (u, cell) in mesh.cells.iter().enumerate() {
            let d = z - cell.center;
            if d.norm() < FAN * cell.size {
                let (p, q) = mesh.fan.cauchy(z, cell, &f, &mut buf);
                plus.push(p);
                minus.push(q);
            } else {
                let inv = d.inv() * cell.area();
                plus.push(inv * self.rho_plus[u]);
                minus.push(inv * self.rho_minus[u]);
            }
        }
        CauchyRow { plus, minus }
    }

    /// `A x = c conj(K) D- x`.
    fn apply_a(&self, dm: &[f64], x: &[C64], tmp: &mut [C64], out: &mut [C64]) {
        let c = self.coupling();
        for ((t, x), d) in tmp.iter_mut().zip(x).zip(dm) {
            *t = x * (c * d);
        }
        self.mesh.apply_cauchy(tmp, true, out);
    }

    /// `B x = c K D+ x`.
    fn apply_b(&self, dp: &[f64], x: &[C64], tmp: &mut [C64], out: &mut [C64]) {
        let c = self.coupling();
        for ((t, x), d) in tmp.iter_mut().zip(x).zip(dp) {
            *t = x * (c * d);
        }
        self.mesh.apply_cauchy(tmp, false, out);
    }

    /// Node values of the free term `1/(2 pi (u - w))`, averaged over each cell
    /// with the channel's `|rho|^{-2}` weight.
    fn source(&self, w_row: &CauchyRow, dual: bool) -> Vec<C64> {
        let (_, dm) = self.diagonals(dual);
        let (_, pm) = w_row.weights(dual);
        pm.iter().zip(&dm).map(|(p, d)| -p / (2.0 * PI * d)).collect()
    }

    fn solve_column(&self, w_row: &CauchyRow, dual: bool) -> Result<Column> {
        let m = self.mesh.len();
        let phi = self.source(w_row, dual);
        if self.mu == 0.0 {
            return Ok(Column { dual, phi, d2: vec![ZERO; m], t1: vec![ZERO; m] });
        }
        let (dp, dm) = self.diagonals(dual);
        let mut tmp = vec![ZERO; m];
        let mut a = vec![ZERO; m];
        let mut rhs = vec![ZERO; m];
        self.apply_a(&dm, &phi, &mut tmp, &mut a);
        self.apply_b(&dp, &a, &mut tmp, &mut rhs);
        let mut ta = vec![ZERO; m];
        let mut tb = vec![ZERO; m];
        let apply = |x: &[C64], out: &mut [C64]| {
            self.apply_a(&dm, x, &mut tmp, &mut ta);
            self.apply_b(&dp, &ta, &mut tmp, &mut tb);
            for ((o, x), b) in out.iter_mut().zip(x).zip(&tb) {
                *o = x - b;
            }
        };
        let (d2, _) = gmres(apply, &rhs, SOLVER_TOL, 150.min(m), 4000)?;
        let total: Vec<C64> = phi.iter().zip(&d2).map(|(a, b)| a + b).collect();
        let mut t1 = vec![ZERO; m];
        let mut tmp = vec![ZERO; m];
        self.apply_a(&dm, &total, &mut tmp, &mut t1);
        Ok(Column { dual, phi, d2, t1 })
    }

    /// `T1(z) = c conj(P-(z)) . (phi + d2)`.
    fn eval_t1(&self, col: &Column, row: &CauchyRow) -> C64 {
        let (_, pm) = row.weights(col.dual);
        let total: Vec<C64> = col.phi.iter().zip(&col.d2).map(|(a, b)| a + b).collect();
        self.coupling() * dot_conj(pm, &total)
    }

    /// `Delta_11(z) = c conj(P-(z)) . d2`.
    fn eval_delta11(&self, col: &Column, row: &CauchyRow) -> C64 {
        let (_, pm) = row.weights(col.dual);
        self.coupling() * dot_conj(pm, &col.d2)
    }

    /// `Delta_21(z) = c P+(z) . T1`.
    fn eval_delta21(&self, col: &Column, row: &CauchyRow) -> C64 {
        let (pp, _) = row.weights(col.dual);
        self.coupling() * dot(pp, &col.t1)
    }

    /// `rho` of the channel at `z`.
    fn channel_rho(&self, z: C64, dual: bool) -> C64 {
        let r = self.cfg.rho(z);
        if dual {
            r.inv()
        } else {
            r
        }
    }

    fn check_inside(&self, z: C64, what: &str) -> Result<()> {
        if !(z.norm() < self.mesh.radius) {
            return Err(Error::Placement(alloc::format!("{what} lies outside the disk")));
        }
        Ok(())
    }

    /// Source placement rules of `build_h` and `solve_green`.
    fn check_source(&self, w: C64) -> Result<()> {
        self.check_inside(w, "source")?;
        let h = self.mesh.cell_size;
        let refined = self.mesh.refined_at.iter().any(|p| (p - w).norm() < 0.5 * h);
        for x in &self.cfg.punctures {
            let d = (w - x).norm();
            if d == 0.0 || (d < 0.125 * h && !refined) {
                return Err(Error::Placement(String::from("source too close to a puncture")));
            }
        }
        if !refined {
            for c in self.mesh.cells.iter().filter(|c| c.size == h) {
                if (c.center - w).norm() < 0.125 * h {
                    return Err(Error::Placement(String::from("source too close to an unrefined cell center")));
                }
            }
        }
        Ok(())
    }
}

fn rho_averages(mesh: &DiskMesh, cfg: &BranchConfig) -> (Vec<f64>, Vec<f64>) {
    let f = |v: C64| {
        let e = libm::exp(cfg.log_abs_rho_sq(v));
        (e, 1.0 / e)
    };
    let mut buf = Vec::with_capacity(64);
    let mut plus = Vec::with_capacity(mesh.len());
    let mut minus = Vec::with_capacity(mesh.len());
    for cell in &mesh.cells {
        if cfg.is_empty() {
            plus.push(1.0);
            minus.push(1.0);
            continue;
        }
        if let Some(x) = cfg.punctures.iter().find(|x| cell.contains(**x)) {
            let (p, m) = mesh.fan.area(*x, cell, &f, &mut buf);
            plus.push(p / cell.area());
            minus.push(m / cell.area());
            continue;
        }
        let near = cfg.punctures.iter().any(|x| (x - cell.center).norm() < 2.0 * cell.size);
        let (gx, gw) = if near { &mesh.fan.g8 } else { &mesh.fan.g4 };
        let (mut p, mut m) = (0.0, 0.0);
        for (xa, wa) in gx.iter().zip(gw) {
            for (xb, wb) in gx.iter().zip(gw) {
                let v = cell.center + 0.5 * cell.size * C64::new(*xa, *xb);
                let (a, b) = f(v);
                p += 0.25 * wa * wb * a;
                m += 0.25 * wa * wb * b;
            }
        }
        plus.push(p);
        minus.push(m);
    }
    (plus, minus)
}

/// Regular parts of the Green's function for one source: node values on the
/// mesh plus everything needed to evaluate them anywhere.
#[derive(Debug, Clone)]
pub struct GreenSolution {
    pub system: Arc<DiracSystem>,
    pub source: C64,
    /// `Delta_11` and `Delta_21` at the cell centers.
    pub delta11: Vec<C64>,
    pub delta21: Vec<C64>,
    primary: Column,
    dual: Column,
}

/// Second component of `h = K phi_0` on the cells (the first is zero).
pub fn build_h(system: &DiracSystem, w: C64) -> Result<Vec<[C64; 2]>> {
    system.check_source(w)?;
    let row = system.row(w);
    let phi = system.source(&row, false);
    let m = system.mesh.len();
    let (dp, dm) = system.diagonals(false);
    let mut tmp = vec![ZERO; m];
    let mut a = vec![ZERO; m];
    let mut h = vec![ZERO; m];
    system.apply_a(&dm, &phi, &mut tmp, &mut a);
    system.apply_b(&dp, &a, &mut tmp, &mut h);
    Ok(h.into_iter().map(|v| [ZERO, v]).collect())
}

/// Solves for both columns (the second through `rho -> 1/rho`).
pub fn solve_green(system: &Arc<DiracSystem>, w: C64) -> Result<GreenSolution> {
    system.check_source(w)?;
    let row = system.row(w);
    let primary = system.solve_column(&row, false)?;
    let dual = system.solve_column(&row, true)?;
    let m = system.mesh.len();
    let (_, dm) = system.diagonals(false);
    let mut tmp = vec![ZERO; m];
    let mut delta11 = vec![ZERO; m];
    system.apply_a(&dm, &primary.d2, &mut tmp, &mut delta11);
    Ok(GreenSolution { system: system.clone(), source: w, delta11, delta21: primary.d2.clone(), primary, dual })
}

impl GreenSolution {
    /// `(Delta_11(z, w), Delta_21(z, w))` at any point.
    pub fn delta_at(&self, z: C64) -> (C64, C64) {
        let row = self.system.row(z);
        (self.system.eval_delta11(&self.primary, &row), self.system.eval_delta21(&self.primary, &row))
    }
}

fn column_entries(sys: &DiracSystem, col: &Column, row: &CauchyRow, z: C64, w: C64) -> (C64, C64) {
    let (rz, rw) = (sys.channel_rho(z, col.dual), sys.channel_rho(w, col.dual));
    let s11 = rz.conj() * rw * sys.eval_t1(col, row);
    let s21 = rw / rz * ((2.0 * PI * (z - w)).inv() + sys.eval_delta21(col, row));
    (s11, s21)
}

fn check_eval_point(sys: &DiracSystem, z: C64, w: C64) -> Result<()> {
    if z == w {
        return Err(Error::Placement(String::from("evaluation point equals the source")));
    }
    if sys.cfg.punctures.iter().any(|x| *x == z || *x == w) {
        return Err(Error::Placement(String::from("evaluation point on a puncture")));
    }
    Ok(())
}

/// Full 2x2 Green's function `S(z, w)`.
pub fn reconstruct_s(sol: &GreenSolution, z: C64) -> Result<[[C64; 2]; 2]> {
    let sys = &*sol.system;
    check_eval_point(sys, z, sol.source)?;
    let row = sys.row(z);
    let (s11, s21) = column_entries(sys, &sol.primary, &row, z, sol.source);
    let (d11, d21) = column_entries(sys, &sol.dual, &row, z, sol.source);
    Ok([[s11, d21.conj()], [s21, d11.conj()]])
}

/// First column of `S(z, w)` from the two-term small-mass series
/// (order `mu` in the diagonal entry, `mu^2` in the off-diagonal one).
pub fn perturbative_column(system: &DiracSystem, z: C64, w: C64) -> Result<[C64; 2]> {
    check_eval_point(system, z, w)?;
    let wrow = system.row(w);
    let zrow = system.row(z);
    let phi = system.source(&wrow, false);
    let m = system.mesh.len();
    let (_, dm) = system.diagonals(false);
    let mut tmp = vec![ZERO; m];
    let mut a = vec![ZERO; m];
    system.apply_a(&dm, &phi, &mut tmp, &mut a);
    let col = Column { dual: false, phi, d2: vec![ZERO; m], t1: a };
    let (s11, s21) = column_entries(system, &col, &zrow, z, w);
    Ok([s11, s21])
}

fn check_branch_point(system: &DiracSystem, j: usize) -> Result<C64> {
    let cfg = &system.cfg;
    if j >= cfg.len() {
        return Err(domain("puncture index out of range"));
    }
    if !cfg.neutral {
        return Err(domain("branch-point derivatives need a neutral configuration"));
    }
    let x = cfg.punctures[j];
    if x.norm() > system.mesh.radius - system.mesh.cell_size {
        return Err(Error::Placement(String::from("puncture within one cell of the disk boundary")));
    }
    Ok(x)
}

/// `d/dx_j log Z~ = -2 pi alpha_j Delta_21(x_j, x_j)`, with the source placed at
/// the puncture and `Delta_21` evaluated there directly.
pub fn log_deriv_branch(system: &DiracSystem, j: usize) -> Result<C64> {
    let x = check_branch_point(system, j)?;
    let alpha = system.cfg.windings[j];
    if alpha == 0.0 || system.mu == 0.0 {
        return Ok(ZERO);
    }
    let row = system.row(x);
    let col = system.solve_column(&row, false)?;
    Ok(-2.0 * PI * alpha * system.eval_delta21(&col, &row))
}

/// `d/dr log det(1 - K_r) + 2 alpha^2 / r` by a central difference: the
/// infinite-volume counterpart of `2 Re d/dx_2 log Z~` for the pair
/// `(alpha, -alpha)` at distance `r`.
pub fn fredholm_log_derivative(alpha: f64, mu: f64, r: f64, dr: f64) -> Result<f64> {
    if !(dr > 0.0 && dr < r) {
        return Err(domain("step must lie in (0, r)"));
    }
    if mu == 0.0 {
        // massless limit: log det(1 - K_r) -> const - 2 alpha^2 log r
        return Ok(0.0);
    }
    let res = Resolution::default();
    let up = log_det_one_minus_k(&TwoPointSpec::new(alpha, mu, r + dr)?, res)?;
    let dn = log_det_one_minus_k(&TwoPointSpec::new(alpha, mu, r - dr)?, res)?;
    Ok((up - dn) / (2.0 * dr) + 2.0 * alpha * alpha / r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauConvergenceRow {
    pub radius: f64,
    pub cell_size: f64,
    pub cells: usize,
    pub solver_deriv: f64,
    pub fredholm_deriv: f64,
    pub rel_err: f64,
}

/// `2 Re d/dx_2 log Z~` for the pair `(alpha at -r/2, -alpha at r/2)` on a disk
/// of the given radius, with `cells_across` base cells over the diameter.
pub fn pair_solver_derivative(
    alpha: f64,
    mu: f64,
    r: f64,
    radius: f64,
    cells_across: usize,
    refine: usize,
) -> Result<(f64, DiskMesh)> {
    let x = [C64::new(-0.5 * r, 0.0), C64::new(0.5 * r, 0.0)];
    let cfg = BranchConfig::neutral_pair(alpha, x[0], x[1])?;
    let mesh = Arc::new(DiskMesh::new(radius, cells_across, refine, &x)?);
    let sys = DiracSystem::new(mesh.clone(), cfg, mu)?;
    let d = log_deriv_branch(&sys, 1)?;
    Ok((2.0 * d.re, (*mesh).clone()))
}

/// Compares the finite-volume branch-point derivative with the Fredholm route
/// over the given radii at fixed `h / L`.
pub fn tau_convergence(
    alpha: f64,
    mu: f64,
    r: f64,
    radii: &[f64],
    cells_across: usize,
    refine: usize,
) -> Result<Vec<TauConvergenceRow>> {
    let fd = fredholm_log_derivative(alpha, mu, r, 1e-3)?;
    let mut rows = Vec::with_capacity(radii.len());
    for &radius in radii {
        let (sd, mesh) = pair_solver_derivative(alpha, mu, r, radius, cells_across, refine)?;
        let rel_err = if fd == 0.0 { libm::fabs(sd) } else { libm::fabs(sd - fd) / libm::fabs(fd) };
        rows.push(TauConvergenceRow {
            radius,
            cell_size: mesh.cell_size,
            cells: mesh.len(),
            solver_deriv: sd,
            fredholm_deriv: fd,
            rel_err,
        });
    }
    Ok(rows)
}

/// `log Z~` with its accumulated imaginary part and the integrand at each
/// mass node.
#[derive(Debug, Clone, PartialEq)]
pub struct LogZTilde {
    pub value: f64,
    pub imag: f64,
    pub nodes: Vec<(f64, C64)>,
    pub cells: usize,
}

/// Diagonal of `Delta_11` on the cells for mass `s`, from
/// `X = (I - c^2 H D+)^{-1} H` with `H = conj(K) D- K`.
fn delta11_diagonal(h: &DenseMatrix, dp: &[f64], s: f64) -> Result<Vec<C64>> {
    let m = h.rows;
    let c = -s / (2.0 * PI);
    let mut a = DenseMatrix::from_fn(m, m, |i, j| -h[(i, j)] * (c * c * dp[j]));
    for i in 0..m {
        a[(i, i)] += 1.0;
    }
    let lu = Lu::factor(a)?;
    let mut x = h.clone();
    lu.solve_many(&mut x)?;
    Ok((0..m).map(|j| (x[(j, j)] - h[(j, j)]) * (c / (2.0 * PI))).collect())
}

fn gram(k: &DenseMatrix, kbar: &DenseMatrix, dm: &[f64]) -> DenseMatrix {
    let m = k.rows;
    let scaled = DenseMatrix::from_fn(m, m, |i, j| k[(i, j)] * dm[i]);
    kbar.matmul(&scaled)
}

/// Renormalized log partition function: `int_0^mu ds` of the regularized
/// diagonal of `S_11` (and `S_22` through `rho -> 1/rho`) over the disk,
/// Gauss-Legendre in `s`.
pub fn log_z_tilde(system: &DiracSystem, mass_nodes: usize) -> Result<LogZTilde> {
    if mass_nodes < 4 {
        return Err(Error::Insufficient { got: mass_nodes, need: 4 });
    }
    let cfg = &system.cfg;
    if !cfg.neutral {
        return Err(domain("log_z_tilde needs a neutral configuration"));
    }
    let mesh = &*system.mesh;
    let m = mesh.len();
    if system.mu == 0.0 {
        return Ok(LogZTilde { value: 0.0, imag: 0.0, nodes: Vec::new(), cells: m });
    }
    let area: Vec<f64> = mesh.cells.iter().map(Cell::area).collect();
    let (pp, pm) = (&system.rho_plus, &system.rho_minus);

    // s-independent part of the |u - v|^{-2} term
    let mut singular = 0.0;
    for u in 0..m {
        let cu = mesh.cells[u].center;
        let mut acc = 0.0;
        for v in 0..m {
            if v == u {
                continue;
            }
            let d2 = (cu - mesh.cells[v].center).norm_sqr();
            acc += area[v] * (pp[u] * pm[v] + pm[u] * pp[v] - 2.0) / d2;
        }
        let grad: C64 = cfg.punctures.iter().zip(&cfg.windings).map(|(x, a)| *a / (cu - x)).sum();
        acc += 2.0 * area[u] * grad.norm_sqr();
        singular += area[u] * acc;
    }
    singular /= (2.0 * PI) * (2.0 * PI);

    let k = mesh.cauchy_matrix();
    let kbar = DenseMatrix::from_fn(m, m, |i, j| k[(i, j)].conj());
    let dp: Vec<f64> = area.iter().zip(pp).map(|(a, r)| a * r).collect();
    let dm: Vec<f64> = area.iter().zip(pm).map(|(a, r)| a * r).collect();
    let h_rho = gram(&k, &kbar, &dm);
    let h_inv = gram(&k, &kbar, &dp);
    let h_one = gram(&k, &kbar, &area);
    drop(k);
    drop(kbar);

    let (gx, gw) = gauss_legendre_unit(mass_nodes);
    let half = 0.5 * system.mu;
    let mut total = ZERO;
    let mut nodes = Vec::with_capacity(mass_nodes);
    for (x, w) in gx.iter().zip(&gw) {
        let s = half * (x + 1.0);
        let d_rho = delta11_diagonal(&h_rho, &dp, s)?;
        let d_inv = delta11_diagonal(&h_inv, &dm, s)?;
        let d_one = delta11_diagonal(&h_one, &area, s)?;
        let mut integrand = C64::new(s * singular, 0.0);
        for u in 0..m {
            integrand += area[u] * (pp[u] * d_rho[u] + pm[u] * d_inv[u].conj() - d_one[u] - d_one[u].conj());
        }
        total += integrand * (half * w);
        nodes.push((s, integrand));
    }
    Ok(LogZTilde { value: total.re, imag: total.im, nodes, cells: m })
}

/// Evaluation pair and finite-difference step for [`factorization_residual`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorizationQuery {
    pub z: C64,
    pub w: C64,
    pub step: f64,
}

/// Relative mismatch between `d/dx_j` of the first column of `S(z, w)`
/// (central differences, four solves with the puncture moved) and
/// `2 pi alpha_j col(z; x_j) row(x_j; w)`, where `col` is the first column with
/// the source at the puncture and `row` the regular part of `S_21(x_j, w)`,
/// both with the `rho(x_j)` factor removed.
pub fn factorization_residual(system: &DiracSystem, j: usize, q: FactorizationQuery) -> Result<f64> {
    let x = check_branch_point(system, j)?;
    let FactorizationQuery { z, w, step } = q;
    let smallest = system.mesh.cells.iter().fold(f64::INFINITY, |a, c| a.min(c.size));
    if !(step >= 1e-7 * system.mesh.cell_size && step <= 0.125 * smallest) {
        return Err(domain("finite-difference step must lie between 1e-7 h and 1/8 of the smallest cell"));
    }
    check_eval_point(system, z, w)?;
    for p in [z, w] {
        if system.cfg.punctures.iter().any(|x| (p - x).norm() < 4.0 * step) {
            return Err(Error::Placement(String::from("evaluation point too close to a puncture")));
        }
    }
    let alpha = system.cfg.windings[j];
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let column_at = |sys: &DiracSystem| -> Result<(C64, C64)> {
        let col = sys.solve_column(&sys.row(w), false)?;
        Ok(column_entries(sys, &col, &sys.row(z), z, w))
    };
    let moved = |dx: C64| -> Result<DiracSystem> {
        let mut pts = system.cfg.punctures.clone();
        pts[j] += dx;
        let cfg = BranchConfig::new(pts, system.cfg.windings.clone())?.with_cut_angle(system.cfg.cut_angle);
        system.with_config(cfg, system.mu)
    };
    let mut diff = [[ZERO; 2]; 2];
    for (k, dir) in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)].into_iter().enumerate() {
        let (a11, a21) = column_at(&moved(dir * step)?)?;
        let (b11, b21) = column_at(&moved(-dir * step)?)?;
        diff[k] = [(a11 - b11) / (2.0 * step), (a21 - b21) / (2.0 * step)];
    }
    let i = C64::new(0.0, 1.0);
    let lhs = [0.5 * (diff[0][0] - i * diff[1][0]), 0.5 * (diff[0][1] - i * diff[1][1])];

    let xrow = system.row(x);
    let zrow = system.row(z);
    let cx = system.solve_column(&xrow, false)?;
    let cw = system.solve_column(&system.row(w), false)?;
    let (rz, rw) = (system.cfg.rho(z), system.cfg.rho(w));
    let col =
        [rz.conj() * system.eval_t1(&cx, &zrow), ((2.0 * PI * (z - x)).inv() + system.eval_delta21(&cx, &zrow)) / rz];
    let row = rw * ((2.0 * PI * (x - w)).inv() + system.eval_delta21(&cw, &xrow));
    let rhs = [2.0 * PI * alpha * col[0] * row, 2.0 * PI * alpha * col[1] * row];
    let num = libm::sqrt((lhs[0] - rhs[0]).norm_sqr() + (lhs[1] - rhs[1]).norm_sqr());
    let den = libm::sqrt(rhs[0].norm_sqr() + rhs[1].norm_sqr());
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_cauchy_against_midpoint_sum() {
        let n = 800;
        for z in [C64::new(0.3, 0.1), C64::new(1.7, -0.4), C64::new(0.5, 0.5)] {
            let mut s = ZERO;
            for a in 0..n {
                for b in 0..n {
                    let v = C64::new((a as f64 + 0.5) / n as f64 - 0.5, (b as f64 + 0.5) / n as f64 - 0.5);
                    s += (z - v).inv();
                }
            }
            s /= (n * n) as f64;
            let e = cauchy_square(z, ZERO, 1.0);
            assert!((e - s).norm() < 5e-4, "{z} {e} {s}");
        }
        assert_eq!(cauchy_square(ZERO, ZERO, 1.0).norm(), 0.0);
    }

    #[test]
    fn fan_matches_exact_square() {
        let rule = FanRule::new();
        let cell = Cell { center: C64::new(0.2, -0.1), size: 0.5 };
        let one = |_: C64| (1.0, 1.0);
        let mut buf = Vec::new();
        for z in [
            C64::new(0.25, 0.0),
            C64::new(0.7, 0.4),
            C64::new(0.45, 0.05),
            C64::new(0.2001, 0.1499),
            C64::new(-0.05, -0.35),
        ] {
            let (f, _) = rule.cauchy(z, &cell, &one, &mut buf);
            let e = cauchy_square(z, cell.center, cell.size);
            assert!((f - e).norm() < 1e-11 * e.norm().max(1.0), "{z} {f} {e}");
            let (a, _) = rule.area(z, &cell, &one, &mut buf);
            assert!((a - 0.25).abs() < 1e-12, "{a}");
        }
    }
}
