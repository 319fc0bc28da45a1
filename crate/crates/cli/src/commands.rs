//! One function per subcommand.

use std::ops::Range;
use std::sync::Arc;

use ffcorr_core::dirac::{self, DiracSystem, DiskMesh, LARGE_MESH};
use ffcorr_core::fredholm::{barnes_normalization_log, log_det_one_minus_k, log_two_point, Resolution, TwoPointSpec};
use ffcorr_core::free_field::{self, CumulantQuery};
use ffcorr_core::gmc::{
    self, BlockSums, Charge, MomentRequest, TestFunction, TorusSampler, TorusSpec, JACKKNIFE_BLOCKS,
};
use ffcorr_core::numerics::RandomStream;
use ffcorr_core::painleve::{self, RadialProfile};
use ffcorr_core::specfun::{lz_one_point, LZParams};
use ffcorr_core::C64;
use serde_json::Value;

use crate::config::{read_toml, BranchFile, ChargesFile};
use crate::output::{Cell, Manifest, Report, Table};
use crate::*;

/// Residual level above which the Painleve table raises a flag.
pub const RESIDUAL_TOL: f64 = 0.05;
/// Largest acceptable |z_score| of a chaos moment.
pub const Z_SCORE_TOL: f64 = 3.0;
/// Largest acceptable final relative error in the tau comparison.
pub const TAU_TOL: f64 = 0.15;

/// Order-preserving map over at most `workers` scoped threads.
pub fn par_map<T: Sync, R: Send>(workers: usize, items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> =
            items.chunks(chunk).map(|c| s.spawn(move || c.iter().map(f).collect::<Vec<_>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

fn radii(r_min: f64, r_max: f64, points: usize) -> Result<Vec<f64>, Failure> {
    match points {
        0 => Err(Failure::Usage("need at least one point".into())),
        1 if r_min > 0.0 => Ok(vec![r_min]),
        _ => {
            let mut rs = painleve::log_grid(r_min, r_max, points, 0)?;
            rs[0] = r_min;
            rs[points - 1] = r_max;
            Ok(rs)
        }
    }
}

fn check_alpha(alpha: f64) -> Result<(), Failure> {
    if alpha.abs() < 0.5 {
        Ok(())
    } else {
        Err(Failure::Usage(format!("alpha = {alpha} must satisfy |alpha| < 1/2")))
    }
}

pub fn twopoint(a: &TwoPointArgs) -> Result<Report, Failure> {
    check_alpha(a.alpha)?;
    let rs = radii(a.r_min, a.r_max, a.points)?;
    let res = Resolution::nodes(a.nodes, a.inner_nodes);
    let norm = if a.alpha == 0.0 { 0.0 } else { barnes_normalization_log(a.alpha)? };
    let lz = lz_one_point(LZParams::new(a.alpha, a.mu)?)?;
    let rows = par_map(a.common.workers(), &rs, |&r| -> ffcorr_core::Result<Vec<Cell>> {
        let spec = TwoPointSpec::new(a.alpha, a.mu, r)?;
        let log_det = log_det_one_minus_k(&spec, res)?;
        let log_tp = log_two_point(&spec, res)?;
        let short = log_det + 2.0 * a.alpha * a.alpha * (0.5 * a.mu * r).ln() + norm;
        Ok(vec![
            r.into(),
            log_det.exp().into(),
            log_tp.exp().into(),
            short.exp().into(),
            (log_tp.exp() / (lz * lz)).into(),
        ])
    });
    let mut table = Table::new(&["r", "det_one_minus_k", "two_point", "short_dist_ratio", "long_dist_ratio"]);
    for row in rows {
        table.push(row?);
    }
    Ok(Report { table, manifest: Manifest::new("twopoint", a) })
}

pub fn onepoint(a: &OnePointArgs) -> Result<Report, Failure> {
    let v = lz_one_point(LZParams::new(a.alpha, a.mu)?)?;
    let table = Table::record(&[("alpha", a.alpha.into()), ("mu", a.mu.into()), ("one_point", v.into())]);
    Ok(Report { table, manifest: Manifest::new("onepoint", a) })
}

pub fn painleve(a: &PainleveArgs) -> Result<Report, Failure> {
    check_alpha(a.alpha)?;
    if a.points < 2 {
        return Err(Failure::Usage("painleve needs at least two points".into()));
    }
    // two extra log-steps on each side so the target interval is interior
    let pad = 2;
    let nodes = painleve::log_grid(a.r_min, a.r_max, a.points, pad)?;
    let res = Resolution::nodes(a.nodes, a.inner_nodes);
    let sigma =
        par_map(a.common.workers(), &nodes, |&r| log_det_one_minus_k(&TwoPointSpec::new(a.alpha, a.mu, r)?, res))
            .into_iter()
            .collect::<ffcorr_core::Result<Vec<_>>>()?;
    let offset = if a.alpha == 0.0 {
        0.0
    } else {
        2.0 * a.alpha * a.alpha * (0.5 * a.mu).ln() + barnes_normalization_log(a.alpha)?
    };
    let profile = RadialProfile::new(nodes, sigma, a.alpha, a.mu)?;
    let res_table = painleve::residual_table(&profile)?;
    let mut table = Table::new(&["r", "sigma", "psi", "ode_residual", "palmer_residual"]);
    let tol = 1e-9 * a.r_max;
    let mut worst = (0.0f64, 0.0f64);
    for (i, &r) in res_table.r.iter().enumerate() {
        if r < a.r_min - tol || r > a.r_max + tol {
            continue;
        }
        // residual row i sits at profile node i + 2
        let s = profile.sigma[i + 2] + offset;
        worst = (worst.0.max(res_table.ode[i]), worst.1.max(res_table.palmer[i]));
        table.push(vec![
            r.into(),
            s.into(),
            res_table.psi[i].into(),
            res_table.ode[i].into(),
            res_table.palmer[i].into(),
        ]);
    }
    let mut manifest = Manifest::new("painleve", a);
    if !(worst.0 <= RESIDUAL_TOL) {
        manifest.flag(format!("ode_residual_above_{RESIDUAL_TOL}"));
    }
    if !(worst.1 <= RESIDUAL_TOL) {
        manifest.flag(format!("palmer_residual_above_{RESIDUAL_TOL}"));
    }
    Ok(Report { table, manifest })
}

pub fn gmc(a: &GmcArgs) -> Result<Report, Failure> {
    let file: ChargesFile = read_toml(&a.charges)?;
    let t = TorusSpec::new(a.box_len, a.grid, a.eps, a.mass)?;
    let charges: Vec<Charge> = file
        .charge
        .iter()
        .map(|c| Charge { alpha: c.alpha, f: TestFunction::delta(&t, (c.cell[0], c.cell[1])) })
        .collect();
    let stream = RandomStream::new(a.seed, 0);
    let req = MomentRequest { charges, samples: a.samples, stream };
    req.validate(&t)?;
    let points: Vec<(f64, (usize, usize))> = file.charge.iter().map(|c| (c.alpha, (c.cell[0], c.cell[1]))).collect();
    let exact = gmc::exact_gaussian_moment(&t, &points)?;

    let (mean, stderr) = if req.charges.iter().all(|c| c.alpha == 0.0) {
        let v: f64 = req.charges.iter().map(|c| c.f.integral(&t)).product();
        (C64::new(v, 0.0), 0.0)
    } else {
        let sampler = TorusSampler::new(t)?;
        let blocks: Vec<Range<usize>> = gmc::block_layout(a.samples, JACKKNIFE_BLOCKS);
        let sums = par_map(a.common.workers(), &blocks, |b| {
            gmc::run_blocks(&sampler, stream, a.samples, std::slice::from_ref(b), |f| {
                gmc::chaos_product(f, &req.charges)
            })
        });
        let all = sums.into_iter().fold(BlockSums { sums: vec![], counts: vec![] }, BlockSums::concat);
        all.jackknife()
    };
    let diff = (mean - exact).norm();
    let z = if stderr > 0.0 {
        diff / stderr
    } else if diff <= 1e-12 * exact.norm().max(1.0) {
        0.0
    } else {
        f64::INFINITY
    };

    let mut manifest = Manifest::new("gmc", a);
    manifest.seed = Some(a.seed);
    manifest.params.insert(
        "charges".into(),
        Value::Array(file.charge.iter().map(|c| serde_json::json!({ "alpha": c.alpha, "cell": c.cell })).collect()),
    );
    manifest.warnings = t.warnings().iter().map(|w| format!("{w:?}")).collect();
    if !(z <= Z_SCORE_TOL) {
        manifest.flag(format!("z_score_above_{Z_SCORE_TOL}"));
    }
    let table = Table::record(&[
        ("mc_mean", mean.re.into()),
        ("mc_mean_im", mean.im.into()),
        ("stderr", stderr.into()),
        ("exact_value", exact.re.into()),
        ("z_score", z.into()),
        ("samples", a.samples.into()),
    ]);
    Ok(Report { table, manifest })
}

pub fn tau_convergence(a: &TauArgs) -> Result<Report, Failure> {
    check_alpha(a.alpha)?;
    if a.radius.is_empty() || a.cells.is_empty() {
        return Err(Failure::Usage("need at least one radius and one cell count".into()));
    }
    let fd = dirac::fredholm_log_derivative(a.alpha, a.mu, a.r, 1e-3)?;
    let jobs: Vec<(usize, f64)> = a.cells.iter().flat_map(|&n| a.radius.iter().map(move |&l| (n, l))).collect();
    let results = par_map(a.common.workers(), &jobs, |&(n, l)| {
        dirac::pair_solver_derivative(a.alpha, a.mu, a.r, l, n, a.refine).map(|(sd, mesh)| (sd, mesh.cell_size))
    });
    let mut table = Table::new(&["L", "h", "cells_across", "solver_deriv", "fredholm_deriv", "rel_err"]);
    let mut manifest = Manifest::new("tau-convergence", a);
    let mut last: Option<(usize, f64)> = None;
    let mut monotone = true;
    for (&(n, l), res) in jobs.iter().zip(results) {
        let (sd, h) = res?;
        let rel = if fd == 0.0 { sd.abs() } else { (sd - fd).abs() / fd.abs() };
        if let Some((pn, prel)) = last {
            if pn == n && rel > prel {
                monotone = false;
            }
        }
        last = Some((n, rel));
        table.push(vec![l.into(), h.into(), n.into(), sd.into(), fd.into(), rel.into()]);
    }
    if !monotone {
        manifest.flag("rel_err_not_monotone");
    }
    if let Some((_, rel)) = last {
        if !(rel <= TAU_TOL) {
            manifest.flag(format!("rel_err_above_{TAU_TOL}"));
        }
    }
    Ok(Report { table, manifest })
}

pub fn cumulant(a: &CumulantArgs) -> Result<Report, Failure> {
    let q = CumulantQuery::new(a.momenta.iter().map(|p| C64::new(p[0], p[1])).collect(), a.mu)?;
    let k = free_field::cumulant_kernel(&q, a.nodes, a.inner_nodes)?;
    let mut fields =
        vec![("n", q.n.into()), ("mu", a.mu.into()), ("kernel_re", k.re.into()), ("kernel_im", k.im.into())];
    // the bound exists from n = 3 on
    if q.n >= 3 {
        fields.push(("holder_bound", free_field::holder_bound(&q)?.into()));
    }
    let table = Table::record(&fields);
    Ok(Report { table, manifest: Manifest::new("cumulant", a) })
}

fn branch_config(path: &std::path::Path, manifest: &mut Manifest) -> Result<free_field::BranchConfig, Failure> {
    let file: BranchFile = read_toml(path)?;
    manifest.params.insert("punctures".into(), serde_json::to_value(&file.punctures).map_err(anyhow::Error::from)?);
    manifest.params.insert("windings".into(), serde_json::to_value(&file.windings).map_err(anyhow::Error::from)?);
    manifest.params.insert("neutral".into(), file.neutral.into());
    manifest.params.insert("cut_angle".into(), file.cut_angle.into());
    Ok(file.into_config()?)
}

pub fn gffcorr(a: &GffArgs) -> Result<Report, Failure> {
    let mut manifest = Manifest::new("gffcorr", a);
    let cfg = branch_config(&a.config, &mut manifest)?;
    let g = free_field::gff_fractional_correlation(&cfg)?;
    let z = free_field::z_rho_zero(&cfg)?;
    let table = Table::record(&[("gff_fractional_correlation", g.into()), ("z_rho_zero", z.into())]);
    Ok(Report { table, manifest })
}

pub fn dirac(a: &DiracArgs) -> Result<Report, Failure> {
    let mut manifest = Manifest::new("dirac", a);
    let cfg = branch_config(&a.config, &mut manifest)?;
    let mesh = Arc::new(DiskMesh::new(a.radius, a.cells, a.refine, &cfg.punctures)?);
    if mesh.len() > LARGE_MESH {
        manifest.warnings.push(format!("large mesh: {} cells", mesh.len()));
    }
    let sys = DiracSystem::new(mesh.clone(), cfg.clone(), a.mu)?;
    let idx: Vec<usize> = (0..cfg.len()).collect();
    let derivs = par_map(a.common.workers(), &idx, |&j| dirac::log_deriv_branch(&sys, j))
        .into_iter()
        .collect::<ffcorr_core::Result<Vec<_>>>()?;
    let log_z = match a.mass_nodes {
        Some(n) => Some(dirac::log_z_tilde(&sys, n)?),
        None => None,
    };
    let mut cols = vec!["j", "x_re", "x_im", "alpha", "dlogz_re", "dlogz_im"];
    if log_z.is_some() {
        cols.extend(["log_z_tilde", "log_z_tilde_im"]);
    }
    let mut table = Table::new(&cols);
    for (j, d) in derivs.iter().enumerate() {
        let x = cfg.punctures[j];
        let mut row = vec![j.into(), x.re.into(), x.im.into(), cfg.windings[j].into(), d.re.into(), d.im.into()];
        if let Some(z) = &log_z {
            row.extend([Cell::F(z.value), Cell::F(z.imag)]);
        }
        table.push(row);
    }
    manifest.params.insert("mesh_cells".into(), mesh.len().into());
    Ok(Report { table, manifest })
}
