//! Manufactured-solution convergence study for the forward solver.
//!
//! With `a ≡ I`, `q ≡ 0` and `φ = cos(πx1) cos(2πx2)` (zero on the lateral
//! edges, zero normal derivative on top and bottom) two loads isolate the
//! two error sources:
//!
//! * space: `F_n = (D_τ g(t_n) + 5π² g(t_n)) φ` with the discrete Caputo
//!   derivative `D_τ`, so `g(t_n) φ` solves the time-discrete problem and
//!   only the spatial error remains;
//! * time: `F_n = ∂^α g(t_n) φ_h + g(t_n) M⁻¹K φ_h`, whose semi-discrete
//!   solution is exactly `g φ_h`, so only the time-stepping error remains.
//!
//! `g(t) = A t²`.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::coeffs::CoefficientSet;
use crate::error::{Error, Result};
use crate::fem::{assemble_stiffness, BcVariant};
use crate::fractional::{caputo_series, gamma_fn};
use crate::linalg::{spmv, BandCholesky};
use crate::mesh::Mesh2D;
use crate::solver::ForwardModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Refinement {
    Space,
    Time,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceConfig {
    pub refinement: Refinement,
    /// Spatial resolutions `M` (varied for `Space`, first entry used for `Time`).
    pub ms: Vec<usize>,
    /// Time steps `N` (varied for `Time`, first entry used for `Space`).
    pub ns: Vec<usize>,
    pub alpha: f64,
    pub t_final: f64,
    /// Amplitude `A` of `g(t) = A t²`.
    pub amplitude: f64,
}

impl ConvergenceConfig {
    pub fn space(alpha: f64) -> Self {
        Self {
            refinement: Refinement::Space,
            ms: vec![16, 32, 64],
            ns: vec![20],
            alpha,
            t_final: 1.0,
            amplitude: 1.0,
        }
    }

    pub fn time(alpha: f64) -> Self {
        Self {
            refinement: Refinement::Time,
            ms: vec![8],
            ns: vec![125, 250, 500, 1000],
            alpha,
            t_final: 1.0,
            amplitude: 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub tau: f64,
    /// `L²(Ω)` error at `t = T`.
    pub error: f64,
    /// Order against the previous row.
    pub order: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub config: ConvergenceConfig,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log error` against `log h` (or `log τ`).
    pub fitted_order: Option<f64>,
}

impl ConvergenceReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            w,
            "# config: {}",
            serde_json::to_string(&self.config).unwrap_or_default()
        )?;
        if let Some(p) = self.fitted_order {
            writeln!(w, "# least-squares order: {p:.16e}")?;
        }
        writeln!(w, "h,tau,error,order")?;
        for r in &self.rows {
            let order = r.order.map(|p| format!("{p:.16e}")).unwrap_or_default();
            writeln!(w, "{:.16e},{:.16e},{:.16e},{order}", r.h, r.tau, r.error)?;
        }
        Ok(())
    }
}

fn phi(x: [f64; 2]) -> f64 {
    (PI * x[0]).cos() * (2.0 * PI * x[1]).cos()
}

/// Degree-5 seven-point rule on the reference triangle (barycentric points, weights).
const QUAD7: [([f64; 3], f64); 7] = {
    const A1: f64 = 0.059_715_871_789_770;
    const B1: f64 = 0.470_142_064_105_115;
    const W1: f64 = 0.132_394_152_788_506;
    const A2: f64 = 0.797_426_985_353_087;
    const B2: f64 = 0.101_286_507_323_456;
    const W2: f64 = 0.125_939_180_544_827;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

/// `‖u_h - u‖_{L²(Ω)}` for a P1 field `u_h` and a smooth `u`.
pub fn l2_error(mesh: &Mesh2D, uh: &[f64], u: impl Fn([f64; 2]) -> f64) -> f64 {
    let nodes = mesh.nodes();
    let mut s = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.signed_area(t).abs();
        let p = tri.map(|k| nodes[k]);
        for (b, w) in QUAD7 {
            let x = [
                b[0] * p[0][0] + b[1] * p[1][0] + b[2] * p[2][0],
                b[0] * p[0][1] + b[1] * p[1][1] + b[2] * p[2][1],
            ];
            let vh = b[0] * uh[tri[0]] + b[1] * uh[tri[1]] + b[2] * uh[tri[2]];
            s += w * area * (vh - u(x)).powi(2);
        }
    }
    s.sqrt()
}

fn error_space(cfg: &ConvergenceConfig, m: usize, n: usize) -> Result<f64> {
    let model = ForwardModel::build(m, n, cfg.t_final, cfg.alpha, CoefficientSet::identity())?;
    let grid = *model.grid();
    let g: Vec<f64> = (0..=n).map(|k| cfg.amplitude * grid.t(k).powi(2)).collect();
    let dg = caputo_series(model.weights(), &grid, &g);
    let shape: Vec<f64> = model.mesh().nodes().iter().map(|&x| phi(x)).collect();
    let lam = 5.0 * PI * PI;
    let u = model.sweep(
        BcVariant::Ispn,
        &mut |k, out| {
            let c = dg[k] + lam * g[k];
            for (o, s) in out.iter_mut().zip(&shape) {
                *o = c * s;
            }
        },
        None,
    )?;
    Ok(l2_error(model.mesh(), u.level(n), |x| g[n] * phi(x)))
}

fn error_time(cfg: &ConvergenceConfig, m: usize, n: usize) -> Result<f64> {
    let model = ForwardModel::build(m, n, cfg.t_final, cfg.alpha, CoefficientSet::identity())?;
    let grid = *model.grid();
    let a = cfg.alpha;
    let caputo_t2 = 2.0 / gamma_fn(3.0 - a)?;
    let shape: Vec<f64> = model.mesh().nodes().iter().map(|&x| phi(x)).collect();
    let k = assemble_stiffness(model.mesh(), model.coeffs(), 0.0)?;
    let mut kphi = vec![0.0; shape.len()];
    spmv(&k.matrix, &shape, &mut kphi);
    BandCholesky::factor(model.mass())?.solve_in_place(&mut kphi);
    let amp = cfg.amplitude;
    let u = model.sweep(
        BcVariant::Ispn,
        &mut |lev, out| {
            let t = grid.t(lev);
            let (d, g) = (amp * caputo_t2 * t.powf(2.0 - a), amp * t * t);
            for ((o, s), z) in out.iter_mut().zip(&shape).zip(&kphi) {
                *o = d * s + g * z;
            }
        },
        None,
    )?;
    // error against g(T) φ_h in the mass norm
    let gt = amp * grid.t(n).powi(2);
    let e: Vec<f64> = u
        .level(n)
        .iter()
        .zip(&shape)
        .map(|(v, s)| v - gt * s)
        .collect();
    let mut me = vec![0.0; e.len()];
    spmv(model.mass(), &e, &mut me);
    Ok(crate::linalg::dot(&e, &me).max(0.0).sqrt())
}

/// Least-squares slope of `log y` against `log x`.
pub fn fitted_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), p| (a + p.0 / n, b + p.1 / n));
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn run_convergence_study(cfg: &ConvergenceConfig) -> Result<ConvergenceReport> {
    let (Some(&m0), Some(&n0)) = (cfg.ms.first(), cfg.ns.first()) else {
        return Err(Error::InvalidParameter(
            "convergence study needs at least one M and one N".into(),
        ));
    };
    let runs: Vec<(usize, usize)> = match cfg.refinement {
        Refinement::Space => cfg.ms.iter().map(|&m| (m, n0)).collect(),
        Refinement::Time => cfg.ns.iter().map(|&n| (m0, n)).collect(),
    };
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(runs.len());
    for (m, n) in runs {
        let error = match cfg.refinement {
            Refinement::Space => error_space(cfg, m, n)?,
            Refinement::Time => error_time(cfg, m, n)?,
        };
        let (h, tau) = (1.0 / m as f64, cfg.t_final / n as f64);
        let order = rows.last().and_then(|p| {
            let step = match cfg.refinement {
                Refinement::Space => p.h / h,
                Refinement::Time => p.tau / tau,
            };
            (p.error > 0.0 && error > 0.0).then(|| (p.error / error).ln() / step.ln())
        });
        rows.push(ConvergenceRow {
            h,
            tau,
            error,
            order,
        });
    }
    let xs: Vec<f64> = rows
        .iter()
        .map(|r| match cfg.refinement {
            Refinement::Space => r.h,
            Refinement::Time => r.tau,
        })
        .collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.error).collect();
    Ok(ConvergenceReport {
        config: cfg.clone(),
        fitted_order: fitted_slope(&xs, &ys),
        rows,
    })
}
