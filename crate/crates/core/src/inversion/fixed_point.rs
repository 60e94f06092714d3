//! Reconstruction through the boundary identity `f = h - H f`, where `h`
//! is computed from the trace data alone and `H` is the causal operator
//! `Hφ = a22 ∂²_{x2} u_φ(·, ℓ, ·) / R`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::BcVariant;
use crate::field::{LateralObservation, ObservationKind, SourceGrid, TraceField, TraceNorm};
use crate::fractional::caputo_series;
use crate::mesh::HALF_HEIGHT;
use crate::solver::{normal_curvature_top, solve_direct, ForwardModel};

/// Smallest `|R(x1, ℓ, t)|` accepted when dividing by the source factor.
const C_R: f64 = 1e-10;
/// Step for differentiating `a11` in `x1` at the lateral ends.
const COEFF_FD_STEP: f64 = 1e-5;

/// Gaussian smoothing of trace data in `(x1, t)`. `width` is the standard
/// deviation in grid cells; the kernel is cut at three widths and
/// renormalized near the edges. The initial level `g(·, 0) = 0` takes part
/// in the averaging and the lateral end values are kept.
pub fn mollify(g: &TraceField, width: f64) -> TraceField {
    if !(width > 0.0) {
        return g.clone();
    }
    let radius = (3.0 * width).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-0.5 * (k as f64 / width).powi(2)).exp())
        .collect();
    let (nx, nt) = (g.nx() as isize, g.nt() as isize);
    let value = |i: isize, n: isize| {
        if n == 0 {
            0.0
        } else {
            g.get(i as usize, n as usize)
        }
    };

    // separable: x1 first, then t
    let mut tmp = vec![vec![0.0; nx as usize]; nt as usize + 1];
    for n in 1..=nt {
        for i in 1..nx - 1 {
            let (mut s, mut wsum) = (0.0, 0.0);
            for (k, w) in (-radius..=radius).zip(&kernel) {
                let j = i + k;
                if (0..nx).contains(&j) {
                    s += w * value(j, n);
                    wsum += w;
                }
            }
            tmp[n as usize][i as usize] = s / wsum;
        }
        tmp[n as usize][0] = value(0, n);
        tmp[n as usize][nx as usize - 1] = value(nx - 1, n);
    }
    let mut out = g.clone();
    for n in 1..=nt {
        for i in 1..nx - 1 {
            let (mut s, mut wsum) = (0.0, 0.0);
            for (k, w) in (-radius..=radius).zip(&kernel) {
                let m = n + k;
                if (0..=nt).contains(&m) {
                    s += w * tmp[m as usize][i as usize];
                    wsum += w;
                }
            }
            out.level_mut(n as usize)[i as usize] = s / wsum;
        }
    }
    out
}

/// `h = [∂_t^α g - ∂_{x1}(a11 ∂_{x1} g) + q g] / R` on the top face.
///
/// Discrete Caputo derivative in time, conservative centered differences in
/// `x1` with one-sided second-order closures at the lateral ends. `mollify`
/// is the optional smoothing width in grid cells.
pub fn fixed_point_h(
    model: &ForwardModel,
    g: &LateralObservation,
    mollify_width: Option<f64>,
) -> Result<TraceField> {
    if g.kind != ObservationKind::Trace {
        return Err(Error::InvalidParameter(
            "the fixed-point path needs trace (ISPn) data".into(),
        ));
    }
    g.values.same_shape(&model.zero_trace())?;
    let np = g.values.nx();
    if np < 4 {
        return Err(Error::InvalidParameter(
            "fixed-point data needs at least 3 cells in x1".into(),
        ));
    }
    let data = match mollify_width {
        Some(w) => mollify(&g.values, w),
        None => g.values.clone(),
    };
    let grid = *model.grid();
    let nt = grid.n;
    let coeffs = model.coeffs();
    let xs = model.trace_coords();
    let hx = model.mesh().h();
    let top = |x1: f64| [x1, HALF_HEIGHT];

    let mut h = model.zero_trace();
    let mut series = vec![0.0; nt + 1];
    for i in 0..np {
        for n in 1..=nt {
            series[n] = data.get(i, n);
        }
        let d = caputo_series(model.weights(), &grid, &series);
        for n in 1..=nt {
            h.level_mut(n)[i] = d[n];
        }
    }

    for n in 1..=nt {
        let t = grid.t(n);
        let gl = data.level(n);
        let a11 = |x1: f64| coeffs.a(top(x1), t).a11;
        let hl = h.level_mut(n);
        for i in 1..np - 1 {
            let ap = a11(0.5 * (xs[i] + xs[i + 1]));
            let am = a11(0.5 * (xs[i - 1] + xs[i]));
            hl[i] -= (ap * (gl[i + 1] - gl[i]) - am * (gl[i] - gl[i - 1])) / (hx * hx);
        }
        for (i, s) in [(0usize, 1isize), (np - 1, -1)] {
            let at = |k: isize| gl[(i as isize + k * s) as usize];
            let sf = s as f64;
            let d1 = sf * (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * hx);
            let d2 = (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / (hx * hx);
            let x = xs[i];
            let e = COEFF_FD_STEP;
            let da =
                sf * (-3.0 * a11(x) + 4.0 * a11(x + sf * e) - a11(x + 2.0 * sf * e)) / (2.0 * e);
            hl[i] -= a11(x) * d2 + da * d1;
        }
        for (i, v) in hl.iter_mut().enumerate() {
            let x = top(xs[i]);
            let r = coeffs.r(x, t);
            if !(r.abs() >= C_R) {
                return Err(Error::AssumptionViolation(format!(
                    "|R| = {:.3e} below {C_R:e} on the top boundary at x1 = {}, t = {t}",
                    r.abs(),
                    xs[i]
                )));
            }
            *v = (*v + coeffs.q(x, t) * gl[i]) / r;
        }
    }
    Ok(h)
}

/// A linear operator on trace-grid fields (`H` of the fixed-point equation).
pub trait VolterraOperator {
    fn apply(&self, phi: &TraceField) -> Result<TraceField>;
}

/// `Hφ = a22 ∂²_{x2} u_φ(x1, ℓ, t) / R`, with `u_φ` the ISPn solution for
/// source `φ R` and the normal second derivative from three layers.
#[derive(Debug)]
pub struct CurvatureOperator<'a> {
    model: &'a ForwardModel,
}

impl<'a> CurvatureOperator<'a> {
    pub fn new(model: &'a ForwardModel) -> Self {
        Self { model }
    }
}

impl VolterraOperator for CurvatureOperator<'_> {
    fn apply(&self, phi: &TraceField) -> Result<TraceField> {
        let model = self.model;
        let u = solve_direct(model, phi, BcVariant::Ispn, None)?;
        let mut out = normal_curvature_top(&u, model.mesh())?;
        let xs = model.trace_coords();
        for n in 1..=model.grid().n {
            let t = model.grid().t(n);
            for (v, &x1) in out.level_mut(n).iter_mut().zip(&xs) {
                let x = [x1, HALF_HEIGHT];
                *v *= model.coeffs().a(x, t).a22 / model.coeffs().r(x, t);
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FixedPointOptions {
    pub max_iter: usize,
    /// Relative increment tolerance.
    pub tol: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FixedPointReport {
    pub f: SourceGrid,
    pub iterations: usize,
    pub converged: bool,
    /// `‖f^{j+1} - f^j‖` for each iteration.
    pub increments: Vec<f64>,
}

impl FixedPointReport {
    /// Successive increment ratios `‖f^{j+2} - f^{j+1}‖ / ‖f^{j+1} - f^j‖`.
    pub fn ratios(&self) -> Vec<f64> {
        self.increments
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect()
    }
}

/// Iterates `f^{j+1} = h - H f^j` from `f⁰ = h` until
/// `‖f^{j+1} - f^j‖ ≤ tol ‖f^j‖` or `max_iter` iterations.
///
/// Three consecutive non-decreasing increments abort with
/// [`Error::Divergence`].
pub fn fixed_point_solve(
    h: &TraceField,
    op: &dyn VolterraOperator,
    norm: &TraceNorm,
    opts: &FixedPointOptions,
) -> Result<FixedPointReport> {
    if opts.max_iter == 0 {
        return Err(Error::InvalidParameter(
            "fixed-point iteration limit must be ≥ 1".into(),
        ));
    }
    let mut f = h.clone();
    let mut increments = Vec::new();
    let mut rising = 0;
    for j in 1..=opts.max_iter {
        let mut next = h.clone();
        next.axpy(-1.0, &op.apply(&f)?);
        let inc = norm.norm(&next.sub(&f));
        let size = norm.norm(&f);
        f = next;
        // round-off plateau counts as converged
        let converged = inc <= opts.tol * size || inc <= 1e-14 * size;
        if let Some(&prev) = increments.last() {
            rising = if inc >= prev && !converged {
                rising + 1
            } else {
                0
            };
        }
        increments.push(inc);
        if converged {
            return Ok(FixedPointReport {
                f,
                iterations: j,
                converged: true,
                increments,
            });
        }
        if rising >= 3 {
            return Err(Error::Divergence {
                iterations: j,
                increments,
            });
        }
    }
    Ok(FixedPointReport {
        f,
        iterations: opts.max_iter,
        converged: false,
        increments,
    })
}
