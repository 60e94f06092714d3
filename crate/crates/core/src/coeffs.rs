//! Coefficient fields `a(x,t)`, `q(x,t)`, `R(x,t)` and their assumption checks.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{Mesh2D, HALF_HEIGHT};

/// Symmetric 2×2 matrix `[[a11, a12], [a12, a22]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMat2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl SymMat2 {
    pub fn scalar(s: f64) -> Self {
        Self {
            a11: s,
            a12: 0.0,
            a22: s,
        }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.a11 + self.a22);
        let half_diff = 0.5 * (self.a11 - self.a22);
        let r = half_diff.hypot(self.a12);
        (mean - r, mean + r)
    }
}

type MatrixField = dyn Fn([f64; 2], f64) -> SymMat2 + Send + Sync;
type ScalarField = dyn Fn([f64; 2], f64) -> f64 + Send + Sync;

/// Evaluable coefficient fields. Cheap to clone; the fields are shared.
#[derive(Clone)]
pub struct CoefficientSet {
    a: Arc<MatrixField>,
    q: Arc<ScalarField>,
    r: Arc<ScalarField>,
    /// Ellipticity constant estimate λ ∈ (0, 1].
    pub lambda: f64,
    time_independent: bool,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("lambda", &self.lambda)
            .field("time_independent", &self.time_independent)
            .finish_non_exhaustive()
    }
}

impl CoefficientSet {
    pub fn new<A, Q, R>(a: A, q: Q, r: R, lambda: f64) -> Self
    where
        A: Fn([f64; 2], f64) -> SymMat2 + Send + Sync + 'static,
        Q: Fn([f64; 2], f64) -> f64 + Send + Sync + 'static,
        R: Fn([f64; 2], f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            a: Arc::new(a),
            q: Arc::new(q),
            r: Arc::new(r),
            lambda,
            time_independent: false,
        }
    }

    /// `a ≡ I`, `q ≡ 0`, `R ≡ 1`.
    pub fn identity() -> Self {
        Self::new(|_, _| SymMat2::scalar(1.0), |_, _| 0.0, |_, _| 1.0, 1.0).time_independent()
    }

    /// Declares that `a` and `q` do not depend on `t`, which lets the solver
    /// reuse a single factorization for every time level. `R` may still vary.
    pub fn time_independent(mut self) -> Self {
        self.time_independent = true;
        self
    }

    pub fn with_source_factor<R>(mut self, r: R) -> Self
    where
        R: Fn([f64; 2], f64) -> f64 + Send + Sync + 'static,
    {
        self.r = Arc::new(r);
        self
    }

    pub fn is_time_independent(&self) -> bool {
        self.time_independent
    }

    #[inline]
    pub fn a(&self, x: [f64; 2], t: f64) -> SymMat2 {
        (self.a)(x, t)
    }

    #[inline]
    pub fn q(&self, x: [f64; 2], t: f64) -> f64 {
        (self.q)(x, t)
    }

    #[inline]
    pub fn r(&self, x: [f64; 2], t: f64) -> f64 {
        (self.r)(x, t)
    }

    /// Samples the fields on the mesh quadrature points (triangle centroids)
    /// and boundary nodes over a uniform time grid on `[0, t_final]`, and
    /// checks ellipticity, `a12 = 0` on `x2 = ±ℓ`, `q ≥ 0` and `|R| ≥ c_R` on
    /// the top boundary.
    pub fn validate(
        &self,
        mesh: &Mesh2D,
        t_final: f64,
        opts: &ValidationOptions,
    ) -> Result<AssumptionReport> {
        let report = self.sample(mesh, t_final, opts);
        let tol = opts.tol;
        if report.min_eigenvalue < self.lambda - tol
            || report.max_eigenvalue > 1.0 / self.lambda + tol
        {
            return Err(Error::AssumptionViolation(format!(
                "ellipticity: sampled eigenvalues in [{:.6e}, {:.6e}] but λ = {}",
                report.min_eigenvalue, report.max_eigenvalue, self.lambda
            )));
        }
        if report.max_abs_a12_boundary > tol {
            return Err(Error::AssumptionViolation(format!(
                "a12 on x2 = ±ℓ reaches {:.6e}",
                report.max_abs_a12_boundary
            )));
        }
        if report.min_q < -tol {
            return Err(Error::AssumptionViolation(format!(
                "q takes negative value {:.6e}",
                report.min_q
            )));
        }
        if report.min_abs_r_top < opts.c_r.max(tol) {
            return Err(Error::AssumptionViolation(format!(
                "|R| on the top boundary drops to {:.6e}",
                report.min_abs_r_top
            )));
        }
        Ok(report)
    }

    fn sample(&self, mesh: &Mesh2D, t_final: f64, opts: &ValidationOptions) -> AssumptionReport {
        let nt = opts.time_samples.max(2);
        let times: Vec<f64> = (0..nt)
            .map(|k| t_final * k as f64 / (nt - 1) as f64)
            .collect();
        let mut report = AssumptionReport {
            min_eigenvalue: f64::INFINITY,
            max_eigenvalue: f64::NEG_INFINITY,
            max_abs_a12_boundary: 0.0,
            min_q: f64::INFINITY,
            min_abs_r_top: f64::INFINITY,
        };
        let boundary_x1 = mesh.trace_coords();
        for &t in &times {
            for tri in 0..mesh.triangles().len() {
                let x = mesh.centroid(tri);
                let (lo, hi) = self.a(x, t).eigenvalues();
                report.min_eigenvalue = report.min_eigenvalue.min(lo);
                report.max_eigenvalue = report.max_eigenvalue.max(hi);
                report.min_q = report.min_q.min(self.q(x, t));
            }
            for &x1 in &boundary_x1 {
                for x2 in [HALF_HEIGHT, -HALF_HEIGHT] {
                    let a = self.a([x1, x2], t);
                    report.max_abs_a12_boundary = report.max_abs_a12_boundary.max(a.a12.abs());
                }
                report.min_abs_r_top = report.min_abs_r_top.min(self.r([x1, HALF_HEIGHT], t).abs());
            }
        }
        report
    }
}

#[derive(Clone, Debug)]
pub struct ValidationOptions {
    pub time_samples: usize,
    pub tol: f64,
    /// Required lower bound for `|R|` on the top boundary.
    pub c_r: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            time_samples: 10,
            tol: 1e-10,
            c_r: 1e-10,
        }
    }
}

/// Extremes observed while sampling the coefficient fields.
#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub max_abs_a12_boundary: f64,
    pub min_q: f64,
    pub min_abs_r_top: f64,
}
