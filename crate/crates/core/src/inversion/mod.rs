//! Misfit functional, adjoint gradient and the two reconstruction methods.

mod cg;
mod fixed_point;

pub use cg::{
    cg_reconstruct, discrepancy_stop, CgOptions, CgState, IterationRecord, ReconstructionReport,
    StopReason, StoppingRule, DEFAULT_C_DP,
};
pub use fixed_point::{
    fixed_point_h, fixed_point_solve, mollify, CurvatureOperator, FixedPointOptions,
    FixedPointReport, VolterraOperator,
};

use crate::error::{Error, Result};
use crate::fem::BcVariant;
use crate::field::{LateralObservation, ObservationKind, SourceGrid, TraceField};
use crate::solver::{solve_direct, trace_top, ForwardModel};

/// An inverse problem posed as matching the linear map `f ↦ trace(u_f)`
/// (ISPn boundary conditions) to a target trace.
///
/// For ISPn the target is the measured trace. For ISPd the measured flux is
/// imposed as Neumann data and the trace must vanish, which is the same
/// linear problem with target `-trace(u_ψ)`, `u_ψ` the response to the flux
/// alone.
#[derive(Debug)]
pub struct InverseProblem<'a> {
    model: &'a ForwardModel,
    kind: ObservationKind,
    target: TraceField,
    delta: Option<f64>,
}

impl<'a> InverseProblem<'a> {
    pub fn new(model: &'a ForwardModel, obs: &LateralObservation) -> Result<Self> {
        let expected = model.zero_trace();
        obs.values.same_shape(&expected)?;
        let target = match obs.kind {
            ObservationKind::Trace => obs.values.clone(),
            ObservationKind::Flux => {
                let u = solve_direct(model, &expected, BcVariant::IspdInversion, Some(obs))?;
                let mut t = trace_top(&u, model.mesh()).values;
                t.scale(-1.0);
                t
            }
        };
        Ok(Self {
            model,
            kind: obs.kind,
            target,
            delta: obs.delta,
        })
    }

    pub fn model(&self) -> &ForwardModel {
        self.model
    }

    pub fn kind(&self) -> ObservationKind {
        self.kind
    }

    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    pub fn target(&self) -> &TraceField {
        &self.target
    }

    /// `trace(u_f)` with homogeneous top Neumann data (the sensitivity solve).
    pub fn forward_trace(&self, f: &SourceGrid) -> Result<TraceField> {
        let u = solve_direct(self.model, f, BcVariant::Ispn, None)?;
        Ok(trace_top(&u, self.model.mesh()).values)
    }

    pub fn residual(&self, f: &SourceGrid) -> Result<TraceField> {
        let mut r = self.forward_trace(f)?;
        r.axpy(-1.0, &self.target);
        Ok(r)
    }

    pub fn norm(&self, r: &TraceField) -> f64 {
        self.model.trace_norm().norm(r)
    }

    /// `J(f) = ½ ‖trace(u_f) - g‖²`.
    pub fn eval_j(&self, f: &SourceGrid) -> Result<f64> {
        let r = self.residual(f)?;
        Ok(0.5 * self.norm(&r).powi(2))
    }

    /// Gradient for a given residual: the column integral of `R v`, `v`
    /// the adjoint state.
    pub fn gradient_from_residual(&self, r: &TraceField) -> Result<TraceField> {
        let v = self.model.solve_adjoint(r)?;
        Ok(self.model.source_gradient(&v))
    }

    pub fn eval_gradient(&self, f: &SourceGrid) -> Result<TraceField> {
        let r = self.residual(f)?;
        self.gradient_from_residual(&r)
    }
}

/// `J(f) = ½ ‖trace(u_f) - g^δ‖²_{L²(0,T;L²(ω))}`.
pub fn eval_j(model: &ForwardModel, f: &SourceGrid, g_obs: &LateralObservation) -> Result<f64> {
    InverseProblem::new(model, g_obs)?.eval_j(f)
}

/// Adjoint gradient `J'(f)`.
pub fn eval_gradient(
    model: &ForwardModel,
    f: &SourceGrid,
    g_obs: &LateralObservation,
) -> Result<TraceField> {
    InverseProblem::new(model, g_obs)?.eval_gradient(f)
}

/// `e = ‖f̂ - f†‖_{L²(0,T;L²(ω))}`.
pub fn error_metric(
    model: &ForwardModel,
    f_hat: &SourceGrid,
    f_dagger: &SourceGrid,
) -> Result<f64> {
    f_hat
        .same_shape(f_dagger)
        .map_err(|_| Error::DimensionMismatch {
            expected: format!("{}×{} grid", f_dagger.nx(), f_dagger.nt()),
            got: format!("{}×{} grid", f_hat.nx(), f_hat.nt()),
        })?;
    Ok(model.trace_norm().norm(&f_hat.sub(f_dagger)))
}
