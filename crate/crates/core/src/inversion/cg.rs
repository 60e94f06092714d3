use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::InverseProblem;
use crate::error::{Error, Result};
use crate::field::{SourceGrid, TraceField};

/// Discrepancy constant used in the reported experiments.
pub const DEFAULT_C_DP: f64 = 1.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum StoppingRule {
    /// First `k` with `‖r_k‖ ≤ c δ`, or `K`.
    Discrepancy { c: f64, delta: f64 },
    /// Always run `K` iterations.
    MaxIter,
    /// Run `K` iterations and return the iterate closest to `f†`.
    MinError,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CgOptions {
    pub max_iter: usize,
    pub stopping: StoppingRule,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            stopping: StoppingRule::MaxIter,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Discrepancy,
    MaxIter,
    MinError,
    /// The gradient vanished.
    Stationary,
}

/// One row of the iteration history. `step` and `gamma` belong to the update
/// taken from `f_k`, absent on the last row.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub j_value: f64,
    pub residual_norm: f64,
    pub error: Option<f64>,
    pub step: Option<f64>,
    pub gamma: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub f_hat: SourceGrid,
    pub stop_index: usize,
    pub stop_reason: StopReason,
    pub error: Option<f64>,
    pub delta: Option<f64>,
    pub history: Vec<IterationRecord>,
    /// Resolved configuration of the run that produced this report.
    pub config: Option<serde_json::Value>,
}

impl ReconstructionReport {
    /// `"e (k*)"` as printed in the result tables.
    pub fn summary(&self) -> String {
        match self.error {
            Some(e) => format!("{e:.2e} ({})", self.stop_index),
            None => format!("- ({})", self.stop_index),
        }
    }

    pub fn min_error(&self) -> Option<(usize, f64)> {
        self.history
            .iter()
            .filter_map(|r| r.error.map(|e| (r.k, e)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Iteration history as CSV (`k,J,residual,error,step,gamma,stop`).
    pub fn write_history_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_config_comment(&mut w, self.config.as_ref())?;
        writeln!(w, "k,J,residual,error,step,gamma,stop")?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        for r in &self.history {
            writeln!(
                w,
                "{},{:.16e},{:.16e},{},{},{},{}",
                r.k,
                r.j_value,
                r.residual_norm,
                opt(r.error),
                opt(r.step),
                opt(r.gamma),
                u8::from(r.k == self.stop_index)
            )?;
        }
        Ok(())
    }
}

pub(crate) fn write_config_comment(
    w: &mut impl Write,
    config: Option<&serde_json::Value>,
) -> Result<()> {
    if let Some(c) = config {
        writeln!(w, "# config: {c}")?;
    }
    Ok(())
}

/// `‖r‖ ≤ c δ`.
pub fn discrepancy_stop(residual_norm: f64, c: f64, delta: f64) -> Result<bool> {
    if !(c > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "discrepancy constant must exceed 1, got {c}"
        )));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise level must be ≥ 0, got {delta}"
        )));
    }
    Ok(residual_norm <= c * delta)
}

/// Conjugate-gradient state. Each [`CgState::step`] costs one adjoint and
/// one sensitivity solve; the residual is updated by linearity.
#[derive(Clone, Debug)]
pub struct CgState {
    pub k: usize,
    pub f: SourceGrid,
    pub grad: Option<TraceField>,
    grad_prev_sq: f64,
    pub direction: Option<TraceField>,
    /// `trace(u_{f_k}) - target`.
    pub residual: TraceField,
    pub residual_norm: f64,
    pub history: Vec<IterationRecord>,
}

impl CgState {
    /// Starts from `f0` (zero when absent).
    pub fn new(problem: &InverseProblem<'_>, f0: Option<SourceGrid>) -> Result<Self> {
        let (f, residual) = match f0 {
            Some(f) => {
                let r = problem.residual(&f)?;
                (f, r)
            }
            None => {
                let mut r = problem.target().clone();
                r.scale(-1.0);
                (problem.model().zero_trace(), r)
            }
        };
        let residual_norm = problem.norm(&residual);
        Ok(Self {
            k: 0,
            f,
            grad: None,
            grad_prev_sq: 0.0,
            direction: None,
            residual,
            residual_norm,
            history: Vec::new(),
        })
    }

    pub fn j_value(&self) -> f64 {
        0.5 * self.residual_norm * self.residual_norm
    }

    fn record(&mut self, error: Option<f64>) {
        self.history.push(IterationRecord {
            k: self.k,
            j_value: self.j_value(),
            residual_norm: self.residual_norm,
            error,
            step: None,
            gamma: None,
        });
    }

    /// One Fletcher–Reeves iteration with exact line search. Returns `false` without changing `f`
    /// when the gradient vanishes.
    pub fn step(&mut self, problem: &InverseProblem<'_>) -> Result<bool> {
        let norm = problem.model().trace_norm();
        let grad = problem.gradient_from_residual(&self.residual)?;
        let g_sq = norm.inner(&grad, &grad);
        if g_sq == 0.0 {
            return Ok(false);
        }
        let gamma = if self.k == 0 {
            0.0
        } else {
            g_sq / self.grad_prev_sq
        };
        let mut d = grad.clone();
        d.scale(-1.0);
        if let Some(prev) = &self.direction {
            d.axpy(gamma, prev);
        }
        let ud = problem.forward_trace(&d)?;
        let ud_sq = norm.inner(&ud, &ud);
        if ud_sq == 0.0 {
            return Err(Error::DegenerateDirection { iteration: self.k });
        }
        let s = -norm.inner(&ud, &self.residual) / ud_sq;
        self.f.axpy(s, &d);
        self.residual.axpy(s, &ud);
        self.residual_norm = norm.norm(&self.residual);
        if let Some(last) = self.history.last_mut().filter(|r| r.k == self.k) {
            last.step = Some(s);
            last.gamma = Some(gamma);
        }
        self.grad_prev_sq = g_sq;
        self.grad = Some(grad);
        self.direction = Some(d);
        self.k += 1;
        Ok(true)
    }
}

/// Conjugate-gradient reconstruction from `f⁰ = 0`. With `f_dagger` the error is logged at every
/// iterate; [`StoppingRule::MinError`] requires it.
pub fn cg_reconstruct(
    problem: &InverseProblem<'_>,
    opts: &CgOptions,
    f_dagger: Option<&SourceGrid>,
) -> Result<ReconstructionReport> {
    if opts.max_iter == 0 {
        return Err(Error::InvalidParameter(
            "iteration limit K must be ≥ 1".into(),
        ));
    }
    if let StoppingRule::Discrepancy { c, delta } = opts.stopping {
        discrepancy_stop(0.0, c, delta)?;
    }
    if opts.stopping == StoppingRule::MinError && f_dagger.is_none() {
        return Err(Error::InvalidParameter(
            "minimal-error stopping needs the exact source".into(),
        ));
    }
    let model = problem.model();
    let error_of = |f: &SourceGrid| -> Result<Option<f64>> {
        f_dagger
            .map(|fd| super::error_metric(model, f, fd))
            .transpose()
    };

    let mut state = CgState::new(problem, None)?;
    let mut best: Option<(usize, f64, SourceGrid)> = None;
    let reason = loop {
        let err = error_of(&state.f)?;
        state.record(err);
        if let Some(e) = err {
            if best.as_ref().is_none_or(|b| e < b.1) {
                best = Some((state.k, e, state.f.clone()));
            }
        }
        if let StoppingRule::Discrepancy { c, delta } = opts.stopping {
            if discrepancy_stop(state.residual_norm, c, delta)? {
                break StopReason::Discrepancy;
            }
        }
        if state.k >= opts.max_iter {
            break StopReason::MaxIter;
        }
        if !state.step(problem)? {
            break StopReason::Stationary;
        }
    };

    let (f_hat, stop_index, stop_reason, error) = match (opts.stopping, best) {
        (StoppingRule::MinError, Some((k, e, f))) => (f, k, StopReason::MinError, Some(e)),
        _ => {
            let e = state.history.last().and_then(|r| r.error);
            (state.f, state.k, reason, e)
        }
    };
    Ok(ReconstructionReport {
        f_hat,
        stop_index,
        stop_reason,
        error,
        delta: problem.delta(),
        history: state.history,
        config: None,
    })
}
