use serde::Serialize;

use super::config::{ExperimentConfig, Isp};
use super::data::{add_noise, exact_data, NoiseModel, SyntheticData};
use super::examples::{make_example, Example};
use crate::coeffs::{AssumptionReport, ValidationOptions};
use crate::error::Result;
use crate::field::{LateralObservation, SourceGrid};
use crate::inversion::{
    cg_reconstruct, error_metric, fixed_point_h, fixed_point_solve, CgOptions, CurvatureOperator,
    FixedPointOptions, FixedPointReport, InverseProblem, ReconstructionReport, StoppingRule,
};
use crate::solver::ForwardModel;

/// Inversion-grid model for the configured example.
pub fn build_model(cfg: &ExperimentConfig, example: &Example) -> Result<ForwardModel> {
    ForwardModel::build(cfg.m, cfg.n, cfg.t_final, cfg.alpha, example.coeffs.clone())
}

/// Discrepancy principle for ISPn. ISPd has no usable noise level on the
/// zero Dirichlet target, so it returns the iterate of minimal error.
pub fn stopping_rule(cfg: &ExperimentConfig, delta: f64) -> StoppingRule {
    match cfg.isp() {
        Isp::Ispn => StoppingRule::Discrepancy { c: cfg.c_dp, delta },
        Isp::Ispd => StoppingRule::MinError,
    }
}

/// Adds the configured noise to exact data.
pub fn noisy_data(
    cfg: &ExperimentConfig,
    model: &ForwardModel,
    clean: &LateralObservation,
) -> LateralObservation {
    add_noise(
        model,
        clean,
        &NoiseModel::new(cfg.epsilon, cfg.seed, cfg.stream),
    )
    .noisy
}

/// CG reconstruction from noisy data carrying its noise level.
pub fn reconstruct(
    cfg: &ExperimentConfig,
    model: &ForwardModel,
    noisy: &LateralObservation,
    f_dagger: &SourceGrid,
) -> Result<ReconstructionReport> {
    let problem = InverseProblem::new(model, noisy)?;
    let opts = CgOptions {
        max_iter: cfg.k_max,
        stopping: stopping_rule(cfg, noisy.delta.unwrap_or(0.0)),
    };
    let mut report = cg_reconstruct(&problem, &opts, Some(f_dagger))?;
    report.config = Some(cfg.echo());
    Ok(report)
}

/// Everything produced by a single CG run.
#[derive(Debug)]
pub struct RunOutput {
    pub report: ReconstructionReport,
    pub data: SyntheticData,
    pub model: ForwardModel,
}

/// Synthesizes data for `cfg` and reconstructs by conjugate gradients.
pub fn run_reconstruction(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let example = make_example(cfg.example, cfg.t_final)?;
    let model = build_model(cfg, &example)?;
    let clean = exact_data(cfg, &example)?;
    let f_dagger = example.f_dagger(&model);
    let noisy = noisy_data(cfg, &model, &clean);
    let report = reconstruct(cfg, &model, &noisy, &f_dagger)?;
    Ok(RunOutput {
        data: SyntheticData {
            clean: clean.with_delta(0.0),
            delta: noisy.delta.unwrap_or(0.0),
            noisy,
            f_dagger,
        },
        report,
        model,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FixedPointOutcome {
    pub report: FixedPointReport,
    pub error: f64,
    pub relative_error: f64,
    pub config: serde_json::Value,
}

/// Reconstruction through `f = h - H f` from trace data (ISPn only).
pub fn run_fixed_point(
    cfg: &ExperimentConfig,
    opts: &FixedPointOptions,
) -> Result<FixedPointOutcome> {
    cfg.validate()?;
    if cfg.isp() != Isp::Ispn {
        return Err(crate::Error::InvalidParameter(
            "the fixed-point path needs trace (ISPn) data".into(),
        ));
    }
    let example = make_example(cfg.example, cfg.t_final)?;
    let model = build_model(cfg, &example)?;
    let clean = exact_data(cfg, &example)?;
    let noisy = noisy_data(cfg, &model, &clean);
    let width = (cfg.mollify > 0.0 && cfg.epsilon > 0.0).then_some(cfg.mollify);
    let h = fixed_point_h(&model, &noisy, width)?;
    let report = fixed_point_solve(
        &h,
        &CurvatureOperator::new(&model),
        model.trace_norm(),
        opts,
    )?;
    let f_dagger = example.f_dagger(&model);
    let error = error_metric(&model, &report.f, &f_dagger)?;
    Ok(FixedPointOutcome {
        relative_error: error / model.trace_norm().norm(&f_dagger),
        error,
        report,
        config: cfg.echo(),
    })
}

/// Checks the coefficient assumptions of the configured example on the
/// inversion mesh.
pub fn validate_example(cfg: &ExperimentConfig) -> Result<AssumptionReport> {
    let example = make_example(cfg.example, cfg.t_final)?;
    let mesh = crate::mesh::build_mesh(cfg.m)?;
    example
        .coeffs
        .validate(&mesh, cfg.t_final, &ValidationOptions::default())
}
