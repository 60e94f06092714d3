use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::config::{ExperimentConfig, Isp};
use super::examples::{make_example, Example};
use crate::error::Result;
use crate::fem::BcVariant;
use crate::field::{LateralObservation, ObservationKind, SourceGrid, TraceField};
use crate::solver::{flux_top, solve_direct, trace_top, ForwardModel};

/// `g^δ = g† + ε ‖g†‖_∞ ξ` with i.i.d. standard normal `ξ` drawn from a
/// ChaCha20 stream selected by `(seed, stream)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct NoiseModel {
    pub epsilon: f64,
    pub seed: u64,
    pub stream: u64,
}

impl NoiseModel {
    pub fn new(epsilon: f64, seed: u64, stream: u64) -> Self {
        Self {
            epsilon,
            seed,
            stream,
        }
    }

    /// `ε ‖g†‖_{L^∞}`.
    pub fn scale(&self, clean: &TraceField) -> f64 {
        self.epsilon * clean.max_abs()
    }

    /// Perturbs the nodes interior to `ω`; the lateral end values are
    /// boundary values of the forward problem and stay exact.
    pub fn apply(&self, clean: &TraceField) -> TraceField {
        let mut noisy = clean.clone();
        let scale = self.scale(clean);
        if scale == 0.0 {
            return noisy;
        }
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        let nx = clean.nx();
        for n in 1..=clean.nt() {
            for v in &mut noisy.level_mut(n)[1..nx - 1] {
                let xi: f64 = StandardNormal.sample(&mut rng);
                *v += scale * xi;
            }
        }
        noisy
    }
}

/// Substream index of sweep cell `(α-index, ε-index)`.
pub fn cell_stream(alpha_idx: usize, eps_idx: usize) -> u64 {
    ((alpha_idx as u64) << 32) | eps_idx as u64
}

/// Exact and noisy lateral data on the inversion grid.
#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub clean: LateralObservation,
    pub noisy: LateralObservation,
    /// `‖g† - g^δ‖_{L²(0,T;L²(ω))}`.
    pub delta: f64,
    pub f_dagger: SourceGrid,
}

/// Exact data on the inversion grid: a forward solve with `f†` on the mesh
/// refined by `cfg.refinement` in space and time, restricted by injection.
pub fn exact_data(cfg: &ExperimentConfig, example: &Example) -> Result<LateralObservation> {
    cfg.validate()?;
    let r = cfg.refinement;
    let fine = ForwardModel::build(
        cfg.m * r,
        cfg.n * r,
        cfg.t_final,
        cfg.alpha,
        example.coeffs.clone(),
    )?;
    let f_fine = example.f_dagger(&fine);
    let fine_obs = match cfg.isp() {
        Isp::Ispn => trace_top(
            &solve_direct(&fine, &f_fine, BcVariant::Ispn, None)?,
            fine.mesh(),
        ),
        Isp::Ispd => flux_top(
            &solve_direct(&fine, &f_fine, BcVariant::IspdForward, None)?,
            fine.mesh(),
        )?,
    };
    let mut coarse = TraceField::zeros(cfg.m + 1, cfg.n);
    for n in 1..=cfg.n {
        let src = fine_obs.values.level(n * r);
        for (i, v) in coarse.level_mut(n).iter_mut().enumerate() {
            *v = src[i * r];
        }
    }
    Ok(LateralObservation::new(fine_obs.kind, coarse))
}

/// Adds noise to exact data and records the realized noise level.
pub fn add_noise(
    model: &ForwardModel,
    clean: &LateralObservation,
    noise: &NoiseModel,
) -> SyntheticPair {
    let values = noise.apply(&clean.values);
    let delta = model.trace_norm().norm(&values.sub(&clean.values));
    SyntheticPair {
        noisy: LateralObservation::new(clean.kind, values).with_delta(delta),
        delta,
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticPair {
    pub noisy: LateralObservation,
    pub delta: f64,
}

/// `(g†, g^δ, δ)` for the configured example.
pub fn synthesize_data(cfg: &ExperimentConfig) -> Result<SyntheticData> {
    let example = make_example(cfg.example, cfg.t_final)?;
    let model = ForwardModel::build(cfg.m, cfg.n, cfg.t_final, cfg.alpha, example.coeffs.clone())?;
    let clean = exact_data(cfg, &example)?;
    let pair = add_noise(
        &model,
        &clean,
        &NoiseModel::new(cfg.epsilon, cfg.seed, cfg.stream),
    );
    Ok(SyntheticData {
        clean: clean.with_delta(0.0),
        noisy: pair.noisy,
        delta: pair.delta,
        f_dagger: example.f_dagger(&model),
    })
}

/// Kind of data the configured problem observes.
pub fn observation_kind(isp: Isp) -> ObservationKind {
    match isp {
        Isp::Ispn => ObservationKind::Trace,
        Isp::Ispd => ObservationKind::Flux,
    }
}
