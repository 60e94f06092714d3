//! Backward-Euler convolution quadrature for fractional derivatives and
//! integrals on a uniform time grid.
//!
//! The weights `w_j` are the power-series coefficients of `(1 - z)^γ`:
//! `γ = α` gives the Caputo derivative (applied to `u - u(0)`), `γ = -β`
//! the Riemann–Liouville integral of order `β`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform partition `t_n = n τ` of `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeGrid {
    pub n: usize,
    pub t_final: f64,
    pub tau: f64,
}

impl TimeGrid {
    pub fn new(n: usize, t_final: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "time step count must be ≥ 1".into(),
            ));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        Ok(Self {
            n,
            t_final,
            tau: t_final / n as f64,
        })
    }

    /// `t_n`, computed as `n T / N` so that `t_N = T` exactly.
    #[inline]
    pub fn t(&self, n: usize) -> f64 {
        self.t_final * n as f64 / self.n as f64
    }
}

/// Convolution-quadrature weights `w_0..=w_N` of `(1 - z)^order`.
#[derive(Clone, Debug, PartialEq)]
pub struct CqWeights {
    pub order: f64,
    pub w: Vec<f64>,
}

/// Weights for the Caputo derivative of order `alpha ∈ (0, 1)`.
pub fn cq_weights(alpha: f64, n: usize) -> Result<CqWeights> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fractional order must lie in (0, 1), got {alpha}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("weight count must be ≥ 1".into()));
    }
    Ok(CqWeights::with_order(alpha, n))
}

impl CqWeights {
    /// `w_0 = 1`, `w_j = (1 - (order + 1)/j) w_{j-1}`.
    pub fn with_order(order: f64, n: usize) -> Self {
        let mut w = Vec::with_capacity(n + 1);
        w.push(1.0);
        for j in 1..=n {
            let prev = w[j - 1];
            w.push((1.0 - (order + 1.0) / j as f64) * prev);
        }
        Self { order, w }
    }

    pub fn alpha(&self) -> f64 {
        self.order
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// `τ^{-order}`, the scaling applied to every weight.
    pub fn scale(&self, tau: f64) -> f64 {
        tau.powf(-self.order)
    }
}

/// Discrete Caputo derivative at `t_n`, `n = samples.len() - 1`:
/// `τ^{-α} Σ_{j=0}^{n} w_j (u_{n-j} - u_0)`.
pub fn caputo_apply(
    weights: &CqWeights,
    grid: &TimeGrid,
    samples: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let Some(u0) = samples.first() else {
        return Err(Error::InvalidParameter(
            "need at least the initial sample".into(),
        ));
    };
    let n = samples.len() - 1;
    if n >= weights.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("at most {} samples", weights.len()),
            got: format!("{} samples", samples.len()),
        });
    }
    let scale = weights.scale(grid.tau);
    let mut out = vec![0.0; u0.len()];
    for j in 0..n {
        let u = &samples[n - j];
        crate::error::check_len("sample", u0.len(), u.len())?;
        let wj = weights.w[j] * scale;
        for ((o, a), b) in out.iter_mut().zip(u).zip(u0) {
            *o += wj * (a - b);
        }
    }
    Ok(out)
}

/// Discrete Caputo derivative of a scalar series at every grid node.
pub fn caputo_series(weights: &CqWeights, grid: &TimeGrid, u: &[f64]) -> Vec<f64> {
    let scale = weights.scale(grid.tau);
    let u0 = u[0];
    (0..u.len())
        .map(|n| scale * (0..n).map(|j| weights.w[j] * (u[n - j] - u0)).sum::<f64>())
        .collect()
}

/// Forward CQ fractional integral of order `beta`:
/// `τ^β Σ_{j=0}^{n} ω_j v_{n-j}` at every grid node.
pub fn cq_integral(beta: f64, grid: &TimeGrid, v: &[f64]) -> Vec<f64> {
    let omega = CqWeights::with_order(-beta, v.len());
    let scale = grid.tau.powf(beta);
    (0..v.len())
        .map(|n| scale * (0..=n).map(|j| omega.w[j] * v[n - j]).sum::<f64>())
        .collect()
}

/// Right-sided Riemann–Liouville integral `{}_tI_T^{1-α} v` at every grid node,
/// the forward CQ integral swept backwards from `T`:
/// `τ^β Σ_{j≥0} ω_j v_{n+1+j}`, which vanishes at `t_N = T`.
pub fn rl_integral(alpha: f64, grid: &TimeGrid, v: &[f64]) -> Result<Vec<f64>> {
    crate::error::check_len("samples", grid.n + 1, v.len())?;
    let beta = 1.0 - alpha;
    let omega = CqWeights::with_order(-beta, grid.n);
    let scale = grid.tau.powf(beta);
    let n_last = grid.n;
    Ok((0..=n_last)
        .map(|n| {
            scale
                * (0..n_last - n)
                    .map(|j| omega.w[j] * v[n + 1 + j])
                    .sum::<f64>()
        })
        .collect())
}

/// Euler's Gamma function for positive arguments.
pub fn gamma_fn(z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "Gamma function evaluated outside (0, ∞): {z}"
        )));
    }
    Ok(statrs::function::gamma::gamma(z))
}
