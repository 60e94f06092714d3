use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use super::config::{ExampleId, Isp};
use crate::coeffs::{CoefficientSet, SymMat2};
use crate::error::{Error, Result};
use crate::field::SourceGrid;
use crate::solver::ForwardModel;

/// Ellipticity bound shared by all examples.
const LAMBDA: f64 = 0.2;

type SourceFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// Coefficients and exact source of a benchmark example.
#[derive(Clone)]
pub struct Example {
    pub id: ExampleId,
    pub isp: Isp,
    pub coeffs: CoefficientSet,
    source: Arc<SourceFn>,
}

impl fmt::Debug for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Example")
            .field("id", &self.id)
            .field("isp", &self.isp)
            .finish_non_exhaustive()
    }
}

impl Example {
    /// `f†(x1, t)`.
    pub fn source(&self, x1: f64, t: f64) -> f64 {
        (self.source)(x1, t)
    }

    /// `f†` sampled on the model's trace grid.
    pub fn f_dagger(&self, model: &ForwardModel) -> SourceGrid {
        model.sample(|x, t| self.source(x, t))
    }
}

fn bump(x: [f64; 2]) -> f64 {
    1.0 + (PI * x[0]).sin() * x[1] * (1.0 - x[1])
}

fn cutoff(t: f64) -> f64 {
    // closed interval [0, 0.7]
    if t <= 0.7 + 1e-12 {
        1.0
    } else {
        0.0
    }
}

/// Builds the coefficient set and exact source for `id` on `[0, t_final]`.
/// `R ≡ 1` and `q ≡ 0` throughout.
pub fn make_example(id: ExampleId, t_final: f64) -> Result<Example> {
    let q = |_: [f64; 2], _: f64| 0.0;
    let r = |_: [f64; 2], _: f64| 1.0;
    let coeffs = match id {
        ExampleId::Ex51 => {
            CoefficientSet::new(|x, _| SymMat2::scalar(bump(x)), q, r, LAMBDA).time_independent()
        }
        ExampleId::Ex52i | ExampleId::Ex52ii => CoefficientSet::new(
            |x, t: f64| SymMat2::scalar(bump(x) * (1.0 + t.sin())),
            q,
            r,
            LAMBDA,
        ),
        ExampleId::Ex53i | ExampleId::Ex53ii => CoefficientSet::new(
            |x: [f64; 2], t: f64| {
                SymMat2::scalar(
                    (1.0 + (PI * (x[0] + 0.5)).sin() * (0.25 - x[1] * x[1])) * (1.0 + t.sin()),
                )
            },
            q,
            r,
            LAMBDA,
        ),
        ExampleId::Custom => return Err(Error::UnknownExample("custom".into())),
    };
    let tt = t_final;
    let source: Arc<SourceFn> = match id {
        ExampleId::Ex51 => Arc::new(move |x, t| (0.25 - x * x) * t * (tt - t) * t.exp()),
        ExampleId::Ex52i | ExampleId::Ex53i => {
            Arc::new(move |x, t| ((x + 0.5) * PI).sin() * t * (tt - t) * t.exp())
        }
        _ => Arc::new(move |x, t| ((x + 0.5) * PI).sin() * t * (tt - t) * t.exp() * cutoff(t)),
    };
    Ok(Example {
        id,
        isp: id.default_isp(),
        coeffs,
        source,
    })
}
