//! Reconstruction of a space-time source component `f(x1, t)` in a
//! time-fractional subdiffusion equation with time-dependent coefficients
//! from lateral boundary data on the top face of `Ω = (-1/2, 1/2)²`.
//!
//! The forward problems are discretized by P1 finite elements on a uniform
//! triangulation and backward-Euler convolution quadrature in time. The
//! inverse problems are solved by conjugate gradients with an exact discrete
//! adjoint and discrepancy-principle stopping, or by the fixed-point
//! iteration `f = h - H f` built from the trace data.

// `!(x > 0.0)` is used on purpose so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod coeffs;
pub mod error;
pub mod fem;
pub mod field;
pub mod fractional;
pub mod harness;
pub mod inversion;
pub mod linalg;
pub mod mesh;
pub mod solver;

pub use coeffs::{AssumptionReport, CoefficientSet, SymMat2, ValidationOptions};
pub use error::{Error, Result};
pub use fem::{apply_bc, assemble_mass, assemble_stiffness, BcVariant, SparseOperator, TraceMass};
pub use field::{
    LateralObservation, ObservationKind, SourceGrid, SpaceTimeField, TraceField, TraceNorm,
};
pub use fractional::{caputo_apply, cq_weights, gamma_fn, rl_integral, CqWeights, TimeGrid};
pub use mesh::{build_mesh, BoundaryTag, Mesh2D};
pub use solver::{flux_top, solve_adjoint, solve_direct, trace_top, ForwardModel, SolverOptions};
