//! Data containers: fields on the trace grid `ω × {t_1..t_N}` and nodal
//! fields on `Ω × {t_0..t_N}`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::fem::TraceMass;
use crate::fractional::TimeGrid;

/// Values on the trace grid (`x1` nodes) at time levels `n = 1..=N`.
/// Stored level by level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceField {
    nx: usize,
    nt: usize,
    data: Vec<f64>,
}

/// The unknown source component `f(x1, t)` and its iterates.
pub type SourceGrid = TraceField;

impl TraceField {
    pub fn zeros(nx: usize, nt: usize) -> Self {
        Self {
            nx,
            nt,
            data: vec![0.0; nx * nt],
        }
    }

    pub fn from_fn(x1: &[f64], grid: &TimeGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(x1.len(), grid.n);
        for n in 1..=grid.n {
            let t = grid.t(n);
            for (v, &x) in out.level_mut(n).iter_mut().zip(x1) {
                *v = f(x, t);
            }
        }
        out
    }

    pub fn from_data(nx: usize, nt: usize, data: Vec<f64>) -> Result<Self> {
        check_len("trace field data", nx * nt, data.len())?;
        Ok(Self { nx, nt, data })
    }

    /// Trace nodes per level.
    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Number of time levels `N`.
    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Values at `t_n`, `1 ≤ n ≤ N`.
    #[inline]
    pub fn level(&self, n: usize) -> &[f64] {
        &self.data[(n - 1) * self.nx..n * self.nx]
    }

    #[inline]
    pub fn level_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.data[(n - 1) * self.nx..n * self.nx]
    }

    /// `f[i][n]`.
    #[inline]
    pub fn get(&self, i: usize, n: usize) -> f64 {
        self.data[(n - 1) * self.nx + i]
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        check_len("trace nodes", self.nx, other.nx)?;
        check_len("time levels", self.nt, other.nt)
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// The `L²(0,T; L²(ω))` inner product: right-endpoint rule in time and the
/// trace-grid mass matrix in space.
#[derive(Clone, Debug)]
pub struct TraceNorm {
    pub mass: TraceMass,
    pub tau: f64,
}

impl TraceNorm {
    pub fn new(mass: TraceMass, tau: f64) -> Self {
        Self { mass, tau }
    }

    pub fn inner(&self, a: &TraceField, b: &TraceField) -> f64 {
        debug_assert!(a.same_shape(b).is_ok());
        let s: f64 = (1..=a.nt())
            .map(|n| self.mass.inner(a.level(n), b.level(n)))
            .sum();
        self.tau * s
    }

    pub fn norm(&self, a: &TraceField) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }

    /// Riesz representative of the Euclidean gradient `g` in this inner
    /// product: `W⁻¹ g / τ` level by level.
    pub fn riesz(&self, g: &mut TraceField) {
        for n in 1..=g.nt() {
            self.mass.solve_in_place(g.level_mut(n));
        }
        g.scale(1.0 / self.tau);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObservationKind {
    /// `u(x1, ℓ, t)` (ISPn).
    Trace,
    /// `∂_{x2} u(x1, ℓ, t)` (ISPd).
    Flux,
}

/// Lateral data `g(x1, t)` on `ω × {ℓ} × (0, T]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LateralObservation {
    pub kind: ObservationKind,
    pub values: TraceField,
    /// Known noise level `‖g† - g^δ‖`, if any.
    pub delta: Option<f64>,
}

impl LateralObservation {
    pub fn new(kind: ObservationKind, values: TraceField) -> Self {
        Self {
            kind,
            values,
            delta: None,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }
}

/// Nodal field `u[·][n]` for `n = 0..=N`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    nodes: usize,
    levels: usize,
    data: Vec<f64>,
}

impl SpaceTimeField {
    /// Zero field with `nt + 1` levels.
    pub fn zeros(nodes: usize, nt: usize) -> Self {
        Self {
            nodes,
            levels: nt + 1,
            data: vec![0.0; nodes * (nt + 1)],
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes
    }

    /// `N`.
    pub fn nt(&self) -> usize {
        self.levels - 1
    }

    #[inline]
    pub fn level(&self, n: usize) -> &[f64] {
        &self.data[n * self.nodes..(n + 1) * self.nodes]
    }

    #[inline]
    pub fn level_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.data[n * self.nodes..(n + 1) * self.nodes]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Writes levels `0..=N` as CSV rows `n,t,u_0,u_1,...` (debug dump).
    pub fn write_csv(&self, path: &std::path::Path, grid: &TimeGrid) -> Result<()> {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        for n in 0..self.levels {
            write!(w, "{n},{:.17e}", grid.t(n))?;
            for v in self.level(n) {
                write!(w, ",{v:.17e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_has_unit_norm() {
        let grid = TimeGrid::new(8, 1.0).unwrap();
        let x: Vec<f64> = (0..=4).map(|i| -0.5 + i as f64 / 4.0).collect();
        let f = TraceField::from_fn(&x, &grid, |_, _| 1.0);
        let norm = TraceNorm::new(TraceMass::with_size(5, 0.25), grid.tau);
        assert!((norm.norm(&f) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn levels_and_indexing() {
        let grid = TimeGrid::new(3, 3.0).unwrap();
        let x = [0.0, 1.0];
        let f = TraceField::from_fn(&x, &grid, |x, t| 10.0 * t + x);
        assert_eq!(f.level(1), &[10.0, 11.0]);
        assert_eq!(f.get(1, 3), 31.0);
        assert!(TraceField::from_data(2, 3, vec![0.0; 5]).is_err());
    }

    #[test]
    fn riesz_representative() {
        let grid = TimeGrid::new(4, 1.0).unwrap();
        let norm = TraceNorm::new(TraceMass::with_size(5, 0.25), grid.tau);
        let x: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let g = TraceField::from_fn(&x, &grid, |x, t| x * x - t);
        let h = TraceField::from_fn(&x, &grid, |x, t| (x + t).cos());
        let euclid: f64 = g.data().iter().zip(h.data()).map(|(a, b)| a * b).sum();
        let mut r = g.clone();
        norm.riesz(&mut r);
        assert!((norm.inner(&r, &h) - euclid).abs() < 1e-12);
    }
}
