//! Uniform right-triangle mesh of the square `(-1/2, 1/2)^2`.
//!
//! The square is cut into `M^2` cells of width `h = 1/M` and every cell is
//! split along its lower-left to upper-right diagonal. Nodes are numbered
//! row by row: node `(i, j)` (column `i` along `x1`, row `j` along `x2`) has
//! index `j * (M + 1) + i`, so the top row `x2 = 1/2` is the contiguous slice
//! `M * (M + 1) .. (M + 1)^2` and doubles as the trace grid on which sources
//! and observations live.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Half-height of the cylinder, `x2 ∈ (-ℓ, ℓ)`.
pub const HALF_HEIGHT: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Interior,
    /// `x2 = ℓ`, excluding the corners.
    Top,
    /// `x2 = -ℓ`, excluding the corners.
    Bottom,
    /// `x1 = ±1/2`, excluding the corners.
    Lateral,
    Corner,
}

impl BoundaryTag {
    /// Corners belong to the lateral Dirichlet boundary.
    pub fn is_lateral(self) -> bool {
        matches!(self, BoundaryTag::Lateral | BoundaryTag::Corner)
    }
}

#[derive(Clone, Debug)]
pub struct Mesh2D {
    m: usize,
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    tags: Vec<BoundaryTag>,
}

/// Builds the uniform triangulation with `m` cells per axis.
pub fn build_mesh(m: usize) -> Result<Mesh2D> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "mesh subdivision count must be at least 2, got {m}"
        )));
    }
    let np = m + 1;
    let coord = |k: usize| -0.5 + k as f64 / m as f64;

    let mut nodes = Vec::with_capacity(np * np);
    let mut tags = Vec::with_capacity(np * np);
    for j in 0..np {
        for i in 0..np {
            nodes.push([coord(i), coord(j)]);
            let side = i == 0 || i == m;
            let tag = match (side, j == 0, j == m) {
                (true, true, _) | (true, _, true) => BoundaryTag::Corner,
                (true, false, false) => BoundaryTag::Lateral,
                (false, true, _) => BoundaryTag::Bottom,
                (false, _, true) => BoundaryTag::Top,
                (false, false, false) => BoundaryTag::Interior,
            };
            tags.push(tag);
        }
    }

    let mut triangles = Vec::with_capacity(2 * m * m);
    for j in 0..m {
        for i in 0..m {
            let ll = j * np + i;
            let lr = ll + 1;
            let ul = ll + np;
            let ur = ul + 1;
            triangles.push([ll, lr, ur]);
            triangles.push([ll, ur, ul]);
        }
    }

    Ok(Mesh2D {
        m,
        nodes,
        triangles,
        tags,
    })
}

impl Mesh2D {
    /// Cells per axis.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        1.0 / self.m as f64
    }

    /// Nodes per row (and per column).
    pub fn np(&self) -> usize {
        self.m + 1
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn tags(&self) -> &[BoundaryTag] {
        &self.tags
    }

    /// Node index of column `i`, row `j`.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.np() + i
    }

    /// Index range of the top row, ordered by `x1`.
    pub fn top_range(&self) -> std::ops::Range<usize> {
        let np = self.np();
        self.m * np..np * np
    }

    /// `x1` coordinates of the trace grid.
    pub fn trace_coords(&self) -> Vec<f64> {
        (0..self.np()).map(|i| self.nodes[i][0]).collect()
    }

    /// Twice the signed area of triangle `t`.
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    /// Writes the node and triangle tables as CSV (debug dump).
    pub fn write_csv(&self, nodes_path: &Path, triangles_path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(nodes_path)?);
        writeln!(w, "index,x1,x2,tag")?;
        for (k, (p, tag)) in self.nodes.iter().zip(&self.tags).enumerate() {
            writeln!(w, "{k},{:.17e},{:.17e},{tag:?}", p[0], p[1])?;
        }
        let mut w = std::io::BufWriter::new(std::fs::File::create(triangles_path)?);
        writeln!(w, "index,n0,n1,n2")?;
        for (k, t) in self.triangles.iter().enumerate() {
            writeln!(w, "{k},{},{},{}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}
