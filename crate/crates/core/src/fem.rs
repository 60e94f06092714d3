//! P1 finite element assembly on [`Mesh2D`].
//!
//! All operators share one CSR sparsity pattern, so a time level's system
//! matrix is assembled by refilling a value array. Coefficients are evaluated
//! at triangle centroids.

use serde::{Deserialize, Serialize};
use sprs::{CsMat, TriMat};

use crate::coeffs::CoefficientSet;
use crate::error::{check_len, Error, Result};
use crate::mesh::{BoundaryTag, Mesh2D};

/// Boundary-condition variant of an assembled operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BcVariant {
    /// Lateral Dirichlet, homogeneous Neumann on top and bottom.
    Ispn,
    /// Lateral and top Dirichlet, Neumann on the bottom.
    IspdForward,
    /// Lateral Dirichlet, prescribed conormal flux on top.
    IspdInversion,
    /// Lateral Dirichlet, misfit entering as top Neumann data.
    Adjoint,
}

impl BcVariant {
    pub fn needs_boundary_data(self) -> bool {
        matches!(self, BcVariant::IspdInversion | BcVariant::Adjoint)
    }

    pub fn dirichlet_on_top(self) -> bool {
        matches!(self, BcVariant::IspdForward)
    }

    fn name(self) -> &'static str {
        match self {
            BcVariant::Ispn => "ISPn",
            BcVariant::IspdForward => "ISPd-forward",
            BcVariant::IspdInversion => "ISPd-inversion",
            BcVariant::Adjoint => "adjoint",
        }
    }
}

/// Mask of nodes carrying a homogeneous Dirichlet condition.
pub fn constrained_nodes(mesh: &Mesh2D, variant: BcVariant) -> Vec<bool> {
    mesh.tags()
        .iter()
        .map(|&tag| tag.is_lateral() || (variant.dirichlet_on_top() && tag == BoundaryTag::Top))
        .collect()
}

/// An assembled sparse operator, optionally with boundary conditions applied.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    pub matrix: CsMat<f64>,
    pub bc_variant: Option<BcVariant>,
}

impl SparseOperator {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// Largest `|A - Aᵀ|` entry.
    pub fn asymmetry(&self) -> f64 {
        let t = self.matrix.transpose_view().to_csr();
        let mut worst: f64 = 0.0;
        for (i, row) in self.matrix.outer_iterator().enumerate() {
            for (j, &v) in row.iter() {
                worst = worst.max((v - t.get(i, j).copied().unwrap_or(0.0)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.data().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.matrix
            .outer_view(i)
            .map(|r| r.data().iter().sum())
            .unwrap_or(0.0)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        crate::linalg::spmv(&self.matrix, x, &mut y);
        y
    }
}

/// Precomputed geometry and sparsity pattern for repeated assembly.
#[derive(Clone, Debug)]
pub struct Assembler {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    /// Position in the value array of each local entry `(a, b)`, row-major.
    slots: Vec<[usize; 9]>,
    grads: Vec<[[f64; 2]; 3]>,
    areas: Vec<f64>,
    centroids: Vec<[f64; 2]>,
}

impl Assembler {
    pub fn new(mesh: &Mesh2D) -> Self {
        let n = mesh.num_nodes();
        let mut pattern = TriMat::new((n, n));
        for tri in mesh.triangles() {
            for &a in tri {
                for &b in tri {
                    pattern.add_triplet(a, b, 0.0);
                }
            }
        }
        let csr: CsMat<f64> = pattern.to_csr();
        let indptr = csr.indptr().raw_storage().to_vec();
        let indices = csr.indices().to_vec();

        let mut slots = Vec::with_capacity(mesh.triangles().len());
        let mut grads = Vec::with_capacity(mesh.triangles().len());
        let mut areas = Vec::with_capacity(mesh.triangles().len());
        let mut centroids = Vec::with_capacity(mesh.triangles().len());
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let mut s = [0usize; 9];
            for (la, &a) in tri.iter().enumerate() {
                let row = &indices[indptr[a]..indptr[a + 1]];
                for (lb, &b) in tri.iter().enumerate() {
                    let off = row.binary_search(&b).expect("pattern covers element");
                    s[3 * la + lb] = indptr[a] + off;
                }
            }
            slots.push(s);

            let area = mesh.signed_area(t);
            let p: Vec<[f64; 2]> = tri.iter().map(|&k| mesh.nodes()[k]).collect();
            let mut g = [[0.0; 2]; 3];
            for k in 0..3 {
                let (p1, p2) = (p[(k + 1) % 3], p[(k + 2) % 3]);
                g[k] = [
                    (p1[1] - p2[1]) / (2.0 * area),
                    (p2[0] - p1[0]) / (2.0 * area),
                ];
            }
            grads.push(g);
            areas.push(area);
            centroids.push(mesh.centroid(t));
        }

        Self {
            n,
            indptr,
            indices,
            slots,
            grads,
            areas,
            centroids,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn zeros(&self) -> Vec<f64> {
        vec![0.0; self.nnz()]
    }

    pub fn to_matrix(&self, data: Vec<f64>) -> CsMat<f64> {
        CsMat::new(
            (self.n, self.n),
            self.indptr.clone(),
            self.indices.clone(),
            data,
        )
    }

    /// Consistent P1 mass matrix values.
    pub fn mass_values(&self) -> Vec<f64> {
        let mut data = self.zeros();
        for (slots, &area) in self.slots.iter().zip(&self.areas) {
            for la in 0..3 {
                for lb in 0..3 {
                    let w = if la == lb { area / 6.0 } else { area / 12.0 };
                    data[slots[3 * la + lb]] += w;
                }
            }
        }
        data
    }

    /// Values of `∫ a ∇φ_j·∇φ_i + q φ_j φ_i` at time `t`, accumulated into `out`
    /// after clearing it.
    pub fn stiffness_values(&self, coeffs: &CoefficientSet, t: f64, out: &mut [f64]) -> Result<()> {
        check_len("stiffness value array", self.nnz(), out.len())?;
        out.fill(0.0);
        for e in 0..self.slots.len() {
            let x = self.centroids[e];
            let a = coeffs.a(x, t);
            let det = a.a11 * a.a22 - a.a12 * a.a12;
            if !(a.a11 > 0.0 && det > 0.0) {
                return Err(Error::AssumptionViolation(format!(
                    "diffusion coefficient not elliptic at ({:.4}, {:.4}), t = {t}",
                    x[0], x[1]
                )));
            }
            let q = coeffs.q(x, t);
            let (area, g, slots) = (self.areas[e], &self.grads[e], &self.slots[e]);
            for lb in 0..3 {
                let ag = [
                    a.a11 * g[lb][0] + a.a12 * g[lb][1],
                    a.a12 * g[lb][0] + a.a22 * g[lb][1],
                ];
                for la in 0..3 {
                    let mass = if la == lb { area / 6.0 } else { area / 12.0 };
                    out[slots[3 * la + lb]] +=
                        area * (ag[0] * g[la][0] + ag[1] * g[la][1]) + q * mass;
                }
            }
        }
        Ok(())
    }

    /// Zeroes the rows and columns of constrained nodes and puts 1 on their
    /// diagonal.
    pub fn eliminate(&self, data: &mut [f64], constrained: &[bool]) {
        for i in 0..self.n {
            for k in self.indptr[i]..self.indptr[i + 1] {
                let j = self.indices[k];
                if constrained[i] || constrained[j] {
                    data[k] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
    }
}

pub fn assemble_mass(mesh: &Mesh2D) -> SparseOperator {
    let asm = Assembler::new(mesh);
    SparseOperator {
        matrix: asm.to_matrix(asm.mass_values()),
        bc_variant: None,
    }
}

pub fn assemble_stiffness(
    mesh: &Mesh2D,
    coeffs: &CoefficientSet,
    t: f64,
) -> Result<SparseOperator> {
    let asm = Assembler::new(mesh);
    let mut data = asm.zeros();
    asm.stiffness_values(coeffs, t, &mut data)?;
    Ok(SparseOperator {
        matrix: asm.to_matrix(data),
        bc_variant: None,
    })
}

/// Applies the boundary conditions of `variant` to `op` and `rhs`.
///
/// Dirichlet nodes are eliminated symmetrically. For the variants with top
/// Neumann data, `boundary_data` (one value per trace node) enters the
/// right-hand side through the top-edge mass matrix.
pub fn apply_bc(
    mesh: &Mesh2D,
    op: &SparseOperator,
    rhs: &[f64],
    variant: BcVariant,
    boundary_data: Option<&[f64]>,
) -> Result<(SparseOperator, Vec<f64>)> {
    check_len("right-hand side", op.dim(), rhs.len())?;
    let constrained = constrained_nodes(mesh, variant);
    let mut rhs = rhs.to_vec();
    if variant.needs_boundary_data() {
        let psi = boundary_data.ok_or(Error::MissingBoundaryData(variant.name()))?;
        check_len("boundary data", mesh.np(), psi.len())?;
        let w = TraceMass::new(mesh);
        let mut load = vec![0.0; mesh.np()];
        w.apply(psi, &mut load);
        for (r, l) in rhs[mesh.top_range()].iter_mut().zip(&load) {
            *r += l;
        }
    }

    let mut matrix = op.matrix.to_csr();
    {
        let (indptr, indices, data) = (
            matrix.indptr().raw_storage().to_vec(),
            matrix.indices().to_vec(),
            matrix.data_mut(),
        );
        for i in 0..indptr.len() - 1 {
            for k in indptr[i]..indptr[i + 1] {
                let j = indices[k];
                if constrained[i] || constrained[j] {
                    data[k] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
    }
    for (r, &c) in rhs.iter_mut().zip(&constrained) {
        if c {
            *r = 0.0;
        }
    }
    Ok((
        SparseOperator {
            matrix,
            bc_variant: Some(variant),
        },
        rhs,
    ))
}

/// P1 mass matrix of the trace grid on `ω = (-1/2, 1/2)`, i.e. the top-edge
/// boundary mass. Tridiagonal with `h/6 · [1 4 1]` (`h/3` at the ends).
#[derive(Clone, Debug)]
pub struct TraceMass {
    n: usize,
    h: f64,
}

impl TraceMass {
    pub fn new(mesh: &Mesh2D) -> Self {
        Self::with_size(mesh.np(), mesh.h())
    }

    pub fn with_size(n: usize, h: f64) -> Self {
        Self { n, h }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    fn diag(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n {
            self.h / 3.0
        } else {
            2.0 * self.h / 3.0
        }
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let off = self.h / 6.0;
        for i in 0..self.n {
            let mut s = self.diag(i) * v[i];
            if i > 0 {
                s += off * v[i - 1];
            }
            if i + 1 < self.n {
                s += off * v[i + 1];
            }
            out[i] = s;
        }
    }

    /// `aᵀ W b`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let off = self.h / 6.0;
        let mut s = 0.0;
        for i in 0..self.n {
            let mut wb = self.diag(i) * b[i];
            if i > 0 {
                wb += off * b[i - 1];
            }
            if i + 1 < self.n {
                wb += off * b[i + 1];
            }
            s += a[i] * wb;
        }
        s
    }

    /// Solves `W x = b` in place (Thomas algorithm).
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let off = self.h / 6.0;
        let mut c = vec![0.0; n];
        let mut d = self.diag(0);
        c[0] = off / d;
        b[0] /= d;
        for i in 1..n {
            d = self.diag(i) - off * c[i - 1];
            c[i] = off / d;
            b[i] = (b[i] - off * b[i - 1]) / d;
        }
        for i in (0..n - 1).rev() {
            b[i] -= c[i] * b[i + 1];
        }
    }
}
