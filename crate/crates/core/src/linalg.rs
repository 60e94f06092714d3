//! Banded Cholesky factorization and preconditioned conjugate gradients.
//!
//! The row-major node ordering of [`crate::mesh::Mesh2D`] gives every
//! assembled operator a half-bandwidth of `M + 2`, so a dense band factor is
//! both simple and fast.

use sprs::CsMat;

use crate::error::{Error, Result};

/// `A = L Lᵀ` for a symmetric positive definite band matrix.
#[derive(Clone, Debug)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    /// Row `i` holds `L[i][i-bw..=i]`, left-padded with zeros.
    band: Vec<f64>,
    inv_diag: Vec<f64>,
}

/// Half-bandwidth `max |i - j|` over the stored entries.
pub fn bandwidth(a: &CsMat<f64>) -> usize {
    let mut bw = 0;
    for (i, row) in a.outer_iterator().enumerate() {
        for (j, _) in row.iter() {
            bw = bw.max(i.abs_diff(j));
        }
    }
    bw
}

impl BandCholesky {
    /// Bytes needed to factor an `n × n` matrix of half-bandwidth `bw`.
    pub fn storage_bytes(n: usize, bw: usize) -> usize {
        n * (bw + 2) * std::mem::size_of::<f64>()
    }

    pub fn factor(a: &CsMat<f64>) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::LinearSolver("matrix is not square".into()));
        }
        let a = if a.is_csr() { a.clone() } else { a.to_csr() };
        let bw = bandwidth(&a);
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for (i, row) in a.outer_iterator().enumerate() {
            for (j, &v) in row.iter() {
                if j <= i {
                    band[i * w + (j + bw - i)] = v;
                }
            }
        }
        let mut inv_diag = vec![0.0; n];
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                // L[i][j] = (A[i][j] - sum_k L[i][k] L[j][k]) / L[j][j]
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = band[i * w + (j + bw - i)];
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                for k in k0..j {
                    s -= band[ri + k] * band[rj + k];
                }
                if j == i {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::LinearSolver(format!(
                            "matrix not positive definite at pivot {i} ({s:e})"
                        )));
                    }
                    let d = s.sqrt();
                    band[i * w + bw] = d;
                    inv_diag[i] = 1.0 / d;
                } else {
                    band[i * w + (j + bw - i)] = s * inv_diag[j];
                }
            }
        }
        Ok(Self {
            n,
            bw,
            band,
            inv_diag,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let (bw, w) = (self.bw, self.bw + 1);
        for i in 0..self.n {
            let j0 = i.saturating_sub(bw);
            let row = &self.band[i * w + (j0 + bw - i)..i * w + bw];
            let s: f64 = row.iter().zip(&x[j0..i]).map(|(l, v)| l * v).sum();
            x[i] = (x[i] - s) * self.inv_diag[i];
        }
        for i in (0..self.n).rev() {
            x[i] *= self.inv_diag[i];
            let xi = x[i];
            let j0 = i.saturating_sub(bw);
            let row = &self.band[i * w + (j0 + bw - i)..i * w + bw];
            for (v, l) in x[j0..i].iter_mut().zip(row) {
                *v -= l * xi;
            }
        }
    }
}

/// `y = A x` for a CSR matrix.
pub fn spmv(a: &CsMat<f64>, x: &[f64], y: &mut [f64]) {
    debug_assert!(a.is_csr());
    let (indptr, indices, data) = (a.indptr(), a.indices(), a.data());
    let indptr = indptr.raw_storage();
    for (i, yi) in y.iter_mut().enumerate() {
        let mut s = 0.0;
        for k in indptr[i]..indptr[i + 1] {
            s += data[k] * x[indices[k]];
        }
        *yi = s;
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned CG for `A x = b`, starting from the preconditioned
/// right-hand side. Returns the iteration count.
pub fn pcg<F>(
    apply: F,
    precond: &BandCholesky,
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<usize>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.fill(0.0);
        return Ok(0);
    }
    x.copy_from_slice(b);
    precond.solve_in_place(x);
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut z = r.clone();
    precond.solve_in_place(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut best = f64::INFINITY;
    for it in 0..max_iter {
        let r_norm = dot(&r, &r).sqrt();
        if r_norm <= rel_tol * b_norm {
            return Ok(it);
        }
        best = best.min(r_norm);
        apply(&p, &mut ax);
        let pap = dot(&p, &ax);
        if pap <= 0.0 {
            return Err(Error::LinearSolver(
                "PCG breakdown: non-positive curvature".into(),
            ));
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ax[i];
        }
        z.copy_from_slice(&r);
        precond.solve_in_place(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let r_norm = dot(&r, &r).sqrt();
    // stagnation at round-off level still counts as converged
    if r_norm <= 1e3 * rel_tol * b_norm {
        Ok(max_iter)
    } else {
        Err(Error::LinearSolver(format!(
            "PCG did not converge in {max_iter} iterations (residual {:.3e}, best {:.3e})",
            r_norm / b_norm,
            best / b_norm
        )))
    }
}
