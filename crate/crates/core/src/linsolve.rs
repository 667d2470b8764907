//! Sparse symmetric positive-definite systems: P1 Laplace assembly and
//! preconditioned conjugate gradients.

use crate::error::{Error, Result};
use crate::fem::{DualVector, FeFunction};
use crate::mesh::{signed_area, Mesh};

/// Compressed sparse row matrix with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries. Entries outside `n x n` panic.
    pub fn from_triplets(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            assert!(i < n && j < n, "entry ({i},{j}) outside {n}x{n}");
            if last == Some((i, j)) {
                *values.last_mut().expect("nonempty") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).all(|(&j, &v)| self.get(j, i) == v)
        })
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }
}

/// Incomplete Cholesky factor on the lower-triangular pattern of the matrix.
#[derive(Clone, Debug)]
struct IncompleteCholesky {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    // row i holds L[i][j] for j < i in column order, followed by the diagonal
    values: Vec<f64>,
}

impl IncompleteCholesky {
    fn factor(a: &CsrMatrix, shift: f64) -> Option<Self> {
        let n = a.n;
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j < i {
                    col_idx.push(j);
                    values.push(v);
                } else if j == i {
                    col_idx.push(j);
                    values.push(v * (1.0 + shift));
                }
            }
            row_ptr[i + 1] = col_idx.len();
            if col_idx.last() != Some(&i) {
                return None;
            }
        }
        for i in 0..n {
            let (start, end) = (row_ptr[i], row_ptr[i + 1]);
            for kk in start..end {
                let k = col_idx[kk];
                // sparse dot of rows i and k over columns < k
                let mut s = values[kk];
                let (mut a_, mut b_) = (start, row_ptr[k]);
                let b_end = row_ptr[k + 1] - 1;
                while a_ < kk && b_ < b_end {
                    match col_idx[a_].cmp(&col_idx[b_]) {
                        std::cmp::Ordering::Less => a_ += 1,
                        std::cmp::Ordering::Greater => b_ += 1,
                        std::cmp::Ordering::Equal => {
                            s -= values[a_] * values[b_];
                            a_ += 1;
                            b_ += 1;
                        }
                    }
                }
                if k < i {
                    values[kk] = s / values[row_ptr[k + 1] - 1];
                } else {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    values[kk] = s.sqrt();
                }
            }
        }
        Some(IncompleteCholesky {
            row_ptr,
            col_idx,
            values,
        })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.row_ptr.len() - 1;
        for i in 0..n {
            let (start, end) = (self.row_ptr[i], self.row_ptr[i + 1] - 1);
            let mut s = r[i];
            for k in start..end {
                s -= self.values[k] * z[self.col_idx[k]];
            }
            z[i] = s / self.values[end];
        }
        for i in (0..n).rev() {
            let (start, end) = (self.row_ptr[i], self.row_ptr[i + 1] - 1);
            z[i] /= self.values[end];
            let zi = z[i];
            for k in start..end {
                z[self.col_idx[k]] -= self.values[k] * zi;
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Preconditioner {
    Ic(IncompleteCholesky),
    Jacobi(Vec<f64>),
}

/// SPD matrix over the free vertices together with its cached preconditioner.
#[derive(Clone, Debug)]
pub struct StiffnessOperator {
    matrix: CsrMatrix,
    precond: Preconditioner,
}

/// Assembles `K_ij = ∫ ∇φ_i·∇φ_j` over the free vertices of `mesh`.
pub fn assemble_stiffness(mesh: &Mesh) -> Result<StiffnessOperator> {
    let domain_area = mesh.area();
    let mut entries = Vec::with_capacity(9 * mesh.triangles().len());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let x = tri.map(|v| mesh.vertices()[v]);
        let area = signed_area(x[0], x[1], x[2]);
        if area < 1e-14 * domain_area {
            return Err(Error::DegenerateTriangle { index: t, area });
        }
        let grads = barycentric_gradients(x, area);
        for a in 0..3 {
            let Some(i) = mesh.free_index(tri[a]) else { continue };
            for b in 0..3 {
                let Some(j) = mesh.free_index(tri[b]) else { continue };
                let v = area * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
                entries.push((i, j, v));
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(mesh.n_free(), entries);
    Ok(StiffnessOperator::new(symmetrize(matrix)))
}

/// Gradients of the three barycentric coordinates of a triangle.
pub(crate) fn barycentric_gradients(x: [[f64; 2]; 3], area: f64) -> [[f64; 2]; 3] {
    let inv = 0.5 / area;
    [
        [(x[1][1] - x[2][1]) * inv, (x[2][0] - x[1][0]) * inv],
        [(x[2][1] - x[0][1]) * inv, (x[0][0] - x[2][0]) * inv],
        [(x[0][1] - x[1][1]) * inv, (x[1][0] - x[0][0]) * inv],
    ]
}

// Summation order can differ between (i,j) and (j,i); average to make the
// matrix bitwise symmetric.
fn symmetrize(mut m: CsrMatrix) -> CsrMatrix {
    let mut sym = m.values.clone();
    for i in 0..m.n {
        for k in m.row_ptr[i]..m.row_ptr[i + 1] {
            let j = m.col_idx[k];
            if j > i {
                let t = m.get(j, i);
                let avg = 0.5 * (m.values[k] + t);
                sym[k] = avg;
                let (cols, _) = m.row(j);
                let pos = m.row_ptr[j] + cols.binary_search(&i).expect("symmetric pattern");
                sym[pos] = avg;
            }
        }
    }
    m.values = sym;
    m
}

impl StiffnessOperator {
    /// Wraps an SPD matrix; builds an incomplete Cholesky preconditioner,
    /// retrying with diagonal shifts and falling back to Jacobi on breakdown.
    pub fn new(matrix: CsrMatrix) -> Self {
        let precond = [0.0, 1e-3, 1e-2, 1e-1]
            .iter()
            .find_map(|&shift| IncompleteCholesky::factor(&matrix, shift))
            .map(Preconditioner::Ic)
            .unwrap_or_else(|| {
                log::warn!("incomplete Cholesky failed, using Jacobi");
                Preconditioner::Jacobi(matrix.diagonal().iter().map(|d| 1.0 / d).collect())
            });
        StiffnessOperator { matrix, precond }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.n
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.mul_vec(x, y);
    }

    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        match &self.precond {
            Preconditioner::Ic(ic) => ic.apply(r, z),
            Preconditioner::Jacobi(d) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(d) {
                    *zi = ri * di;
                }
            }
        }
    }

    /// Solves `A x = b` starting from a zero guess.
    pub fn solve(&self, b: &DualVector, rel_tol: f64) -> Result<FeFunction> {
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: b.len(),
            });
        }
        let mut x = vec![0.0; self.dim()];
        self.solve_into(b.values(), &mut x, rel_tol)?;
        FeFunction::new(x)
    }

    /// Preconditioned CG using `x` as initial guess. Stops when
    /// `‖A x − b‖ ≤ rel_tol ‖b‖`; returns the iteration count.
    pub fn solve_into(&self, b: &[f64], x: &mut [f64], rel_tol: f64) -> Result<usize> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        assert_eq!(x.len(), n);
        let b_norm = norm2(b);
        if b_norm == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return Ok(0);
        }
        let target = rel_tol * b_norm;
        let mut r = vec![0.0; n];
        self.apply(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let mut res = norm2(&r);
        if res <= target {
            return Ok(0);
        }
        let mut z = vec![0.0; n];
        self.precondition(&r, &mut z);
        let mut d = z.clone();
        let mut rz = dot(&r, &z);
        let mut q = vec![0.0; n];
        let max_iter = 1000 + 10 * (n as f64).sqrt() as usize;
        for it in 1..=max_iter {
            self.apply(&d, &mut q);
            let dq = dot(&d, &q);
            if !(dq > 0.0) {
                return Err(Error::LinearSolver {
                    iterations: it,
                    residual: res / b_norm,
                });
            }
            let alpha = rz / dq;
            for i in 0..n {
                x[i] += alpha * d[i];
                r[i] -= alpha * q[i];
            }
            res = norm2(&r);
            if res <= target {
                return Ok(it);
            }
            self.precondition(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                d[i] = z[i] + beta * d[i];
            }
        }
        Err(Error::LinearSolver {
            iterations: max_iter,
            residual: res / b_norm,
        })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
