//! Sparse matrix plumbing: triplet assembly, products, a Jacobi-preconditioned
//! conjugate gradient solver and a sparse Cholesky wrapper.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;

use crate::error::{Error, Result};

/// Compressed sparse column matrix used throughout the crate.
pub type SpMat = SparseColMat<usize, f64>;

/// Collects `(row, col, value)` entries; duplicates are summed on build.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<Triplet<usize, usize, f64>>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, val: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push(Triplet::new(row, col, val));
    }

    pub fn build(self) -> SpMat {
        SpMat::try_new_from_triplets(self.nrows, self.ncols, &self.entries)
            .expect("triplet indices are in range by construction")
    }
}

/// `y = A x`
pub fn spmv(a: &SpMat, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.ncols(), x.len());
    let mut y = vec![0.0; a.nrows()];
    let (ptr, rows, vals) = (a.col_ptr(), a.row_idx(), a.val());
    for (col, &xc) in x.iter().enumerate() {
        if xc == 0.0 {
            continue;
        }
        for idx in ptr[col]..ptr[col + 1] {
            y[rows[idx]] += vals[idx] * xc;
        }
    }
    y
}

/// `y = Aᵀ x`
pub fn spmv_transpose(a: &SpMat, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.nrows(), x.len());
    let (ptr, rows, vals) = (a.col_ptr(), a.row_idx(), a.val());
    (0..a.ncols())
        .map(|col| {
            (ptr[col]..ptr[col + 1])
                .map(|idx| vals[idx] * x[rows[idx]])
                .sum()
        })
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Quadratic form `xᵀ A x`.
pub fn quadratic_form(a: &SpMat, x: &[f64]) -> f64 {
    dot(x, &spmv(a, x))
}

/// Largest absolute entry.
pub fn max_abs(a: &SpMat) -> f64 {
    a.val().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `max |A_ij - A_ji|`, computed on the dense pattern of both triangles.
pub fn max_asymmetry(a: &SpMat) -> f64 {
    let (ptr, rows, vals) = (a.col_ptr(), a.row_idx(), a.val());
    let mut worst = 0.0_f64;
    for col in 0..a.ncols() {
        for idx in ptr[col]..ptr[col + 1] {
            let row = rows[idx];
            let mirrored = entry(a, col, row);
            worst = worst.max((vals[idx] - mirrored).abs());
        }
    }
    worst
}

/// Entry `A[row, col]` (zero if not stored).
pub fn entry(a: &SpMat, row: usize, col: usize) -> f64 {
    let (ptr, rows, vals) = (a.col_ptr(), a.row_idx(), a.val());
    let range = ptr[col]..ptr[col + 1];
    match rows[range.clone()].binary_search(&row) {
        Ok(pos) => vals[range.start + pos],
        Err(_) => 0.0,
    }
}

/// Dense copy, row-major `Vec<Vec<f64>>`. Only for small test-sized matrices.
pub fn to_dense(a: &SpMat) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; a.ncols()]; a.nrows()];
    let (ptr, rows, vals) = (a.col_ptr(), a.row_idx(), a.val());
    for col in 0..a.ncols() {
        for idx in ptr[col]..ptr[col + 1] {
            out[rows[idx]][col] += vals[idx];
        }
    }
    out
}

/// Solves an SPD system with Jacobi-preconditioned conjugate gradients.
///
/// Returns `x` with `‖A x − rhs‖ ≤ tol · ‖rhs‖`. Breakdown (non-positive
/// curvature) and stagnation are reported with the residual history.
pub fn inner_solve(a: &SpMat, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    inner_solve_from(a, rhs, vec![0.0; rhs.len()], tol)
}

/// Same as [`inner_solve`] with an initial guess.
pub fn inner_solve_from(a: &SpMat, rhs: &[f64], mut x: Vec<f64>, tol: f64) -> Result<Vec<f64>> {
    let n = rhs.len();
    assert_eq!(a.nrows(), n);
    assert_eq!(x.len(), n);
    let rhs_norm = norm2(rhs);
    if rhs_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let diag: Vec<f64> = (0..n).map(|i| entry(a, i, i)).collect();
    if let Some(i) = diag.iter().position(|&d| d <= 0.0) {
        return Err(Error::linear(
            format!("non-positive diagonal entry at row {i}"),
            Vec::new(),
        ));
    }

    let ax = spmv(a, &x);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, v)| b - v).collect();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut history = vec![norm2(&r) / rhs_norm];
    if history[0] <= tol {
        return Ok(x);
    }

    let max_iter = 10 * n + 100;
    let window = 50.max(n / 2);
    let mut best = history[0];
    let mut best_at = 0;
    for it in 1..=max_iter {
        let ap = spmv(a, &p);
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 || !curvature.is_finite() {
            return Err(Error::linear(
                format!("CG breakdown at iteration {it}: pᵀAp = {curvature:e}"),
                history,
            ));
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm2(&r) / rhs_norm;
        history.push(rel);
        if rel <= tol {
            return Ok(x);
        }
        if rel < best * 0.999 {
            best = rel;
            best_at = it;
        } else if it - best_at > window {
            return Err(Error::linear(
                format!("CG stagnated after {it} iterations"),
                history,
            ));
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::linear(
        format!("CG reached the iteration limit {max_iter}"),
        history,
    ))
}

/// Sparse Cholesky factorization of an SPD matrix, reused across solves.
///
/// Each solve is followed by residual-driven iterative refinement until the
/// relative residual is below the requested tolerance.
pub struct SpdFactor {
    matrix: SpMat,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl SpdFactor {
    pub fn new(a: &SpMat) -> Result<Self> {
        let llt = a
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::linear(format!("Cholesky factorization failed: {e:?}"), Vec::new()))?;
        Ok(Self {
            matrix: a.clone(),
            llt,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply_inverse(&self, rhs: &[f64]) -> Vec<f64> {
        let mut col = faer::Col::<f64>::from_fn(rhs.len(), |i| rhs[i]);
        self.llt.solve_in_place(col.as_mat_mut());
        (0..rhs.len()).map(|i| col[i]).collect()
    }

    /// Solves `A x = rhs`; returns `x` and the achieved relative residual.
    pub fn solve(&self, rhs: &[f64], tol: f64) -> Result<(Vec<f64>, f64)> {
        let rhs_norm = norm2(rhs);
        if rhs_norm == 0.0 {
            return Ok((vec![0.0; rhs.len()], 0.0));
        }
        let mut x = self.apply_inverse(rhs);
        let mut history = Vec::with_capacity(4);
        for _ in 0..4 {
            let ax = spmv(&self.matrix, &x);
            let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, v)| b - v).collect();
            let rel = norm2(&r) / rhs_norm;
            history.push(rel);
            if rel <= tol {
                return Ok((x, rel));
            }
            let dx = self.apply_inverse(&r);
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi += d;
            }
        }
        Err(Error::linear(
            "iterative refinement did not reach the tolerance",
            history,
        ))
    }
}
