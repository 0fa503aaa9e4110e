//! Compressed-row matrices, unpreconditioned conjugate gradients and a
//! Schur-complement (Uzawa-CG) driver for symmetric saddle-point systems.

use std::cell::Cell;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{FemError, Result};

/// Fixed-order dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// General sparse matrix in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds the matrix, summing duplicate entries. Entries are ordered by
    /// (row, column) and duplicates are summed in input order.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(FemError::IndexOutOfRange {
                    row: r,
                    col: c,
                    nrows,
                    ncols,
                });
            }
        }
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));

        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (r, c, v) = triplets[k];
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: vec![],
            values: vec![],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yr = s;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    /// `A^T x`
    pub fn transpose_matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k]] += self.values[k] * xr;
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                t.push((c, r, v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, &t).expect("indices already validated")
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// `diag(left) A diag(right)`.
    pub fn scale_rows_cols(&self, left: &[f64], right: &[f64]) -> Self {
        let mut m = self.clone();
        for r in 0..m.nrows {
            for k in m.row_ptr[r]..m.row_ptr[r + 1] {
                m.values[k] *= left[r] * right[m.col_idx[k]];
            }
        }
        m
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// `x^T A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.matvec(y))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                d[(r, c)] += v;
            }
        }
        d
    }

    fn is_structurally_symmetric(&self) -> bool {
        self.nrows == self.ncols
            && (0..self.nrows).all(|r| {
                self.row(r).all(|(c, _)| {
                    let range = self.row_ptr[c]..self.row_ptr[c + 1];
                    self.col_idx[range].binary_search(&r).is_ok()
                })
            })
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst / scale
    }
}

/// Square, structurally symmetric sparse matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSym(CsrMatrix);

impl SparseSym {
    /// Assembles from triplets; fails on out-of-range indices or a
    /// non-symmetric sparsity pattern.
    pub fn assemble(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        Self::try_from(CsrMatrix::from_triplets(dim, dim, triplets)?)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows
    }

    pub fn csr(&self) -> &CsrMatrix {
        &self.0
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.0.matvec(x)
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.0.bilinear(x, x)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.scaled(s))
    }
}

impl TryFrom<CsrMatrix> for SparseSym {
    type Error = FemError;

    fn try_from(m: CsrMatrix) -> Result<Self> {
        if m.nrows != m.ncols {
            return Err(FemError::DimensionMismatch(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows, m.ncols
            )));
        }
        if !m.is_structurally_symmetric() {
            return Err(FemError::InvalidArgument(
                "sparsity pattern is not symmetric".into(),
            ));
        }
        Ok(Self(m))
    }
}

/// Anything CG can be run on.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for SparseSym {
    fn dim(&self) -> usize {
        self.0.nrows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.0.matvec_into(x, y)
    }
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            *yr = (0..self.ncols()).map(|c| self[(r, c)] * x[c]).sum();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgOptions {
    /// Relative residual target `||b - Ax|| / ||b||`.
    pub tol: f64,
    /// Iteration cap; `None` means 50 times the dimension.
    pub max_iter: Option<usize>,
    /// Keep per-iteration residual and energy values.
    pub record_history: bool,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: None,
            record_history: false,
        }
    }
}

impl CgOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative residual of the returned iterate, recomputed from scratch.
    pub relative_residual: f64,
    pub converged: bool,
    /// Relative recursive residual after each iteration (when recorded).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub residual_history: Vec<f64>,
    /// `x^T A x / 2 - b^T x` after each iteration (when recorded).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub energy_history: Vec<f64>,
}

/// Unpreconditioned CG for a symmetric positive definite matrix.
pub fn cg(a: &SparseSym, b: &[f64], tol: f64, max_iter: usize) -> (Vec<f64>, SolveReport) {
    let opts = CgOptions {
        tol,
        max_iter: Some(max_iter),
        record_history: false,
    };
    cg_operator(a, b, None, &opts)
}

/// Unpreconditioned CG on a general symmetric positive (semi)definite operator.
///
/// Convergence is declared on the recursively updated residual and then
/// confirmed on the true residual; if the two have drifted apart the
/// iteration restarts from the current iterate.
pub fn cg_operator<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &CgOptions,
) -> (Vec<f64>, SolveReport) {
    let n = a.dim();
    assert_eq!(b.len(), n, "right-hand side length");
    let max_iter = opts.max_iter.unwrap_or(50 * n.max(1));
    let bnorm = norm2(b);
    let mut report = SolveReport::default();
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        report.converged = true;
        return (x, report);
    }

    let mut ap = vec![0.0; n];
    let true_residual = |x: &[f64], r: &mut Vec<f64>, ap: &mut Vec<f64>| {
        a.apply(x, ap);
        for i in 0..n {
            r[i] = b[i] - ap[i];
        }
    };
    let mut r = vec![0.0; n];
    true_residual(&x, &mut r, &mut ap);
    const MAX_RESTARTS: usize = 5;
    let mut restarts = 0;

    'outer: loop {
        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        if rr.sqrt() <= opts.tol * bnorm {
            break;
        }
        while report.iterations < max_iter {
            a.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 || !pap.is_finite() {
                break 'outer;
            }
            let alpha = rr / pap;
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &ap, &mut r);
            let rr_new = dot(&r, &r);
            report.iterations += 1;
            if opts.record_history {
                report.residual_history.push(rr_new.sqrt() / bnorm);
                // with r = b - Ax the energy is -x.(b + r)/2
                let e: f64 = x
                    .iter()
                    .zip(b.iter().zip(&r))
                    .map(|(xi, (bi, ri))| xi * (bi + ri))
                    .sum();
                report.energy_history.push(-0.5 * e);
            }
            if rr_new.sqrt() <= opts.tol * bnorm {
                let mut check = vec![0.0; n];
                true_residual(&x, &mut check, &mut ap);
                let true_norm = norm2(&check);
                if true_norm <= opts.tol * bnorm || restarts >= MAX_RESTARTS {
                    break 'outer;
                }
                restarts += 1;
                r = check;
                continue 'outer;
            }
            let beta = rr_new / rr;
            rr = rr_new;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
        }
        break;
    }

    true_residual(&x, &mut r, &mut ap);
    report.relative_residual = norm2(&r) / bnorm;
    report.converged = report.relative_residual <= opts.tol;
    (x, report)
}

/// Subtracts the area-weighted mean.
pub fn project_zero_mean(p: &[f64], areas: &[f64]) -> Vec<f64> {
    let total: f64 = areas.iter().sum();
    let mean = dot(p, areas) / total;
    p.iter().map(|v| v - mean).collect()
}

/// Euclidean orthogonal projection onto `{q : w.q = 0}`.
fn project_orthogonal(r: &mut [f64], w: &[f64], ww: f64) {
    let s = dot(w, r) / ww;
    axpy(-s, w, r);
}

/// How the pressure space is constrained in [`solve_saddle`].
#[derive(Clone, Debug, PartialEq)]
pub enum PressureConstraint {
    /// Full pressure space, no constraint.
    None,
    /// Pressures and test functions with `sum_i w_i q_i = 0`.
    WeightedZeroMean(Vec<f64>),
}

/// Solver for the velocity block inside [`solve_saddle`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerSolver {
    /// One sparse Cholesky factorization, reused for every solve.
    #[default]
    Cholesky,
    /// CG to `inner_tol` on each application.
    Cg,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaddleOptions {
    pub outer_tol: f64,
    /// Only used by [`InnerSolver::Cg`].
    pub inner_tol: f64,
    pub max_outer: Option<usize>,
    pub max_inner: Option<usize>,
    pub constraint: PressureConstraint,
    pub inner_solver: InnerSolver,
}

impl SaddleOptions {
    pub fn new(outer_tol: f64, inner_tol: f64, constraint: PressureConstraint) -> Self {
        Self {
            outer_tol,
            inner_tol,
            max_outer: None,
            max_inner: None,
            constraint,
            inner_solver: InnerSolver::default(),
        }
    }

    pub fn with_inner_solver(mut self, inner_solver: InnerSolver) -> Self {
        self.inner_solver = inner_solver;
        self
    }
}

/// Sparse `LL^T` factorization of a symmetric positive definite matrix.
pub struct SparseCholesky {
    dim: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl SparseCholesky {
    pub fn factor(a: &SparseSym) -> Result<Self> {
        use faer::sparse::{SparseColMat, Triplet};
        let n = a.dim();
        let mut lower = Vec::with_capacity(a.0.nnz());
        for r in 0..n {
            lower.extend(
                a.0.row(r)
                    .filter(|&(c, _)| c <= r)
                    .map(|(c, v)| Triplet::new(r, c, v)),
            );
        }
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &lower)
            .map_err(|e| FemError::InvalidArgument(format!("sparse matrix: {e:?}")))?;
        let llt = mat.sp_cholesky(faer::Side::Lower).map_err(|e| {
            FemError::InvalidArgument(format!("Cholesky factorization failed: {e:?}"))
        })?;
        Ok(Self { dim: n, llt })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        use faer::linalg::solvers::Solve;
        assert_eq!(b.len(), self.dim, "right-hand side length");
        let mut x = faer::Mat::from_fn(self.dim, 1, |i, _| b[i]);
        self.llt.solve_in_place(&mut x);
        (0..self.dim).map(|i| x[(i, 0)]).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SaddleReport {
    pub outer: SolveReport,
    pub inner_iterations: usize,
    pub inner_converged: bool,
    /// `||f - A u - B^T p|| / ||(f, g)||`
    pub velocity_residual: f64,
    /// `||P(g - B u)|| / ||(f, g)||` with `P` the constraint projection.
    pub pressure_residual: f64,
    pub converged: bool,
}

struct Schur<'a> {
    a: &'a SparseSym,
    b: &'a CsrMatrix,
    inner: CgOptions,
    factor: Option<SparseCholesky>,
    constraint: Option<(&'a [f64], f64)>,
    inner_iterations: Cell<usize>,
    inner_ok: Cell<bool>,
}

impl Schur<'_> {
    fn solve_a(&self, rhs: &[f64]) -> Vec<f64> {
        if let Some(f) = &self.factor {
            return f.solve(rhs);
        }
        let (x, rep) = cg_operator(self.a, rhs, None, &self.inner);
        self.inner_iterations
            .set(self.inner_iterations.get() + rep.iterations);
        if !rep.converged {
            self.inner_ok.set(false);
        }
        x
    }
}

impl LinearOperator for Schur<'_> {
    fn dim(&self) -> usize {
        self.b.nrows()
    }

    fn apply(&self, q: &[f64], y: &mut [f64]) {
        let mut qp = q.to_vec();
        if let Some((w, ww)) = self.constraint {
            project_orthogonal(&mut qp, w, ww);
        }
        let z = self.solve_a(&self.b.transpose_matvec(&qp));
        self.b.matvec_into(&z, y);
        if let Some((w, ww)) = self.constraint {
            project_orthogonal(y, w, ww);
        }
    }
}

/// Solves `[A B^T; B 0] (u, p) = (f, g)` by CG on the pressure Schur
/// complement `B A^{-1} B^T`. Solves with `A` use a sparse Cholesky factor
/// or inner CG, see [`InnerSolver`].
pub fn solve_saddle(
    a: &SparseSym,
    b: &CsrMatrix,
    f: &[f64],
    g: &[f64],
    opts: &SaddleOptions,
) -> Result<(Vec<f64>, Vec<f64>, SaddleReport)> {
    if b.ncols() != a.dim() || f.len() != a.dim() || g.len() != b.nrows() {
        return Err(FemError::DimensionMismatch(format!(
            "saddle system: A is {0}x{0}, B is {1}x{2}, f has {3}, g has {4}",
            a.dim(),
            b.nrows(),
            b.ncols(),
            f.len(),
            g.len()
        )));
    }
    let constraint = match &opts.constraint {
        PressureConstraint::None => None,
        PressureConstraint::WeightedZeroMean(w) => {
            if w.len() != b.nrows() {
                return Err(FemError::DimensionMismatch("constraint weights".into()));
            }
            Some((w.as_slice(), dot(w, w)))
        }
    };
    let inner = CgOptions {
        tol: opts.inner_tol,
        max_iter: opts.max_inner,
        record_history: false,
    };
    let factor = match opts.inner_solver {
        InnerSolver::Cholesky => Some(SparseCholesky::factor(a)?),
        InnerSolver::Cg => None,
    };
    let schur = Schur {
        a,
        b,
        inner,
        factor,
        constraint,
        inner_iterations: Cell::new(0),
        inner_ok: Cell::new(true),
    };

    let u0 = schur.solve_a(f);
    let mut rhs = b.matvec(&u0);
    axpy(-1.0, g, &mut rhs);
    if let Some((w, ww)) = constraint {
        project_orthogonal(&mut rhs, w, ww);
    }
    let outer_opts = CgOptions {
        tol: opts.outer_tol,
        max_iter: opts.max_outer,
        record_history: false,
    };
    let (mut p, outer) = if b.nrows() == 0 {
        (
            Vec::new(),
            SolveReport {
                converged: true,
                ..SolveReport::default()
            },
        )
    } else {
        cg_operator(&schur, &rhs, None, &outer_opts)
    };
    if let Some((w, ww)) = constraint {
        project_orthogonal(&mut p, w, ww);
    }
    let mut frhs = f.to_vec();
    axpy(-1.0, &b.transpose_matvec(&p), &mut frhs);
    let u = schur.solve_a(&frhs);

    let scale = (dot(f, f) + dot(g, g)).sqrt().max(f64::MIN_POSITIVE);
    let mut ru = f.to_vec();
    axpy(-1.0, &a.matvec(&u), &mut ru);
    axpy(-1.0, &b.transpose_matvec(&p), &mut ru);
    let mut rp = g.to_vec();
    axpy(-1.0, &b.matvec(&u), &mut rp);
    if let Some((w, ww)) = constraint {
        project_orthogonal(&mut rp, w, ww);
    }
    let velocity_residual = norm2(&ru) / scale;
    let pressure_residual = norm2(&rp) / scale;
    let inner_converged = schur.inner_ok.get();
    let converged = outer.converged && inner_converged;
    let report = SaddleReport {
        outer,
        inner_iterations: schur.inner_iterations.get(),
        inner_converged,
        velocity_residual,
        pressure_residual,
        converged,
    };
    Ok((u, p, report))
}

fn inverse_sqrt(d: &[f64], what: &str) -> Result<Vec<f64>> {
    d.iter()
        .map(|&v| {
            if v > 0.0 && v.is_finite() {
                Ok(1.0 / v.sqrt())
            } else {
                Err(FemError::InvalidArgument(format!(
                    "{what} must be positive, found {v}"
                )))
            }
        })
        .collect()
}

/// CG on the symmetrically scaled system `D^{-1/2} A D^{-1/2} y = D^{-1/2} b`,
/// `D = diag(A)`. The reported residual is the scaled one.
pub fn cg_scaled(
    a: &SparseSym,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let s = inverse_sqrt(&a.0.diagonal(), "matrix diagonal")?;
    let scaled = SparseSym(a.0.scale_rows_cols(&s, &s));
    let bs: Vec<f64> = b.iter().zip(&s).map(|(x, y)| x * y).collect();
    let (y, report) = cg(&scaled, &bs, tol, max_iter);
    Ok((y.iter().zip(&s).map(|(x, y)| x * y).collect(), report))
}

/// [`solve_saddle`] on the diagonally scaled system: velocities by the
/// diagonal of `A`, pressures by `pressure_mass` (for elementwise constants,
/// the element areas). Tolerances refer to the scaled system; the block
/// residuals in the report are those of the original system.
pub fn solve_saddle_scaled(
    a: &SparseSym,
    b: &CsrMatrix,
    f: &[f64],
    g: &[f64],
    pressure_mass: &[f64],
    opts: &SaddleOptions,
) -> Result<(Vec<f64>, Vec<f64>, SaddleReport)> {
    if pressure_mass.len() != b.nrows() {
        return Err(FemError::DimensionMismatch("pressure mass length".into()));
    }
    let sv = inverse_sqrt(&a.0.diagonal(), "velocity diagonal")?;
    let sp = inverse_sqrt(pressure_mass, "pressure mass")?;
    let mul = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(a, b)| a * b).collect() };

    let a_s = SparseSym(a.0.scale_rows_cols(&sv, &sv));
    let b_s = b.scale_rows_cols(&sp, &sv);
    let constraint = match &opts.constraint {
        PressureConstraint::None => PressureConstraint::None,
        PressureConstraint::WeightedZeroMean(w) => {
            PressureConstraint::WeightedZeroMean(mul(w, &sp))
        }
    };
    let scaled_opts = SaddleOptions {
        constraint,
        ..opts.clone()
    };
    let (us, ps, mut report) = solve_saddle(&a_s, &b_s, &mul(f, &sv), &mul(g, &sp), &scaled_opts)?;
    let u = mul(&us, &sv);
    let p = mul(&ps, &sp);

    let scale = (dot(f, f) + dot(g, g)).sqrt().max(f64::MIN_POSITIVE);
    let mut ru = f.to_vec();
    axpy(-1.0, &a.matvec(&u), &mut ru);
    axpy(-1.0, &b.transpose_matvec(&p), &mut ru);
    let mut rp = g.to_vec();
    axpy(-1.0, &b.matvec(&u), &mut rp);
    if let PressureConstraint::WeightedZeroMean(w) = &opts.constraint {
        let ww = dot(w, w);
        project_orthogonal(&mut rp, w, ww);
    }
    report.velocity_residual = norm2(&ru) / scale;
    report.pressure_residual = norm2(&rp) / scale;
    Ok((u, p, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> (SparseSym, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 1.0 + rng.random_range(0.0..1.0)));
        }
        // sparse symmetric off-diagonal coupling; diagonal dominance keeps it SPD
        for _ in 0..3 * n {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j {
                continue;
            }
            let v: f64 = rng.random_range(-1.0..1.0);
            t.push((i, j, v));
            t.push((j, i, v));
            t.push((i, i, v.abs()));
            t.push((j, j, v.abs()));
        }
        let a = SparseSym::assemble(n, &t).unwrap();
        let d = a.csr().to_dense();
        (a, d)
    }

    #[test]
    fn empty_triplets_give_zero_matrix() {
        let m = CsrMatrix::from_triplets(3, 2, &[]).unwrap();
        assert_eq!(m.nnz(), 0);
        assert_eq!(m.matvec(&[1.0, 2.0]), vec![0.0; 3]);
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 5.0), (0, 0, 2.0)]).unwrap();
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn out_of_range_is_rejected() {
        let err = CsrMatrix::from_triplets(2, 2, &[(0, 2, 1.0)]).unwrap_err();
        assert!(matches!(
            err,
            FemError::IndexOutOfRange { row: 0, col: 2, .. }
        ));
    }

    #[test]
    fn asymmetric_pattern_is_rejected() {
        assert!(SparseSym::assemble(2, &[(0, 1, 1.0)]).is_err());
        assert!(SparseSym::assemble(2, &[(0, 1, 1.0), (1, 0, 1.0)]).is_ok());
    }

    #[test]
    fn transpose_agrees_with_transpose_matvec() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.5), (1, 0, -2.0), (1, 2, 0.5)]).unwrap();
        let x = [1.0, 3.0];
        assert_eq!(m.transpose().matvec(&x), m.transpose_matvec(&x));
        assert_eq!(m.transpose().to_dense(), m.to_dense().transpose());
    }

    #[test]
    fn cg_identity_in_one_iteration() {
        let a = SparseSym::assemble(4, &(0..4).map(|i| (i, i, 1.0)).collect::<Vec<_>>()).unwrap();
        let b = [1.0, -2.0, 3.0, 0.5];
        let (x, rep) = cg(&a, &b, 1e-14, 100);
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert_eq!(x, b);
    }

    #[test]
    fn cg_diagonal_hand_solve() {
        let a = SparseSym::assemble(2, &[(0, 0, 1.0), (1, 1, 2.0)]).unwrap();
        let (x, rep) = cg(&a, &[1.0, 2.0], 1e-14, 10);
        assert!(rep.converged);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cg_zero_rhs() {
        let (a, _) = random_spd(5, 1);
        let (x, rep) = cg(&a, &[0.0; 5], 1e-12, 10);
        assert!(rep.converged && rep.iterations == 0 && x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cg_reports_non_convergence() {
        let (a, _) = random_spd(50, 2);
        let b = vec![1.0; 50];
        let (_, rep) = cg(&a, &b, 1e-14, 2);
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 2);
    }

    #[test]
    fn cg_energy_is_non_increasing() {
        let (a, _) = random_spd(150, 5);
        let b: Vec<f64> = (0..150).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let opts = CgOptions {
            tol: 1e-12,
            max_iter: None,
            record_history: true,
        };
        let (_, rep) = cg_operator(&a, &b, None, &opts);
        assert!(rep.converged);
        let scale = rep
            .energy_history
            .iter()
            .fold(0.0f64, |m, e| m.max(e.abs()));
        for w in rep.energy_history.windows(2) {
            assert!(
                w[1] <= w[0] + 10.0 * f64::EPSILON * scale,
                "{} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn dense_operator_cg() {
        let d = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let (x, rep) = cg_operator(&d, &[1.0, 2.0], None, &CgOptions::with_tol(1e-14));
        assert!(rep.converged);
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-14 && (x[1] - 7.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn zero_mean_projection() {
        let areas = [0.25, 0.25, 0.5];
        let c = project_zero_mean(&[2.0, 2.0, 2.0], &areas);
        assert!(c.iter().all(|v| v.abs() < 1e-15));
        let z = [1.0, 1.0, -1.0];
        assert_eq!(project_zero_mean(&z, &areas), z.to_vec());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
        assert!(dot(&project_zero_mean(&p, &areas), &areas).abs() < 1e-13);
    }

    #[test]
    fn saddle_without_pressure_reduces_to_cg() {
        let (a, d) = random_spd(6, 3);
        let b = CsrMatrix::zeros(0, 6);
        let f: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let opts = SaddleOptions::new(1e-12, 1e-13, PressureConstraint::None);
        let (u, p, rep) = solve_saddle(&a, &b, &f, &[], &opts).unwrap();
        assert!(p.is_empty() && rep.converged);
        let exact = d.cholesky().unwrap().solve(&nalgebra::DVector::from_vec(f));
        for i in 0..6 {
            assert!((u[i] - exact[i]).abs() < 1e-10);
        }
    }

    fn dense_saddle(a: &DMatrix<f64>, b: &DMatrix<f64>, f: &[f64], g: &[f64]) -> Vec<f64> {
        let (n, m) = (a.nrows(), b.nrows());
        let mut k = DMatrix::zeros(n + m, n + m);
        k.view_mut((0, 0), (n, n)).copy_from(a);
        k.view_mut((n, 0), (m, n)).copy_from(b);
        k.view_mut((0, n), (n, m)).copy_from(&b.transpose());
        let rhs = nalgebra::DVector::from_iterator(n + m, f.iter().chain(g).copied());
        k.lu().solve(&rhs).unwrap().iter().copied().collect()
    }

    #[test]
    fn saddle_two_by_two_matches_dense() {
        let a =
            SparseSym::assemble(2, &[(0, 0, 2.0), (1, 1, 3.0), (0, 1, 0.5), (1, 0, 0.5)]).unwrap();
        let b = CsrMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, -1.0)]).unwrap();
        let (f, g) = ([1.0, 2.0], [0.5]);
        let opts = SaddleOptions::new(1e-13, 1e-14, PressureConstraint::None);
        let (u, p, rep) = solve_saddle(&a, &b, &f, &g, &opts).unwrap();
        assert!(rep.converged);
        let exact = dense_saddle(&a.csr().to_dense(), &b.to_dense(), &f, &g);
        assert!((u[0] - exact[0]).abs() < 1e-12 && (u[1] - exact[1]).abs() < 1e-12);
        assert!((p[0] - exact[2]).abs() < 1e-12);
    }

    #[test]
    fn saddle_with_zero_mean_constraint_matches_bordered_dense_solve() {
        let (a, ad) = random_spd(12, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let mut t = Vec::new();
        for r in 0..4 {
            for c in 0..12 {
                if rng.random_bool(0.5) {
                    t.push((r, c, rng.random_range(-1.0..1.0)));
                }
            }
        }
        let b = CsrMatrix::from_triplets(4, 12, &t).unwrap();
        let w = vec![0.1, 0.2, 0.3, 0.4];
        let f: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = vec![0.0; 4];
        for inner in [InnerSolver::Cholesky, InnerSolver::Cg] {
            let opts = SaddleOptions::new(
                1e-12,
                1e-14,
                PressureConstraint::WeightedZeroMean(w.clone()),
            )
            .with_inner_solver(inner);
            let (u, p, rep) = solve_saddle(&a, &b, &f, &g, &opts).unwrap();
            assert!(rep.converged, "{rep:?}");
            assert!(dot(&p, &w).abs() < 1e-12);

            // oracle: [A B^T 0; B 0 w; 0 w^T 0] with a multiplier for the constraint
            let (n, m) = (12, 4);
            let mut k = DMatrix::zeros(n + m + 1, n + m + 1);
            k.view_mut((0, 0), (n, n)).copy_from(&ad);
            let bd = b.to_dense();
            k.view_mut((n, 0), (m, n)).copy_from(&bd);
            k.view_mut((0, n), (n, m)).copy_from(&bd.transpose());
            for i in 0..m {
                k[(n + i, n + m)] = w[i];
                k[(n + m, n + i)] = w[i];
            }
            let rhs = nalgebra::DVector::from_iterator(
                n + m + 1,
                f.iter().copied().chain(g.iter().copied()).chain([0.0]),
            );
            let sol = k.lu().solve(&rhs).unwrap();
            for i in 0..n {
                assert!((u[i] - sol[i]).abs() < 1e-9, "u[{i}]");
            }
            for i in 0..m {
                assert!((p[i] - sol[n + i]).abs() < 1e-9, "p[{i}]");
            }
            assert!(rep.velocity_residual < 1e-10 && rep.pressure_residual < 1e-10);
        }
    }

    #[test]
    fn sparse_cholesky_matches_dense() {
        let (a, d) = random_spd(60, 3);
        let b: Vec<f64> = (0..60).map(|i| (0.3 * i as f64).cos()).collect();
        let x = SparseCholesky::factor(&a).unwrap().solve(&b);
        let exact = d.cholesky().unwrap().solve(&nalgebra::DVector::from_vec(b));
        for i in 0..60 {
            assert!((x[i] - exact[i]).abs() < 1e-12);
        }
        assert!(SparseCholesky::factor(
            &SparseSym::assemble(2, &[(0, 0, 1.0), (1, 1, -2.0)]).unwrap()
        )
        .is_err());
    }

    #[test]
    fn scaled_solvers_match_unscaled() {
        let (a, d) = random_spd(40, 8);
        let b: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        let (x, rep) = cg_scaled(&a, &b, 1e-14, 2000).unwrap();
        assert!(rep.converged);
        let exact = d
            .clone()
            .cholesky()
            .unwrap()
            .solve(&nalgebra::DVector::from_vec(b.clone()));
        for i in 0..40 {
            assert!((x[i] - exact[i]).abs() < 1e-10);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(81);
        let t: Vec<_> = (0..30)
            .map(|_| {
                (
                    rng.random_range(0..5),
                    rng.random_range(0..40),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        let bm = CsrMatrix::from_triplets(5, 40, &t).unwrap();
        let w = vec![0.5, 0.1, 0.2, 0.15, 0.05];
        let g = vec![0.0; 5];
        let opts = SaddleOptions::new(
            1e-13,
            1e-15,
            PressureConstraint::WeightedZeroMean(w.clone()),
        );
        let (u1, p1, r1) = solve_saddle(&a, &bm, &b, &g, &opts).unwrap();
        let (u2, p2, r2) = solve_saddle_scaled(&a, &bm, &b, &g, &w, &opts).unwrap();
        assert!(
            r2.velocity_residual < 1e-10 && r2.pressure_residual < 1e-10,
            "{r1:?} {r2:?}"
        );
        assert!(dot(&p2, &w).abs() < 1e-12);
        for i in 0..40 {
            assert!((u1[i] - u2[i]).abs() < 1e-9);
        }
        for i in 0..5 {
            assert!((p1[i] - p2[i]).abs() < 1e-9);
        }
        assert!(cg_scaled(
            &SparseSym::assemble(1, &[(0, 0, -1.0)]).unwrap(),
            &[1.0],
            1e-8,
            5
        )
        .is_err());
    }

    #[test]
    fn saddle_dimension_mismatch() {
        let (a, _) = random_spd(3, 1);
        let b = CsrMatrix::zeros(1, 4);
        let opts = SaddleOptions::new(1e-10, 1e-12, PressureConstraint::None);
        assert!(solve_saddle(&a, &b, &[0.0; 3], &[0.0], &opts).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn cg_matches_cholesky(n in 1usize..200, seed in any::<u64>()) {
            let (a, d) = random_spd(n, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (x, rep) = cg(&a, &b, 1e-14, 50 * n);
            prop_assert!(rep.converged);
            let exact = d.cholesky().unwrap().solve(&nalgebra::DVector::from_vec(b));
            let scale = exact.amax().max(1.0);
            for i in 0..n {
                prop_assert!((x[i] - exact[i]).abs() <= 1e-10 * scale);
            }
        }

        #[test]
        fn matvec_matches_dense(nr in 1usize..50, nc in 1usize..50, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t: Vec<_> = (0..rng.random_range(0..200))
                .map(|_| (rng.random_range(0..nr), rng.random_range(0..nc), rng.random_range(-1.0..1.0)))
                .collect();
            let m = CsrMatrix::from_triplets(nr, nc, &t).unwrap();
            let mut dense = DMatrix::<f64>::zeros(nr, nc);
            for &(r, c, v) in &t {
                dense[(r, c)] += v;
            }
            let x: Vec<f64> = (0..nc).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = m.matvec(&x);
            let yd = &dense * nalgebra::DVector::from_vec(x);
            for i in 0..nr {
                prop_assert!((y[i] - yd[i]).abs() < 1e-12);
            }
        }
    }
}
