//! Sparse nonsymmetric linear solves.
//!
//! The direct path factors with faer's sparse LU, run sequentially. The
//! iterative path is Jacobi-preconditioned BiCGSTAB.

use std::sync::Once;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Col, Par};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    DirectSparse,
    Iterative,
}

/// Square sparse matrix in coordinate form.
#[derive(Debug, Clone, Default)]
pub struct SparseMatrix {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn new(n: usize) -> Self {
        SparseMatrix {
            n,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(n: usize, nnz: usize) -> Self {
        SparseMatrix {
            n,
            entries: Vec::with_capacity(nnz),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n);
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    /// Merges duplicates and returns compressed rows `(cols, values)` per row.
    fn compress(&self) -> Vec<Vec<(usize, f64)>> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n];
        for &(r, c, v) in &self.entries {
            rows[r].push((c, v));
        }
        for row in &mut rows {
            row.sort_unstable_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(c, v) in row.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            *row = merged;
        }
        rows
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    fn inf_norm(&self) -> f64 {
        let mut sums = vec![0.0f64; self.n];
        for &(r, _, v) in &self.entries {
            sums[r] += v.abs();
        }
        sums.into_iter().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolveSettings {
    pub kind: SolverKind,
    /// Relative residual tolerance `|Ax - b| / |b|` (sup-norms).
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for LinearSolveSettings {
    fn default() -> Self {
        LinearSolveSettings {
            kind: SolverKind::DirectSparse,
            tol: 1e-10,
            max_iters: 2000,
        }
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Lower bound on the sup-norm condition number seen through one solve.
fn condition_lower_bound(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let bn = sup(b);
    if bn == 0.0 {
        return f64::INFINITY;
    }
    a.inf_norm() * sup(x) / bn
}

pub fn solve(a: &SparseMatrix, b: &[f64], settings: &LinearSolveSettings) -> Result<Vec<f64>> {
    if b.len() != a.n {
        return Err(Error::InvalidParameter(
            "right-hand side length mismatch".into(),
        ));
    }
    if a.n == 0 {
        return Ok(Vec::new());
    }
    if sup(b) == 0.0 {
        return Ok(vec![0.0; a.n]);
    }
    let x = match settings.kind {
        SolverKind::DirectSparse => solve_direct(a, b)?,
        SolverKind::Iterative => bicgstab(a, b, settings)?,
    };
    let r = a.mul_vec(&x);
    let rel = sup(&r.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>()) / sup(b);
    if !rel.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem {
            condition: f64::INFINITY,
        });
    }
    if rel > settings.tol.max(1e-13) {
        return Err(Error::SingularSystem {
            condition: condition_lower_bound(a, &x, b),
        });
    }
    Ok(x)
}

fn solve_direct(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    static SEQUENTIAL: Once = Once::new();
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(Par::Seq));

    let rows = a.compress();
    let triplets: Vec<Triplet<usize, usize, f64>> = rows
        .iter()
        .enumerate()
        .flat_map(|(r, row)| row.iter().map(move |&(c, v)| Triplet::new(r, c, v)))
        .collect();
    let m =
        SparseColMat::<usize, f64>::try_new_from_triplets(a.n, a.n, &triplets).map_err(|_| {
            Error::SingularSystem {
                condition: f64::INFINITY,
            }
        })?;
    let lu = m.sp_lu().map_err(|_| Error::SingularSystem {
        condition: f64::INFINITY,
    })?;
    let rhs = Col::<f64>::from_fn(a.n, |i| b[i]);
    let x = lu.solve(&rhs);
    Ok((0..a.n).map(|i| x[i]).collect())
}

fn bicgstab(a: &SparseMatrix, b: &[f64], settings: &LinearSolveSettings) -> Result<Vec<f64>> {
    let n = a.n;
    let rows = a.compress();
    let mut diag = vec![1.0; n];
    for (r, row) in rows.iter().enumerate() {
        if let Some(&(_, v)) = row.iter().find(|e| e.0 == r) {
            if v != 0.0 {
                diag[r] = v;
            }
        }
    }
    let matvec = |x: &[f64]| -> Vec<f64> {
        rows.iter()
            .map(|row| row.iter().map(|&(c, v)| v * x[c]).sum())
            .collect()
    };
    let precond = |x: &[f64]| -> Vec<f64> { x.iter().zip(&diag).map(|(v, d)| v / d).collect() };
    let dot = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).map(|(p, q)| p * q).sum() };
    let norm2 = |x: &[f64]| dot(x, x).sqrt();

    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let target = settings.tol * 0.1 * bnorm;
    for it in 0..settings.max_iters {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            return Err(Error::LinearSolverStalled {
                iterations: it,
                residual: norm2(&r) / bnorm,
            });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let y = precond(&p);
        v = matvec(&y);
        alpha = rho / dot(&r_hat, &v);
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        if norm2(&s) <= target {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok(x);
        }
        let z = precond(&s);
        let t = matvec(&z);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm2(&r) <= target {
            return Ok(x);
        }
        if !omega.is_finite() || omega == 0.0 {
            break;
        }
    }
    Err(Error::LinearSolverStalled {
        iterations: settings.max_iters,
        residual: norm2(&r) / bnorm,
    })
}
