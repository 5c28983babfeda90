//! Compressed sparse row matrices and Krylov solvers.
//!
//! All reductions run sequentially in index order, so results are
//! bitwise reproducible.

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tolerance: f64,
    /// `None` means `10 n`.
    pub max_iterations: Option<usize>,
    pub jacobi: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tolerance: 1e-12, max_iterations: None, jacobi: true }
    }
}

impl SolverOptions {
    fn max_iter(&self, n: usize) -> usize {
        self.max_iterations.unwrap_or(10 * n.max(1))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl SparseMatrix {
    /// Sums duplicate entries and sorts each row by column.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        if let Some(&(i, j, _)) = entries.iter().find(|&&(i, j, _)| i >= n || j >= n) {
            return Err(invalid(format!("triplet ({i}, {j}) outside a {n}x{n} matrix")));
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));

        let mut row_offsets = vec![0usize; n + 1];
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_indices.push(j);
                values.push(v);
                row_offsets[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_offsets[i + 1] += row_offsets[i];
        }
        Ok(Self { n, row_offsets, col_indices, values })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let r = self.row_offsets[i]..self.row_offsets[i + 1];
            *yi = self.col_indices[r.clone()]
                .iter()
                .zip(&self.values[r])
                .map(|(&j, &v)| v * x[j])
                .sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `x^T A y`.
    pub fn quadratic_form(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.mul_vec(y))
    }

    /// `a * self + b * other`; both must share dimension.
    pub fn linear_combination(&self, a: f64, other: &SparseMatrix, b: f64) -> SparseMatrix {
        assert_eq!(self.n, other.n);
        let triplets = (0..self.n).flat_map(|i| {
            self.row(i)
                .map(move |(j, v)| (i, j, a * v))
                .chain(other.row(i).map(move |(j, v)| (i, j, b * v)))
        });
        SparseMatrix::from_triplets(self.n, triplets.collect::<Vec<_>>()).expect("indices in range")
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    /// Replaces row `i` by the unit row `e_i`.
    pub fn set_identity_row(&mut self, i: usize) {
        for k in self.row_offsets[i]..self.row_offsets[i + 1] {
            self.values[k] = if self.col_indices[k] == i { 1.0 } else { 0.0 };
        }
    }

    fn preconditioner(&self, jacobi: bool) -> Vec<f64> {
        self.diagonal()
            .into_iter()
            .map(|d| if jacobi && d != 0.0 { 1.0 / d } else { 1.0 })
            .collect()
    }
}

fn relative(r: f64, bnorm: f64) -> f64 {
    if bnorm > 0.0 {
        r / bnorm
    } else {
        r
    }
}

/// Preconditioned conjugate gradients for symmetric positive definite `a`.
///
/// Starts from `x0` when given, else from zero. Convergence is declared on
/// the true relative residual `|b - A x| / |b|`.
pub fn cg_solve(a: &SparseMatrix, b: &[f64], x0: Option<&[f64]>, opts: &SolverOptions) -> (Vec<f64>, SolveReport) {
    let n = a.dim();
    let bnorm = norm(b);
    let minv = a.preconditioner(opts.jacobi);
    let mut x = x0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    let mut ax = a.mul_vec(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut res = relative(norm(&r), bnorm);
    if res <= opts.tolerance {
        return (x, SolveReport { iterations: 0, relative_residual: res, converged: true });
    }
    let mut z: Vec<f64> = r.iter().zip(&minv).map(|(ri, mi)| ri * mi).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let max_iter = opts.max_iter(n);
    let mut it = 0;
    while it < max_iter {
        it += 1;
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = relative(norm(&r), bnorm);
        if res <= opts.tolerance {
            // confirm against the true residual to avoid drift in the recurrence
            a.mul_vec_into(&x, &mut ax);
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
            res = relative(norm(&r), bnorm);
            if res <= opts.tolerance {
                return (x, SolveReport { iterations: it, relative_residual: res, converged: true });
            }
        }
        for i in 0..n {
            z[i] = r[i] * minv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    (x, SolveReport { iterations: it, relative_residual: res, converged: false })
}

/// Jacobi-preconditioned BiCGStab for general nonsingular `a`.
pub fn bicgstab_solve(a: &SparseMatrix, b: &[f64], x0: Option<&[f64]>, opts: &SolverOptions) -> (Vec<f64>, SolveReport) {
    let n = a.dim();
    let bnorm = norm(b);
    let minv = a.preconditioner(opts.jacobi);
    let mut x = x0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    let mut tmp = a.mul_vec(&x);
    let mut r: Vec<f64> = b.iter().zip(&tmp).map(|(bi, ai)| bi - ai).collect();
    let mut res = relative(norm(&r), bnorm);
    if res <= opts.tolerance {
        return (x, SolveReport { iterations: 0, relative_residual: res, converged: true });
    }
    let max_iter = opts.max_iter(n);
    let mut it = 0;
    // outer loop restarts with a fresh shadow residual after breakdown
    'restart: while it < max_iter {
        let r_hat = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut s = vec![0.0; n];
        let mut zz = vec![0.0; n];
        let mut t = vec![0.0; n];
        while it < max_iter {
            it += 1;
            let rho_new = dot(&r_hat, &r);
            if rho_new == 0.0 || !rho_new.is_finite() {
                continue 'restart;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
                y[i] = p[i] * minv[i];
            }
            a.mul_vec_into(&y, &mut v);
            let rv = dot(&r_hat, &v);
            if rv == 0.0 || !rv.is_finite() {
                continue 'restart;
            }
            alpha = rho / rv;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            if relative(norm(&s), bnorm) <= opts.tolerance {
                for i in 0..n {
                    x[i] += alpha * y[i];
                }
            } else {
                for i in 0..n {
                    zz[i] = s[i] * minv[i];
                }
                a.mul_vec_into(&zz, &mut t);
                let tt = dot(&t, &t);
                omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
                for i in 0..n {
                    x[i] += alpha * y[i] + omega * zz[i];
                    r[i] = s[i] - omega * t[i];
                }
                if omega == 0.0 {
                    continue 'restart;
                }
                if relative(norm(&r), bnorm) > opts.tolerance {
                    continue;
                }
            }
            a.mul_vec_into(&x, &mut tmp);
            for i in 0..n {
                r[i] = b[i] - tmp[i];
            }
            res = relative(norm(&r), bnorm);
            if res <= opts.tolerance {
                return (x, SolveReport { iterations: it, relative_residual: res, converged: true });
            }
            continue 'restart;
        }
    }
    a.mul_vec_into(&x, &mut tmp);
    for i in 0..n {
        r[i] = b[i] - tmp[i];
    }
    res = relative(norm(&r), bnorm);
    (x, SolveReport { iterations: it, relative_residual: res, converged: res <= opts.tolerance })
}
