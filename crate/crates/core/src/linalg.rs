//! Dense row-major matrices and the Cholesky machinery the GP code runs on.
//!
//! Everything here is `f64`; finite-difference gradient checks downstream
//! are not attainable in single precision.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multiples of the mean diagonal tried, in order, by [`cholesky_jittered`].
pub const DEFAULT_JITTER_SCHEDULE: [f64; 4] = [0.0, 1e-8, 1e-6, 1e-4];

const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(
                format!("{} entries for {rows}x{cols}", rows * cols),
                data.len(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    /// A single column vector.
    pub fn column(values: &[f64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    pub fn add_diag(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.rows.min(self.cols));
        for (i, &v) in values.iter().enumerate() {
            self[(i, i)] += v;
        }
    }

    pub fn add_scalar_diag(&mut self, v: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += v;
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { data, ..*self })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { data, ..*self })
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dims(
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        Ok(())
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::dims(
                format!("{} rows on the right operand", self.cols),
                other.rows,
            ));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a != 0.0 {
                    axpy(a, other.row(k), out_row);
                }
            }
        }
        Ok(out)
    }

    /// `self * v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.cols != v.len() {
            return Err(Error::dims(self.cols, v.len()));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `selfᵀ * v`.
    pub fn tr_matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.rows != v.len() {
            return Err(Error::dims(self.rows, v.len()));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            axpy(vi, self.row(i), &mut out);
        }
        Ok(out)
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::dims(self.cols, other.cols));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    /// Rows `indices` in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Rows `start..end`.
    pub fn row_range(&self, start: usize, end: usize) -> Self {
        Self {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    /// Largest `|A[i,j] - A[j,i]|` relative to the largest magnitude entry.
    fn check_symmetric(&self) -> Result<()> {
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..self.rows {
            for j in 0..i {
                let gap = (self[(i, j)] - self[(j, i)]).abs();
                if gap > SYMMETRY_TOL * scale {
                    return Err(Error::NotSymmetric { row: i, col: j, gap });
                }
            }
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Inner product with independent partial sums so the loop vectorizes.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// `y += a * x`.
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Lower-triangular factor `L` with `L Lᵀ = A + jitter_used·I`.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    l: DenseMatrix,
    jitter_used: f64,
}

impl CholeskyFactor {
    pub fn l(&self) -> &DenseMatrix {
        &self.l
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// Solves `L z = b` in place.
    pub fn forward_solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        for i in 0..n {
            let row = self.l.row(i);
            let s = b[i] - dot(&row[..i], &b[..i]);
            b[i] = s / row[i];
        }
    }

    /// Solves `Lᵀ z = b` in place.
    pub fn backward_solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        for i in (0..n).rev() {
            b[i] /= self.l[(i, i)];
            let bi = b[i];
            let row = self.l.row(i);
            // column i of Lᵀ lives in row i of L
            for k in 0..i {
                b[k] -= row[k] * bi;
            }
        }
    }

    /// `(L Lᵀ)⁻¹ b`.
    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim() {
            return Err(Error::dims(self.dim(), b.len()));
        }
        let mut z = b.to_vec();
        self.forward_solve_in_place(&mut z);
        self.backward_solve_in_place(&mut z);
        Ok(z)
    }

    /// `L⁻¹ B` for a matrix right-hand side.
    pub fn forward_solve(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.dim();
        if b.rows() != n {
            return Err(Error::dims(n, b.rows()));
        }
        let k = b.cols();
        let mut z = b.clone();
        for i in 0..n {
            let lrow = self.l.row(i);
            for (j, &lij) in lrow[..i].iter().enumerate() {
                if lij != 0.0 {
                    let (head, tail) = z.data.split_at_mut(i * k);
                    axpy(-lij, &head[j * k..(j + 1) * k], &mut tail[..k]);
                }
            }
            let inv = 1.0 / lrow[i];
            z.row_mut(i).iter_mut().for_each(|v| *v *= inv);
        }
        Ok(z)
    }

    /// `L⁻ᵀ B` for a matrix right-hand side.
    pub fn backward_solve(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.dim();
        if b.rows() != n {
            return Err(Error::dims(n, b.rows()));
        }
        let k = b.cols();
        let mut z = b.clone();
        for i in (0..n).rev() {
            let inv = 1.0 / self.l[(i, i)];
            z.row_mut(i).iter_mut().for_each(|v| *v *= inv);
            let lrow = self.l.row(i);
            let (head, tail) = z.data.split_at_mut(i * k);
            let zi = &tail[..k];
            for (j, &lij) in lrow[..i].iter().enumerate() {
                if lij != 0.0 {
                    axpy(-lij, zi, &mut head[j * k..(j + 1) * k]);
                }
            }
        }
        Ok(z)
    }

    /// Dense `(L Lᵀ)⁻¹`.
    pub fn inverse(&self) -> DenseMatrix {
        let n = self.dim();
        // Row j of `u` holds column j of L⁻¹ (entries j..n nonzero).
        let mut u = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let x = u.row_mut(j);
            for i in j..n {
                let lrow = self.l.row(i);
                let rhs = if i == j { 1.0 } else { 0.0 };
                let s = rhs - dot(&lrow[j..i], &x[j..i]);
                x[i] = s / lrow[i];
            }
        }
        let mut w = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                // (L⁻ᵀ L⁻¹)_{ij} = Σ_k L⁻¹_{ki} L⁻¹_{kj}, k ≥ i
                let v = dot(&u.row(i)[i..], &u.row(j)[i..]);
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
        w
    }
}

fn try_factor(a: &DenseMatrix, jitter: f64) -> Option<DenseMatrix> {
    let n = a.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let (li, lj) = if i == j {
                let r = l.row(i);
                (r, r)
            } else {
                (l.row(i), l.row(j))
            };
            let s = a[(i, j)] - dot(&li[..j], &lj[..j]);
            if i == j {
                let d = s + jitter;
                if !(d > 0.0) || !d.is_finite() {
                    return None;
                }
                l[(i, i)] = d.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Cholesky factorization trying each absolute jitter in `schedule` in turn.
pub fn cholesky(a: &DenseMatrix, schedule: &[f64]) -> Result<CholeskyFactor> {
    if !a.is_square() {
        return Err(Error::dims("square matrix", format!("{}x{}", a.rows(), a.cols())));
    }
    a.check_symmetric()?;
    for &jitter in schedule {
        if let Some(l) = try_factor(a, jitter) {
            return Ok(CholeskyFactor {
                l,
                jitter_used: jitter,
            });
        }
    }
    Err(Error::NotPositiveDefinite {
        max_jitter: schedule.iter().copied().fold(0.0, f64::max),
    })
}

/// [`cholesky`] with the default schedule scaled by the mean diagonal of `a`.
pub fn cholesky_jittered(a: &DenseMatrix) -> Result<CholeskyFactor> {
    let n = a.rows().max(1);
    let mean_diag = a.diag().iter().sum::<f64>() / n as f64;
    let scale = if mean_diag > 0.0 && mean_diag.is_finite() {
        mean_diag
    } else {
        1.0
    };
    let schedule = DEFAULT_JITTER_SCHEDULE.map(|j| j * scale);
    cholesky(a, &schedule)
}

/// Solves `(L Lᵀ) X = B` by a forward then a backward triangular solve.
pub fn solve_psd(f: &CholeskyFactor, b: &DenseMatrix) -> Result<DenseMatrix> {
    let z = f.forward_solve(b)?;
    f.backward_solve(&z)
}

/// `log |L Lᵀ|`.
pub fn log_det(f: &CholeskyFactor) -> f64 {
    2.0 * f.l.diag().iter().map(|d| d.ln()).sum::<f64>()
}
