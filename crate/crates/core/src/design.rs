//! Design matrices and encoding.
//!
//! Two kinds are available. The dense Gaussian matrix has i.i.d. `N(0, 1/n)`
//! entries; row `i` is drawn from stream `i` of the matrix seed, so generation
//! is deterministic regardless of how rows are scheduled across threads. The
//! implicit kind selects `n` rows (never row 0) and `N` columns of a
//! `K × K` Sylvester Hadamard matrix, flips the sign of each selected row at
//! random and scales by `1/√n`, so entries are `±1/√n` with the same second
//! moment as the Gaussian ensemble. It is only ever touched through
//! [`DesignMatrix::apply`] and [`DesignMatrix::apply_transpose`].
//!
//! Dense entries are drawn in double precision and stored as `f32`, which
//! halves the memory traffic of every product; all arithmetic on them is
//! done in `f64`.
//!
//! Matrix–vector products parallelise over disjoint output ranges and sum
//! each output in a fixed order, so results are bit-identical for any thread
//! count.

use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codebook::BetaVector;
use crate::hadamard::fwht;
use crate::rng::{self, fill_gaussian};
use crate::{CodeParams, Error, Result};

/// Default cap on dense matrix storage: 4 GiB.
pub const DEFAULT_MEMORY_CAP: u64 = 4 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    DenseGaussian,
    Hadamard,
}

impl MatrixKind {
    /// Bytes held by a matrix of this kind for an `n × N` design.
    pub fn storage_bytes(self, rows: usize, cols: usize) -> u64 {
        match self {
            MatrixKind::DenseGaussian => rows as u64 * cols as u64 * 4,
            MatrixKind::Hadamard => (rows as u64 + cols as u64) * 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

#[derive(Debug, Clone)]
pub struct HadamardOperator {
    rows: usize,
    cols: usize,
    order: usize,
    row_index: Vec<usize>,
    row_sign: Vec<f64>,
    col_index: Vec<usize>,
    scale: f64,
}

#[derive(Debug, Clone)]
pub enum DesignMatrix {
    Dense(DenseMatrix),
    Hadamard(HadamardOperator),
}

const COL_BLOCK: usize = 2048;

impl DenseMatrix {
    pub fn sample(rows: usize, cols: usize, seed: u64) -> Self {
        let mut data = vec![0.0f32; rows * cols];
        let scale = 1.0 / (rows as f64).sqrt();
        data.par_chunks_mut(cols.max(1))
            .enumerate()
            .for_each_init(
                || vec![0.0f64; cols],
                |buf, (i, row)| {
                    fill_gaussian(&mut rng::stream(seed, i as u64), buf, scale);
                    for (dst, src) in row.iter_mut().zip(buf.iter()) {
                        *dst = *src as f32;
                    }
                },
            );
        Self { rows, cols, data }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        out.par_iter_mut()
            .enumerate()
            .for_each(|(i, o)| *o = dot(self.row(i), v));
    }

    fn apply_transpose(&self, u: &[f64], out: &mut [f64]) {
        out.par_chunks_mut(COL_BLOCK)
            .enumerate()
            .for_each(|(b, chunk)| {
                let c0 = b * COL_BLOCK;
                let c1 = c0 + chunk.len();
                chunk.fill(0.0);
                for (i, &ui) in u.iter().enumerate() {
                    let row = &self.row(i)[c0..c1];
                    for (o, &a) in chunk.iter_mut().zip(row) {
                        *o += ui * a as f64;
                    }
                }
            });
    }
}

/// Dot product with four interleaved accumulators; fixed summation order.
fn dot(a: &[f32], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(&x, y)| x as f64 * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] as f64 * y[0];
        acc[1] += x[1] as f64 * y[1];
        acc[2] += x[2] as f64 * y[2];
        acc[3] += x[3] as f64 * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl HadamardOperator {
    pub fn sample(rows: usize, cols: usize, seed: u64) -> Self {
        let order = cols.max(rows + 1).next_power_of_two();
        let mut r = rng::stream(seed, 0);
        // Rows from 1..order (row 0 is all ones), columns from 0..order.
        let mut row_pool: Vec<usize> = (1..order).collect();
        partial_shuffle(&mut row_pool, rows, &mut r);
        row_pool.truncate(rows);
        let mut col_pool: Vec<usize> = (0..order).collect();
        partial_shuffle(&mut col_pool, cols, &mut r);
        col_pool.truncate(cols);
        let row_sign = (0..rows)
            .map(|_| if r.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        Self {
            rows,
            cols,
            order,
            row_index: row_pool,
            row_sign,
            col_index: col_pool,
            scale: 1.0 / (rows as f64).sqrt(),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let mut w = vec![0.0; self.order];
        for (&c, &x) in self.col_index.iter().zip(v) {
            w[c] = x;
        }
        fwht(&mut w);
        for ((o, &r), &s) in out.iter_mut().zip(&self.row_index).zip(&self.row_sign) {
            *o = s * self.scale * w[r];
        }
    }

    fn apply_transpose(&self, u: &[f64], out: &mut [f64]) {
        let mut w = vec![0.0; self.order];
        for ((&r, &s), &x) in self.row_index.iter().zip(&self.row_sign).zip(u) {
            w[r] = s * x;
        }
        fwht(&mut w);
        for (o, &c) in out.iter_mut().zip(&self.col_index) {
            *o = self.scale * w[c];
        }
    }
}

fn partial_shuffle(pool: &mut [usize], k: usize, r: &mut rng::StreamRng) {
    for i in 0..k.min(pool.len()) {
        let j = r.random_range(i..pool.len());
        pool.swap(i, j);
    }
}

impl DesignMatrix {
    /// Draws an `n × ML` design for `params`. Dense matrices larger than
    /// `memory_cap` bytes are refused.
    pub fn sample(params: &CodeParams, kind: MatrixKind, seed: u64, memory_cap: u64) -> Result<Self> {
        Self::sample_dims(params.n(), params.columns(), kind, seed, memory_cap)
    }

    pub fn sample_dims(
        rows: usize,
        cols: usize,
        kind: MatrixKind,
        seed: u64,
        memory_cap: u64,
    ) -> Result<Self> {
        let required = kind.storage_bytes(rows, cols);
        if required > memory_cap {
            return Err(Error::MemoryCap {
                required,
                cap: memory_cap,
            });
        }
        Ok(match kind {
            MatrixKind::DenseGaussian => DesignMatrix::Dense(DenseMatrix::sample(rows, cols, seed)),
            MatrixKind::Hadamard => DesignMatrix::Hadamard(HadamardOperator::sample(rows, cols, seed)),
        })
    }

    pub fn kind(&self) -> MatrixKind {
        match self {
            DesignMatrix::Dense(_) => MatrixKind::DenseGaussian,
            DesignMatrix::Hadamard(_) => MatrixKind::Hadamard,
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            DesignMatrix::Dense(d) => d.rows,
            DesignMatrix::Hadamard(h) => h.rows,
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            DesignMatrix::Dense(d) => d.cols,
            DesignMatrix::Hadamard(h) => h.cols,
        }
    }

    /// `out = A v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("apply input", self.cols(), v.len())?;
        check_len("apply output", self.rows(), out.len())?;
        match self {
            DesignMatrix::Dense(d) => d.apply(v, out),
            DesignMatrix::Hadamard(h) => h.apply(v, out),
        }
        Ok(())
    }

    /// `out = Aᵀ u`.
    pub fn apply_transpose(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("apply_transpose input", self.rows(), u.len())?;
        check_len("apply_transpose output", self.cols(), out.len())?;
        match self {
            DesignMatrix::Dense(d) => d.apply_transpose(u, out),
            DesignMatrix::Hadamard(h) => h.apply_transpose(u, out),
        }
        Ok(())
    }

    /// Row-major dense copy of the operator, built column by column from unit
    /// vectors for the implicit kind.
    pub fn materialize(&self) -> Vec<f64> {
        match self {
            DesignMatrix::Dense(d) => d.data.iter().map(|&v| v as f64).collect(),
            DesignMatrix::Hadamard(h) => {
                let (n, big_n) = (h.rows, h.cols);
                let mut out = vec![0.0; n * big_n];
                let mut e = vec![0.0; big_n];
                let mut col = vec![0.0; n];
                for j in 0..big_n {
                    e[j] = 1.0;
                    h.apply(&e, &mut col);
                    e[j] = 0.0;
                    for (i, v) in col.iter().enumerate() {
                        out[i * big_n + j] = *v;
                    }
                }
                out
            }
        }
    }
}

fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}

/// Codeword `A β`.
pub fn encode(a: &DesignMatrix, beta: &BetaVector) -> Result<Vec<f64>> {
    let mut out = vec![0.0; a.rows()];
    a.apply(beta.values(), &mut out)?;
    Ok(out)
}
