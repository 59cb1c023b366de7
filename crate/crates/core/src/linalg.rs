//! Dense row-major f64 matrices and the multiply kernel shared by the
//! network forward/backward passes.
//!
//! The kernel accumulates every output element over the inner dimension in
//! strictly ascending order, one fused term per step. Register tiling only
//! changes which elements are computed together, never the per-element
//! operation sequence, so multiplying a batch of rows is bit-identical to
//! multiplying the rows one at a time. The batching equivalence guarantees
//! elsewhere in the crate rest on this property.

/// Row-major dense matrix of f64.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Wrap an existing row-major buffer.
    ///
    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "buffer length {} does not match {}x{}",
            data.len(),
            rows,
            cols
        );
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    /// Copy of the row range `[start, end)` as a new matrix.
    pub fn rows_copy(&self, start: usize, end: usize) -> Matrix {
        assert!(start <= end && end <= self.rows);
        Matrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// `self * other`, tiled. See the module docs for the ordering guarantee.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Matrix::zeros(self.rows, other.cols);
        matmul_into(
            &self.data,
            self.rows,
            self.cols,
            &other.data,
            other.cols,
            &mut out.data,
        );
        out
    }
}

/// Rows per register tile.
const MR: usize = 8;
/// Columns per register tile.
const NR: usize = 16;

/// `out = a (m x k_dim) * b (k_dim x n)`, all row-major.
pub fn matmul_into(a: &[f64], m: usize, k_dim: usize, b: &[f64], n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k_dim);
    debug_assert_eq!(b.len(), k_dim * n);
    debug_assert_eq!(out.len(), m * n);

    let mut i = 0;
    while i < m {
        let rows = (m - i).min(MR);
        let mut j = 0;
        while j < n {
            let cols = (n - j).min(NR);
            if rows == MR && cols == NR {
                tile_full(a, i, k_dim, b, n, j, out);
            } else if rows == 1 && cols == NR {
                tile_single_row(a, i, k_dim, b, n, j, out);
            } else {
                tile_any(a, i, rows, k_dim, b, n, j, cols, out);
            }
            j += cols;
        }
        i += rows;
    }
}

/// Full tile: MR rows share each loaded slice of b, cutting weight traffic
/// MR-fold relative to row-at-a-time multiplication.
#[inline]
fn tile_full(a: &[f64], i: usize, k_dim: usize, b: &[f64], n: usize, j: usize, out: &mut [f64]) {
    let mut acc = [[0.0f64; NR]; MR];
    for k in 0..k_dim {
        let w: &[f64; NR] = b[k * n + j..k * n + j + NR].try_into().unwrap();
        for (r, accr) in acc.iter_mut().enumerate() {
            let av = a[(i + r) * k_dim + k];
            for c in 0..NR {
                accr[c] += av * w[c];
            }
        }
    }
    for (r, accr) in acc.iter().enumerate() {
        out[(i + r) * n + j..(i + r) * n + j + NR].copy_from_slice(accr);
    }
}

/// Single-row tile, used when a 1-row matrix (per-sample inference) comes
/// through the same kernel.
#[inline]
fn tile_single_row(
    a: &[f64],
    i: usize,
    k_dim: usize,
    b: &[f64],
    n: usize,
    j: usize,
    out: &mut [f64],
) {
    let mut acc = [0.0f64; NR];
    let arow = &a[i * k_dim..(i + 1) * k_dim];
    for (k, &av) in arow.iter().enumerate() {
        let w: &[f64; NR] = b[k * n + j..k * n + j + NR].try_into().unwrap();
        for c in 0..NR {
            acc[c] += av * w[c];
        }
    }
    out[i * n + j..i * n + j + NR].copy_from_slice(&acc);
}

/// Remainder tile with runtime bounds; identical k-ordering.
#[allow(clippy::too_many_arguments)]
#[inline]
fn tile_any(
    a: &[f64],
    i: usize,
    rows: usize,
    k_dim: usize,
    b: &[f64],
    n: usize,
    j: usize,
    cols: usize,
    out: &mut [f64],
) {
    let mut acc = [[0.0f64; NR]; MR];
    for k in 0..k_dim {
        let w = &b[k * n + j..k * n + j + cols];
        for r in 0..rows {
            let av = a[(i + r) * k_dim + k];
            let accr = &mut acc[r];
            for (c, &bv) in w.iter().enumerate() {
                accr[c] += av * bv;
            }
        }
    }
    for r in 0..rows {
        out[(i + r) * n + j..(i + r) * n + j + cols].copy_from_slice(&acc[r][..cols]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain triple loop, no tiling. Same ascending-k order as the kernel.
    fn matmul_naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = 0.0;
                for k in 0..a.cols() {
                    acc += a.data[i * a.cols + k] * b.data[k * b.cols + j];
                }
                out.data[i * b.cols + j] = acc;
            }
        }
        out
    }

    fn pseudo_random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        // splitmix64 stream, no external deps needed here
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z = z ^ (z >> 31);
            (z as f64 / u64::MAX as f64) * 2.0 - 1.0
        };
        let data = (0..rows * cols).map(|_| next()).collect();
        Matrix::from_vec(rows, cols, data)
    }

    #[test]
    fn matmul_matches_naive_on_awkward_shapes() {
        for &(m, k, n) in &[
            (1, 1, 1),
            (1, 3, 8),
            (4, 8, 8),
            (5, 9, 11),
            (7, 3, 6),
            (12, 17, 23),
            (3, 1024, 5),
        ] {
            let a = pseudo_random_matrix(m, k, 42 + m as u64);
            let b = pseudo_random_matrix(k, n, 99 + n as u64);
            let tiled = a.matmul(&b);
            let naive = matmul_naive(&a, &b);
            assert_eq!(tiled.data, naive.data, "shape {}x{}x{}", m, k, n);
        }
    }

    #[test]
    fn batched_multiply_is_bitwise_equal_to_row_at_a_time() {
        let a = pseudo_random_matrix(13, 17, 7);
        let b = pseudo_random_matrix(17, 10, 8);
        let full = a.matmul(&b);
        for i in 0..a.rows() {
            let single = a.rows_copy(i, i + 1).matmul(&b);
            assert_eq!(single.row(0), full.row(i), "row {}", i);
        }
        // and against an uneven chunking
        let mut start = 0;
        for &len in &[3usize, 1, 4, 5] {
            let chunk = a.rows_copy(start, start + len).matmul(&b);
            for r in 0..len {
                assert_eq!(chunk.row(r), full.row(start + r));
            }
            start += len;
        }
    }

    #[test]
    fn transpose_round_trip() {
        let a = pseudo_random_matrix(5, 9, 4);
        assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    #[should_panic(expected = "matmul shape mismatch")]
    fn matmul_rejects_bad_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(4, 2);
        let _ = a.matmul(&b);
    }
}
