use alloc::vec::Vec;

/// Constant sparse matrix in coordinate form, used as a fixed propagation
/// operator (normalized adjacency, Laplacian) on the tape.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn new(rows: usize, cols: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        debug_assert!(entries.iter().all(|&(r, c, _)| r < rows && c < cols));
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        SparseMatrix { rows, cols, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.rows * self.cols];
        for &(r, c, w) in &self.entries {
            out[r * self.cols + c] += w;
        }
        out
    }

    /// `self · x` for a row-major `[cols, width]` matrix `x`.
    pub fn apply(&self, x: &[f64], width: usize) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.rows * width];
        for &(r, c, w) in &self.entries {
            let src = &x[c * width..(c + 1) * width];
            let dst = &mut out[r * width..(r + 1) * width];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
        out
    }

    /// Accumulates `selfᵀ · g` into `out`.
    pub fn apply_transpose_into(&self, g: &[f64], width: usize, out: &mut [f64]) {
        for &(r, c, w) in &self.entries {
            let src = &g[r * width..(r + 1) * width];
            let dst = &mut out[c * width..(c + 1) * width];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
}
