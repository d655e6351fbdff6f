/// Fixed sparse row operator `y = A x` over matrix rows, stored as CSR.
/// Used for neighborhood aggregation; the weights are constants.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseRows {
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    weights: Vec<f64>,
}

impl SparseRows {
    /// Builds from per-row `(column, weight)` lists.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut weights = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, w) in row {
                assert!(c < cols, "sparse column {c} out of {cols}");
                col_idx.push(c);
                weights.push(w);
            }
            row_ptr.push(col_idx.len());
        }
        SparseRows {
            cols,
            row_ptr,
            col_idx,
            weights,
        }
    }

    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.weights[span].iter().copied())
    }

    /// `out = A x`, `x` is `cols × width`, row-major.
    pub(crate) fn apply(&self, x: &[f64], width: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.rows() * width];
        for i in 0..self.rows() {
            let dst = &mut out[i * width..(i + 1) * width];
            for (j, w) in self.row(i) {
                let src = &x[j * width..(j + 1) * width];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
        out
    }

    /// `out += Aᵀ g`, `g` is `rows × width`.
    pub(crate) fn apply_transpose_into(&self, g: &[f64], width: usize, out: &mut [f64]) {
        for i in 0..self.rows() {
            let src = &g[i * width..(i + 1) * width];
            for (j, w) in self.row(i) {
                let dst = &mut out[j * width..(j + 1) * width];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }
}
