use serde::{Deserialize, Serialize};

/// Row-major 2-D array of f64. Point features are stored one point per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "tensor {rows}×{cols} given {} values", data.len());
        Tensor { rows, cols, data }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor::from_vec(1, 1, vec![v])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Tensor::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on a {}×{} tensor", self.rows, self.cols);
        self.data[0]
    }

    pub fn transpose(&self) -> Tensor {
        let mut t = Tensor::zeros(self.cols, self.rows);
        for (r, row) in self.data.chunks_exact(self.cols.max(1)).enumerate().take(self.rows) {
            for (c, &v) in row.iter().enumerate() {
                t.data[c * self.rows + r] = v;
            }
        }
        t
    }

    /// Rows reordered so that row `i` of the result is row `idx[i]`.
    pub fn select_rows(&self, idx: &[usize]) -> Tensor {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Tensor::from_vec(idx.len(), self.cols, data)
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// `a · b` with the inner sum accumulated in ascending index order.
pub fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    assert_eq!(a.cols, b.rows, "matmul {:?} · {:?}", a.shape(), b.shape());
    let n = b.cols;
    let mut out = Tensor::zeros(a.rows, n);
    for i in 0..a.rows {
        let orow = &mut out.data[i * n..(i + 1) * n];
        let arow = &a.data[i * a.cols..(i + 1) * a.cols];
        let mut k = 0;
        // four k at a time; each output still sums in ascending k
        while k + 4 <= a.cols {
            let (a0, a1, a2, a3) = (arow[k], arow[k + 1], arow[k + 2], arow[k + 3]);
            let b0 = &b.data[k * n..(k + 1) * n];
            let b1 = &b.data[(k + 1) * n..(k + 2) * n];
            let b2 = &b.data[(k + 2) * n..(k + 3) * n];
            let b3 = &b.data[(k + 3) * n..(k + 4) * n];
            for j in 0..n {
                orow[j] = orow[j] + a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
            }
            k += 4;
        }
        while k < a.cols {
            let aik = arow[k];
            for (o, bv) in orow.iter_mut().zip(&b.data[k * n..(k + 1) * n]) {
                *o += aik * bv;
            }
            k += 1;
        }
    }
    out
}

/// `a · bᵀ`. Same ascending-k sums as [`matmul`] on an explicit transpose.
pub fn matmul_nt(a: &Tensor, b: &Tensor) -> Tensor {
    assert_eq!(a.cols, b.cols, "matmul_nt {:?} · {:?}ᵀ", a.shape(), b.shape());
    matmul(a, &b.transpose())
}

/// `aᵀ · b`.
pub fn matmul_tn(a: &Tensor, b: &Tensor) -> Tensor {
    assert_eq!(a.rows, b.rows, "matmul_tn {:?}ᵀ · {:?}", a.shape(), b.shape());
    matmul(&a.transpose(), b)
}
