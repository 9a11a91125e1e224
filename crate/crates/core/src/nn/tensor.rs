use super::NnError;

/// Dense row-major `f64` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, NnError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(NnError::ShapeMismatch(format!(
                "shape {shape:?} holds {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// 1-D tensor.
    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Same data, new shape.
    pub fn reshape(mut self, shape: &[usize]) -> Result<Self, NnError> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(NnError::ShapeMismatch(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Leading dimension; 0 for scalars.
    pub fn batch(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Number of values per leading-dimension entry.
    pub fn row_len(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.row_len();
        &self.data[i * n..(i + 1) * n]
    }

    /// Gathers leading-dimension entries into a new tensor.
    pub fn select_rows(&self, rows: &[usize]) -> Tensor {
        let n = self.row_len();
        let mut data = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        let mut shape = self.shape.clone();
        shape[0] = rows.len();
        Tensor { shape, data }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Batch-sized dimension below which the streaming kernels beat packing.
const SKINNY: usize = 8;

fn scale_row(row: &mut [f64], beta: f64) {
    if beta == 0.0 {
        row.fill(0.0);
    } else if beta != 1.0 {
        row.iter_mut().for_each(|v| *v *= beta);
    }
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += alpha * x;
    }
}

/// `y += Σ_q w[q]·rows[q]` with `rows` holding `K` consecutive rows of `y.len()` values.
fn accumulate<const K: usize>(y: &mut [f64], w: [f64; K], rows: &[f64]) {
    let n = y.len();
    let r: [&[f64]; K] = std::array::from_fn(|q| &rows[q * n..(q + 1) * n]);
    for j in 0..n {
        let mut s = 0.0;
        for q in 0..K {
            s += w[q] * r[q][j];
        }
        y[j] += s;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Streaming kernels for products with a batch-sized dimension. Each row of
/// the large operand is read once. Returns `false` for layouts it does not cover.
#[allow(clippy::too_many_arguments)]
fn skinny_gemm(m: usize, k: usize, n: usize, a: &[f64], trans_a: bool, b: &[f64], trans_b: bool, c: &mut [f64], beta: f64) -> bool {
    match (trans_a, trans_b) {
        // C[i,j] += A[i,:]·B[j,:]
        (false, true) if m <= SKINNY => {
            for row in c.chunks_mut(n) {
                scale_row(row, beta);
            }
            for (j, brow) in b.chunks_exact(k).enumerate() {
                for (i, arow) in a.chunks_exact(k).enumerate() {
                    c[i * n + j] += dot(arow, brow);
                }
            }
            true
        }
        // C[i,:] += Σ_p op(A)[i,p]·B[p,:], several rows of B per pass
        (_, false) if (!trans_a && m <= SKINNY) || (trans_a && k <= SKINNY) => {
            let coef = |i: usize, p: usize| if trans_a { a[p * m + i] } else { a[i * k + p] };
            for row in c.chunks_mut(n) {
                scale_row(row, beta);
            }
            let mut p = 0;
            while p < k {
                let width = if k - p >= 8 { 8 } else if k - p >= 4 { 4 } else { 1 };
                let rows = &b[p * n..(p + width) * n];
                for (i, crow) in c.chunks_exact_mut(n).enumerate() {
                    match width {
                        8 => accumulate::<8>(crow, std::array::from_fn(|q| coef(i, p + q)), rows),
                        4 => accumulate::<4>(crow, std::array::from_fn(|q| coef(i, p + q)), rows),
                        _ => axpy(crow, coef(i, p), rows),
                    }
                }
                p += width;
            }
            true
        }
        _ => false,
    }
}

/// `C ← op(A)·op(B) + beta·C` on row-major buffers, where `op(A)` is `m×k`
/// and `op(B)` is `k×n`. `trans_a` means `a` is stored as `k×m`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    c: &mut [f64],
    beta: f64,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if (m <= SKINNY || k <= SKINNY) && skinny_gemm(m, k, n, a, trans_a, b, trans_b, c, beta) {
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the strides above address exactly the m×k, k×n and m×n
    // row-major (or transposed) buffers whose lengths are asserted.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(m: usize, k: usize, n: usize, a: &[f64], ta: bool, b: &[f64], tb: bool) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    let av = if ta { a[p * m + i] } else { a[i * k + p] };
                    let bv = if tb { b[j * k + p] } else { b[p * n + j] };
                    c[i * n + j] += av * bv;
                }
            }
        }
        c
    }

    #[test]
    fn gemm_matches_naive_for_all_transposes() {
        // skinny m, skinny k, both, and the packed path
        for (m, k, n) in [(3, 5, 4), (4, 37, 21), (30, 3, 17), (2, 2, 9), (20, 12, 9)] {
            let a: Vec<f64> = (0..m * k).map(|v| v as f64 * 0.3 - 2.0).collect();
            let b: Vec<f64> = (0..k * n).map(|v| (v as f64).sin()).collect();
            let c0: Vec<f64> = (0..m * n).map(|v| (v as f64 * 0.7).cos()).collect();
            for ta in [false, true] {
                for tb in [false, true] {
                    for beta in [0.0, 1.0, 0.5] {
                        let mut c = if beta == 0.0 { vec![f64::NAN; m * n] } else { c0.clone() };
                        gemm(m, k, n, &a, ta, &b, tb, &mut c, beta);
                        let want = naive(m, k, n, &a, ta, &b, tb);
                        for idx in 0..m * n {
                            let base = if beta == 0.0 { 0.0 } else { beta * c0[idx] };
                            assert!((c[idx] - want[idx] - base).abs() < 1e-12, "{m}x{k}x{n} {ta} {tb} {beta}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn shape_checks() {
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        let t = Tensor::from_vec(&[2, 3], (0..6).map(f64::from).collect()).unwrap();
        assert_eq!(t.row(1), &[3.0, 4.0, 5.0]);
        assert_eq!(t.select_rows(&[1, 1]).data(), &[3.0, 4.0, 5.0, 3.0, 4.0, 5.0]);
        assert!(t.clone().reshape(&[6]).is_ok());
        assert!(t.reshape(&[4]).is_err());
    }
}
