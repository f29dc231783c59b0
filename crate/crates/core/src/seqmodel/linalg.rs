//! Strided dense matrix views and a GEMM wrapper.

/// Read-only view of a `rows × cols` matrix with arbitrary strides.
#[derive(Clone, Copy)]
pub(crate) struct MatRef<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    rs: isize,
    cs: isize,
}

impl<'a> MatRef<'a> {
    /// Row-major, densely packed.
    pub(crate) fn new(data: &'a [f64], rows: usize, cols: usize) -> Self {
        debug_assert!(data.len() >= rows * cols);
        MatRef { data, rows, cols, rs: cols as isize, cs: 1 }
    }

    pub(crate) fn t(self) -> Self {
        MatRef { data: self.data, rows: self.cols, cols: self.rows, rs: self.cs, cs: self.rs }
    }
}

/// `c = alpha · a · b + beta · c` where `c` is row-major `a.rows × b.cols`.
pub(crate) fn gemm(alpha: f64, a: MatRef<'_>, b: MatRef<'_>, beta: f64, c: &mut [f64]) {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    assert!(c.len() >= m * n, "output too small");
    if m == 0 || n == 0 {
        return;
    }
    if k > 0 {
        let last = |v: &MatRef<'_>| (v.rows - 1) as isize * v.rs + (v.cols - 1) as isize * v.cs;
        assert!((last(&a) as usize) < a.data.len() && (last(&b) as usize) < b.data.len());
    }
    // SAFETY: every index touched lies within the slices, checked above for
    // the inputs (non-negative strides) and by the length check on `c`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            a.rs,
            a.cs,
            b.data.as_ptr(),
            b.rs,
            b.cs,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Adds each column's sum over rows of the row-major `rows × cols` matrix.
pub(crate) fn add_column_sums(acc: &mut [f64], m: &[f64], cols: usize) {
    for row in m.chunks_exact(cols) {
        for (a, x) in acc.iter_mut().zip(row) {
            *a += x;
        }
    }
}
